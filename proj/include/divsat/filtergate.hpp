#pragma once

// Caption relevance filter: prompt construction for a yes/no judge, reply
// parsing, filter application and confusion-matrix evaluation. The positive
// class is "caption portrays the activity", so kept items are predicted
// positives.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divsat/embedset.hpp"
#include "divsat/error.hpp"
#include "divsat/subprocess.hpp"

namespace divsat {

struct CaptionItem {
  std::string id;
  std::string caption;
  std::string activity;

  bool operator==(const CaptionItem&) const = default;
};

struct FilterVerdict {
  std::string id;
  bool keep = false;

  bool operator==(const FilterVerdict&) const = default;
};

struct FilterPrompt {
  std::string system_message;
  std::string user_message;
  std::string activity;
  std::vector<CaptionItem> batch;
};

inline constexpr std::size_t kCaptionsPerPrompt = 10;

inline constexpr std::string_view kFilterSystemMessage =
    "You judge whether motion captions describe a person performing a given activity. "
    "For every numbered caption, answer only 'yes' if it correctly portrays the activity "
    "or 'no' if it does not. Reply with one line per caption, in the same order, "
    "formatted as '<number>. yes' or '<number>. no', and nothing else.";

inline std::vector<FilterPrompt> build_filter_prompts(const std::string& activity,
                                                      std::span<const CaptionItem> captions) {
  if (captions.empty()) throw Error(Errc::empty_input, "no captions to filter");
  for (const auto& c : captions) {
    if (c.caption.empty()) throw Error(Errc::invalid_argument, "caption '" + c.id + "' is empty");
    if (!c.activity.empty() && c.activity != activity)
      throw Error(Errc::invalid_argument, "caption '" + c.id + "' belongs to activity '" +
                                              c.activity + "', not '" + activity + "'");
  }
  std::vector<FilterPrompt> prompts;
  for (std::size_t start = 0; start < captions.size(); start += kCaptionsPerPrompt) {
    const std::size_t stop = std::min(start + kCaptionsPerPrompt, captions.size());
    FilterPrompt p;
    p.system_message = kFilterSystemMessage;
    p.activity = activity;
    p.user_message = "Activity: " + activity + "\nCaptions:\n";
    for (std::size_t i = start; i < stop; ++i) {
      p.batch.push_back(captions[i]);
      p.user_message += std::to_string(i - start + 1) + ". " + captions[i].caption + "\n";
    }
    prompts.push_back(std::move(p));
  }
  return prompts;
}

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

inline std::string_view strip_leading(std::string_view s, std::string_view chars) {
  const auto pos = s.find_first_not_of(chars);
  return pos == std::string_view::npos ? std::string_view{} : s.substr(pos);
}

struct ReplyLine {
  bool numbered = false;
  std::optional<bool> verdict;
};

inline ReplyLine classify_reply_line(std::string_view raw) {
  std::string lower(raw);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  constexpr std::string_view noise = " \t\r*-_>#\"'`([{:.)]}";
  std::string_view s = strip_leading(lower, noise);
  ReplyLine line;
  if (s.substr(0, 7) == "caption") s = strip_leading(s.substr(7), noise);
  if (!s.empty() && std::isdigit(static_cast<unsigned char>(s.front()))) {
    line.numbered = true;
    while (!s.empty() && std::isdigit(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    s = strip_leading(s, noise);
  }
  auto starts_with_word = [&](std::string_view word) {
    return s.substr(0, word.size()) == word && (s.size() == word.size() || !is_word_char(s[word.size()]));
  };
  if (starts_with_word("yes"))
    line.verdict = true;
  else if (starts_with_word("no"))
    line.verdict = false;
  return line;
}

}  // namespace detail

/// Recovers one yes/no decision per line, in order. Lines that carry a
/// verdict may be numbered or decorated; unnumbered chatter is ignored. The
/// result is positional: the i-th recovered verdict belongs to caption i.
inline std::vector<bool> parse_filter_response(std::string_view text, std::size_t expected) {
  if (expected == 0) throw Error(Errc::invalid_argument, "expected verdict count must be >= 1");
  std::vector<bool> verdicts;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto line = detail::classify_reply_line(raw);
    if (line.verdict)
      verdicts.push_back(*line.verdict);
    else if (line.numbered)
      throw Error(Errc::unparseable_line,
                  "reply line " + std::to_string(line_no) + " has no yes/no: '" + std::string(raw) + "'");
  }
  if (verdicts.size() != expected)
    throw Error(Errc::count_mismatch, "recovered " + std::to_string(verdicts.size()) +
                                          " verdicts, expected " + std::to_string(expected));
  return verdicts;
}

/// Verdicts for one prompt: the parsed reply zipped with the batch ids.
inline std::vector<FilterVerdict> verdicts_for(const FilterPrompt& prompt, std::string_view reply) {
  const auto decisions = parse_filter_response(reply, prompt.batch.size());
  std::vector<FilterVerdict> out;
  out.reserve(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i)
    out.push_back({prompt.batch[i].id, decisions[i]});
  return out;
}

namespace detail {

inline std::unordered_map<std::string, bool> verdict_map(std::span<const FilterVerdict> verdicts) {
  std::unordered_map<std::string, bool> map;
  for (const auto& v : verdicts)
    if (!map.emplace(v.id, v.keep).second)
      throw Error(Errc::invalid_argument, "duplicate verdict for id '" + v.id + "'");
  return map;
}

template <typename Item, typename IdOf>
std::vector<Item> apply_filter_impl(const std::vector<Item>& items,
                                    std::span<const FilterVerdict> verdicts, IdOf id_of) {
  const auto map = verdict_map(verdicts);
  std::unordered_set<std::string_view> ids;
  for (const auto& item : items) ids.insert(id_of(item));
  for (const auto& v : verdicts)
    if (!ids.contains(v.id)) throw Error(Errc::unknown_verdict_id, "verdict for unknown id '" + v.id + "'");
  std::vector<Item> kept;
  for (const auto& item : items) {
    auto it = map.find(std::string(id_of(item)));
    if (it == map.end())
      throw Error(Errc::missing_verdict, "no verdict for id '" + std::string(id_of(item)) + "'");
    if (it->second) kept.push_back(item);
  }
  return kept;
}

}  // namespace detail

/// Items whose verdict is keep, in original order. Verdict ids must match
/// the item ids exactly.
inline std::vector<CaptionItem> apply_filter(const std::vector<CaptionItem>& items,
                                             std::span<const FilterVerdict> verdicts) {
  return detail::apply_filter_impl(items, verdicts,
                                   [](const CaptionItem& c) -> std::string_view { return c.id; });
}

/// May return no records; an empty result is not a valid EmbeddingSet.
inline std::vector<EmbeddingRecord> apply_filter(const EmbeddingSet& set,
                                                 std::span<const FilterVerdict> verdicts) {
  return detail::apply_filter_impl(set.records(), verdicts,
                                   [](const EmbeddingRecord& r) -> std::string_view { return r.id; });
}

/// A ratio that is undefined when its denominator is zero.
struct Ratio {
  std::optional<double> value;
  std::string undefined_reason;

  static Ratio of(double num, double den, std::string reason) {
    if (den == 0.0) return {std::nullopt, std::move(reason)};
    return {num / den, {}};
  }
};

struct ConfusionMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  Ratio precision, recall, accuracy, f1;
  Ratio pct_before;  // percent of truly irrelevant items among all items
  Ratio pct_after;   // percent of truly irrelevant items among kept items

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
};

inline ConfusionMetrics confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn,
                                              std::size_t tn) {
  ConfusionMetrics m{tp, fp, fn, tn, {}, {}, {}, {}, {}, {}};
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  m.precision = Ratio::of(d(tp), d(tp + fp), "no kept items (tp+fp=0)");
  m.recall = Ratio::of(d(tp), d(tp + fn), "no relevant items (tp+fn=0)");
  m.accuracy = Ratio::of(d(tp + tn), d(m.total()), "no items");
  if (m.precision.value && m.recall.value) {
    const double p = *m.precision.value;
    const double r = *m.recall.value;
    m.f1 = Ratio::of(2.0 * p * r, p + r, "precision and recall are both zero");
  } else {
    m.f1 = {std::nullopt, "precision or recall undefined"};
  }
  m.pct_before = Ratio::of(100.0 * d(fp + tn), d(m.total()), "no items");
  m.pct_after = Ratio::of(100.0 * d(fp), d(tp + fp), "no kept items (tp+fp=0)");
  return m;
}

/// Scores verdicts against ground truth (true = caption is relevant).
inline ConfusionMetrics evaluate_filter(std::span<const FilterVerdict> verdicts,
                                        const std::map<std::string, bool>& truth) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  (void)detail::verdict_map(verdicts);
  for (const auto& v : verdicts) {
    auto it = truth.find(v.id);
    if (it == truth.end()) throw Error(Errc::label_mismatch, "no ground truth for id '" + v.id + "'");
    const bool relevant = it->second;
    if (v.keep && relevant) ++tp;
    else if (v.keep) ++fp;
    else if (relevant) ++fn;
    else ++tn;
  }
  return confusion_from_counts(tp, fp, fn, tn);
}

inline nlohmann::json to_json(const Ratio& r) {
  return r.value ? nlohmann::json(*r.value) : nlohmann::json(nullptr);
}

inline double round2(double x) { return std::round(x * 100.0) / 100.0; }

inline nlohmann::json to_json(const ConfusionMetrics& m) {
  nlohmann::json j{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}, {"total", m.total()}};
  nlohmann::json undefined = nlohmann::json::object();
  auto put = [&](const char* key, const Ratio& r, bool percent) {
    j[key] = r.value ? nlohmann::json(percent ? round2(*r.value) : *r.value) : nlohmann::json(nullptr);
    if (!r.value) undefined[key] = r.undefined_reason;
  };
  put("precision", m.precision, false);
  put("recall", m.recall, false);
  put("accuracy", m.accuracy, false);
  put("f1", m.f1, false);
  put("pct_before", m.pct_before, true);
  put("pct_after", m.pct_after, true);
  if (!undefined.empty()) j["undefined"] = undefined;
  return j;
}

inline nlohmann::json to_json(const FilterPrompt& p) {
  nlohmann::json captions = nlohmann::json::array();
  for (const auto& c : p.batch) captions.push_back({{"id", c.id}, {"caption", c.caption}});
  return {{"system", p.system_message},
          {"user", p.user_message},
          {"activity", p.activity},
          {"captions", captions},
          {"expected", p.batch.size()}};
}

// ---------------------------------------------------------------------------
// Judges.

class Judge {
 public:
  virtual ~Judge() = default;
  /// Raw reply text for one prompt.
  virtual std::string reply(const FilterPrompt& prompt) = 0;
};

/// Sends the prompt as one JSON document on stdin; stdout is the reply.
class ExternalJudge : public Judge {
 public:
  ExternalJudge(std::vector<std::string> command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}

  std::string reply(const FilterPrompt& prompt) override {
    ProcessResult res;
    try {
      res = run_process(command_, to_json(prompt).dump() + "\n", timeout_);
    } catch (const Error& e) {
      if (e.code() == Errc::timeout) throw Error(Errc::judge_error, e.what());
      throw;
    }
    if (res.exit_code != 0)
      throw Error(Errc::judge_error, "judge exited with status " + std::to_string(res.exit_code) +
                                         ": " + res.err);
    return res.out;
  }

 private:
  std::vector<std::string> command_;
  std::chrono::milliseconds timeout_;
};

/// Judges every prompt, re-asking up to `retries` extra times when a reply
/// cannot be parsed into exactly one verdict per caption.
inline std::vector<FilterVerdict> run_filter(Judge& judge, std::span<const FilterPrompt> prompts,
                                             std::size_t retries = 2) {
  std::vector<FilterVerdict> all;
  for (const auto& prompt : prompts) {
    for (std::size_t attempt = 0;; ++attempt) {
      try {
        auto v = verdicts_for(prompt, judge.reply(prompt));
        all.insert(all.end(), v.begin(), v.end());
        break;
      } catch (const Error& e) {
        const bool parse_failure =
            e.code() == Errc::count_mismatch || e.code() == Errc::unparseable_line;
        if (!parse_failure || attempt >= retries) throw;
      }
    }
  }
  return all;
}

}  // namespace divsat
