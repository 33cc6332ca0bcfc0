#pragma once

// Saturation point identification: grow an embedding set batch by batch and
// stop once the MMD between the set before and after each batch has stayed
// inside an acceptance window for early_stop + 1 consecutive batches.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divsat/embedset.hpp"
#include "divsat/error.hpp"
#include "divsat/mmd.hpp"
#include "divsat/subprocess.hpp"

namespace divsat {

using Context = std::map<std::string, std::string>;

/// Source of generated items. Returning fewer than `count` items signals
/// that the source is exhausted.
class BatchProvider {
 public:
  virtual ~BatchProvider() = default;
  virtual std::vector<std::string> next_batch(std::size_t count, const Context& context) = 0;
};

/// Maps items to an equal-length, order-preserving set of fixed dimension.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingSet embed(const std::vector<std::string>& items) = 0;
};

struct SaturationConfig {
  double perc = 0.05;
  std::size_t early_stop = 5;
  std::size_t mmd_repetitions = kDefaultRepetitions;
  KernelConfig kernel = KernelConfig::median();
  std::uint64_t seed = 0;
  std::size_t max_iterations = 1000;
  bool fixed_batch = false;  // batch = ceil(perc * initial size) instead of current size
  MmdOptions mmd_options;
  Context context;

  void validate() const {
    if (!(perc > 0.0 && perc <= 1.0))
      throw Error(Errc::invalid_argument, "perc must be in (0, 1]");
    if (max_iterations == 0) throw Error(Errc::invalid_argument, "max_iterations must be >= 1");
    if (mmd_repetitions == 0)
      throw Error(Errc::invalid_repetitions, "mmd repetitions must be positive");
  }
};

struct SaturationState {
  EmbeddingSet set;
  std::size_t stop_condition = 0;
  double range_min = -1.0;
  double range_max = -1.0;
  std::size_t iteration = 0;
};

enum class TerminalReason { saturated, max_iterations, provider_exhausted };

constexpr std::string_view to_string(TerminalReason r) noexcept {
  switch (r) {
    case TerminalReason::saturated: return "saturated";
    case TerminalReason::max_iterations: return "max_iterations";
    case TerminalReason::provider_exhausted: return "provider_exhausted";
  }
  return "unknown";
}

struct TraceEntry {
  std::size_t iteration = 0;
  std::size_t batch_size = 0;
  std::size_t set_size = 0;  // after appending the batch
  double mmd_mean = 0.0;
  double mmd_stddev = 0.0;
  bool in_window = false;
  std::size_t stop_condition = 0;
  double range_min = 0.0;
  double range_max = 0.0;

  bool operator==(const TraceEntry&) const = default;
};

struct SaturationTrace {
  std::vector<TraceEntry> entries;
  std::optional<TerminalReason> reason;  // empty when the run failed

  bool operator==(const SaturationTrace&) const = default;
};

struct SaturationResult {
  EmbeddingSet set;
  SaturationTrace trace;
};

/// Provider or embedder failure mid-run; carries the trace so far.
class SaturationError : public Error {
 public:
  SaturationError(const Error& cause, SaturationTrace trace)
      : Error(cause.code(), cause.what()), trace_(std::move(trace)) {}
  const SaturationTrace& trace() const noexcept { return trace_; }

 private:
  SaturationTrace trace_;
};

/// Scores `grown` (the current set with the new batch appended) against its
/// first `prior_size` records.
using MmdEstimator =
    std::function<MmdEstimate(const EmbeddingSet& grown, std::size_t prior_size, std::uint64_t seed)>;

inline MmdEstimator default_estimator(const SaturationConfig& cfg) {
  return [kernel = cfg.kernel, reps = cfg.mmd_repetitions, opts = cfg.mmd_options](
             const EmbeddingSet& grown, std::size_t prior, std::uint64_t seed) {
    return mmd_calculator_growth(grown, prior, kernel, reps, seed, opts);
  };
}

/// Strict inequalities; the initial (-1, -1) window admits nothing.
inline bool in_window(const SaturationState& state, double score) noexcept {
  return score > state.range_min && score < state.range_max;
}

/// One loop body: window update from the estimate, then the batch is
/// appended to the set.
inline SaturationState saturation_step(SaturationState state, const MmdEstimate& estimate,
                                       const EmbeddingSet& batch) {
  if (batch.dimension() != state.set.dimension())
    throw Error(Errc::dimension_mismatch, "batch dimension differs from the accumulated set");
  const double score = estimate.mean;
  const double sd = estimate.stddev;
  if (in_window(state, score)) {
    state.stop_condition += 1;
    state.range_min = std::min(score - sd, state.range_min);
    state.range_max = std::max(score + sd, state.range_max);
  } else {
    state.range_min = score - sd;
    state.range_max = score + sd;
    state.stop_condition = 0;
  }
  state.set = concat(state.set, batch);
  state.iteration += 1;
  return state;
}

inline std::size_t batch_size_for(const SaturationConfig& cfg, std::size_t current,
                                  std::size_t initial) {
  const std::size_t base = cfg.fixed_batch ? initial : current;
  const auto size = static_cast<std::size_t>(std::ceil(cfg.perc * static_cast<double>(base)));
  return std::max<std::size_t>(size, 1);
}

/// Seed handed to the estimator on 1-based iteration `iteration`.
inline std::uint64_t iteration_seed(std::uint64_t seed, std::size_t iteration) noexcept {
  return seed ^ static_cast<std::uint64_t>(iteration);
}

namespace detail {

// Batch records get ids "b<iteration>-<j>" so they cannot collide across
// batches; the generating text is kept in meta["text"].
inline EmbeddingSet relabel_batch(const EmbeddingSet& embedded,
                                  const std::vector<std::string>& texts, std::size_t iteration) {
  std::vector<EmbeddingRecord> records;
  records.reserve(embedded.size());
  for (std::size_t j = 0; j < embedded.size(); ++j) {
    EmbeddingRecord r = embedded[j];
    r.id = "b" + std::to_string(iteration) + "-" + std::to_string(j);
    r.meta["text"] = texts[j];
    records.push_back(std::move(r));
  }
  return EmbeddingSet(std::move(records));
}

inline EmbeddingSet embed_checked(Embedder& embedder, const std::vector<std::string>& texts) {
  auto set = embedder.embed(texts);
  if (set.size() != texts.size())
    throw Error(Errc::protocol_error, "embedder returned " + std::to_string(set.size()) +
                                          " vectors for " + std::to_string(texts.size()) +
                                          " items");
  return set;
}

}  // namespace detail

inline SaturationResult run_saturation(EmbeddingSet initial, BatchProvider& provider,
                                       Embedder& embedder, const SaturationConfig& cfg,
                                       const MmdEstimator& estimator) {
  cfg.validate();
  const std::size_t initial_size = initial.size();
  SaturationState state{std::move(initial)};
  SaturationTrace trace;
  while (state.stop_condition <= cfg.early_stop) {
    if (state.iteration >= cfg.max_iterations) {
      trace.reason = TerminalReason::max_iterations;
      break;
    }
    const std::size_t t = state.iteration + 1;
    const std::size_t want = batch_size_for(cfg, state.set.size(), initial_size);
    std::vector<std::string> texts;
    std::optional<EmbeddingSet> batch;
    std::optional<EmbeddingSet> grown;
    try {
      texts = provider.next_batch(want, cfg.context);
      if (texts.size() > want)
        throw Error(Errc::protocol_error, "provider returned more items than requested");
      if (texts.empty()) {
        trace.reason = TerminalReason::provider_exhausted;
        break;
      }
      batch = detail::relabel_batch(detail::embed_checked(embedder, texts), texts, t);
      grown = concat(state.set, *batch);
    } catch (const Error& e) {
      throw SaturationError(e, trace);
    }
    const auto estimate = estimator(*grown, state.set.size(), iteration_seed(cfg.seed, t));
    const bool accepted = in_window(state, estimate.mean);
    state = saturation_step(std::move(state), estimate, *batch);
    trace.entries.push_back({t, batch->size(), state.set.size(), estimate.mean, estimate.stddev,
                             accepted, state.stop_condition, state.range_min, state.range_max});
    if (texts.size() < want && state.stop_condition <= cfg.early_stop) {
      trace.reason = TerminalReason::provider_exhausted;
      break;
    }
  }
  if (!trace.reason) trace.reason = TerminalReason::saturated;
  return {std::move(state.set), std::move(trace)};
}

inline SaturationResult run_saturation(EmbeddingSet initial, BatchProvider& provider,
                                       Embedder& embedder, const SaturationConfig& cfg) {
  return run_saturation(std::move(initial), provider, embedder, cfg, default_estimator(cfg));
}

/// Bootstraps the initial set with `initial_count` generated items.
inline SaturationResult run_saturation(std::size_t initial_count, BatchProvider& provider,
                                       Embedder& embedder, const SaturationConfig& cfg) {
  if (initial_count == 0) throw Error(Errc::invalid_argument, "initial count must be >= 1");
  auto texts = provider.next_batch(initial_count, cfg.context);
  if (texts.empty()) throw Error(Errc::provider_error, "provider produced no initial items");
  auto embedded = detail::embed_checked(embedder, texts);
  return run_saturation(detail::relabel_batch(embedded, texts, 0), provider, embedder, cfg);
}

inline nlohmann::json to_json(const TraceEntry& e) {
  return {{"iteration", e.iteration},     {"batch_size", e.batch_size},
          {"set_size", e.set_size},       {"mmd_mean", e.mmd_mean},
          {"mmd_stddev", e.mmd_stddev},   {"in_window", e.in_window},
          {"stop_condition", e.stop_condition}, {"range_min", e.range_min},
          {"range_max", e.range_max}};
}

// ---------------------------------------------------------------------------
// Subprocess-backed provider and embedder.

/// Runs `command --count N [--activity A]` per batch and reads one
/// {"text": ...} object per output line.
class ExternalProvider : public BatchProvider {
 public:
  ExternalProvider(std::vector<std::string> command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}

  std::vector<std::string> next_batch(std::size_t count, const Context& context) override {
    auto argv = command_;
    argv.push_back("--count");
    argv.push_back(std::to_string(count));
    if (auto it = context.find("activity"); it != context.end()) {
      argv.push_back("--activity");
      argv.push_back(it->second);
    }
    ProcessResult res;
    try {
      res = run_process(argv, {}, timeout_);
    } catch (const Error& e) {
      if (e.code() == Errc::timeout) throw Error(Errc::provider_error, e.what());
      throw;
    }
    if (res.exit_code != 0)
      throw Error(Errc::provider_error, "provider exited with status " +
                                            std::to_string(res.exit_code) + ": " + res.err);
    std::vector<std::string> texts;
    std::size_t pos = 0;
    while (pos < res.out.size()) {
      auto end = res.out.find('\n', pos);
      if (end == std::string::npos) end = res.out.size();
      const std::string_view line(res.out.data() + pos, end - pos);
      pos = end + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw Error(Errc::protocol_error, "provider emitted a non-JSON line");
      }
      if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
        throw Error(Errc::protocol_error, "provider line lacks a string \"text\" field");
      texts.push_back(obj["text"].get<std::string>());
    }
    if (texts.size() > count)
      throw Error(Errc::protocol_error, "provider emitted more lines than requested");
    return texts;
  }

 private:
  std::vector<std::string> command_;
  std::chrono::milliseconds timeout_;
};

/// Writes {"id": i, "text": ...} lines to the command's stdin and reads the
/// same number of embedding records back, in order.
class ExternalEmbedder : public Embedder {
 public:
  ExternalEmbedder(std::vector<std::string> command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}

  EmbeddingSet embed(const std::vector<std::string>& items) override {
    std::string input;
    for (std::size_t i = 0; i < items.size(); ++i)
      input += nlohmann::json{{"id", i}, {"text", items[i]}}.dump() + "\n";
    ProcessResult res;
    try {
      res = run_process(command_, input, timeout_);
    } catch (const Error& e) {
      if (e.code() == Errc::timeout) throw Error(Errc::embedder_error, e.what());
      throw;
    }
    if (res.exit_code != 0)
      throw Error(Errc::embedder_error, "embedder exited with status " +
                                            std::to_string(res.exit_code) + ": " + res.err);
    std::vector<EmbeddingRecord> records;
    std::size_t pos = 0;
    std::size_t index = 0;
    while (pos < res.out.size()) {
      auto end = res.out.find('\n', pos);
      if (end == std::string::npos) end = res.out.size();
      const std::string_view line(res.out.data() + pos, end - pos);
      pos = end + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      EmbeddingRecord rec;
      try {
        rec = parse_record(line, index);
      } catch (const Error& e) {
        throw Error(Errc::protocol_error, std::string("embedder output: ") + e.what());
      }
      if (!records.empty() && rec.vector.size() != records.front().vector.size())
        throw Error(Errc::dimension_mismatch,
                    "embedder output line " + std::to_string(index + 1) + " has dimension " +
                        std::to_string(rec.vector.size()) + ", expected " +
                        std::to_string(records.front().vector.size()));
      records.push_back(std::move(rec));
      ++index;
    }
    if (records.size() != items.size())
      throw Error(Errc::protocol_error, "embedder returned " + std::to_string(records.size()) +
                                            " records for " + std::to_string(items.size()) +
                                            " items");
    return EmbeddingSet(std::move(records));
  }

 private:
  std::vector<std::string> command_;
  std::chrono::milliseconds timeout_;
};

}  // namespace divsat
