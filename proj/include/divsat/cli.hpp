#pragma once

// Command-line front end: `divsat <subcommand> ...`. Exit codes: 0 success
// (report on stdout), 1 domain error ({"error": {...}} on stderr), 2 usage
// error.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "divsat/analysis.hpp"
#include "divsat/diversity.hpp"
#include "divsat/embedset.hpp"
#include "divsat/error.hpp"
#include "divsat/filtergate.hpp"
#include "divsat/mmd.hpp"
#include "divsat/report.hpp"
#include "divsat/saturation.hpp"
#include "divsat/synth.hpp"

namespace divsat::cli {

using nlohmann::json;

struct GlobalConfig {
  std::uint64_t seed = 0;
  OutputFormat format = OutputFormat::json;
  double timeout_seconds = 300.0;
  unsigned threads = 1;
  int verbosity = 0;

  std::chrono::milliseconds timeout() const {
    return std::chrono::milliseconds(static_cast<long long>(timeout_seconds * 1000.0));
  }
};

namespace detail {

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open '" + path + "' for reading");
  std::vector<json> rows;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      throw Error(Errc::malformed_line, path + ": line " + std::to_string(n) + " is not JSON");
    }
    if (!rows.back().is_object())
      throw Error(Errc::malformed_line, path + ": line " + std::to_string(n) + " is not an object");
  }
  return rows;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    throw Error(Errc::malformed_line, path + " is not valid JSON");
  }
}

inline std::string string_field(const json& row, const char* key, const std::string& where) {
  auto it = row.find(key);
  if (it == row.end()) throw Error(Errc::malformed_line, where + ": missing \"" + key + "\"");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return it->dump();
  throw Error(Errc::malformed_line, where + ": \"" + key + "\" must be a string");
}

inline bool bool_field(const json& row, const char* key, const std::string& where) {
  auto it = row.find(key);
  if (it == row.end()) throw Error(Errc::malformed_line, where + ": missing \"" + key + "\"");
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number_integer() && (it->get<int>() == 0 || it->get<int>() == 1)) return it->get<int>() == 1;
  throw Error(Errc::malformed_line, where + ": \"" + key + "\" must be a boolean");
}

/// "v" shifts the first axis by v; "a,b,c" is a full k-vector.
inline std::vector<double> parse_shift(const std::string& text, std::size_t k) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "cannot parse '" + text + "' as a number list");
    }
  }
  if (values.size() == 1) {
    std::vector<double> v(k, 0.0);
    v[0] = values[0];
    return v;
  }
  if (values.size() != k)
    throw Error(Errc::dimension_mismatch, "shift '" + text + "' does not have " + std::to_string(k) + " entries");
  return values;
}

inline std::vector<double> parse_series(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(Errc::malformed_line, what + " must be a JSON array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(Errc::malformed_line, what + " must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

/// One series, or an array of per-group series.
inline std::vector<std::vector<double>> parse_groups(const json& j, const std::string& what) {
  if (j.is_array() && !j.empty() && j.front().is_array()) {
    std::vector<std::vector<double>> groups;
    for (const auto& g : j) groups.push_back(parse_series(g, what));
    return groups;
  }
  return {parse_series(j, what)};
}

inline void write_lines(const std::string& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open '" + path + "' for writing");
  for (const auto& r : rows) out << r.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::io_error, "write to '" + path + "' failed");
}

inline ResampleMode parse_resample(const std::string& s) {
  if (s == "iid") return ResampleMode::iid;
  return ResampleMode::top_up;
}

inline std::string resample_name(ResampleMode m) { return m == ResampleMode::iid ? "iid" : "top-up"; }

}  // namespace detail

/// Parses argv (without the program name), runs one subcommand and writes
/// its report. Returns the process exit code.
inline int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
                    std::ostream& err) {
  GlobalConfig global;
  if (const char* env = std::getenv("DIVSAT_SEED")) {
    try {
      global.seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "DIVSAT_SEED is not an unsigned integer\n";
      return 2;
    }
  }

  CLI::App app{"Diversity metrics, MMD, saturation control and filter evaluation for embedding sets",
               "divsat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  std::string format_name = "json";
  app.add_option("--seed", global.seed, "Seed for every stochastic step (env DIVSAT_SEED)");
  app.add_option("--format", format_name, "Output format")->check(CLI::IsMember({"json", "pretty"}));
  app.add_option("--timeout", global.timeout_seconds, "Subprocess timeout in seconds")
      ->check(CLI::PositiveNumber);
  app.add_option("--threads", global.threads, "Worker threads for kernel matrices")
      ->check(CLI::Range(1u, 256u));
  app.add_flag("-v,--verbose", global.verbosity, "More log lines on stderr");

  RunReport report;
  std::function<void()> action;
  bool raw_output = false;  // synth-provider speaks the wire protocol, not reports

  auto log = [&](const std::string& msg) {
    if (global.verbosity > 0) err << "[divsat] " << msg << "\n";
  };

  // diversity
  auto* diversity = app.add_subcommand("diversity", "Absolute diversity of one set");
  std::string diversity_path;
  bool force_json = false;
  diversity->add_option("set", diversity_path, "Embedding set (JSONL)")->required();
  diversity->add_flag("--json", force_json, "Emit JSON (default)");
  diversity->callback([&] {
    action = [&] {
      if (force_json) global.format = OutputFormat::json;
      const auto set = load_set(diversity_path);
      report.config = {{"set", diversity_path}};
      report.result = to_json(diversity_report(set));
    };
  });

  // mmd
  auto* mmd_cmd = app.add_subcommand("mmd", "Gaussian-kernel MMD between two sets");
  std::string mmd_a, mmd_b;
  std::optional<double> mmd_bandwidth;
  bool mmd_median = false;
  std::optional<std::size_t> mmd_reps;
  bool mmd_unnormalized = false;
  std::string mmd_resample = "top-up";
  mmd_cmd->add_option("a", mmd_a, "First set (JSONL)")->required();
  mmd_cmd->add_option("b", mmd_b, "Second set (JSONL)")->required();
  auto* bw_opt = mmd_cmd->add_option("--bandwidth", mmd_bandwidth, "Kernel bandwidth")
                     ->check(CLI::PositiveNumber);
  mmd_cmd->add_flag("--median", mmd_median, "Median-heuristic bandwidth (default)")->excludes(bw_opt);
  mmd_cmd->add_option("--reps", mmd_reps, "Resampling repetitions for unequal sizes");
  mmd_cmd->add_option("--seed", global.seed, "Seed");
  mmd_cmd->add_flag("--unnormalized", mmd_unnormalized, "Report raw kernel sums (N^2 * score)");
  mmd_cmd->add_option("--resample", mmd_resample, "Resampling scheme")
      ->check(CLI::IsMember({"top-up", "iid"}));
  mmd_cmd->callback([&] {
    action = [&] {
      const auto a = load_set(mmd_a);
      const auto b = load_set(mmd_b);
      if (a.size() != b.size() && !mmd_reps)
        throw Error(Errc::size_mismatch,
                    "sets have sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                        "; pass --reps R to estimate by resampling (mmd_calculator)");
      const auto kernel = mmd_bandwidth ? KernelConfig::fixed(*mmd_bandwidth) : KernelConfig::median();
      MmdOptions opts;
      opts.normalize = !mmd_unnormalized;
      opts.resample = detail::parse_resample(mmd_resample);
      opts.threads = global.threads;
      const std::size_t reps = mmd_reps.value_or(kDefaultRepetitions);
      const auto est = mmd_calculator(a, b, kernel, reps, global.seed, opts);
      report.config = {{"a", mmd_a},
                       {"b", mmd_b},
                       {"bandwidth", mmd_bandwidth ? json(*mmd_bandwidth) : json("median")},
                       {"reps", reps},
                       {"seed", global.seed},
                       {"normalized", opts.normalize},
                       {"resample", detail::resample_name(opts.resample)}};
      report.result = to_json(est);
    };
  });

  // saturate
  auto* sat = app.add_subcommand("saturate", "Grow a set until its MMD-based diversity saturates");
  std::string sat_init, sat_provider, sat_embedder, sat_out, sat_trace, sat_activity;
  std::optional<std::size_t> sat_init_count;
  std::optional<double> sat_bandwidth;
  std::string sat_resample = "top-up";
  std::size_t sat_budget = 1000;
  SaturationConfig sat_cfg;
  auto* init_opt = sat->add_option("--init", sat_init, "Initial embedding set (JSONL)");
  sat->add_option("--init-count", sat_init_count, "Bootstrap this many items from the provider instead")
      ->excludes(init_opt);
  sat->add_option("--provider", sat_provider, "Provider command")->required();
  sat->add_option("--embedder", sat_embedder, "Embedder command")->required();
  sat->add_option("--perc", sat_cfg.perc, "Batch size as a fraction of the set")->check(CLI::Range(0.0, 1.0));
  sat->add_option("--early-stop", sat_cfg.early_stop, "In-window scores tolerated before stopping");
  sat->add_option("--reps", sat_cfg.mmd_repetitions, "MMD resampling repetitions");
  sat->add_option("--seed", global.seed, "Seed");
  sat->add_option("--max-iter", sat_cfg.max_iterations, "Iteration cap");
  sat->add_flag("--fixed-batch", sat_cfg.fixed_batch, "Batch size from the initial set size");
  sat->add_option("--bandwidth", sat_bandwidth, "Fixed kernel bandwidth (default: median heuristic)")
      ->check(CLI::PositiveNumber);
  sat->add_option("--resample", sat_resample, "Resampling scheme")->check(CLI::IsMember({"top-up", "iid"}));
  sat->add_option("--activity", sat_activity, "Activity passed to the provider");
  sat->add_option("--budget", sat_budget, "Fixed-budget baseline for the savings figure");
  sat->add_option("--out", sat_out, "Final set (JSONL)")->required();
  sat->add_option("--trace", sat_trace, "Per-iteration trace (JSONL)")->required();
  sat->callback([&] {
    action = [&] {
      if (sat_init.empty() && !sat_init_count)
        throw Error(Errc::invalid_argument, "saturate needs --init or --init-count");
      sat_cfg.seed = global.seed;
      sat_cfg.kernel = sat_bandwidth ? KernelConfig::fixed(*sat_bandwidth) : KernelConfig::median();
      sat_cfg.mmd_options.resample = detail::parse_resample(sat_resample);
      sat_cfg.mmd_options.threads = global.threads;
      if (!sat_activity.empty()) sat_cfg.context["activity"] = sat_activity;
      ExternalProvider provider(shell_command(sat_provider), global.timeout());
      ExternalEmbedder embedder(shell_command(sat_embedder), global.timeout());
      auto write_trace = [&](const SaturationTrace& trace) {
        std::vector<json> rows;
        for (const auto& e : trace.entries) rows.push_back(to_json(e));
        detail::write_lines(sat_trace, rows);
      };
      std::optional<SaturationResult> res;
      std::size_t initial_size = 0;
      try {
        if (sat_init_count) {
          res = run_saturation(*sat_init_count, provider, embedder, sat_cfg);
          initial_size = *sat_init_count;
        } else {
          auto initial = load_set(sat_init);
          initial_size = initial.size();
          res = run_saturation(std::move(initial), provider, embedder, sat_cfg);
        }
      } catch (const SaturationError& e) {
        write_trace(e.trace());
        throw;
      }
      write_trace(res->trace);
      write_set(res->set, sat_out);
      log("saturation finished: " + std::string(to_string(*res->trace.reason)));
      const double total = static_cast<double>(res->set.size());
      report.config = {{"perc", sat_cfg.perc},
                       {"early_stop", sat_cfg.early_stop},
                       {"reps", sat_cfg.mmd_repetitions},
                       {"seed", sat_cfg.seed},
                       {"max_iter", sat_cfg.max_iterations},
                       {"fixed_batch", sat_cfg.fixed_batch},
                       {"bandwidth", sat_bandwidth ? json(*sat_bandwidth) : json("median")},
                       {"resample", detail::resample_name(sat_cfg.mmd_options.resample)},
                       {"budget", sat_budget}};
      json last = res->trace.entries.empty() ? json(nullptr) : to_json(res->trace.entries.back());
      report.result = {{"reason", to_string(*res->trace.reason)},
                       {"iterations", res->trace.entries.size()},
                       {"initial_size", initial_size},
                       {"final_size", res->set.size()},
                       {"budget", sat_budget},
                       {"savings_pct", round2(100.0 * (1.0 - total / static_cast<double>(sat_budget)))},
                       {"last", last}};
    };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Write a seeded Gaussian embedding set");
  GaussianSpec synth_spec;
  std::size_t synth_n = 0;
  std::string synth_shift, synth_out;
  synth->add_option("--k", synth_spec.k, "Dimension")->required()->check(CLI::PositiveNumber);
  synth->add_option("--n", synth_n, "Number of vectors")->required()->check(CLI::PositiveNumber);
  synth->add_option("--sigma", synth_spec.sigma, "Isotropic standard deviation")->required();
  synth->add_option("--seed", global.seed, "Seed");
  synth->add_option("--mean-shift", synth_shift, "Mean: scalar along axis 1, or a comma list");
  synth->add_option("--out", synth_out, "Output set (JSONL)")->required();
  synth->callback([&] {
    action = [&] {
      synth_spec.seed = global.seed;
      if (!synth_shift.empty()) synth_spec.mean = detail::parse_shift(synth_shift, synth_spec.k);
      const auto set = gaussian_set(synth_spec, synth_n);
      write_set(set, synth_out);
      report.config = {{"k", synth_spec.k}, {"n", synth_n}, {"sigma", synth_spec.sigma},
                       {"seed", synth_spec.seed}, {"mean_shift", synth_shift}, {"out", synth_out}};
      report.result = {{"written", set.size()}, {"summary", to_json(diversity_report(set))}};
    };
  });

  // synth-provider
  auto* sp = app.add_subcommand("synth-provider", "Synthetic provider/embedder speaking the subprocess protocols");
  sp->require_subcommand(1);
  DriftSpec sp_spec;
  std::string sp_shift, sp_drift, sp_state, sp_activity;
  std::size_t sp_count = 0;
  auto add_spec_options = [&](CLI::App* c) {
    c->add_option("--k", sp_spec.base.k, "Dimension")->required()->check(CLI::PositiveNumber);
    c->add_option("--sigma", sp_spec.base.sigma, "Isotropic standard deviation");
    c->add_option("--seed", global.seed, "Seed");
    c->add_option("--mean-shift", sp_shift, "Base mean: scalar along axis 1, or a comma list");
    c->add_option("--drift", sp_drift, "Per-batch mean drift: scalar along axis 1, or a comma list");
  };
  auto resolve_spec = [&] {
    sp_spec.base.seed = global.seed;
    if (!sp_shift.empty()) sp_spec.base.mean = detail::parse_shift(sp_shift, sp_spec.base.k);
    if (!sp_drift.empty()) sp_spec.drift = detail::parse_shift(sp_drift, sp_spec.base.k);
    sp_spec.validate();
  };
  auto* sp_provide = sp->add_subcommand("provide", "Emit --count tokens as {\"text\": ...} lines");
  add_spec_options(sp_provide);
  sp_provide->add_option("--count", sp_count, "Items to emit")->required();
  sp_provide->add_option("--activity", sp_activity, "Accepted and ignored");
  sp_provide->add_option("--state", sp_state, "File holding the batch/item counters between calls");
  sp_provide->callback([&] {
    raw_output = true;
    action = [&] {
      resolve_spec();
      std::uint64_t batch = 0, next = 0;
      if (!sp_state.empty()) {
        std::ifstream st(sp_state);
        if (st) {
          const auto j = json::parse(st, nullptr, false);
          if (j.is_object()) {
            batch = j.value("batch", std::uint64_t{0});
            next = j.value("next_index", std::uint64_t{0});
          }
        }
      }
      SynthProvider provider(sp_spec, batch, next);
      for (const auto& t : provider.next_batch(sp_count, {})) out << json{{"text", t}}.dump() << "\n";
      if (!sp_state.empty())
        detail::write_lines(sp_state, {json{{"batch", provider.batch()}, {"next_index", provider.next_index()}}});
    };
  });
  auto* sp_embed = sp->add_subcommand("embed", "Embed {\"id\", \"text\"} lines from stdin");
  add_spec_options(sp_embed);
  sp_embed->callback([&] {
    raw_output = true;
    action = [&] {
      resolve_spec();
      std::string line;
      for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = json::parse(line, nullptr, false);
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
          throw Error(Errc::protocol_error, "embed input line " + std::to_string(n) + " lacks \"text\"");
        const std::string id = j.contains("id") ? detail::string_field(j, "id", "input") : std::to_string(n - 1);
        out << json{{"id", id}, {"vector", synth_vector(sp_spec, j["text"].get<std::string>())}}.dump() << "\n";
      }
    };
  });

  // filter
  auto* filter = app.add_subcommand("filter", "Caption relevance filter");
  filter->require_subcommand(1);
  auto* frun = filter->add_subcommand("run", "Judge captions and write verdicts");
  std::string f_activity, f_captions, f_judge, f_out;
  std::size_t f_retries = 2;
  frun->add_option("--activity", f_activity, "Activity name")->required();
  frun->add_option("--captions", f_captions, "Captions (JSONL)")->required();
  frun->add_option("--judge", f_judge, "Judge command")->required();
  frun->add_option("--out", f_out, "Verdicts (JSONL)")->required();
  frun->add_option("--retries", f_retries, "Re-asks per prompt on unparseable replies");
  frun->callback([&] {
    action = [&] {
      std::vector<CaptionItem> items;
      std::size_t n = 0;
      for (const auto& row : detail::read_jsonl(f_captions)) {
        const auto where = f_captions + " record " + std::to_string(++n);
        CaptionItem c{detail::string_field(row, "id", where), detail::string_field(row, "caption", where),
                      row.contains("activity") ? detail::string_field(row, "activity", where) : f_activity};
        items.push_back(std::move(c));
      }
      const auto prompts = build_filter_prompts(f_activity, items);
      ExternalJudge judge(shell_command(f_judge), global.timeout());
      const auto verdicts = run_filter(judge, prompts, f_retries);
      std::vector<json> rows;
      std::size_t kept = 0;
      for (const auto& v : verdicts) {
        rows.push_back({{"id", v.id}, {"keep", v.keep}});
        kept += v.keep ? 1 : 0;
      }
      detail::write_lines(f_out, rows);
      report.config = {{"activity", f_activity}, {"captions", f_captions}, {"retries", f_retries}};
      report.result = {{"captions", items.size()},
                       {"prompts", prompts.size()},
                       {"kept", kept},
                       {"rejected", verdicts.size() - kept}};
    };
  });
  auto* feval = filter->add_subcommand("eval", "Score verdicts against ground truth");
  std::string f_verdicts, f_truth;
  feval->add_option("--verdicts", f_verdicts, "Verdicts (JSONL)")->required();
  feval->add_option("--truth", f_truth, "Ground truth (JSONL)")->required();
  feval->callback([&] {
    action = [&] {
      std::vector<FilterVerdict> verdicts;
      std::size_t n = 0;
      for (const auto& row : detail::read_jsonl(f_verdicts)) {
        const auto where = f_verdicts + " record " + std::to_string(++n);
        verdicts.push_back({detail::string_field(row, "id", where), detail::bool_field(row, "keep", where)});
      }
      std::map<std::string, bool> truth;
      n = 0;
      for (const auto& row : detail::read_jsonl(f_truth)) {
        const auto where = f_truth + " record " + std::to_string(++n);
        truth[detail::string_field(row, "id", where)] = detail::bool_field(row, "relevant", where);
      }
      report.config = {{"verdicts", f_verdicts}, {"truth", f_truth}};
      report.result = to_json(evaluate_filter(verdicts, truth));
    };
  });

  // correlate
  auto* corr = app.add_subcommand("correlate", "Pearson correlations between per-step series");
  std::string c_text, c_motion, c_f1;
  bool c_fisher = false;
  corr->add_option("--text", c_text, "Text MMD series (JSON array, or array of arrays)")->required();
  corr->add_option("--motion", c_motion, "Motion MMD series")->required();
  corr->add_option("--f1", c_f1, "Delta-F1 series")->required();
  corr->add_flag("--fisher-z", c_fisher, "Average groups through Fisher's z instead of the raw mean");
  corr->callback([&] {
    action = [&] {
      const auto text = detail::parse_groups(detail::read_json_file(c_text), c_text);
      const auto motion = detail::parse_groups(detail::read_json_file(c_motion), c_motion);
      const auto f1 = detail::parse_groups(detail::read_json_file(c_f1), c_f1);
      if (text.size() != motion.size() || text.size() != f1.size())
        throw Error(Errc::length_mismatch, "series files hold different numbers of groups");
      json groups = json::array();
      std::vector<double> tm, tf, mf;
      for (std::size_t g = 0; g < text.size(); ++g) {
        const auto rep = correlation_report(text[g], motion[g], f1[g]);
        groups.push_back(to_json(rep));
        tm.push_back(rep.text_motion.r);
        tf.push_back(rep.text_f1.r);
        mf.push_back(rep.motion_f1.r);
      }
      const auto method = c_fisher ? AverageMethod::fisher_z : AverageMethod::raw;
      report.config = {{"text", c_text}, {"motion", c_motion}, {"f1", c_f1}};
      report.result = {{"groups", groups},
                       {"average_method", c_fisher ? "fisher_z" : "raw"},
                       {"average", {{"text_vs_motion", average_r(tm, method)},
                                    {"text_vs_f1", average_r(tf, method)},
                                    {"motion_vs_f1", average_r(mf, method)}}}};
    };
  });

  // impact
  auto* impact = app.add_subcommand("impact", "Absolute diversity before and after filtering");
  std::string i_before, i_after;
  impact->add_option("before", i_before, "Set before filtering (JSONL)")->required();
  impact->add_option("after", i_after, "Set after filtering (JSONL)")->required();
  impact->callback([&] {
    action = [&] {
      report.config = {{"before", i_before}, {"after", i_after}};
      report.result = to_json(diversity_impact(load_set(i_before), load_set(i_after)));
    };
  });

  std::vector<std::string> argv_storage{"divsat"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  global.format = format_name == "pretty" ? OutputFormat::pretty : OutputFormat::json;

  const auto started = std::chrono::steady_clock::now();
  try {
    action();
  } catch (const Error& e) {
    err << json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  if (raw_output) return 0;
  report.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  for (auto* sub : app.get_subcommands()) {
    report.command = sub->get_name();
    for (auto* leaf : sub->get_subcommands()) report.command += " " + leaf->get_name();
  }
  report.config["seed"] = global.seed;
  out << emit_report(report, global.format);
  return 0;
}

}  // namespace divsat::cli
