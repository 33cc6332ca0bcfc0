#pragma once

// Gaussian-kernel maximum mean discrepancy between embedding sets, and the
// resampling estimator used to compare sets of different sizes.
//
// The statistic is the biased V-statistic: all three double sums include
// their diagonal terms and the result is divided by N^2 (N = common size).
// Multiplying by N^2 recovers the raw sum form, see MmdOptions::normalize.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "divsat/embedset.hpp"
#include "divsat/error.hpp"
#include "divsat/random.hpp"

namespace divsat {

/// Kernel length-scale: an explicit positive bandwidth, or the median
/// heuristic when `bandwidth` is empty.
struct KernelConfig {
  std::optional<double> bandwidth;

  static KernelConfig median() { return {}; }
  static KernelConfig fixed(double bw) {
    if (!(bw > 0.0) || !std::isfinite(bw))
      throw Error(Errc::invalid_argument, "kernel bandwidth must be positive and finite");
    return {bw};
  }
  bool uses_median() const noexcept { return !bandwidth.has_value(); }
};

/// How the smaller set is brought up to the larger size.
enum class ResampleMode {
  iid,     // every member redrawn uniformly with replacement
  top_up,  // original members kept, the shortfall drawn with replacement
};

struct MmdOptions {
  bool normalize = true;    // false: report N^2 * score
  ResampleMode resample = ResampleMode::top_up;
  unsigned threads = 1;     // kernel matrix construction only; results do not depend on it
};

struct MmdEstimate {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t repetitions = 1;
  double bandwidth_used = 1.0;
  std::size_t size_x = 0;
  std::size_t size_y = 0;
  bool normalized = true;
};

inline constexpr std::size_t kDefaultRepetitions = 10;
inline constexpr double kNegativeFloor = -1e-9;

inline double squared_distance(std::span<const double> x, std::span<const double> y) noexcept {
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - y[j];
    sq += d * d;
  }
  return sq;
}

/// exp(-|x - y|^2 / (2 bandwidth^2))
inline double gaussian_kernel(std::span<const double> x, std::span<const double> y,
                              double bandwidth) {
  if (x.size() != y.size())
    throw Error(Errc::dimension_mismatch, "kernel arguments differ in dimension");
  if (!(bandwidth > 0.0)) throw Error(Errc::invalid_argument, "kernel bandwidth must be positive");
  return std::exp(-squared_distance(x, y) / (2.0 * bandwidth * bandwidth));
}

namespace detail {

using Rows = std::vector<std::span<const double>>;

inline Rows rows_of(const EmbeddingSet& set) {
  Rows rows;
  rows.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) rows.push_back(set.row(i));
  return rows;
}

inline void require_same_dimension(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.dimension() != b.dimension())
    throw Error(Errc::dimension_mismatch, "sets have dimensions " + std::to_string(a.dimension()) +
                                              " and " + std::to_string(b.dimension()));
}

// Median of pairwise distances over a multiset in which pool point i
// appears multiplicity[i] times. Zero distances are excluded, which also
// drops pairs formed by two copies of the same point. For an even count of
// distances the two middle values are averaged.
inline double weighted_median_distance(const Rows& pool,
                                       std::span<const std::uint32_t> multiplicity) {
  struct Pair {
    double sq;
    std::uint64_t weight;
  };
  std::vector<Pair> pairs;
  pairs.reserve(pool.size() * (pool.size() - 1) / 2);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      const double sq = squared_distance(pool[i], pool[j]);
      if (sq > 0.0) {
        const std::uint64_t w = std::uint64_t{multiplicity[i]} * multiplicity[j];
        pairs.push_back({sq, w});
        total += w;
      }
    }
  if (total == 0) return 1.0;
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.sq < b.sq; });
  auto at = [&](std::uint64_t position) {
    std::uint64_t seen = 0;
    for (const auto& p : pairs) {
      seen += p.weight;
      if (seen > position) return std::sqrt(p.sq);
    }
    return std::sqrt(pairs.back().sq);
  };
  if (total % 2 == 1) return at(total / 2);
  return (at(total / 2 - 1) + at(total / 2)) / 2.0;
}

/// Packed lower-triangular Gaussian kernel matrix over a pool of points.
class KernelMatrix {
 public:
  KernelMatrix(const Rows& pool, double bandwidth, unsigned threads)
      : size_(pool.size()), values_(size_ * (size_ + 1) / 2) {
    const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
    auto fill_rows = [&](std::size_t first, std::size_t stride) {
      for (std::size_t i = first; i < size_; i += stride) {
        double* row = values_.data() + i * (i + 1) / 2;
        for (std::size_t j = 0; j < i; ++j) row[j] = std::exp(-squared_distance(pool[i], pool[j]) * scale);
        row[i] = 1.0;
      }
    };
    if (threads <= 1 || size_ < 256) {
      fill_rows(0, 1);
    } else {
      std::vector<std::jthread> workers;
      for (unsigned t = 0; t < threads; ++t) workers.emplace_back(fill_rows, t, threads);
    }
  }

  std::size_t size() const noexcept { return size_; }

  /// d^T K d, accumulated row by row in a fixed order.
  double quadratic_form(std::span<const double> d) const {
    double total = 0.0;
    for (std::size_t i = 0; i < size_; ++i) {
      if (d[i] == 0.0) continue;
      const double* row = values_.data() + i * (i + 1) / 2;
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) acc += d[j] * row[j];
      total += d[i] * (2.0 * acc + d[i]);
    }
    return total;
  }

 private:
  std::size_t size_;
  std::vector<double> values_;
};

// Lexicographic order on raw coordinates; used to evaluate mmd(X, Y) and
// mmd(Y, X) through the same arithmetic.
inline bool precedes(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i].vector;
    const auto& y = b[i].vector;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] != y[j]) return x[j] < y[j];
  }
  return false;
}

inline double clamp_tiny_negative(double value) {
  return (value < 0.0 && value >= kNegativeFloor) ? 0.0 : value;
}

/// Draws `target` indices uniformly with replacement from [0, source) and
/// returns per-index counts. Repetition r uses Xoshiro256(seed + r).
inline std::vector<std::uint32_t> resample_counts(std::size_t source, std::size_t target,
                                                  std::uint64_t seed,
                                                  ResampleMode mode = ResampleMode::iid) {
  Xoshiro256 rng(seed);
  std::vector<std::uint32_t> counts(source, mode == ResampleMode::top_up ? 1 : 0);
  const std::size_t draws = mode == ResampleMode::top_up ? target - source : target;
  for (std::size_t t = 0; t < draws; ++t) ++counts[rng.below(source)];
  return counts;
}

struct ResampleLayout {
  std::size_t small_offset;  // first pool index of the resampled side
  std::size_t small_size;
  std::size_t large_offset;  // first pool index of the full-weight side
  std::size_t large_size;
};

inline MmdEstimate resampled_estimate(const Rows& pool, const ResampleLayout& layout,
                                      std::span<const std::uint32_t> multiplicity,
                                      const KernelConfig& cfg, std::size_t repetitions,
                                      std::uint64_t seed, const MmdOptions& opts) {
  const double bandwidth =
      cfg.bandwidth ? *cfg.bandwidth : weighted_median_distance(pool, multiplicity);
  const KernelMatrix gram(pool, bandwidth, opts.threads);
  const std::size_t n = layout.large_size;
  const double n_sq = static_cast<double>(n) * static_cast<double>(n);

  std::vector<double> scores;
  scores.reserve(repetitions);
  std::vector<double> weights(pool.size());
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto counts = resample_counts(layout.small_size, n, seed + r, opts.resample);
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < layout.small_size; ++i)
      weights[layout.small_offset + i] += static_cast<double>(counts[i]);
    for (std::size_t i = 0; i < layout.large_size; ++i) weights[layout.large_offset + i] -= 1.0;
    double score = clamp_tiny_negative(gram.quadratic_form(weights) / n_sq);
    if (!opts.normalize) score *= n_sq;
    scores.push_back(score);
  }

  MmdEstimate est;
  double sum = 0.0;
  for (double s : scores) sum += s;
  est.mean = sum / static_cast<double>(repetitions);
  double var = 0.0;
  for (double s : scores) var += (s - est.mean) * (s - est.mean);
  est.stddev = repetitions > 1 ? std::sqrt(var / static_cast<double>(repetitions)) : 0.0;
  est.repetitions = repetitions;
  est.bandwidth_used = bandwidth;
  est.normalized = opts.normalize;
  return est;
}

}  // namespace detail

/// Median pairwise Euclidean distance over the pooled sets (non-zero
/// distances only); 1.0 when every pooled point coincides.
inline double median_heuristic(const EmbeddingSet& x, const EmbeddingSet& y) {
  detail::require_same_dimension(x, y);
  auto pool = detail::rows_of(x);
  const auto ys = detail::rows_of(y);
  pool.insert(pool.end(), ys.begin(), ys.end());
  const std::vector<std::uint32_t> multiplicity(pool.size(), 1);
  return detail::weighted_median_distance(pool, multiplicity);
}

inline double resolve_bandwidth(const KernelConfig& cfg, const EmbeddingSet& x,
                                const EmbeddingSet& y) {
  return cfg.bandwidth ? *cfg.bandwidth : median_heuristic(x, y);
}

/// The three kernel double sums for equal-size sets.
struct MmdSums {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;
  std::size_t n = 0;

  double raw() const noexcept { return xx + yy - 2.0 * xy; }
  double normalized() const noexcept {
    const double nn = static_cast<double>(n);
    return raw() / (nn * nn);
  }
};

inline MmdSums mmd_sums(const EmbeddingSet& x, const EmbeddingSet& y, double bandwidth) {
  if (x.size() != y.size())
    throw Error(Errc::size_mismatch,
                "mmd needs equal-size sets (got " + std::to_string(x.size()) + " and " +
                    std::to_string(y.size()) + "); use mmd_calculator to resample");
  detail::require_same_dimension(x, y);
  if (!(bandwidth > 0.0)) throw Error(Errc::invalid_argument, "kernel bandwidth must be positive");
  const bool swap = detail::precedes(y, x);
  const EmbeddingSet& a = swap ? y : x;
  const EmbeddingSet& b = swap ? x : y;
  const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
  auto k = [scale](std::span<const double> p, std::span<const double> q) {
    return std::exp(-squared_distance(p, q) * scale);
  };
  auto within = [&](const EmbeddingSet& s) {
    double off = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) off += k(s.row(i), s.row(j));
    return static_cast<double>(s.size()) + 2.0 * off;
  };
  MmdSums sums;
  sums.n = x.size();
  const double aa = within(a);
  const double bb = within(b);
  sums.xx = swap ? bb : aa;
  sums.yy = swap ? aa : bb;
  if (!swap && !detail::precedes(a, b)) {
    // Coordinate-identical sets: the cross sum equals the within sum.
    sums.xy = aa;
    return sums;
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) sums.xy += k(a.row(i), b.row(j));
  return sums;
}

/// Normalized MMD of equal-size sets with an explicit bandwidth.
inline double mmd(const EmbeddingSet& x, const EmbeddingSet& y, double bandwidth) {
  return detail::clamp_tiny_negative(mmd_sums(x, y, bandwidth).normalized());
}

inline double mmd(const EmbeddingSet& x, const EmbeddingSet& y,
                  const KernelConfig& cfg = KernelConfig::median()) {
  if (x.size() != y.size()) (void)mmd_sums(x, y, 1.0);  // raises size_mismatch
  return mmd(x, y, resolve_bandwidth(cfg, x, y));
}

/// MMD between sets of possibly different sizes. Equal sizes: one exact
/// evaluation. Otherwise the smaller set is brought up to the larger size
/// `repetitions` times (see ResampleMode; draws are uniform with
/// replacement) and the result holds the mean and population standard
/// deviation of those scores. A median bandwidth is fixed once from the
/// original pooled sets.
inline MmdEstimate mmd_calculator(const EmbeddingSet& a, const EmbeddingSet& b,
                                  const KernelConfig& cfg,
                                  std::size_t repetitions = kDefaultRepetitions,
                                  std::uint64_t seed = 0, const MmdOptions& opts = {}) {
  if (repetitions == 0) throw Error(Errc::invalid_repetitions, "repetitions must be positive");
  detail::require_same_dimension(a, b);
  if (a.size() == b.size()) {
    MmdEstimate est;
    est.bandwidth_used = resolve_bandwidth(cfg, a, b);
    const auto sums = mmd_sums(a, b, est.bandwidth_used);
    est.mean = detail::clamp_tiny_negative(sums.normalized());
    if (!opts.normalize) est.mean *= static_cast<double>(a.size()) * static_cast<double>(a.size());
    est.stddev = 0.0;
    est.repetitions = 1;
    est.size_x = a.size();
    est.size_y = b.size();
    est.normalized = opts.normalize;
    return est;
  }
  auto pool = detail::rows_of(a);
  const auto bs = detail::rows_of(b);
  pool.insert(pool.end(), bs.begin(), bs.end());
  const std::vector<std::uint32_t> multiplicity(pool.size(), 1);
  const bool a_small = a.size() < b.size();
  const detail::ResampleLayout layout =
      a_small ? detail::ResampleLayout{0, a.size(), a.size(), b.size()}
              : detail::ResampleLayout{a.size(), b.size(), 0, a.size()};
  auto est = detail::resampled_estimate(pool, layout, multiplicity, cfg, repetitions, seed, opts);
  est.size_x = a.size();
  est.size_y = b.size();
  return est;
}

/// Same estimate as mmd_calculator(first `prefix` records of `grown`, grown)
/// without duplicating the shared points in the kernel matrix.
inline MmdEstimate mmd_calculator_growth(const EmbeddingSet& grown, std::size_t prefix,
                                         const KernelConfig& cfg,
                                         std::size_t repetitions = kDefaultRepetitions,
                                         std::uint64_t seed = 0, const MmdOptions& opts = {}) {
  if (repetitions == 0) throw Error(Errc::invalid_repetitions, "repetitions must be positive");
  if (prefix == 0 || prefix > grown.size())
    throw Error(Errc::invalid_argument, "prefix must be in [1, size]");
  if (prefix == grown.size()) return mmd_calculator(grown, grown, cfg, repetitions, seed, opts);
  const auto pool = detail::rows_of(grown);
  std::vector<std::uint32_t> multiplicity(pool.size(), 1);
  for (std::size_t i = 0; i < prefix; ++i) multiplicity[i] = 2;
  const detail::ResampleLayout layout{0, prefix, 0, grown.size()};
  auto est = detail::resampled_estimate(pool, layout, multiplicity, cfg, repetitions, seed, opts);
  est.size_x = prefix;
  est.size_y = grown.size();
  return est;
}

}  // namespace divsat
