#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "divsat/embedset.hpp"

namespace divsat {

/// Per-coordinate population mean and standard deviation (divisor n).
struct AxisStats {
  std::vector<double> means;
  std::vector<double> stddevs;
};

struct DiversityScore {
  double std_metric = 0.0;
  double centroid_metric = 0.0;
  std::vector<double> centroid;
  AxisStats axes;
  std::size_t n = 0;
  std::size_t k = 0;
};

// Accumulated relative to the first vector, so a set of identical vectors
// has a centroid exactly equal to that vector.
inline std::vector<double> centroid(const EmbeddingSet& set) {
  const auto& origin = set[0].vector;
  std::vector<double> offset(set.dimension(), 0.0);
  for (const auto& r : set)
    for (std::size_t j = 0; j < offset.size(); ++j) offset[j] += r.vector[j] - origin[j];
  const double n = static_cast<double>(set.size());
  std::vector<double> mean(origin);
  for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += offset[j] / n;
  return mean;
}

// Two-pass: mean first, then squared deviations about it.
inline AxisStats axis_stats(const EmbeddingSet& set) {
  AxisStats stats;
  stats.means = centroid(set);
  stats.stddevs.assign(set.dimension(), 0.0);
  for (const auto& r : set)
    for (std::size_t j = 0; j < stats.means.size(); ++j) {
      const double d = r.vector[j] - stats.means[j];
      stats.stddevs[j] += d * d;
    }
  const double n = static_cast<double>(set.size());
  for (auto& s : stats.stddevs) s = std::sqrt(s / n);
  return stats;
}

/// Geometric mean of the per-axis standard deviations, evaluated in log
/// space. Exactly zero when any axis is constant.
inline double std_diversity(const AxisStats& stats) {
  double log_sum = 0.0;
  for (double s : stats.stddevs) {
    if (s == 0.0) return 0.0;
    log_sum += std::log(s);
  }
  return std::exp(log_sum / static_cast<double>(stats.stddevs.size()));
}

inline double std_diversity(const EmbeddingSet& set) { return std_diversity(axis_stats(set)); }

/// Mean squared Euclidean distance of the vectors from their centroid.
inline double centroid_diversity(const EmbeddingSet& set, const std::vector<double>& center) {
  double total = 0.0;
  for (const auto& r : set) {
    double sq = 0.0;
    for (std::size_t j = 0; j < center.size(); ++j) {
      const double d = r.vector[j] - center[j];
      sq += d * d;
    }
    total += sq;
  }
  return total / static_cast<double>(set.size());
}

inline double centroid_diversity(const EmbeddingSet& set) {
  return centroid_diversity(set, centroid(set));
}

inline DiversityScore diversity_report(const EmbeddingSet& set) {
  DiversityScore score;
  score.axes = axis_stats(set);
  score.centroid = score.axes.means;
  score.std_metric = std_diversity(score.axes);
  score.centroid_metric = centroid_diversity(set, score.centroid);
  score.n = set.size();
  score.k = set.dimension();
  return score;
}

}  // namespace divsat
