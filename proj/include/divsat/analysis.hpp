#pragma once

// Correlation between per-step series (Pearson r with a two-tailed
// Student-t p-value) and before/after diversity comparison.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "divsat/diversity.hpp"
#include "divsat/embedset.hpp"
#include "divsat/error.hpp"

namespace divsat {

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

inline double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw Error(Errc::length_mismatch, "series lengths differ (" + std::to_string(xs.size()) +
                                           " vs " + std::to_string(ys.size()) + ")");
  if (xs.size() < 2) throw Error(Errc::insufficient_samples, "need at least 2 paired samples");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw Error(Errc::non_finite_value, "series contain a non-finite value");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(Errc::degenerate_series, "a series is constant; correlation is undefined");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error(Errc::invalid_argument, "beta parameters must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(Errc::invalid_argument, "x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-tailed p-value of r under H0: rho = 0, via t = r sqrt((n-2)/(1-r^2))
/// with n-2 degrees of freedom. P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2) and
/// df/(df+t^2) = 1 - r^2.
inline double pearson_p(double r, std::size_t n) {
  if (n < 3) throw Error(Errc::insufficient_samples, "p-value needs at least 3 samples");
  if (!(std::abs(r) <= 1.0)) throw Error(Errc::invalid_argument, "|r| must not exceed 1");
  if (std::abs(r) == 1.0) return 0.0;
  if (r == 0.0) return 1.0;
  const double df = static_cast<double>(n - 2);
  const double p = regularized_incomplete_beta(df / 2.0, 0.5, (1.0 - r) * (1.0 + r));
  return std::clamp(p, 0.0, 1.0);
}

inline CorrelationResult correlate(std::span<const double> xs, std::span<const double> ys) {
  const double r = pearson_r(xs, ys);
  if (xs.size() < 3) throw Error(Errc::insufficient_samples, "correlation needs at least 3 samples");
  return {r, pearson_p(r, xs.size()), xs.size()};
}

struct CorrelationReport {
  CorrelationResult text_motion;
  CorrelationResult text_f1;
  CorrelationResult motion_f1;
};

inline CorrelationReport correlation_report(std::span<const double> text_mmd,
                                            std::span<const double> motion_mmd,
                                            std::span<const double> delta_f1) {
  return {correlate(text_mmd, motion_mmd), correlate(text_mmd, delta_f1),
          correlate(motion_mmd, delta_f1)};
}

enum class AverageMethod { raw, fisher_z };

/// Average of correlation coefficients across groups. fisher_z averages
/// atanh(r) and maps back; |r| = 1 entries make it +/-1.
inline double average_r(std::span<const double> rs, AverageMethod method) {
  if (rs.empty()) throw Error(Errc::empty_input, "no correlations to average");
  double sum = 0.0;
  if (method == AverageMethod::raw) {
    for (double r : rs) sum += r;
    return sum / static_cast<double>(rs.size());
  }
  for (double r : rs) {
    if (std::abs(r) == 1.0) return r;
    sum += std::atanh(r);
  }
  return std::tanh(sum / static_cast<double>(rs.size()));
}

struct DiversityImpactReport {
  DiversityScore before;
  DiversityScore after;
  double delta_std = 0.0;       // after - before
  double delta_centroid = 0.0;  // after - before
};

/// Absolute diversity of both sets and the signed change. No subset
/// relation between the sets is required.
inline DiversityImpactReport diversity_impact(const EmbeddingSet& before, const EmbeddingSet& after) {
  if (before.dimension() != after.dimension())
    throw Error(Errc::dimension_mismatch, "sets have different dimensions");
  DiversityImpactReport rep;
  rep.before = diversity_report(before);
  rep.after = diversity_report(after);
  rep.delta_std = rep.after.std_metric - rep.before.std_metric;
  rep.delta_centroid = rep.after.centroid_metric - rep.before.centroid_metric;
  return rep;
}

}  // namespace divsat
