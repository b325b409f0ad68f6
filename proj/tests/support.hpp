#pragma once

// Test-side oracles, independent of the library evaluation paths: extended
// precision brute-force lattice sums, finite differences, and
// Kolmogorov-Smirnov machinery.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pancakes/common.hpp"

namespace oracle {

inline constexpr long double kPiL = 3.14159265358979323846264338327950288L;

/// Brute-force likelihood ratio in extended precision over |k| <= terms.
inline long double brute_log_ratio(double z, double gamma, double sigma,
                                   int terms = 200) {
  const long double s1 = std::sqrt(1.0L + (long double)sigma * sigma);
  long double lattice_mass = 0.0L;
  for (int k = -terms; k <= terms; ++k) {
    const long double x = (long double)k / gamma;
    lattice_mass += expl(-kPiL * x * x);
  }
  long double acc = 0.0L;
  for (int k = -terms; k <= terms; ++k) {
    const long double dz = z - s1 * k / gamma;
    acc += expl(-kPiL * dz * dz / ((long double)sigma * sigma));
  }
  return logl(s1 / (sigma * lattice_mass) * acc);
}

/// Gaussian mass of spacing*Z under width, direct truncated sum.
inline long double brute_mass(double spacing, double width, int terms) {
  long double acc = 0.0L;
  for (int k = -terms; k <= terms; ++k) {
    const long double x = (long double)spacing * k / width;
    acc += expl(-kPiL * x * x);
  }
  return acc;
}

/// Mass of the width-s Gaussian on the shifted lattice (1/gamma)Z - t,
/// restricted to |x| > r when tail_only is set.
inline long double shifted_lattice_mass(double gamma, double s, double t,
                                        double r, bool tail_only,
                                        int terms = 4000) {
  long double acc = 0.0L;
  for (int k = -terms; k <= terms; ++k) {
    const long double x = (long double)k / gamma - t;
    if (tail_only && fabsl(x) <= r) continue;
    acc += expl(-kPiL * x * x / ((long double)s * s));
  }
  return acc;
}

inline double central_difference(const std::function<double(double)>& f,
                                 double z, double h) {
  return (f(z + h) - f(z - h)) / (2.0 * h);
}

/// Standard normal CDF of N(0, variance).
inline double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// One-sample KS statistic against a CDF.
inline double ks_statistic(std::vector<double> values,
                           const std::function<double(double)>& cdf) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    stat = std::max(stat, std::abs(f - (i + 1) / n));
    stat = std::max(stat, std::abs(f - i / n));
  }
  return stat;
}

/// Asymptotic 1% critical value for the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) {
  return 1.6276 / std::sqrt(static_cast<double>(n));
}

/// Two-sample KS statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double stat = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    stat = std::max(stat, std::abs(static_cast<double>(i) / a.size() -
                                   static_cast<double>(j) / b.size()));
  }
  return stat;
}

inline double ks_two_sample_critical_1pct(std::size_t n, std::size_t m) {
  return 1.6276 * std::sqrt((n + m) / (static_cast<double>(n) * m));
}

struct MeanSe {
  double mean;
  double se;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / xs.size();
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  const double var = xs.size() > 1 ? acc / (xs.size() - 1.0) : 0.0;
  return {mean, std::sqrt(var / xs.size())};
}

}  // namespace oracle
