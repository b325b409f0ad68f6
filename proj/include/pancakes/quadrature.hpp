#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "pancakes/common.hpp"

namespace pancakes {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Newton iteration on the Legendre polynomial, seeded with the Chebyshev
/// approximation of the roots. Accurate to ~1e-15 for the orders used here.
inline GaussLegendreRule compute_gauss_legendre(int order) {
  require(order >= 1, "quadrature order must be >= 1");
  GaussLegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return rule;
}

inline const GaussLegendreRule& gauss_legendre(int order) {
  static std::map<int, GaussLegendreRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end())
    it = cache.emplace(order, compute_gauss_legendre(order)).first;
  return it->second;
}

/// Single Gauss-Legendre panel over [a, b].
template <typename F>
double integrate_panel(F&& f, double a, double b, const GaussLegendreRule& r) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i)
    acc += r.weights[i] * f(mid + half * r.nodes[i]);
  return acc * half;
}

/// [a, b] split into `panels` equal Gauss-Legendre panels of given order.
template <typename F>
double integrate(F&& f, double a, double b, int panels, int order) {
  const GaussLegendreRule& rule = gauss_legendre(order);
  double acc = 0.0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p)
    acc += integrate_panel(f, a + p * w, a + (p + 1) * w, rule);
  return acc;
}

}  // namespace pancakes
