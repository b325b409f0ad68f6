#pragma once

#include <cmath>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/gauss1d.hpp"
#include "pancakes/parallel.hpp"
#include "pancakes/quadrature.hpp"

namespace pancakes {

/// Polynomials orthonormal under the weight exp(-pi x^2). The unnormalized
/// family satisfies H_{k+1} = 2 pi x H_k - 2 pi k H_{k-1} with H_0 = 1,
/// H_1 = 2 pi x; dividing by sqrt((2 pi)^k k!) gives the stable normalized
/// recurrence used here:
///   h_{k+1} = sqrt(2 pi / (k+1)) x h_k - sqrt(k / (k+1)) h_{k-1}.
class HermiteBasis {
 public:
  explicit HermiteBasis(int max_degree) : max_degree_(max_degree) {
    require(max_degree >= 0, "max_degree must be >= 0");
    a_.resize(max_degree_ + 1);
    b_.resize(max_degree_ + 1);
    for (int k = 1; k <= max_degree_; ++k) {
      a_[k] = std::sqrt(kTwoPi / k);
      b_[k] = std::sqrt((k - 1.0) / k);
    }
  }

  int max_degree() const { return max_degree_; }

  double eval(int k, double x) const {
    require(k >= 0 && k <= max_degree_, "degree out of range");
    double prev = 0.0, cur = 1.0;
    for (int j = 1; j <= k; ++j) {
      const double next = a_[j] * x * cur - b_[j] * prev;
      prev = cur;
      cur = next;
    }
    return cur;
  }

  /// All values h_0(x), ..., h_K(x) in one upward pass.
  std::vector<double> eval_all(double x) const {
    std::vector<double> out(max_degree_ + 1);
    out[0] = 1.0;
    if (max_degree_ >= 1) out[1] = a_[1] * x;
    for (int j = 2; j <= max_degree_; ++j)
      out[j] = a_[j] * x * out[j - 1] - b_[j] * out[j - 2];
    return out;
  }

 private:
  int max_degree_;
  std::vector<double> a_, b_;
};

/// Coefficient of the lattice distribution against the orthonormal basis,
/// computed in the Fourier domain:
///   alpha_k = (gamma c_k / mass) * sum over y in gamma Z of (-2 pi i y)^k
///             exp(-pi y^2),
/// with log-space term accumulation. Direct lattice sums of h_k cancel
/// catastrophically past degree ~10 and are used only as a test oracle.
inline double hermite_alpha(int k, double gamma,
                            const ThetaSumPolicy& policy = {}) {
  require(k >= 0, "degree must be >= 0");
  require_finite(gamma, "gamma");
  require(gamma > 0, "gamma must be positive");
  if (k == 0) return 1.0;
  if (k % 2 == 1) return 0.0;

  // log c_k = -(k log(2 pi) + log k!) / 2
  const double log_ck =
      -0.5 * (k * std::log(kTwoPi) + std::lgamma(static_cast<double>(k) + 1.0));
  // Terms peak near y* with 2 pi y*^2 = k; walk j upward until far past the
  // peak and negligible relative to the running maximum.
  const double jpeak = std::sqrt(k / kTwoPi) / gamma;
  double best = -HUGE_VAL;
  std::vector<double> logs;
  for (int j = 1;; ++j) {
    const double y = j * gamma;
    const double lt = k * std::log(kTwoPi * y) - kPi * y * y;
    logs.push_back(lt);
    if (lt > best) best = lt;
    if (j > jpeak + 2 && lt < best - 120.0) break;
    if (j > 100000) throw numeric_error("alpha term walk did not terminate");
  }
  double acc = 0.0;
  for (double lt : logs) acc += std::exp(lt - best);
  const double mass = gaussian_mass(1.0 / gamma, 1.0, policy);
  const double log_abs =
      std::log(2.0 * gamma / mass) + log_ck + best + std::log(acc);
  const double sign = (k / 2) % 2 == 0 ? 1.0 : -1.0;
  return sign * std::exp(log_abs);
}

/// Signed coefficient table for a fixed gamma, built in parallel over k.
struct AlphaTable {
  double gamma;
  int max_degree;
  std::vector<double> alpha;

  AlphaTable(double gamma_, int max_degree_)
      : gamma(gamma_), max_degree(max_degree_), alpha(max_degree_ + 1, 0.0) {
    require(max_degree >= 0, "max_degree must be >= 0");
    parallel_for(static_cast<std::size_t>(max_degree / 2) + 1,
                 [&](std::size_t i) {
                   const int k = static_cast<int>(2 * i);
                   if (k <= max_degree) alpha[k] = hermite_alpha(k, gamma);
                 });
  }

  static int default_degree(double gamma) {
    return std::max(200, static_cast<int>(std::ceil(10.0 * kPi * gamma * gamma)));
  }
};

/// sum over k of alpha_{2k}^2 / ((1+beta^2)^k (1+xi^2)^k). The last 10 series
/// terms must contribute less than 1e-12 of the total, otherwise the table is
/// declared too short.
inline double series_objective(double xi, double beta, double gamma,
                               const AlphaTable& table) {
  require_finite(xi, "xi");
  require_finite(beta, "beta");
  require(xi >= 0, "xi must be >= 0");
  require(beta > 0, "beta must be positive");
  require(table.gamma == gamma, "alpha table was built for another gamma");
  require(table.max_degree >= AlphaTable::default_degree(gamma),
          "alpha table shorter than required coverage");
  const double log_q =
      -(std::log1p(beta * beta) + std::log1p(xi * xi));
  double total = 0.0, tail = 0.0;
  const int terms = table.max_degree / 2;
  for (int k = 0; k <= terms; ++k) {
    const double a = table.alpha[2 * k];
    const double term = a * a * std::exp(k * log_q);
    total += term;
    if (k > terms - 10) tail += term;
  }
  if (!(tail <= 1e-12 * total))
    throw std::domain_error(
        "alpha table too short: series tail above 1e-12 of the total");
  return total;
}

struct SmoothingIdentity {
  double lhs;
  double rhs;
  double abs_err;
};

/// Gaussian smoothing acts on the likelihood ratio by composing widths:
/// averaging T_gamma^beta over the noised argument equals T_gamma^s with
/// s^2 = (1+beta^2)(1+sigma^2) - 1. lhs by quadrature, rhs directly.
inline SmoothingIdentity smoothing_identity_check(double x, double beta,
                                                  double sigma, double gamma) {
  require_finite(x, "x");
  require(beta > 0 && sigma > 0, "beta and sigma must be positive");
  SmoothedRatioEvaluator inner({gamma, beta});
  const double sqrt1ps2 = std::sqrt(1.0 + sigma * sigma);
  auto integrand = [&](double z) {
    return std::exp(inner.log_ratio((x + sigma * z) / sqrt1ps2) -
                    kPi * z * z);
  };
  // Integrand oscillates with period ~ sqrt(1+beta^2) sqrt(1+sigma^2) /
  // (gamma sigma) in z; 48 panels per unit resolves every case used here.
  const double half = 6.0;
  const int panels = std::max(
      96, static_cast<int>(std::ceil(2.0 * half * 12.0 * gamma * sigma /
                                     (sqrt1ps2 * std::sqrt(1 + beta * beta)))));
  const double lhs = integrate(integrand, -half, half, panels, 16);
  const double s = std::sqrt((1.0 + beta * beta) * (1.0 + sigma * sigma) - 1.0);
  const double rhs = std::exp(log_likelihood_ratio(x, {gamma, s}));
  return {lhs, rhs, std::abs(lhs - rhs)};
}

/// Max deviation between the truncated coefficient expansion of the ratio at
/// smoothing level sigma and its direct evaluation, over |x| <= 2.
inline double expansion_check(double gamma, double sigma, int max_degree) {
  require(sigma >= 0, "sigma must be >= 0");
  require(max_degree >= 0, "max_degree must be >= 0");
  AlphaTable table(gamma, max_degree);
  HermiteBasis basis(max_degree);
  SmoothedRatioEvaluator eval({gamma, sigma});
  const double log_decay = -std::log1p(sigma * sigma);
  double worst = 0.0;
  const int grid = 161;
  for (int i = 0; i < grid; ++i) {
    const double x = -2.0 + 4.0 * i / (grid - 1);
    const std::vector<double> h = basis.eval_all(x);
    double acc = 0.0;
    for (int k = 0; 2 * k <= max_degree; ++k)
      acc += table.alpha[2 * k] * std::exp(k * log_decay) * h[2 * k];
    worst = std::max(worst, std::abs(acc - std::exp(eval.log_ratio(x))));
  }
  return worst;
}

}  // namespace pancakes
