#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/diffusion.hpp"
#include "pancakes/gauss1d.hpp"
#include "pancakes/hermite.hpp"
#include "pancakes/pancake.hpp"
#include "pancakes/parallel.hpp"
#include "pancakes/rng.hpp"

namespace pancakes {

/// Contrast width tied to the lattice spacing, beta^2 ~ 1/(pi gamma^2).
inline double default_contrast_width(double gamma) {
  require(gamma > 0, "gamma must be positive");
  return 1.0 / (std::sqrt(kPi) * gamma);
}

/// Projection contrast: the likelihood ratio at smoothing level beta. Bounded
/// by gamma * sqrt(2 pi) at the default width, unit mean under the Gaussian.
inline double contrast(double z, double gamma, double beta,
                       const ThetaSumPolicy& policy = {}) {
  require(beta > 0, "beta must be positive");
  return std::exp(log_likelihood_ratio(z, SmoothedDgParams(gamma, beta), policy));
}

/// Evaluation cache for the contrast: the ratio is even and periodic with
/// period sqrt(1+beta^2)/gamma, so one period is tabulated from the exact
/// evaluator and read back through periodic cubic interpolation (relative
/// error ~1e-10 at this resolution). Keeps net searches over ~1e8
/// projections tractable.
class ContrastTable {
 public:
  ContrastTable(double gamma, double beta)
      : gamma_(gamma), beta_(beta) {
    SmoothedRatioEvaluator eval(SmoothedDgParams(gamma, beta));
    period_ = std::sqrt(1.0 + beta * beta) / gamma;
    inv_period_ = 1.0 / period_;
    values_.resize(kNodes + 1);
    // Even + periodic means symmetry about half period; mirror the table so
    // the symmetry is exact by construction.
    for (int i = 0; i <= kNodes / 2; ++i) {
      const double v = std::exp(eval.log_ratio(i * period_ / kNodes));
      values_[i] = v;
      values_[kNodes - i] = v;
    }
  }

  double gamma() const { return gamma_; }
  double beta() const { return beta_; }

  double operator()(double z) const {
    double pos = std::abs(z) * inv_period_;
    pos -= std::floor(pos);
    const double x = pos * kNodes;
    const int i = static_cast<int>(x);
    const double t = x - i;
    const double p0 = values_[(i - 1) & kMask];
    const double p1 = values_[i & kMask];
    const double p2 = values_[(i + 1) & kMask];
    const double p3 = values_[(i + 2) & kMask];
    return p1 + 0.5 * t *
                    (p2 - p0 +
                     t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
                          t * (3.0 * (p1 - p2) + p3 - p0)));
  }

 private:
  static constexpr int kNodes = 16384;
  static constexpr int kMask = kNodes - 1;
  double gamma_, beta_, period_, inv_period_;
  std::vector<double> values_;
};

/// Mean contrast of the projections <x_i, v>. Projections enter through
/// their absolute value, so the objective at v and -v is identical bitwise.
inline double empirical_objective(std::span<const double> samples, int n,
                                  int d, std::span<const double> v,
                                  double gamma, double beta,
                                  const ContrastTable* table = nullptr) {
  require(static_cast<int>(v.size()) == d, "candidate dimension mismatch");
  require(samples.size() == static_cast<std::size_t>(n) * d,
          "sample matrix size mismatch");
  SmoothedRatioEvaluator exact(SmoothedDgParams(gamma, beta));
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z =
        std::abs(dot(samples.subspan(static_cast<std::size_t>(i) * d, d), v));
    acc += table ? (*table)(z) : std::exp(exact.log_ratio(z));
  }
  return acc / n;
}

/// Population objective at projection noise level xi: the coefficient series
/// sum over k of alpha_{2k}^2 ((1+beta^2)(1+xi^2))^{-k}, with the table sized
/// so the enforced tail criterion holds even for small xi.
inline double population_objective(double xi, double gamma, double beta) {
  require_finite(xi, "xi");
  require(xi >= 0, "xi must be >= 0");
  require(beta > 0, "beta must be positive");
  const double log_q = std::log1p(beta * beta) + std::log1p(xi * xi);
  require(log_q > 1e-9, "contrast and projection widths are degenerate");
  const int tail_degree = 2 * static_cast<int>(std::ceil(88.0 / log_q)) + 2;
  const int degree = std::max(AlphaTable::default_degree(gamma), tail_degree);
  require(degree <= 2000000, "series table would be unreasonably large");
  AlphaTable table(gamma, degree);
  return series_objective(xi, beta, gamma, table);
}

enum class NetMode { angular_grid, fibonacci_grid, random };

/// Candidate directions covering the projective sphere to angular resolution
/// eta. d=2 uses the uniform grid on the half circle (an exact net), d=3 a
/// spherical Fibonacci layout restricted to one hemisphere (verified by
/// probing), and d>=4 random unit vectors, where coverage is heuristic.
inline std::vector<std::vector<double>> candidate_net(int d, double eta,
                                                      NetMode mode, Rng& rng,
                                                      long random_count = 0) {
  require(d >= 2, "net requires d >= 2");
  require(std::isfinite(eta) && eta > 0 && eta < 1, "eta must be in (0,1)");
  std::vector<std::vector<double>> net;
  switch (mode) {
    case NetMode::angular_grid: {
      require(d == 2, "angular grid net requires d = 2");
      const int m = static_cast<int>(std::ceil(kPi / eta));
      net.reserve(m);
      for (int i = 0; i < m; ++i) {
        const double theta = i * kPi / m;
        net.push_back({std::cos(theta), std::sin(theta)});
      }
      break;
    }
    case NetMode::fibonacci_grid: {
      require(d == 3, "fibonacci net requires d = 3");
      const long total = static_cast<long>(std::ceil(sq(5.0 / eta)));
      const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
      for (long i = 0; i < total; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / total;
        if (z <= 0.0) continue;  // one representative per antipodal pair
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = kTwoPi * std::fmod(i / golden, 1.0);
        net.push_back({r * std::cos(phi), r * std::sin(phi), z});
      }
      break;
    }
    case NetMode::random: {
      require(random_count >= 1, "random net needs a candidate count");
      if (d >= 4)
        std::cerr << "[pancakes] note: random net for d >= 4; coverage of the "
                     "sphere is heuristic\n";
      for (long i = 0; i < random_count; ++i)
        net.push_back(random_unit_vector(d, rng));
      // Drop effective duplicates (same line twice).
      std::vector<std::vector<double>> kept;
      for (const auto& v : net) {
        bool dup = false;
        for (const auto& w : kept)
          if (std::abs(dot(v, w)) > 1.0 - 1e-9) {
            dup = true;
            break;
          }
        if (!dup) kept.push_back(v);
      }
      net = std::move(kept);
      break;
    }
  }
  return net;
}

struct EstimatorConfig {
  double eta;
  double beta = 0.0;  // 0 means the default width for the given gamma
  NetMode net = NetMode::angular_grid;
  long random_count = 0;
  std::uint64_t seed = 0;
};

struct EstimateResult {
  std::vector<double> u_hat;
  double objective_value = 0.0;
  bool low_confidence = false;
  double pooled_se = 0.0;
  double median_objective = 0.0;
  std::vector<double> objectives;  // per candidate, net order
};

/// Brute-force search of the candidate net for the direction maximizing the
/// empirical contrast objective. Ties break to the lowest candidate index and
/// candidate evaluations are index-keyed, so the result does not depend on
/// the worker count. A flat objective (max - median under 3 pooled standard
/// errors) is flagged as low confidence rather than treated as an error.
inline EstimateResult estimate_direction(std::span<const double> samples,
                                         int n, int d,
                                         const EstimatorConfig& cfg,
                                         double gamma) {
  require(n >= 2, "need at least two samples");
  require(samples.size() == static_cast<std::size_t>(n) * d,
          "sample matrix size mismatch");
  const double eta = std::min(cfg.eta, 1.0 / gamma);
  const double beta = cfg.beta > 0 ? cfg.beta : default_contrast_width(gamma);
  Rng net_rng = make_stream(cfg.seed, 0x6e6574ULL);
  const std::vector<std::vector<double>> net =
      candidate_net(d, eta, cfg.net, net_rng, cfg.random_count);
  require(!net.empty(), "candidate net is empty");

  const ContrastTable table(gamma, beta);
  const std::size_t m = net.size();
  std::vector<double> means(m), vars(m);
  parallel_for(m, [&](std::size_t c) {
    const std::vector<double>& v = net[c];
    double acc = 0.0, acc_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = std::abs(
          dot(samples.subspan(static_cast<std::size_t>(i) * d, d), v));
      const double g = table(z);
      acc += g;
      acc_sq += g * g;
    }
    const double mean = acc / n;
    means[c] = mean;
    vars[c] = std::max(0.0, (acc_sq - n * mean * mean) / (n - 1));
  });

  std::size_t best = 0;
  double var_acc = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    if (means[c] > means[best]) best = c;
    var_acc += vars[c];
  }
  std::vector<double> sorted = means;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double pooled_se = std::sqrt(var_acc / m / n);

  EstimateResult result;
  result.u_hat = net[best];
  result.objective_value = means[best];
  result.median_objective = median;
  result.pooled_se = pooled_se;
  result.low_confidence = (means[best] - median) < 3.0 * pooled_se;
  result.objectives = std::move(means);
  return result;
}

/// Score oracle induced by an estimated direction: the exact pancake score
/// field with u replaced by u_hat, extended along the noising schedule.
inline std::shared_ptr<const ScoreOracle> score_from_direction(
    std::vector<double> u_hat, double gamma, double sigma,
    const DiffusionSchedule& sched) {
  require(sigma > 0, "sigma must be > 0");
  const int d = static_cast<int>(u_hat.size());
  return exact_pancake_oracle(PancakeParams(d, gamma, sigma, std::move(u_hat)),
                              sched);
}

/// Sample count sufficient for the net search at error eta and failure
/// probability delta, with unit constants.
inline long sample_size_bound(int d, double gamma, double eta, double delta) {
  require(d >= 1 && gamma > 1 && eta > 0 && eta < 1 && delta > 0 && delta < 1,
          "invalid sample bound arguments");
  const double eta4 = eta * eta * eta * eta;
  return static_cast<long>(std::ceil(d * gamma * gamma * gamma / eta4 *
                                     (std::log(1.0 / eta) + std::log(1.0 / delta))));
}

/// Hoeffding deviation scale for the empirical objective: the summands are
/// bounded by gamma sqrt(2 pi).
inline double objective_deviation_bound(double gamma, long n, double delta) {
  require(n >= 1 && delta > 0 && delta < 1, "invalid deviation arguments");
  return gamma * std::sqrt(kTwoPi) * std::sqrt(std::log(2.0 / delta) / (2.0 * n));
}

}  // namespace pancakes
