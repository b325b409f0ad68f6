#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/gauss1d.hpp"
#include "pancakes/pancake.hpp"
#include "pancakes/quadrature.hpp"
#include "pancakes/rng.hpp"

namespace pancakes {

/// Panel scheme for the 1-D divergence integrals. Panels align to the
/// lattice of density peaks; the per-period count is raised as needed so a
/// peak of width s/sqrt(2 pi) is crossed by at least 8 panels.
struct QuadSpec {
  double radius = 4.0;
  int panels_per_period = 64;
  int panel_order = 16;

  void validate() const {
    require(std::isfinite(radius) && radius > 0, "radius must be positive");
    require(panels_per_period >= 1, "panels_per_period must be >= 1");
    require(panel_order >= 2 && panel_order <= 64,
            "panel_order must be in [2, 64]");
  }

  int effective_panels(double period, double peak_width) const {
    const int needed =
        static_cast<int>(std::ceil(8.0 * period / peak_width));
    return std::max(panels_per_period, needed);
  }
};

struct TvResult {
  double value = 0.0;
  double tail_bound = 0.0;
  int crossings = 0;
};

namespace detail {

/// Gaussian mass of N(0, 1/(2 pi)) outside [-r, r].
inline double gaussian_tail_mass(double r) {
  return std::erfc(r * std::sqrt(kPi));
}

/// Mass of the smoothed lattice distribution outside [-r, r].
inline double smoothed_tail_mass(double r, const SmoothedDgParams& p) {
  return std::max(0.0, 1.0 - (smoothed_cdf(r, p) - smoothed_cdf(-r, p)));
}

}  // namespace detail

/// Total variation between the smoothed lattice distribution and the
/// stationary Gaussian: (1/2) integral of |density difference|, by
/// lattice-aligned panels. The difference is evaluated as
/// exp(-pi z^2) |expm1(log T)| so near-equal densities do not cancel, and
/// panels are split at the sign changes of T - 1, where the absolute value
/// has a kink that plain Gauss-Legendre panels would integrate poorly.
/// The atomic case is mutually singular with the Gaussian: tv = 1 exactly.
inline TvResult tv_1d_detailed(double gamma, double sigma,
                               const QuadSpec& spec = {}) {
  spec.validate();
  if (sigma == 0.0) {
    (void)SmoothedDgParams(gamma, sigma);
    return {1.0, 0.0, 0};
  }
  const SmoothedDgParams p(gamma, sigma);
  const SmoothedRatioEvaluator eval(p);
  const double sqrt1ps2 = std::sqrt(1.0 + sigma * sigma);
  const double period = 1.0 / (gamma * sqrt1ps2);
  const double peak_width = eval.s() / std::sqrt(kTwoPi);
  const int panels = spec.effective_panels(period, peak_width);
  const int half_cells = static_cast<int>(std::ceil(spec.radius / period));
  const GaussLegendreRule& rule = gauss_legendre(spec.panel_order);

  auto signed_diff = [&](double z) { return std::expm1(eval.log_ratio(z)); };
  auto abs_integrand = [&](double z) {
    return std::exp(-kPi * z * z) * std::abs(signed_diff(z));
  };

  TvResult result;
  double acc = 0.0;
  for (int cell = -half_cells; cell < half_cells; ++cell) {
    const double base = cell * period;
    double prev_edge = base;
    double prev_sign = signed_diff(prev_edge);
    for (int q = 1; q <= panels; ++q) {
      const double edge = base + q * period / panels;
      const double sign_here = signed_diff(edge);
      if ((prev_sign < 0) != (sign_here < 0) && prev_sign != 0.0) {
        // bracketed sign change: bisect the crossing and split the panel
        double lo = prev_edge, hi = edge;
        double flo = prev_sign;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fmid = signed_diff(mid);
          if ((flo < 0) == (fmid < 0)) {
            lo = mid;
            flo = fmid;
          } else {
            hi = mid;
          }
        }
        const double root = 0.5 * (lo + hi);
        acc += integrate_panel(abs_integrand, prev_edge, root, rule);
        acc += integrate_panel(abs_integrand, root, edge, rule);
        ++result.crossings;
      } else {
        acc += integrate_panel(abs_integrand, prev_edge, edge, rule);
      }
      prev_edge = edge;
      prev_sign = sign_here;
    }
  }
  result.value = std::min(1.0, std::max(0.0, 0.5 * acc));
  result.tail_bound =
      0.5 * (detail::smoothed_tail_mass(half_cells * period, p) +
             detail::gaussian_tail_mass(half_cells * period));
  return result;
}

inline double tv_1d(double gamma, double sigma, const QuadSpec& spec = {}) {
  return tv_1d_detailed(gamma, sigma, spec).value;
}

/// KL divergence of the smoothed lattice distribution from the Gaussian:
/// integral of density * log T over the same panel scheme.
inline double kl_1d(double gamma, double sigma, const QuadSpec& spec = {}) {
  spec.validate();
  const SmoothedDgParams p(gamma, sigma);
  require(sigma > 0, "sigma must be > 0: the atomic case has infinite kl");
  const SmoothedRatioEvaluator eval(p);
  const double sqrt1ps2 = std::sqrt(1.0 + sigma * sigma);
  const double period = 1.0 / (gamma * sqrt1ps2);
  const double peak_width = eval.s() / std::sqrt(kTwoPi);
  const int panels = spec.effective_panels(period, peak_width);
  const int half_cells = static_cast<int>(std::ceil(spec.radius / period));
  auto integrand = [&](double z) {
    const double log_t = eval.log_ratio(z);
    return std::exp(log_t - kPi * z * z) * log_t;
  };
  double acc = integrate(integrand, -half_cells * period, half_cells * period,
                         2 * half_cells * panels, spec.panel_order);
  return std::max(0.0, acc);
}

struct WitnessReport {
  double delta = 0.0;       // smallest admissible interval-mass slack
  double halfwidth = 0.0;   // interval half width around each lattice point
  double lattice_spacing = 0.0;
  double a_mass = 0.0;
  double q_mass = 0.0;
  double gap = 0.0;
};

/// Threshold below which the witness construction applies.
inline double tv_witness_threshold() {
  return 1.0 / (12.0 * std::sqrt(2.0 * std::log(2.0)));
}

/// Explicit set witnessing the TV lower bound: the union of intervals of
/// half-width s sqrt(log(1/delta)) around the rescaled lattice, where delta
/// in (0, 1/4] is the smallest value with gamma sigma <= delta /
/// (3 sqrt(log(1/delta))) (solved by bisection; no closed form). Interval
/// masses are erf sums under both distributions.
inline WitnessReport tv_witness(double gamma, double sigma) {
  const SmoothedDgParams p(gamma, sigma);
  require(sigma > 0, "sigma must be > 0");
  const double product = gamma * sigma;
  require(product < tv_witness_threshold(),
          "gamma * sigma must be below 1/(12 sqrt(2 log 2))");

  auto slack = [](double d) { return d / (3.0 * std::sqrt(std::log(1.0 / d))); };
  double lo = 1e-12, hi = 0.25;
  require(slack(hi) >= product, "witness bisection bracket failed");
  while (slack(lo) > product) lo *= 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (slack(mid) >= product)
      hi = mid;
    else
      lo = mid;
  }
  const double delta = hi;

  const double sqrt1ps2 = std::sqrt(1.0 + sigma * sigma);
  const double s = p.s();
  const double w = s * std::sqrt(std::log(1.0 / delta));
  const double spacing = 1.0 / (gamma * sqrt1ps2);
  const int kmax = static_cast<int>(std::ceil(6.0 / spacing)) + 1;

  double a_mass = 0.0, q_mass = 0.0;
  const double q_scale = std::sqrt(kTwoPi);  // Q std is 1/sqrt(2 pi)
  for (int k = -kmax; k <= kmax; ++k) {
    const double center = k * spacing;
    a_mass += smoothed_cdf(center + w, p) - smoothed_cdf(center - w, p);
    q_mass += 0.5 * (std::erf((center + w) * q_scale / std::sqrt(2.0)) -
                     std::erf((center - w) * q_scale / std::sqrt(2.0)));
  }
  return {delta, w, spacing, a_mass, q_mass, a_mass - q_mass};
}

enum class BoundStatus { pass, fail, not_applicable };

struct BoundCheck {
  std::string name;
  BoundStatus status = BoundStatus::not_applicable;
  double measured = 0.0;
  double bound = 0.0;
  std::string note;
};

struct BoundsReport {
  double gamma = 0.0;
  double sigma = 0.0;
  int dim = 0;
  std::vector<BoundCheck> checks;
  bool all_passed = true;  // not_applicable entries do not count
};

/// Evaluates every analytic bound the library certifies at one parameter
/// point: second moment (exact and Monte Carlo), the uniform score-ratio
/// bound, the score Lipschitz bound, the TV lower bound in the thin regime,
/// the TV upper bound in the smooth regime, and the KL upper bound.
inline BoundsReport bounds_report(double gamma, double sigma, int dim,
                                  std::uint64_t seed = 20240801,
                                  long mc_samples = 1000000) {
  (void)SmoothedDgParams(gamma, sigma);
  require(dim >= 1, "dim must be >= 1");
  BoundsReport report;
  report.gamma = gamma;
  report.sigma = sigma;
  report.dim = dim;

  auto add = [&](BoundCheck check) {
    if (check.status == BoundStatus::fail) report.all_passed = false;
    report.checks.push_back(std::move(check));
  };

  // Second moment: exact theta-sum value against d/(2 pi), then Monte Carlo
  // against the exact value at 4 standard errors.
  const double m2 = second_moment_exact_1d(gamma, sigma) + (dim - 1) / kTwoPi;
  add({"second_moment_bound",
       m2 <= dim / kTwoPi + 1e-12 ? BoundStatus::pass : BoundStatus::fail, m2,
       dim / kTwoPi, "exact value vs d/(2 pi)"});
  {
    Rng rng = make_stream(seed, 1);
    const SmoothedDgParams p(gamma, sigma);
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < mc_samples; ++i) {
      double r2 = sq(sample_smoothed(p, rng));
      for (int j = 1; j < dim; ++j) r2 += sq(rng.normal_q());
      sum += r2;
      sum_sq += r2 * r2;
    }
    const double mean = sum / mc_samples;
    const double var =
        std::max(0.0, (sum_sq - mc_samples * mean * mean) / (mc_samples - 1));
    const double se = std::sqrt(var / mc_samples);
    add({"second_moment_mc",
         std::abs(mean - m2) <= 4.0 * se ? BoundStatus::pass : BoundStatus::fail,
         mean, m2, "Monte Carlo vs exact, 4 SE"});
  }

  if (sigma > 0) {
    const SmoothedRatioEvaluator eval({gamma, sigma});
    const double s = eval.s();
    const double ratio_bound = 8.0 * kPi / (s * s);
    const double lipschitz = kTwoPi + 100.0 * kPi * kPi / (s * s * s * s);
    const double period = std::sqrt(1.0 + sigma * sigma) / gamma;
    const int per_period = 512;
    const int points = std::max(
        4096, static_cast<int>(std::ceil(8.0 / period)) * per_period);
    double max_ratio = 0.0, max_quotient = 0.0;
    double prev_score = 0.0;
    const double step = 8.0 / points;
    for (int i = 0; i <= points; ++i) {
      const double z = -4.0 + i * step;
      const double f = eval.ratio_derivative(z);
      const double score = -kTwoPi * z + f;
      max_ratio = std::max(max_ratio, std::abs(f));
      if (i > 0)
        max_quotient =
            std::max(max_quotient, std::abs(score - prev_score) / step);
      prev_score = score;
    }
    add({"score_uniform_bound",
         max_ratio <= ratio_bound ? BoundStatus::pass : BoundStatus::fail,
         max_ratio, ratio_bound, "grid max |T'/T| vs 8 pi / s^2"});
    add({"score_lipschitz",
         max_quotient <= lipschitz ? BoundStatus::pass : BoundStatus::fail,
         max_quotient, lipschitz,
         "grid Lipschitz quotient vs 2 pi + 100 pi^2 / s^4"});
  } else {
    add({"score_uniform_bound", BoundStatus::not_applicable, 0.0, 0.0,
         "atomic case has no score"});
    add({"score_lipschitz", BoundStatus::not_applicable, 0.0, 0.0,
         "atomic case has no score"});
  }

  const bool lower_applies = gamma * sigma < tv_witness_threshold();
  const bool upper_applies = sigma >= 2.0 / gamma;
  double tv = -1.0;
  if (lower_applies || upper_applies) tv = tv_1d(gamma, sigma);
  if (lower_applies)
    add({"tv_lower", tv > 0.5 ? BoundStatus::pass : BoundStatus::fail, tv, 0.5,
         "thin regime: tv must exceed 1/2"});
  else
    add({"tv_lower", BoundStatus::not_applicable, 0.0, 0.5,
         "gamma * sigma above the thin-regime threshold"});
  if (upper_applies) {
    const double s_up = gamma * sigma / std::sqrt(1.0 + sigma * sigma);
    const double bound = 8.0 * std::exp(-kPi * s_up * s_up);
    add({"tv_upper", tv <= bound ? BoundStatus::pass : BoundStatus::fail, tv,
         bound, "smooth regime: tv vs 8 exp(-pi s^2)"});
  } else {
    add({"tv_upper", BoundStatus::not_applicable, 0.0, 0.0,
         "requires sigma >= 2/gamma"});
  }

  if (sigma > 0) {
    const double kl = kl_1d(gamma, sigma);
    const double bound = 0.5 * std::log1p(1.0 / (sigma * sigma));
    add({"kl_upper",
         kl >= 0 && kl <= bound ? BoundStatus::pass : BoundStatus::fail, kl,
         bound, "kl vs (1/2) log(1 + 1/sigma^2)"});
  } else {
    add({"kl_upper", BoundStatus::not_applicable, 0.0, 0.0,
         "atomic case has infinite kl"});
  }

  return report;
}

}  // namespace pancakes
