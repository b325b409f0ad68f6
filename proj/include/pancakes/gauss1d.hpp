#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/rng.hpp"

namespace pancakes {

/// Truncation policy for theta sums. Terms are kept while their Gaussian
/// exponent stays above -pi * radius_sigmas^2, so the relative truncation
/// error is below exp(-pi * radius_sigmas^2) (~1e-110 at the default). The
/// nearest lattice point and its neighbors are always included.
struct ThetaSumPolicy {
  double radius_sigmas = 9.0;
  int min_terms = 3;

  void validate() const {
    require(std::isfinite(radius_sigmas) && radius_sigmas > 0,
            "radius_sigmas must be positive");
    require(min_terms >= 1, "min_terms must be >= 1");
  }
};

/// Parameters of the smoothed discrete Gaussian: lattice spacing 1/gamma and
/// smoothing level sigma. sigma = 0 is the atomic lattice distribution; it is
/// accepted by samplers but rejected by density/ratio evaluators.
struct SmoothedDgParams {
  double gamma;
  double sigma;

  SmoothedDgParams(double gamma_, double sigma_) : gamma(gamma_), sigma(sigma_) {
    require_finite(gamma, "gamma");
    require_finite(sigma, "sigma");
    require(gamma > 1.0, "gamma must be > 1");
    require(sigma >= 0.0, "sigma must be >= 0");
  }

  /// Effective width s = sigma / sqrt(1 + sigma^2), always recomputed.
  double s() const { return sigma / std::sqrt(1.0 + sigma * sigma); }
};

namespace detail {

/// sum over k in Z of exp(-pi * (r k)^2) for r >= 1 (fast-decaying side).
inline double theta_sum_unit(double r, const ThetaSumPolicy& policy) {
  const int kmax =
      std::max<int>(static_cast<int>(std::ceil(policy.radius_sigmas / r)),
                    std::max(1, policy.min_terms / 2));
  double acc = 1.0;
  for (int k = 1; k <= kmax; ++k) acc += 2.0 * std::exp(-kPi * sq(r * k));
  return acc;
}

}  // namespace detail

/// Gaussian mass of the 1-D lattice spacing*Z under width `width`:
/// sum over k of exp(-pi * (spacing*k / width)^2). When spacing < width the
/// primal terms decay slowly, so the sum is evaluated through its Poisson
/// dual (width/spacing) * mass of (1/spacing)Z under width 1/width, whose
/// terms decay at the reciprocal rate.
inline double gaussian_mass(double spacing, double width,
                            const ThetaSumPolicy& policy = {}) {
  require_finite(spacing, "spacing");
  require_finite(width, "width");
  require(spacing > 0 && width > 0, "spacing and width must be positive");
  policy.validate();
  const double q = spacing / width;
  if (q >= 1.0) return detail::theta_sum_unit(q, policy);
  return (width / spacing) * detail::theta_sum_unit(width / spacing, policy);
}

namespace detail {

/// Softmax-weighted moments of the discrete Gaussian of width s on the coset
/// (1/gamma)Z - zt. Weights are normalized against the nearest lattice point
/// (always the largest term), and the +/-j pairs are accumulated together so
/// that the first moment vanishes exactly at symmetric arguments.
struct CosetMoments {
  double m0;        // sum of weights relative to the peak term
  double m1;        // first moment of x over the coset
  double m2;        // second moment
  double peak_log;  // log of the peak weight, -pi * dist(zt, L)^2 / s^2
};

inline CosetMoments coset_moments(double zt, double gamma, double inv_s2_pi,
                                  int window) {
  const double kd = std::nearbyint(zt * gamma);
  const double x0 = kd / gamma - zt;
  const double e0 = -inv_s2_pi * x0 * x0;
  double s0 = 1.0, s1 = x0, s2 = x0 * x0;
  for (int j = 1; j <= window; ++j) {
    const double xp = (kd + j) / gamma - zt;
    const double xm = (kd - j) / gamma - zt;
    const double wp = std::exp(-inv_s2_pi * xp * xp - e0);
    const double wm = std::exp(-inv_s2_pi * xm * xm - e0);
    s0 += wp + wm;
    s1 += wp * xp + wm * xm;
    s2 += wp * xp * xp + wm * xm * xm;
  }
  return {s0, s1 / s0, s2 / s0, e0};
}

}  // namespace detail

/// Shared evaluator for the likelihood ratio of the smoothed discrete
/// Gaussian against N(0, 1/(2*pi)) and its first two log-derivatives. All
/// quantities go through coset moments with softmax weights; ratios are never
/// formed from two separately summed theta series.
class SmoothedRatioEvaluator {
 public:
  SmoothedRatioEvaluator(const SmoothedDgParams& p,
                         const ThetaSumPolicy& policy = {})
      : gamma_(p.gamma), sigma_(p.sigma) {
    require(p.sigma > 0, "sigma must be > 0 for density/ratio evaluation");
    policy.validate();
    const double one_p_s2 = 1.0 + sigma_ * sigma_;
    sqrt1ps2_ = std::sqrt(one_p_s2);
    s_ = sigma_ / sqrt1ps2_;
    inv_s2_pi_ = kPi / (s_ * s_);
    coef_ = kTwoPi / (sigma_ * s_);
    window_ = std::max<int>(
        static_cast<int>(std::ceil(policy.radius_sigmas * s_ * gamma_)),
        std::max(1, policy.min_terms / 2));
    log_norm_ = 0.5 * std::log1p(sigma_ * sigma_) - std::log(sigma_) -
                std::log(gaussian_mass(1.0 / gamma_, 1.0, policy));
  }

  /// log of the likelihood ratio; finite for every finite z.
  double log_ratio(double z) const {
    const auto m = moments(z);
    return log_norm_ + m.peak_log + std::log(m.m0);
  }

  /// (d/dz) log ratio, as a scaled coset first moment.
  double ratio_derivative(double z) const {
    return coef_ * moments(z).m1;
  }

  struct Curvature {
    double t2_over_t;
    double f_prime;
  };

  /// Second derivative data: T''/T and f' = T''/T - (T'/T)^2.
  Curvature curvature(double z) const {
    const auto m = moments(z);
    const double ratio = coef_ * m.m1;
    const double t2 = coef_ * coef_ * (m.m2 - s_ * s_ / kTwoPi);
    return {t2, t2 - ratio * ratio};
  }

  double density(double z) const { return std::exp(-kPi * z * z + log_ratio(z)); }

  double s() const { return s_; }
  double gamma() const { return gamma_; }
  double sigma() const { return sigma_; }

 private:
  detail::CosetMoments moments(double z) const {
    return detail::coset_moments(z / sqrt1ps2_, gamma_, inv_s2_pi_, window_);
  }

  double gamma_, sigma_, sqrt1ps2_, s_, inv_s2_pi_, coef_, log_norm_;
  int window_;
};

/// log T(z): likelihood ratio of the smoothed discrete Gaussian vs Q.
inline double log_likelihood_ratio(double z, const SmoothedDgParams& p,
                                   const ThetaSumPolicy& policy = {}) {
  require_finite(z, "z");
  return SmoothedRatioEvaluator(p, policy).log_ratio(z);
}

/// (T'/T)(z).
inline double score_ratio(double z, const SmoothedDgParams& p,
                          const ThetaSumPolicy& policy = {}) {
  require_finite(z, "z");
  return SmoothedRatioEvaluator(p, policy).ratio_derivative(z);
}

/// (T''/T)(z) and the derivative of T'/T.
inline SmoothedRatioEvaluator::Curvature curvature_ratio(
    double z, const SmoothedDgParams& p, const ThetaSumPolicy& policy = {}) {
  require_finite(z, "z");
  return SmoothedRatioEvaluator(p, policy).curvature(z);
}

/// Exact categorical sampler for the discrete Gaussian on (1/gamma)Z. The
/// support is truncated where the omitted mass drops below 1e-15 of the
/// total; outputs are the representable points nearest to k/gamma.
class DiscreteGaussianSampler {
 public:
  explicit DiscreteGaussianSampler(double gamma) : gamma_(gamma) {
    require_finite(gamma, "gamma");
    require(gamma > 0, "gamma must be positive");
    // exp(-pi * 16) tail: far below the 1e-15 omitted-mass requirement.
    kmax_ = static_cast<int>(std::ceil(4.0 * gamma));
    cumulative_.reserve(2 * kmax_ + 1);
    double acc = 0.0;
    for (int k = -kmax_; k <= kmax_; ++k) {
      acc += std::exp(-kPi * sq(k / gamma));
      cumulative_.push_back(acc);
    }
    total_ = acc;
  }

  double sample(Rng& rng) const {
    const double u = rng.uniform() * total_;
    auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    int idx = static_cast<int>(it - cumulative_.begin());
    if (idx > 2 * kmax_) idx = 2 * kmax_;
    return (idx - kmax_) / gamma_;
  }

 private:
  double gamma_;
  int kmax_;
  double total_;
  std::vector<double> cumulative_;
};

inline double sample_discrete(double gamma, Rng& rng) {
  return DiscreteGaussianSampler(gamma).sample(rng);
}

/// Draw from the smoothed discrete Gaussian: (x + sigma z) / sqrt(1+sigma^2)
/// with x from the lattice distribution and z ~ N(0, 1/(2*pi)).
inline double sample_smoothed(const SmoothedDgParams& p, Rng& rng) {
  const double x = sample_discrete(p.gamma, rng);
  const double z = rng.normal_q();
  if (p.sigma == 0.0) return x;
  return (x + p.sigma * z) / std::sqrt(1.0 + p.sigma * p.sigma);
}

/// Density of the smoothed discrete Gaussian, as Gaussian times ratio.
inline double density_smoothed(double z, const SmoothedDgParams& p,
                               const ThetaSumPolicy& policy = {}) {
  require_finite(z, "z");
  return SmoothedRatioEvaluator(p, policy).density(z);
}

/// Same density in mixture form: Gaussian-weighted bumps of width
/// s/sqrt(2*pi) centered on the rescaled lattice. Kept as an independent
/// evaluation route; tests cross-check it against density_smoothed.
inline double density_smoothed_mixture(double z, const SmoothedDgParams& p,
                                       const ThetaSumPolicy& policy = {}) {
  require_finite(z, "z");
  require(p.sigma > 0, "sigma must be > 0 for density evaluation");
  policy.validate();
  const double sqrt1ps2 = std::sqrt(1.0 + p.sigma * p.sigma);
  const double s = p.sigma / sqrt1ps2;
  const double norm =
      sqrt1ps2 / (p.sigma * gaussian_mass(1.0 / p.gamma, 1.0, policy));
  const int kmax = static_cast<int>(std::ceil(
                       p.gamma * (std::abs(z) * sqrt1ps2 +
                                  policy.radius_sigmas))) +
                   1;
  double acc = 0.0;
  for (int k = -kmax; k <= kmax; ++k) {
    const double lattice = k / p.gamma;
    const double center = lattice / sqrt1ps2;
    acc += std::exp(-kPi * sq(lattice)) * std::exp(-kPi * sq((z - center) / s));
  }
  return norm * acc;
}

/// CDF of the smoothed discrete Gaussian through the mixture form (erf sums).
inline double smoothed_cdf(double z, const SmoothedDgParams& p) {
  require_finite(z, "z");
  require(p.sigma > 0, "sigma must be > 0 for cdf evaluation");
  const double sqrt1ps2 = std::sqrt(1.0 + p.sigma * p.sigma);
  const double s = p.sigma / sqrt1ps2;
  const int kmax = static_cast<int>(std::ceil(4.0 * p.gamma)) + 1;
  const double scale = std::sqrt(kTwoPi) / s;  // component std is s/sqrt(2pi)
  double total = 0.0, acc = 0.0;
  for (int k = -kmax; k <= kmax; ++k) {
    const double w = std::exp(-kPi * sq(k / p.gamma));
    const double center = k / (p.gamma * sqrt1ps2);
    total += w;
    acc += w * 0.5 * std::erfc(-(z - center) * scale / std::sqrt(2.0));
  }
  return acc / total;
}

/// Smoothing level after running the noising process for time t.
inline double forward_sigma(double sigma0, double t) {
  require_finite(sigma0, "sigma0");
  require_finite(t, "t");
  require(sigma0 >= 0 && t >= 0, "sigma0 and t must be >= 0");
  return std::sqrt(std::expm1(2.0 * t) * (1.0 + sigma0 * sigma0) +
                   sigma0 * sigma0);
}

/// Periodic Gaussian density on Z with width s, rho_s(Z - z) / s. The term
/// window is centered on the nearest integer, so shifting z by one reproduces
/// the same terms and the period-1 identity holds bitwise.
inline double periodic_gaussian(double z, double s,
                                const ThetaSumPolicy& policy = {}) {
  require_finite(z, "z");
  require_finite(s, "s");
  require(s > 0, "s must be positive");
  policy.validate();
  // floor-based rounding keeps the window shift-consistent at half-integers
  const double n0 = std::floor(z + 0.5);
  const int window =
      std::max<int>(static_cast<int>(std::ceil(policy.radius_sigmas * s)),
                    std::max(1, policy.min_terms / 2));
  const double inv_s2_pi = kPi / (s * s);
  double acc = std::exp(-inv_s2_pi * sq(n0 - z));
  for (int j = 1; j <= window; ++j) {
    acc += std::exp(-inv_s2_pi * sq(n0 + j - z));
    acc += std::exp(-inv_s2_pi * sq(n0 - j - z));
  }
  return acc / s;
}

}  // namespace pancakes
