#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/gauss1d.hpp"
#include "pancakes/rng.hpp"

namespace pancakes {

/// A d-dimensional distribution that is a smoothed discrete Gaussian along a
/// hidden unit direction and N(0, 1/(2*pi)) on the orthogonal complement.
/// The direction must arrive normalized (within 1e-6); it is stored
/// renormalized to 1e-12 so downstream projections stay consistent.
struct PancakeParams {
  int dim;
  double gamma;
  double sigma;
  std::vector<double> u;

  PancakeParams(int dim_, double gamma_, double sigma_, std::vector<double> u_)
      : dim(dim_), gamma(gamma_), sigma(sigma_), u(std::move(u_)) {
    require(dim >= 1, "dim must be >= 1");
    require(static_cast<int>(u.size()) == dim, "direction size must equal dim");
    (void)SmoothedDgParams(gamma, sigma);  // validates gamma > 1, sigma >= 0
    double norm2 = 0.0;
    for (double c : u) {
      require_finite(c, "direction coordinate");
      norm2 += c * c;
    }
    const double norm = std::sqrt(norm2);
    require(std::abs(norm - 1.0) <= 1e-6,
            "direction must be a unit vector (within 1e-6)");
    for (double& c : u) c /= norm;
  }

  SmoothedDgParams marginal() const { return {gamma, sigma}; }

  /// Effective width s = sigma / sqrt(1 + sigma^2).
  double s() const { return marginal().s(); }

  /// Spacing in the scaled parametrization used by earlier treatments.
  double zeta() const { return gamma / std::sqrt(1.0 + sigma * sigma); }

  /// Thickness in the scaled parametrization.
  double beta_prev() const {
    return sigma * gamma / std::sqrt(1.0 + sigma * sigma);
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }

/// Uniform direction on the unit sphere.
inline std::vector<double> random_unit_vector(int dim, Rng& rng) {
  require(dim >= 1, "dim must be >= 1");
  std::vector<double> v(dim);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& c : v) {
      c = rng.normal();
      n2 += c * c;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& c : v) c *= inv;
  return v;
}

/// n i.i.d. rows, row-major n x d: lattice-valued coordinate along u plus an
/// independent N(0, I/(2*pi)) orthogonal part.
inline std::vector<double> sample(const PancakeParams& p, int n, Rng& rng) {
  require(n >= 1, "n must be >= 1");
  const DiscreteGaussianSampler lattice(p.gamma);
  const double sqrt1ps2 = std::sqrt(1.0 + p.sigma * p.sigma);
  std::vector<double> out(static_cast<std::size_t>(n) * p.dim);
  std::vector<double> g(p.dim);
  for (int i = 0; i < n; ++i) {
    const double x = lattice.sample(rng);
    const double z = rng.normal_q();
    const double y =
        p.sigma == 0.0 ? x : (x + p.sigma * z) / sqrt1ps2;
    for (int j = 0; j < p.dim; ++j) g[j] = rng.normal_q();
    const double shift = y - dot(g, p.u);
    double* row = out.data() + static_cast<std::size_t>(i) * p.dim;
    for (int j = 0; j < p.dim; ++j) row[j] = g[j] + shift * p.u[j];
  }
  return out;
}

/// log density: quadratic Gaussian part plus the 1-D log ratio along u.
inline double log_density(const PancakeParams& p, std::span<const double> x,
                          const ThetaSumPolicy& policy = {}) {
  require(static_cast<int>(x.size()) == p.dim, "point dimension mismatch");
  return -kPi * norm2(x) +
         log_likelihood_ratio(dot(x, p.u), p.marginal(), policy);
}

/// Gradient of the log density: -2 pi x plus the ratio derivative along u.
inline std::vector<double> score(const PancakeParams& p,
                                 std::span<const double> x,
                                 const ThetaSumPolicy& policy = {}) {
  require(static_cast<int>(x.size()) == p.dim, "point dimension mismatch");
  const double r = score_ratio(dot(x, p.u), p.marginal(), policy);
  std::vector<double> out(p.dim);
  for (int j = 0; j < p.dim; ++j) out[j] = -kTwoPi * x[j] + r * p.u[j];
  return out;
}

/// Parameters after running the noising process for time t: same direction
/// and spacing, thicker smoothing.
inline PancakeParams forward_params(const PancakeParams& p, double t) {
  return {p.dim, p.gamma, forward_sigma(p.sigma, t), p.u};
}

/// Second moment of the 1-D smoothed lattice coordinate, in closed theta-sum
/// form: the lattice part is 1/(2*pi) minus a dual-lattice correction, and
/// smoothing mixes it with the Gaussian moment.
inline double second_moment_exact_1d(double gamma, double sigma,
                                     const ThetaSumPolicy& policy = {}) {
  require_finite(gamma, "gamma");
  require_finite(sigma, "sigma");
  require(gamma > 0 && sigma >= 0, "gamma > 0 and sigma >= 0 required");
  policy.validate();
  const int jmax = std::max<int>(
      1, static_cast<int>(std::ceil(policy.radius_sigmas / gamma)) + 1);
  double dual = 0.0;
  for (int j = jmax; j >= 1; --j)
    dual += 2.0 * sq(j * gamma) * std::exp(-kPi * sq(j * gamma));
  const double lattice_moment =
      1.0 / kTwoPi - gamma * dual / gaussian_mass(1.0 / gamma, 1.0, policy);
  const double s2 = sigma * sigma;
  return (lattice_moment + s2 / kTwoPi) / (1.0 + s2);
}

/// E ||x||^2, never above d/(2*pi).
inline double second_moment(const PancakeParams& p) {
  return second_moment_exact_1d(p.gamma, p.sigma) + (p.dim - 1) / kTwoPi;
}

/// Certified Lipschitz constant of the score field.
inline double lipschitz_bound(const PancakeParams& p) {
  require(p.sigma > 0, "sigma must be > 0 for the Lipschitz bound");
  const double s = p.s();
  return kTwoPi + 100.0 * kPi * kPi / (s * s * s * s);
}

}  // namespace pancakes
