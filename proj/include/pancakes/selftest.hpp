#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/distinguish.hpp"
#include "pancakes/divergence.hpp"
#include "pancakes/estimate.hpp"
#include "pancakes/gauss1d.hpp"
#include "pancakes/hermite.hpp"
#include "pancakes/pancake.hpp"
#include "pancakes/quadrature.hpp"

namespace pancakes {

struct SelftestResult {
  std::string name;
  bool passed;
  std::string detail;
};

/// Fast cross-module invariant sweep used by the `selftest` subcommand.
/// Covers the identities that do not need Monte Carlo volume; the full
/// statistical suites live in the test binaries.
inline std::vector<SelftestResult> selftest() {
  std::vector<SelftestResult> results;
  auto check = [&](const std::string& name, bool ok,
                   const std::string& detail = "") {
    results.push_back({name, ok, detail});
  };

  try {
    // Dual-sum identity for lattice masses on a log grid.
    bool ok = true;
    for (double lc = -1.0; lc <= 1.0; lc += 0.5)
      for (double ls = -1.0; ls <= 1.0; ls += 0.5) {
        const double c = std::pow(10.0, lc), s = std::pow(10.0, ls);
        const double primal = gaussian_mass(c, s);
        const double dual = (s / c) * gaussian_mass(1.0 / c, 1.0 / s);
        if (std::abs(primal - dual) > 1e-12 * primal) ok = false;
      }
    check("poisson_duality", ok);

    // Ratio evaluators differentiate the log ratio.
    SmoothedDgParams p(3.0, 0.2);
    ok = score_ratio(0.0, p) == 0.0;
    for (double z : {-0.9, -0.31, 0.17, 0.44, 1.3}) {
      const double h = 1e-6;
      const double fd = (log_likelihood_ratio(z + h, p) -
                         log_likelihood_ratio(z - h, p)) /
                        (2 * h);
      const double f = score_ratio(z, p);
      if (std::abs(fd - f) > 1e-5 * std::max(1.0, std::abs(f))) ok = false;
      const double fd2 = (score_ratio(z + h, p) - score_ratio(z - h, p)) / (2 * h);
      if (std::abs(fd2 - curvature_ratio(z, p).f_prime) >
          1e-3 * std::max(1.0, std::abs(fd2)))
        ok = false;
    }
    check("score_is_gradient", ok);

    // Direct and mixture densities agree.
    SmoothedDgParams pd(4.0, 0.25);
    ok = true;
    for (double z = -1.5; z <= 1.5; z += 0.05)
      if (std::abs(density_smoothed(z, pd) - density_smoothed_mixture(z, pd)) >
          1e-10 * std::max(1.0, density_smoothed(z, pd)))
        ok = false;
    check("density_mixture_form", ok);

    // Noising semigroup.
    ok = true;
    for (double t1 : {0.1, 0.7})
      for (double t2 : {0.05, 1.3}) {
        const double two_step = forward_sigma(forward_sigma(0.3, t1), t2);
        const double one_step = forward_sigma(0.3, t1 + t2);
        if (std::abs(two_step - one_step) > 1e-12 * one_step) ok = false;
      }
    check("forward_sigma_semigroup", ok && forward_sigma(0.37, 0.0) == 0.37);

    // Orthonormality of the polynomial basis (low degrees).
    HermiteBasis basis(8);
    ok = true;
    for (int j = 0; j <= 6; ++j)
      for (int k = j; k <= 6; ++k) {
        const double g = integrate(
            [&](double x) {
              return basis.eval(j, x) * basis.eval(k, x) * std::exp(-kPi * x * x);
            },
            -6.0, 6.0, 96, 16);
        if (std::abs(g - (j == k ? 1.0 : 0.0)) > 1e-8) ok = false;
      }
    check("hermite_orthonormal", ok);
    check("alpha_parity", hermite_alpha(0, 2.0) == 1.0 &&
                              hermite_alpha(3, 2.0) == 0.0 &&
                              hermite_alpha(7, 1.5) == 0.0);

    // Schedule construction and the decision rule.
    const DiffusionSchedule sched = make_schedule(0.1, 1.0, 2.0, 1);
    check("make_schedule",
          std::abs(sched.total_time - std::log(20.0)) < 1e-12 &&
              sched.steps == static_cast<int>(std::ceil(std::log(20.0) / 0.01)) &&
              std::abs(sched.step * sched.steps - sched.total_time) < 1e-12);
    check("decide_boundary", decide(0.0, 1.0) == Verdict::gaussian &&
                                 decide(0.5, 1.0) == Verdict::gaussian &&
                                 decide(1.0, 1.0) == Verdict::pancakes);

    // Candidate net geometry in d = 2.
    Rng net_rng(7);
    const auto net = candidate_net(2, 0.1, NetMode::angular_grid, net_rng);
    ok = static_cast<int>(net.size()) ==
         static_cast<int>(std::ceil(kPi / 0.1));
    for (const auto& v : net)
      if (std::abs(norm2(v) - 1.0) > 1e-12) ok = false;
    check("candidate_net_d2", ok);

    // Divergences: range and the Pinsker relation at one point.
    const double tv = tv_1d(3.0, 0.5);
    const double kl = kl_1d(3.0, 0.5);
    check("divergence_ranges",
          tv >= 0.0 && tv <= 1.0 && kl >= 0.0 && 2.0 * tv * tv <= kl);

    // Determinism of the seeded samplers and the statistic.
    {
      Rng a(123), b(123);
      PancakeParams pp(3, 2.5, 0.3, {1.0, 0.0, 0.0});
      ok = sample(pp, 50, a) == sample(pp, 50, b);
      const DiffusionSchedule s2(1.0, 4);
      auto oracle = exact_pancake_oracle(pp, s2);
      DistinguisherConfig cfg{64, default_truncation(3, 0.3), 1.0, s2, 0.01, 5};
      const Decision d1 = delta_hat(*oracle, cfg, 99);
      const Decision d2 = delta_hat(*oracle, cfg, 99);
      ok = ok && d1.delta_hat == d2.delta_hat && d1.per_step == d2.per_step;
      check("seeded_determinism", ok);
    }

    // Periodic density: exact period-1 shift and unit mass on a period.
    ok = true;
    for (double z : {-0.4, 0.0, 0.23, 0.77})
      for (double s : {0.5, 1.0, 2.0})
        if (periodic_gaussian(z, s) != periodic_gaussian(z + 1.0, s)) ok = false;
    const double mass =
        integrate([](double z) { return periodic_gaussian(z, 1.0); }, 0.0, 1.0,
                  64, 16);
    check("periodic_gaussian", ok && std::abs(mass - 1.0) < 1e-9);
  } catch (const std::exception& e) {
    results.push_back({"exception", false, e.what()});
  }
  return results;
}

}  // namespace pancakes
