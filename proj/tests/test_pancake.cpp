#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pancakes/diffusion.hpp"
#include "pancakes/pancake.hpp"
#include "pancakes/quadrature.hpp"
#include "support.hpp"

using namespace pancakes;

namespace {

std::vector<double> row(const std::vector<double>& samples, int i, int d) {
  return {samples.begin() + static_cast<std::size_t>(i) * d,
          samples.begin() + static_cast<std::size_t>(i + 1) * d};
}

}  // namespace

TEST_CASE("params: direction validation and derived quantities") {
  CHECK_THROWS_AS(PancakeParams(2, 4.0, 0.1, {1.0, 0.5}), std::domain_error);
  CHECK_THROWS_AS(PancakeParams(2, 4.0, 0.1, {1.0}), std::domain_error);
  CHECK_THROWS_AS(PancakeParams(2, 0.9, 0.1, {1.0, 0.0}), std::domain_error);

  PancakeParams p(2, 4.0, 0.1, {1.0 + 5e-7, 0.0});
  double n2 = 0.0;
  for (double c : p.u) n2 += c * c;
  CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-12);

  PancakeParams q(3, 3.0, 0.4, {0.0, 1.0, 0.0});
  CHECK(q.zeta() == Catch::Approx(3.0 / std::sqrt(1.16)).epsilon(1e-15));
  CHECK(q.beta_prev() ==
        Catch::Approx(0.4 * 3.0 / std::sqrt(1.16)).epsilon(1e-15));
  CHECK(q.s() == Catch::Approx(0.4 / std::sqrt(1.16)).epsilon(1e-15));
}

TEST_CASE("sampling: hidden-direction projection follows the 1-D law") {
  PancakeParams p(3, 4.0, 0.2, {0.6, 0.0, 0.8});
  Rng rng(424242);
  const int n = 100000;
  const std::vector<double> xs = sample(p, n, rng);
  std::vector<double> proj(n), perp(n);
  const std::vector<double> w{0.8, 0.0, -0.6};  // orthogonal to u
  for (int i = 0; i < n; ++i) {
    const auto r = row(xs, i, 3);
    proj[i] = dot(r, p.u);
    perp[i] = dot(r, w);
  }
  CHECK(oracle::ks_statistic(proj, [&](double z) {
          return smoothed_cdf(z, p.marginal());
        }) < oracle::ks_critical_1pct(n));
  CHECK(oracle::ks_statistic(perp, [](double z) {
          return oracle::normal_cdf(z, 1.0 / kTwoPi);
        }) < oracle::ks_critical_1pct(n));
}

TEST_CASE("sampling: thin pancakes produce the banded structure") {
  PancakeParams p(2, 6.0, 0.01,
                  {-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
  Rng rng(7);
  const int n = 20000;
  const std::vector<double> xs = sample(p, n, rng);
  const double spacing = 1.0 / (6.0 * std::sqrt(1.0 + 0.01 * 0.01));
  const double width = p.s() / std::sqrt(kTwoPi);
  int banded = 0;
  for (int i = 0; i < n; ++i) {
    const double z = dot(row(xs, i, 2), p.u);
    const double dist = std::abs(z - std::nearbyint(z / spacing) * spacing);
    if (dist <= 4.0 * width) ++banded;
  }
  CHECK(banded >= static_cast<int>(0.99 * n));
}

TEST_CASE("log density integrates to one in d = 1 and d = 2") {
  {
    PancakeParams p(1, 3.0, 0.4, {1.0});
    const double mass = integrate(
        [&](double z) {
          std::vector<double> x{z};
          return std::exp(log_density(p, x));
        },
        -4.0, 4.0, 2048, 16);
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));
  }
  {
    PancakeParams p(2, 2.0, 0.5,
                    {-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
    const GaussLegendreRule& rule = gauss_legendre(8);
    const int panels = 320;
    const double lo = -3.5, hi = 3.5, w = (hi - lo) / panels;
    double mass = 0.0;
    for (int i = 0; i < panels; ++i)
      for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
        const double x0 = lo + (i + 0.5 * (1.0 + rule.nodes[a])) * w;
        double inner = 0.0;
        for (int j = 0; j < panels; ++j)
          for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
            const double x1 = lo + (j + 0.5 * (1.0 + rule.nodes[b])) * w;
            std::vector<double> x{x0, x1};
            inner += rule.weights[b] * std::exp(log_density(p, x));
          }
        mass += rule.weights[a] * inner;
      }
    mass *= w * w / 4.0;
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("log density: orthogonal shifts act only through the quadratic") {
  PancakeParams p(3, 4.0, 0.25, {0.0, 0.0, 1.0});
  const std::vector<double> x{0.3, -0.2, 0.41};
  for (double c : {-0.7, 0.33, 1.5}) {
    const std::vector<double> shifted{x[0] + c, x[1] + 0.5 * c, x[2]};
    const double lhs = log_density(p, shifted) - log_density(p, x);
    const double rhs = -kPi * (norm2(shifted) - norm2(x));
    CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
  }
}

TEST_CASE("score: origin, direction alignment, and gradient consistency") {
  PancakeParams p(3, 4.0, 0.15, {0.6, 0.0, 0.8});
  const std::vector<double> zero{0.0, 0.0, 0.0};
  for (double c : score(p, zero)) CHECK(c == 0.0);

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(3);
    for (double& c : x) c = rng.normal_q();
    const std::vector<double> s = score(p, x);
    // score + 2 pi x must be parallel to u
    std::vector<double> residual(3);
    for (int j = 0; j < 3; ++j) residual[j] = s[j] + kTwoPi * x[j];
    const double along = dot(residual, p.u);
    double cross = 0.0;
    for (int j = 0; j < 3; ++j) cross += sq(residual[j] - along * p.u[j]);
    CHECK(std::sqrt(cross) < 1e-12 * std::max(1.0, std::abs(along)));

    // finite-difference gradient of the log density
    for (int j = 0; j < 3; ++j) {
      auto pert = [&](double h) {
        std::vector<double> y = x;
        y[j] += h;
        return log_density(p, y);
      };
      const double fd = (pert(1e-6) - pert(-1e-6)) / 2e-6;
      CHECK(s[j] == Catch::Approx(fd).epsilon(1e-5).margin(2e-4));
    }
  }
}

TEST_CASE("forward params: identity, semigroup, and distributional match") {
  PancakeParams p(2, 4.0, 0.2, {1.0, 0.0});
  const PancakeParams p0 = forward_params(p, 0.0);
  CHECK(p0.sigma == p.sigma);
  CHECK(p0.u == p.u);

  const PancakeParams two_step = forward_params(forward_params(p, 0.31), 0.57);
  const PancakeParams one_step = forward_params(p, 0.88);
  CHECK(two_step.sigma == Catch::Approx(one_step.sigma).epsilon(1e-12));

  // exact one-step noising of fresh draws vs direct draws at the evolved
  // parameters, compared through the hidden-direction projection
  const double t = 0.4;
  Rng rng(99);
  const int n = 60000;
  const std::vector<double> base = sample(p, n, rng);
  const PancakeParams pt = forward_params(p, t);
  const std::vector<double> direct = sample(pt, n, rng);
  std::vector<double> evolved(n), target(n);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> y = ou_sample(row(base, i, 2), t, rng);
    evolved[i] = dot(y, p.u);
    target[i] = dot(row(direct, i, 2), pt.u);
  }
  CHECK(oracle::ks_two_sample(evolved, target) <
        oracle::ks_two_sample_critical_1pct(n, n));
}

TEST_CASE("second moment: bound, smoothing limit, and Monte Carlo") {
  for (double gamma : {1.5, 3.0, 6.0})
    for (double sigma : {0.0, 0.05, 0.25, 1.0})
      for (int d : {1, 2, 8}) {
        std::vector<double> u(d, 0.0);
        u[0] = 1.0;
        PancakeParams p(d, gamma, sigma, u);
        CHECK(second_moment(p) <= d / kTwoPi + 1e-12);
      }

  CHECK(second_moment_exact_1d(4.0, 1e4) ==
        Catch::Approx(1.0 / kTwoPi).epsilon(1e-6));

  PancakeParams p(3, 4.0, 0.2, {0.6, 0.0, 0.8});
  Rng rng(2024);
  const long n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  const std::vector<double> xs = sample(p, static_cast<int>(n), rng);
  for (long i = 0; i < n; ++i) {
    const double r2 = norm2(row(xs, static_cast<int>(i), 3));
    sum += r2;
    sum_sq += r2 * r2;
  }
  const double mean = sum / n;
  const double se = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n);
  CHECK(std::abs(mean - second_moment(p)) <= 4.0 * se);
}

TEST_CASE("lipschitz bound: closed form, grid check, monotonicity") {
  PancakeParams p(2, 4.0, 1.0, {1.0, 0.0});
  CHECK(lipschitz_bound(p) ==
        Catch::Approx(kTwoPi + 400.0 * kPi * kPi).epsilon(1e-12));
  CHECK_THROWS_AS(lipschitz_bound(PancakeParams(2, 4.0, 0.0, {1.0, 0.0})),
                  std::domain_error);

  for (double gamma : {1.5, 4.0})
    for (double sigma : {0.1, 0.5, 1.0}) {
      PancakeParams q(2, gamma, sigma, {1.0, 0.0});
      SmoothedRatioEvaluator eval(q.marginal());
      const double bound = lipschitz_bound(q);
      double worst = 0.0;
      const int grid = 4000;
      double prev = eval.ratio_derivative(-1.5) - kTwoPi * (-1.5);
      for (int i = 1; i <= grid; ++i) {
        const double z = -1.5 + 3.0 * i / grid;
        const double cur = eval.ratio_derivative(z) - kTwoPi * z;
        worst = std::max(worst, std::abs(cur - prev) / (3.0 / grid));
        prev = cur;
      }
      CHECK(worst <= bound);
    }

  double prev_bound = HUGE_VAL;
  for (double sigma : {0.1, 0.3, 1.0, 3.0}) {
    PancakeParams q(2, 4.0, sigma, {1.0, 0.0});
    CHECK(lipschitz_bound(q) < prev_bound);
    prev_bound = lipschitz_bound(q);
  }
}

TEST_CASE("rotational covariance of hidden-direction projections") {
  Rng rng(31337);
  const int n = 50000;
  const std::vector<double> u1 = random_unit_vector(4, rng);
  const std::vector<double> u2 = random_unit_vector(4, rng);
  PancakeParams p1(4, 3.0, 0.3, u1), p2(4, 3.0, 0.3, u2);
  const std::vector<double> a = sample(p1, n, rng);
  const std::vector<double> b = sample(p2, n, rng);
  std::vector<double> pa(n), pb(n);
  for (int i = 0; i < n; ++i) {
    pa[i] = dot(row(a, i, 4), u1);
    pb[i] = dot(row(b, i, 4), u2);
  }
  CHECK(oracle::ks_two_sample(pa, pb) <
        oracle::ks_two_sample_critical_1pct(n, n));
}

TEST_CASE("score integrates to zero against the density") {
  PancakeParams p(2, 4.0, 0.2, {1.0, 0.0});
  Rng rng(555);
  const int n = 200000;
  const std::vector<double> xs = sample(p, n, rng);
  std::vector<double> mean(2, 0.0), second(2, 0.0);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> s = score(p, row(xs, i, 2));
    for (int j = 0; j < 2; ++j) {
      mean[j] += s[j];
      second[j] += s[j] * s[j];
    }
  }
  for (int j = 0; j < 2; ++j) {
    mean[j] /= n;
    const double se = std::sqrt(second[j] / n / n);
    CHECK(std::abs(mean[j]) <= 4.0 * se);
  }
}
