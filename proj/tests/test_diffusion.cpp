#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "pancakes/diffusion.hpp"
#include "pancakes/parallel.hpp"
#include "support.hpp"

using namespace pancakes;

namespace {

// Per-coordinate variance across a batch of reverse trajectories, with each
// trajectory on its own substream.
std::vector<double> reverse_batch_variance(const DiffusionSchedule& sched,
                                           const ScoreOracle& oracle, int runs,
                                           std::uint64_t seed) {
  const int d = oracle.dim();
  std::vector<double> finals(static_cast<std::size_t>(runs) * d);
  parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
    Rng rng = make_stream(seed, r);
    const std::vector<double> y = ddpm_reverse(sched, oracle, rng);
    std::copy(y.begin(), y.end(), finals.begin() + r * d);
  });
  std::vector<double> var(d, 0.0);
  for (int j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int r = 0; r < runs; ++r) mean += finals[r * d + j];
    mean /= runs;
    double acc = 0.0;
    for (int r = 0; r < runs; ++r) acc += sq(finals[r * d + j] - mean);
    var[j] = acc / (runs - 1);
  }
  return var;
}

// Scalar variance recurrence for the reverse chain driven by the exact
// Gaussian score, in units of the stationary variance.
double recurrence_variance(double h, int steps) {
  const double contraction = sq(2.0 - std::exp(h));
  const double injected = std::expm1(2.0 * h);
  double v = 1.0;
  for (int k = 0; k < steps; ++k) v = contraction * v + injected;
  return v;
}

struct ThrowingOracle : ScoreOracle {
  using ScoreOracle::ScoreOracle;
  void eval(int k, std::span<const double>, std::span<double>) const override {
    if (k <= 2) throw std::runtime_error("backend unavailable");
  }
};

}  // namespace

TEST_CASE("ou_sample: identity at t=0, stationarity, pancake evolution") {
  Rng rng(808);
  const std::vector<double> x0{0.3, -1.2, 0.05};
  CHECK(ou_sample(x0, 0.0, rng) == x0);

  // stationary input stays stationary
  const int n = 100000;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x{rng.normal_q(), rng.normal_q()};
    const std::vector<double> y = ou_sample(x, 0.7, rng);
    sum2 += norm2(y);
  }
  const double per_coord = sum2 / (2.0 * n);
  const double se = (1.0 / kTwoPi) * std::sqrt(2.0 / (2.0 * n));
  CHECK(std::abs(per_coord - 1.0 / kTwoPi) <= 4.0 * se);

  // pancake input evolves to the thicker pancake
  PancakeParams p(2, 4.0, 0.15, {1.0, 0.0});
  const double t = 0.3;
  const SmoothedDgParams evolved(4.0, forward_sigma(0.15, t));
  std::vector<double> proj(60000);
  const std::vector<double> base = sample(p, 60000, rng);
  for (int i = 0; i < 60000; ++i) {
    std::vector<double> x{base[2 * i], base[2 * i + 1]};
    proj[i] = dot(ou_sample(x, t, rng), p.u);
  }
  CHECK(oracle::ks_statistic(proj, [&](double z) {
          return smoothed_cdf(z, evolved);
        }) < oracle::ks_critical_1pct(proj.size()));
}

TEST_CASE("ddpm_reverse: zero steps returns the initial stationary draw") {
  const DiffusionSchedule sched(1.0, 0);
  ExactGaussianOracle oracle(3, sched);
  Rng a(77), b(77);
  const std::vector<double> y = ddpm_reverse(sched, oracle, a);
  std::vector<double> direct(3);
  for (double& c : direct) c = b.normal_q();
  CHECK(y == direct);
}

TEST_CASE("ddpm_reverse: Gaussian-score chain follows the variance recurrence") {
  const double T = 2.0;
  const int n_traj = 4000, d = 8;
  for (int steps : {10, 25, 50}) {
    const DiffusionSchedule sched(steps * (T / 50.0), steps);
    ExactGaussianOracle oracle(d, sched);
    const std::vector<double> var =
        reverse_batch_variance(sched, oracle, n_traj, 1234);
    const double want = recurrence_variance(T / 50.0, steps) / kTwoPi;
    const double se = want * std::sqrt(2.0 / (n_traj - 1));
    for (int j = 0; j < d; ++j)
      CHECK(std::abs(var[j] - want) <= 4.0 * se);
  }
}

TEST_CASE("ddpm_reverse: stationary bias is first order in the step size") {
  // the chain's fixed-point variance exceeds the stationary one by ~h
  for (int steps : {100, 1000}) {
    const DiffusionSchedule sched(2.0, steps);
    const double v_final = recurrence_variance(sched.step, steps);
    CHECK(std::abs(v_final - 1.0) <= 5.0 * sched.step);
  }
}

TEST_CASE("ddpm_reverse: pancake score recovers the hidden projection law") {
  PancakeParams p(2, 4.0, 0.1, {-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
  const DiffusionSchedule sched(4.0, 1000);
  auto oracle = exact_pancake_oracle(p, sched);
  const int runs = 2000;
  std::vector<double> proj(runs);
  parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
    Rng rng = make_stream(4242, r);
    proj[r] = dot(ddpm_reverse(sched, *oracle, rng), p.u);
  });
  CHECK(oracle::ks_statistic(proj, [&](double z) {
          return smoothed_cdf(z, p.marginal());
        }) < oracle::ks_critical_1pct(runs));
}

TEST_CASE("make_schedule: closed form, scaling, and the step guard") {
  const DiffusionSchedule s = make_schedule(0.1, 1.0, 2.0, 1);
  CHECK(s.total_time == Catch::Approx(std::log(20.0)).epsilon(1e-15));
  CHECK(s.steps == static_cast<int>(std::ceil(std::log(20.0) / 0.01)));
  CHECK(s.step * s.steps == Catch::Approx(s.total_time).epsilon(1e-15));

  const DiffusionSchedule s2 = make_schedule(0.1, 1.0, 2.0, 2);
  CHECK(s2.step == Catch::Approx(s.step / 2.0).epsilon(2e-2));

  CHECK_THROWS_AS(make_schedule(1e-3, 10.0, 2.0, 64), std::domain_error);
  CHECK_THROWS_AS(make_schedule(1.5, 1.0, 2.0, 1), std::domain_error);
  CHECK_THROWS_AS(make_schedule(0.1, 0.5, 2.0, 1), std::domain_error);
}

TEST_CASE("truncated oracle: wide cutoffs never fire on the Gaussian score") {
  const int d = 4;
  const DiffusionSchedule sched(1.0, 4);
  auto base = exact_gaussian_oracle(d, sched);
  const double cutoff = 10.0 * std::sqrt(static_cast<double>(d));
  auto truncated = truncated_oracle(base, cutoff);

  // chi-square tail bound for the firing probability per query
  const double x = cutoff * cutoff / kTwoPi;  // threshold for 2 pi |z|^2
  const double log_tail =
      0.5 * d * std::log(x / d) - 0.5 * (x - d);
  CHECK(std::exp(log_tail) < 1e-8);

  Rng rng(5150);
  std::vector<double> z(d), a(d), b(d);
  int fired = 0;
  for (int i = 0; i < 1000000; ++i) {
    for (double& c : z) c = rng.normal_q();
    truncated->eval(1, z, a);
    base->eval(1, z, b);
    if (a != b) ++fired;
  }
  CHECK(fired == 0);

  // a tiny cutoff zeroes everything nonzero
  auto clipped = truncated_oracle(base, 1e-6);
  std::vector<double> big{1.0, 1.0, 1.0, 1.0};
  clipped->eval(1, big, a);
  for (double c : a) CHECK(c == 0.0);
}

TEST_CASE("perturbed oracle: zero strength is the base oracle") {
  PancakeParams p(3, 3.0, 0.2, {0.0, 1.0, 0.0});
  const DiffusionSchedule sched(1.0, 8);
  auto base = exact_pancake_oracle(p, sched);
  auto same = perturbed_oracle(base, 0.0, 9);
  auto shifted = perturbed_oracle(base, 0.25, 9);
  Rng rng(3);
  std::vector<double> z(3), a(3), b(3), c(3);
  for (int i = 0; i < 50; ++i) {
    for (double& v : z) v = rng.normal_q();
    const int k = 1 + i % 8;
    base->eval(k, z, a);
    same->eval(k, z, b);
    shifted->eval(k, z, c);
    CHECK(a == b);
    double diff = 0.0;
    for (int j = 0; j < 3; ++j) diff += sq(c[j] - a[j]);
    CHECK(std::sqrt(diff) == Catch::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("exact pancake oracle agrees with the score at the grid times") {
  PancakeParams p(2, 4.0, 0.2, {0.6, 0.8});
  const DiffusionSchedule sched(1.0, 5);
  auto oracle = exact_pancake_oracle(p, sched);
  Rng rng(17);
  std::vector<double> z(2), got(2);
  for (int k = 1; k <= 5; ++k) {
    const PancakeParams pk = forward_params(p, k * sched.step);
    for (int i = 0; i < 10; ++i) {
      for (double& v : z) v = rng.normal_q();
      oracle->eval(k, z, got);
      CHECK(got == score(pk, z));
    }
  }
}

TEST_CASE("oracle failures carry the step index") {
  const DiffusionSchedule sched(1.0, 6);
  ThrowingOracle oracle(2, sched);
  Rng rng(1);
  try {
    ddpm_reverse(sched, oracle, rng);
    FAIL("expected an error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("step index 2") != std::string::npos);
  }
}

TEST_CASE("reverse batches are identical across worker counts") {
  PancakeParams p(2, 4.0, 0.2, {1.0, 0.0});
  const DiffusionSchedule sched(1.0, 50);
  auto oracle = exact_pancake_oracle(p, sched);
  auto run_all = [&](const char* threads) {
    setenv("PANCAKE_THREADS", threads, 1);
    std::vector<double> finals(40 * 2);
    parallel_for(40, [&](std::size_t r) {
      Rng rng = make_stream(606, r);
      const std::vector<double> y = ddpm_reverse(sched, *oracle, rng);
      finals[2 * r] = y[0];
      finals[2 * r + 1] = y[1];
    });
    unsetenv("PANCAKE_THREADS");
    return finals;
  };
  CHECK(run_all("1") == run_all("8"));
}
