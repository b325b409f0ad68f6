#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/diffusion.hpp"
#include "pancakes/gauss1d.hpp"
#include "pancakes/pancake.hpp"
#include "pancakes/parallel.hpp"
#include "pancakes/quadrature.hpp"
#include "pancakes/rng.hpp"

namespace pancakes {

enum class Verdict { gaussian, pancakes };

inline const char* verdict_name(Verdict v) {
  return v == Verdict::gaussian ? "gaussian" : "pancakes";
}

struct DistinguisherConfig {
  int batch;            // Gaussian samples per step
  double truncation;    // score norm cutoff
  double threshold;     // decision threshold tau
  DiffusionSchedule schedule;
  double confidence = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    require(batch >= 1, "batch must be >= 1");
    require(std::isfinite(truncation) && truncation > 0,
            "truncation cutoff must be positive");
    require(std::isfinite(threshold) && threshold > 0,
            "threshold must be positive");
    require(confidence > 0 && confidence < 1, "confidence must be in (0,1)");
  }
};

/// Default truncation cutoff 8 (sqrt(d) + 1/sigma^2): large enough that the
/// Gaussian arm essentially never truncates at desk dimensions.
inline double default_truncation(int dim, double sigma) {
  require(dim >= 1 && sigma > 0, "dim >= 1 and sigma > 0 required");
  return 8.0 * (std::sqrt(static_cast<double>(dim)) + 1.0 / (sigma * sigma));
}

/// Batch size sufficient for +-eps accuracy of every per-step statistic with
/// failure probability delta, with unit constants: summands are
/// subexponential with parameter of order cutoff^2.
inline long batch_size_bound(double cutoff, int steps, double delta,
                             double eps) {
  require(cutoff > 0 && steps >= 1 && delta > 0 && delta < 1 && eps > 0,
          "invalid batch bound arguments");
  const double m4 = cutoff * cutoff * cutoff * cutoff;
  return static_cast<long>(std::ceil(m4 * std::log(steps / delta) / (eps * eps)));
}

struct Decision {
  double delta_hat = 0.0;
  std::vector<double> per_step;     // statistic per step index 1..N
  std::vector<double> per_step_se;  // standard error of each entry
  std::optional<Verdict> verdict;
  long truncation_events = 0;
};

/// Empirical certificate of Gaussianity: for each step index k, averages
/// || s_trunc(z) + 2 pi z ||^2 over `batch` fresh draws z ~ N(0, I/(2 pi)),
/// truncating the oracle value to zero when its norm exceeds the cutoff; the
/// statistic is the max over steps. Verdict is left unset.
inline Decision delta_hat(const ScoreOracle& oracle,
                          const DistinguisherConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int n = cfg.schedule.steps;
  require(n >= 1, "schedule must have at least one step");
  require(oracle.schedule().steps == n, "oracle built for another schedule");
  const int d = oracle.dim();
  const double cutoff2 = cfg.truncation * cfg.truncation;

  Decision decision;
  decision.per_step.assign(n, 0.0);
  decision.per_step_se.assign(n, 0.0);
  std::vector<long> events(n, 0);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const int k = static_cast<int>(i) + 1;
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(k));
    std::vector<double> z(d), s(d);
    double sum = 0.0, sum_sq = 0.0;
    long fired = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      for (double& c : z) c = rng.normal_q();
      oracle.eval(k, z, s);
      double value;
      if (norm2(s) > cutoff2) {
        ++fired;
        value = 4.0 * kPi * kPi * norm2(z);  // truncated field is zero
      } else {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += sq(s[j] + kTwoPi * z[j]);
        value = acc;
      }
      check_finite(value, "delta_hat summand");
      sum += value;
      sum_sq += value * value;
    }
    const double mean = sum / cfg.batch;
    decision.per_step[i] = mean;
    if (cfg.batch > 1) {
      const double var =
          std::max(0.0, (sum_sq - cfg.batch * mean * mean) / (cfg.batch - 1));
      decision.per_step_se[i] = std::sqrt(var / cfg.batch);
    }
    events[i] = fired;
  });

  for (int i = 0; i < n; ++i) {
    decision.delta_hat = std::max(decision.delta_hat, decision.per_step[i]);
    decision.truncation_events += events[i];
  }
  return decision;
}

/// Population value of the per-step statistic for the exact pancake oracle:
/// E_{z ~ N(0,1/2pi)} (T'/T)(z)^2 at the smoothing level of step k. The
/// integrand is periodic with sharp switches between lattice cells, so panels
/// are sized to resolve the switch width ~ gamma s^2.
inline std::vector<double> quadrature_delta_profile(
    const PancakeParams& p, const DiffusionSchedule& sched) {
  require(p.sigma > 0, "sigma must be > 0");
  const int n = sched.steps;
  require(n >= 1, "schedule must have at least one step");
  std::vector<double> profile(n, 0.0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const int k = static_cast<int>(i) + 1;
    const double sig = forward_sigma(p.sigma, k * sched.step);
    const SmoothedRatioEvaluator eval(SmoothedDgParams(p.gamma, sig));
    const double s = eval.s();
    const double period = std::sqrt(1.0 + sig * sig) / p.gamma;
    const int periods = static_cast<int>(std::ceil(4.0 / period));
    const int panels_per_period = std::max(
        64, static_cast<int>(std::ceil(8.0 / (p.gamma * p.gamma * s * s))));
    auto f = [&](double z) {
      return sq(eval.ratio_derivative(z)) * std::exp(-kPi * z * z);
    };
    double acc = 0.0;
    const GaussLegendreRule& rule = gauss_legendre(16);
    for (int c = -periods; c < periods; ++c) {
      const double a = c * period;
      for (int q = 0; q < panels_per_period; ++q)
        acc += integrate_panel(f, a + q * period / panels_per_period,
                               a + (q + 1) * period / panels_per_period, rule);
    }
    profile[i] = acc;
  });
  return profile;
}

inline double quadrature_delta(const PancakeParams& p,
                               const DiffusionSchedule& sched) {
  const std::vector<double> profile = quadrature_delta_profile(p, sched);
  double best = 0.0;
  for (double v : profile) best = std::max(best, v);
  return best;
}

/// Gaussian iff the statistic is at or below half the threshold.
inline Verdict decide(double delta, double tau) {
  require(std::isfinite(delta) && delta >= 0, "delta must be >= 0");
  require(std::isfinite(tau) && tau > 0, "tau must be positive");
  return delta <= tau / 2.0 ? Verdict::gaussian : Verdict::pancakes;
}

struct TrialOutcome {
  double delta_hat;
  Verdict verdict;
  long truncation_events;
};

struct ArmReport {
  Verdict truth;
  std::vector<TrialOutcome> trials;
  double success_rate = 0.0;
  double mean_delta = 0.0;
};

/// One arm of the testing experiment. For the pancake arm a fresh hidden
/// direction is drawn uniformly on the sphere each trial; spacing and
/// thickness are known to the tester, only the direction is secret.
inline ArmReport run_experiment(const std::optional<PancakeParams>& truth,
                                int dim, const DistinguisherConfig& cfg,
                                int trials) {
  cfg.validate();
  require(trials >= 1, "trials must be >= 1");
  if (truth) require(truth->dim == dim, "truth dimension mismatch");

  ArmReport report;
  report.truth = truth ? Verdict::pancakes : Verdict::gaussian;
  report.trials.resize(trials);

  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    std::shared_ptr<const ScoreOracle> oracle;
    if (truth) {
      Rng dir_rng = make_stream(cfg.seed, t, 1);
      PancakeParams p(dim, truth->gamma, truth->sigma,
                      random_unit_vector(dim, dir_rng));
      oracle = exact_pancake_oracle(p, cfg.schedule);
    } else {
      oracle = exact_gaussian_oracle(dim, cfg.schedule);
    }
    Decision dec = delta_hat(*oracle, cfg, substream(cfg.seed, t, 2));
    dec.verdict = decide(dec.delta_hat, cfg.threshold);
    report.trials[t] = {dec.delta_hat, *dec.verdict, dec.truncation_events};
  });

  long correct = 0;
  double sum = 0.0;
  for (const TrialOutcome& t : report.trials) {
    if (t.verdict == report.truth) ++correct;
    sum += t.delta_hat;
  }
  report.success_rate = static_cast<double>(correct) / trials;
  report.mean_delta = sum / trials;
  return report;
}

struct AdvantageEstimate {
  double advantage;
  double ci_low;
  double ci_high;
};

/// |P_pancake[verdict = pancakes] - P_gaussian[verdict = pancakes]| with a
/// normal-approximation 95% interval.
inline AdvantageEstimate advantage_estimate(const ArmReport& pancake_arm,
                                            const ArmReport& gaussian_arm) {
  auto rate = [](const ArmReport& r) {
    long hits = 0;
    for (const TrialOutcome& t : r.trials)
      if (t.verdict == Verdict::pancakes) ++hits;
    return static_cast<double>(hits) / r.trials.size();
  };
  const double p1 = rate(pancake_arm);
  const double p0 = rate(gaussian_arm);
  const double n1 = static_cast<double>(pancake_arm.trials.size());
  const double n0 = static_cast<double>(gaussian_arm.trials.size());
  const double se =
      std::sqrt(p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0);
  const double adv = std::abs(p1 - p0);
  return {adv, std::max(0.0, adv - 1.96 * se), std::min(1.0, adv + 1.96 * se)};
}

}  // namespace pancakes
