#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pancakes/common.hpp"
#include "pancakes/pancake.hpp"
#include "pancakes/rng.hpp"

namespace pancakes {

/// Uniform discretization grid for the reverse integrator: N steps of size
/// h = T/N covering [0, T]. h is stored once and never recomputed.
struct DiffusionSchedule {
  double total_time;
  int steps;
  double step;

  DiffusionSchedule(double total_time_, int steps_)
      : total_time(total_time_),
        steps(steps_),
        step(steps_ == 0 ? 0.0 : total_time_ / steps_) {
    require_finite(total_time, "total_time");
    require(total_time > 0, "total_time must be positive");
    require(steps >= 0, "steps must be >= 0");
  }
};

/// Grid choice from a target accuracy eps, score Lipschitz level L, and
/// divergence budget K: T = max(log(K/eps), 1), h = eps^2 / (L^2 d), with N
/// rounded up and h shrunk to keep N h = T. Guards against grids beyond desk
/// scale (N > 1e7).
inline DiffusionSchedule make_schedule(double eps, double L, double K, int d) {
  require_finite(eps, "eps");
  require_finite(L, "L");
  require_finite(K, "K");
  require(eps > 0 && eps < 1, "eps must be in (0, 1)");
  require(L >= 1, "L must be >= 1");
  require(K >= 2, "K must be >= 2");
  require(d >= 1, "d must be >= 1");
  const double T = std::max(std::log(K / eps), 1.0);
  const double h0 = eps * eps / (L * L * d);
  const double n_real = std::ceil(T / h0);
  require(n_real <= 1e7, "schedule would need more than 1e7 steps");
  return DiffusionSchedule(T, static_cast<int>(n_real));
}

/// Time-indexed vector field queried by the reverse integrator: eval(k, x)
/// estimates the score of the noised distribution at time k*h. Instances are
/// immutable after construction and safe for concurrent eval.
class ScoreOracle {
 public:
  ScoreOracle(int dim, const DiffusionSchedule& schedule)
      : dim_(dim), schedule_(schedule) {
    require(dim >= 1, "oracle dim must be >= 1");
  }
  virtual ~ScoreOracle() = default;

  int dim() const { return dim_; }
  const DiffusionSchedule& schedule() const { return schedule_; }

  virtual void eval(int step_index, std::span<const double> x,
                    std::span<double> out) const = 0;

  std::vector<double> eval(int step_index, std::span<const double> x) const {
    std::vector<double> out(dim_);
    eval(step_index, x, out);
    return out;
  }

 private:
  int dim_;
  DiffusionSchedule schedule_;
};

/// Score of the noised pancake distribution, with the per-step smoothing
/// levels precomputed on the schedule grid.
class ExactPancakeOracle : public ScoreOracle {
 public:
  ExactPancakeOracle(const PancakeParams& params,
                     const DiffusionSchedule& schedule,
                     const ThetaSumPolicy& policy = {})
      : ScoreOracle(params.dim, schedule), params_(params) {
    require(params.sigma > 0, "sigma must be > 0 for an exact score oracle");
    evaluators_.reserve(schedule.steps + 1);
    for (int k = 0; k <= schedule.steps; ++k) {
      const double sig = forward_sigma(params.sigma, k * schedule.step);
      evaluators_.emplace_back(SmoothedDgParams(params.gamma, sig), policy);
    }
  }

  const PancakeParams& params() const { return params_; }

  void eval(int step_index, std::span<const double> x,
            std::span<double> out) const override {
    require(step_index >= 0 &&
                step_index < static_cast<int>(evaluators_.size()),
            "step index outside the schedule");
    const double r =
        evaluators_[step_index].ratio_derivative(dot(x, params_.u));
    for (int j = 0; j < dim(); ++j)
      out[j] = -kTwoPi * x[j] + r * params_.u[j];
  }

 private:
  PancakeParams params_;
  std::vector<SmoothedRatioEvaluator> evaluators_;
};

/// Score of the stationary Gaussian, -2 pi x at every step.
class ExactGaussianOracle : public ScoreOracle {
 public:
  using ScoreOracle::ScoreOracle;

  void eval(int, std::span<const double> x,
            std::span<double> out) const override {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = -kTwoPi * x[j];
  }
};

/// Base oracle plus a per-step constant field eps_score * w_k, with w_k a
/// seed-determined unit vector. The additive field has squared norm
/// eps_score^2 under any distribution of x.
class PerturbedOracle : public ScoreOracle {
 public:
  PerturbedOracle(std::shared_ptr<const ScoreOracle> base, double eps_score,
                  std::uint64_t seed)
      : ScoreOracle(base->dim(), base->schedule()),
        base_(std::move(base)),
        eps_(eps_score) {
    require_finite(eps_, "eps_score");
    require(eps_ >= 0, "eps_score must be >= 0");
    const int n = schedule().steps;
    directions_.reserve(n + 1);
    for (int k = 0; k <= n; ++k) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(k));
      directions_.push_back(random_unit_vector(dim(), rng));
    }
  }

  void eval(int step_index, std::span<const double> x,
            std::span<double> out) const override {
    base_->eval(step_index, x, out);
    if (eps_ == 0.0) return;
    require(step_index >= 0 &&
                step_index < static_cast<int>(directions_.size()),
            "step index outside the schedule");
    const std::vector<double>& w = directions_[step_index];
    for (int j = 0; j < dim(); ++j) out[j] += eps_ * w[j];
  }

 private:
  std::shared_ptr<const ScoreOracle> base_;
  double eps_;
  std::vector<std::vector<double>> directions_;
};

/// Base oracle with values of norm above the cutoff replaced by zero.
class TruncatedOracle : public ScoreOracle {
 public:
  TruncatedOracle(std::shared_ptr<const ScoreOracle> base, double cutoff)
      : ScoreOracle(base->dim(), base->schedule()),
        base_(std::move(base)),
        cutoff_(cutoff) {
    require_finite(cutoff_, "cutoff");
    require(cutoff_ > 0, "cutoff must be positive");
  }

  void eval(int step_index, std::span<const double> x,
            std::span<double> out) const override {
    base_->eval(step_index, x, out);
    if (norm2(out) > cutoff_ * cutoff_)
      for (double& c : out) c = 0.0;
  }

 private:
  std::shared_ptr<const ScoreOracle> base_;
  double cutoff_;
};

/// Exact noising transition over time t: contract toward the origin and add
/// stationary Gaussian noise (not an Euler step).
inline std::vector<double> ou_sample(std::span<const double> x0, double t,
                                     Rng& rng) {
  require_finite(t, "t");
  require(t >= 0, "t must be >= 0");
  const double decay = std::exp(-t);
  const double noise = std::sqrt(-std::expm1(-2.0 * t));
  std::vector<double> out(x0.size());
  for (std::size_t j = 0; j < x0.size(); ++j)
    out[j] = decay * x0[j] + noise * rng.normal_q();
  return out;
}

/// Reverse integrator: starting from a stationary Gaussian draw, runs
///   y <- e^h y + (1/pi)(e^h - 1) oracle(N - k, y) + sqrt(e^{2h} - 1) z
/// for k = 0..N-1, querying the oracle at step indices N, N-1, ..., 1.
inline std::vector<double> ddpm_reverse(const DiffusionSchedule& schedule,
                                        const ScoreOracle& oracle, Rng& rng) {
  require(oracle.dim() >= 1, "oracle dim must be >= 1");
  const int d = oracle.dim();
  const int n = schedule.steps;
  std::vector<double> y(d);
  for (double& c : y) c = rng.normal_q();
  if (n == 0) return y;

  const double grow = std::exp(schedule.step);
  const double drift = std::expm1(schedule.step) / kPi;
  const double noise = std::sqrt(std::expm1(2.0 * schedule.step));
  std::vector<double> s(d);
  for (int k = 0; k < n; ++k) {
    const int idx = n - k;
    try {
      oracle.eval(idx, y, s);
    } catch (const std::exception& e) {
      throw numeric_error("oracle failed at step index " +
                          std::to_string(idx) + ": " + e.what());
    }
    for (int j = 0; j < d; ++j) {
      y[j] = grow * y[j] + drift * s[j] + noise * rng.normal_q();
      if (!std::isfinite(y[j]))
        throw numeric_error("reverse trajectory diverged at step index " +
                            std::to_string(idx));
    }
  }
  return y;
}

inline std::shared_ptr<const ScoreOracle> exact_pancake_oracle(
    const PancakeParams& p, const DiffusionSchedule& schedule) {
  return std::make_shared<ExactPancakeOracle>(p, schedule);
}

inline std::shared_ptr<const ScoreOracle> exact_gaussian_oracle(
    int dim, const DiffusionSchedule& schedule) {
  return std::make_shared<ExactGaussianOracle>(dim, schedule);
}

inline std::shared_ptr<const ScoreOracle> perturbed_oracle(
    std::shared_ptr<const ScoreOracle> base, double eps_score,
    std::uint64_t seed) {
  return std::make_shared<PerturbedOracle>(std::move(base), eps_score, seed);
}

inline std::shared_ptr<const ScoreOracle> truncated_oracle(
    std::shared_ptr<const ScoreOracle> base, double cutoff) {
  return std::make_shared<TruncatedOracle>(std::move(base), cutoff);
}

}  // namespace pancakes
