// Experiment harness for the pancake laboratory: sampling, score profiles,
// reverse diffusion, the Gaussianity test, direction estimation, coefficient
// spectra, and bound verification. Every command takes an explicit seed and
// produces byte-identical output for identical flags, independent of
// PANCAKE_THREADS.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_io.hpp"
#include "pancakes/distinguish.hpp"
#include "pancakes/divergence.hpp"
#include "pancakes/estimate.hpp"
#include "pancakes/hermite.hpp"
#include "pancakes/parallel.hpp"
#include "pancakes/selftest.hpp"

namespace pancakes::cli {
namespace {

using nlohmann::json;

std::vector<double> parse_direction(const std::string& text, int dim) {
  if (text.empty()) {
    // Default direction: the diagonal (-1, 1, 0, ...) / sqrt(2) for d >= 2.
    std::vector<double> u(dim, 0.0);
    if (dim == 1) {
      u[0] = 1.0;
    } else {
      u[0] = -1.0 / std::sqrt(2.0);
      u[1] = 1.0 / std::sqrt(2.0);
    }
    return u;
  }
  std::vector<double> u;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) u.push_back(std::stod(item));
  if (static_cast<int>(u.size()) != dim)
    throw std::domain_error("--direction needs exactly dim components");
  double n2 = 0.0;
  for (double c : u) n2 += c * c;
  if (n2 <= 0) throw std::domain_error("--direction must be nonzero");
  for (double& c : u) c /= std::sqrt(n2);
  return u;
}

/// Oracle spec grammar: comma-separated layers, outermost first, ending in a
/// base of "exact" (pancake score) or "gaussian". Layers: "perturbed:EPS",
/// "truncate:M". A spec ending in a layer gets the "exact" base implicitly.
std::shared_ptr<const ScoreOracle> build_oracle(
    const std::string& spec, const PancakeParams& params,
    const DiffusionSchedule& sched, std::uint64_t seed, bool* exact_base) {
  std::vector<std::string> layers;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) layers.push_back(item);
  if (layers.empty()) throw std::domain_error("empty --oracle spec");

  *exact_base = true;
  std::shared_ptr<const ScoreOracle> oracle;
  if (layers.back() == "exact") {
    oracle = exact_pancake_oracle(params, sched);
    layers.pop_back();
  } else if (layers.back() == "gaussian") {
    oracle = exact_gaussian_oracle(params.dim, sched);
    *exact_base = false;
    layers.pop_back();
  } else {
    oracle = exact_pancake_oracle(params, sched);
  }
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    const std::string& layer = *it;
    if (layer.rfind("perturbed:", 0) == 0) {
      oracle = perturbed_oracle(oracle, std::stod(layer.substr(10)),
                                substream(seed, 0x70657274ULL));
    } else if (layer.rfind("truncate:", 0) == 0) {
      oracle = truncated_oracle(oracle, std::stod(layer.substr(9)));
    } else {
      throw std::domain_error("unknown oracle layer: " + layer);
    }
  }
  return oracle;
}

struct KsOutcome {
  double statistic;
  double critical_1pct;
};

KsOutcome ks_against_smoothed(std::vector<double> values,
                              const SmoothedDgParams& p) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = smoothed_cdf(values[i], p);
    stat = std::max(stat, std::abs(f - (i + 1) / n));
    stat = std::max(stat, std::abs(f - i / n));
  }
  return {stat, 1.6276 / std::sqrt(n)};
}

int cmd_sample(double gamma, double sigma, int dim, long n,
               std::uint64_t seed, const std::string& direction,
               const std::string& out) {
  PancakeParams params(dim, gamma, sigma, parse_direction(direction, dim));
  json config{{"command", "sample"}, {"gamma", gamma}, {"sigma", sigma},
              {"dim", dim},          {"n", n},         {"seed", seed},
              {"direction", params.u}};
  Rng rng = make_stream(seed, 0x73616d70ULL);
  const std::vector<double> rows = sample(params, static_cast<int>(n), rng);

  Sink sink(out);
  std::vector<std::string> header;
  for (int j = 0; j < dim; ++j) header.push_back("x" + std::to_string(j));
  CsvWriter csv(sink, config, header);
  std::vector<std::string> cells(dim);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) cells[j] = fmt(rows[i * dim + j]);
    csv.row(cells);
  }

  const std::string density_path = derive_path(out, "_density");
  if (!density_path.empty() && sigma > 0) {
    Sink dsink(density_path);
    CsvWriter dcsv(dsink, config, {"z", "density"});
    SmoothedRatioEvaluator eval(params.marginal());
    const int points = 2001;
    for (int i = 0; i < points; ++i) {
      const double z = -1.5 + 3.0 * i / (points - 1);
      dcsv.row({fmt(z), fmt(eval.density(z))});
    }
  }
  return 0;
}

int cmd_score(double gamma, double sigma, double zmin, double zmax,
              int points, const std::string& out) {
  SmoothedDgParams p(gamma, sigma);
  SmoothedRatioEvaluator eval(p);
  json config{{"command", "score"}, {"gamma", gamma}, {"sigma", sigma},
              {"zmin", zmin},       {"zmax", zmax},   {"points", points}};
  Sink sink(out);
  CsvWriter csv(sink, config,
                {"z", "log_ratio", "ratio_derivative", "t2_over_t", "f_prime"});
  for (int i = 0; i < points; ++i) {
    const double z = zmin + (zmax - zmin) * i / (points - 1);
    const auto curv = eval.curvature(z);
    csv.row({fmt(z), fmt(eval.log_ratio(z)), fmt(eval.ratio_derivative(z)),
             fmt(curv.t2_over_t), fmt(curv.f_prime)});
  }
  return 0;
}

int cmd_diffuse(double gamma, double sigma, int dim, double total_time,
                int steps, const std::string& oracle_spec, long runs,
                std::uint64_t seed, const std::string& direction,
                const std::string& out, std::string summary_out) {
  PancakeParams params(dim, gamma, sigma, parse_direction(direction, dim));
  DiffusionSchedule sched(total_time, steps);
  bool exact_base = false;
  auto oracle = build_oracle(oracle_spec, params, sched, seed, &exact_base);

  json config{{"command", "diffuse"},   {"gamma", gamma},
              {"sigma", sigma},         {"dim", dim},
              {"T", total_time},        {"steps", steps},
              {"oracle", oracle_spec},  {"runs", runs},
              {"seed", seed},           {"direction", params.u}};

  std::vector<double> final_points(static_cast<std::size_t>(runs) * dim);
  parallel_for(static_cast<std::size_t>(runs), [&](std::size_t r) {
    Rng rng = make_stream(seed, r);
    const std::vector<double> y = ddpm_reverse(sched, *oracle, rng);
    std::copy(y.begin(), y.end(), final_points.begin() + r * dim);
  });

  Sink sink(out);
  std::vector<std::string> header{"run_id"};
  for (int j = 0; j < dim; ++j) header.push_back("coord_" + std::to_string(j));
  CsvWriter csv(sink, config, header);
  std::vector<std::string> cells(dim + 1);
  for (long r = 0; r < runs; ++r) {
    cells[0] = std::to_string(r);
    for (int j = 0; j < dim; ++j) cells[j + 1] = fmt(final_points[r * dim + j]);
    csv.row(cells);
  }

  json summary;
  std::vector<double> variance(dim, 0.0);
  for (int j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (long r = 0; r < runs; ++r) mean += final_points[r * dim + j];
    mean /= runs;
    double acc = 0.0;
    for (long r = 0; r < runs; ++r) acc += sq(final_points[r * dim + j] - mean);
    variance[j] = runs > 1 ? acc / (runs - 1) : 0.0;
  }
  summary["variance_per_coordinate"] = variance;
  summary["stationary_variance"] = 1.0 / kTwoPi;
  if (exact_base && sigma > 0) {
    std::vector<double> proj(runs);
    for (long r = 0; r < runs; ++r)
      proj[r] = dot({final_points.data() + r * dim,
                     static_cast<std::size_t>(dim)},
                    params.u);
    const KsOutcome ks = ks_against_smoothed(std::move(proj), params.marginal());
    summary["projected_ks_statistic"] = ks.statistic;
    summary["projected_ks_critical_1pct"] = ks.critical_1pct;
  }
  if (summary_out.empty()) summary_out = derive_path(out, "_summary", ".json");
  if (!summary_out.empty())
    write_json_report(summary_out, summary, config);
  return 0;
}

int cmd_distinguish(double gamma, double sigma, int dim, int ell,
                    const std::string& cutoff_spec,
                    const std::string& tau_spec, int trials,
                    std::uint64_t seed, double total_time, int steps,
                    const std::string& out, std::string summary_out) {
  DiffusionSchedule sched(total_time, steps);
  const double cutoff = cutoff_spec == "auto" ? default_truncation(dim, sigma)
                                              : std::stod(cutoff_spec);
  PancakeParams reference(dim, gamma, sigma,
                          parse_direction("", dim));
  double tau;
  double qdelta = -1.0;
  if (tau_spec == "auto") {
    qdelta = quadrature_delta(reference, sched);
    tau = qdelta / 2.0;
  } else {
    tau = std::stod(tau_spec);
  }
  DistinguisherConfig cfg{ell, cutoff, tau, sched, 0.01, seed};

  json config{{"command", "distinguish"}, {"gamma", gamma},
              {"sigma", sigma},           {"dim", dim},
              {"ell", ell},               {"M", cutoff},
              {"tau", tau},               {"trials", trials},
              {"seed", seed},             {"T", total_time},
              {"steps", steps}};

  const ArmReport pancake_arm =
      run_experiment(reference, dim, cfg, trials);
  DistinguisherConfig gcfg = cfg;
  gcfg.seed = substream(seed, 0x67617573ULL);
  const ArmReport gaussian_arm = run_experiment(std::nullopt, dim, gcfg, trials);

  Sink sink(out);
  CsvWriter csv(sink, config,
                {"trial", "truth", "delta_hat", "verdict", "truncation_events"});
  for (int t = 0; t < trials; ++t) {
    const TrialOutcome& o = pancake_arm.trials[t];
    csv.row({std::to_string(t), "pancakes", fmt(o.delta_hat),
             verdict_name(o.verdict), std::to_string(o.truncation_events)});
  }
  for (int t = 0; t < trials; ++t) {
    const TrialOutcome& o = gaussian_arm.trials[t];
    csv.row({std::to_string(t), "gaussian", fmt(o.delta_hat),
             verdict_name(o.verdict), std::to_string(o.truncation_events)});
  }

  const AdvantageEstimate adv = advantage_estimate(pancake_arm, gaussian_arm);
  json summary{{"success_rate_pancake", pancake_arm.success_rate},
               {"success_rate_gaussian", gaussian_arm.success_rate},
               {"mean_delta_pancake", pancake_arm.mean_delta},
               {"mean_delta_gaussian", gaussian_arm.mean_delta},
               {"advantage", adv.advantage},
               {"advantage_ci95", {adv.ci_low, adv.ci_high}}};
  if (qdelta >= 0) summary["quadrature_delta"] = qdelta;
  if (summary_out.empty()) summary_out = derive_path(out, "_summary", ".json");
  if (!summary_out.empty()) write_json_report(summary_out, summary, config);
  return 0;
}

int cmd_estimate(double gamma, double sigma, int dim, long n, double eta,
                 const std::string& net_spec, int trials, std::uint64_t seed,
                 const std::string& truth, const std::string& out,
                 const std::string& dump_objective) {
  EstimatorConfig cfg;
  cfg.eta = eta;
  if (net_spec == "grid") {
    cfg.net = NetMode::angular_grid;
  } else if (net_spec == "fib") {
    cfg.net = NetMode::fibonacci_grid;
  } else if (net_spec.rfind("random:", 0) == 0) {
    cfg.net = NetMode::random;
    cfg.random_count = std::stol(net_spec.substr(7));
  } else {
    throw std::domain_error("unknown --net mode: " + net_spec);
  }
  const bool pancake_truth = truth == "pancake";
  if (!pancake_truth && truth != "gaussian")
    throw std::domain_error("--truth must be pancake or gaussian");

  json config{{"command", "estimate"}, {"gamma", gamma}, {"sigma", sigma},
              {"dim", dim},            {"n", n},         {"eta", eta},
              {"net", net_spec},       {"trials", trials}, {"seed", seed},
              {"truth", truth}};

  Sink sink(out);
  CsvWriter csv(sink, config,
                {"trial", "alignment_sq", "objective", "low_confidence"});
  int flagged = 0;
  double alignment_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_stream(seed, t);
    std::vector<double> u;
    std::vector<double> rows;
    if (pancake_truth) {
      u = random_unit_vector(dim, rng);
      PancakeParams params(dim, gamma, sigma, u);
      rows = sample(params, static_cast<int>(n), rng);
    } else {
      rows.resize(static_cast<std::size_t>(n) * dim);
      for (double& c : rows) c = rng.normal_q();
    }
    EstimatorConfig trial_cfg = cfg;
    trial_cfg.seed = substream(seed, t, 0x6e6574ULL);
    const EstimateResult res =
        estimate_direction(rows, static_cast<int>(n), dim, trial_cfg, gamma);
    const double align =
        pancake_truth ? sq(dot(res.u_hat, u)) : 0.0;
    alignment_sum += align;
    if (res.low_confidence) ++flagged;
    csv.row({std::to_string(t), fmt(align), fmt(res.objective_value),
             res.low_confidence ? "1" : "0"});
    if (t == 0 && !dump_objective.empty()) {
      Sink osink(dump_objective);
      CsvWriter ocsv(osink, config, {"candidate", "objective"});
      for (std::size_t c = 0; c < res.objectives.size(); ++c)
        ocsv.row({std::to_string(c), fmt(res.objectives[c])});
    }
  }
  json summary{{"mean_alignment_sq", alignment_sum / trials},
               {"low_confidence_rate", static_cast<double>(flagged) / trials}};
  const std::string summary_out = derive_path(out, "_summary", ".json");
  if (!summary_out.empty()) write_json_report(summary_out, summary, config);
  return 0;
}

int cmd_hermite(double gamma, int max_degree, const std::string& out) {
  if (max_degree <= 0) max_degree = AlphaTable::default_degree(gamma);
  AlphaTable table(gamma, max_degree);
  json config{{"command", "hermite"}, {"gamma", gamma},
              {"max_degree", max_degree}};
  Sink sink(out);
  CsvWriter csv(sink, config, {"k", "alpha", "lower_bound_if_applicable"});
  for (int k = 0; k <= max_degree; ++k) {
    std::string bound;
    // Guaranteed-size coefficients at twice the rounded squared spacing.
    for (int ell = 1; ell * ell * kPi * gamma * gamma <= max_degree; ++ell) {
      if (k == 2 * static_cast<int>(std::floor(ell * ell * kPi * gamma * gamma)))
        bound = fmt(1.0 / (std::exp(1.0) * std::sqrt(kTwoPi * ell * gamma)));
    }
    csv.row({std::to_string(k), fmt(table.alpha[k]), bound});
  }
  return 0;
}

int cmd_verify_bounds(double gamma, double sigma, int dim, std::uint64_t seed,
                      long mc_samples, const std::string& out) {
  const BoundsReport report = bounds_report(gamma, sigma, dim, seed, mc_samples);
  json config{{"command", "verify-bounds"}, {"gamma", gamma},
              {"sigma", sigma},             {"dim", dim},
              {"seed", seed},               {"mc_samples", mc_samples}};
  json checks = json::array();
  for (const BoundCheck& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"status", c.status == BoundStatus::pass          ? "pass"
                                 : c.status == BoundStatus::fail        ? "fail"
                                                                        : "not_applicable"},
                      {"measured", c.measured},
                      {"bound", c.bound},
                      {"note", c.note}});
  }
  json summary{{"checks", checks}, {"all_passed", report.all_passed}};
  write_json_report(out, summary, config);
  return report.all_passed ? 0 : 1;
}

int cmd_selftest() {
  const std::vector<SelftestResult> results = selftest();
  bool all = true;
  for (const SelftestResult& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name;
    if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
    std::cout << "\n";
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

int run(int argc, char** argv) {
  CLI::App app{"Gaussian pancake laboratory"};
  app.set_config("--config", "", "TOML file with defaults; flags override");
  app.require_subcommand(1);

  double gamma = 4.0, sigma = 0.1;
  int dim = 2;
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string direction;

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--gamma", gamma, "lattice spacing parameter (> 1)");
    cmd->add_option("--sigma", sigma, "thickness parameter (>= 0)");
    cmd->add_option("--seed", seed, "master seed");
    if (needs_out)
      cmd->add_option("--out", out, "output path ('-' for stdout)")->required();
  };

  // sample
  long n = 10000;
  auto* c_sample = app.add_subcommand("sample", "draw pancake samples");
  add_common(c_sample);
  c_sample->add_option("--dim", dim);
  c_sample->add_option("--n", n, "number of rows");
  c_sample->add_option("--direction", direction, "comma-separated direction");

  // score
  double zmin = -2.0, zmax = 2.0;
  int points = 1001;
  auto* c_score = app.add_subcommand("score", "1-D score profile");
  add_common(c_score);
  c_score->add_option("--zmin", zmin);
  c_score->add_option("--zmax", zmax);
  c_score->add_option("--points", points);

  // diffuse
  double total_time = 2.0;
  int steps = 100;
  long runs = 1000;
  std::string oracle_spec = "exact", summary_out;
  auto* c_diffuse = app.add_subcommand("diffuse", "reverse sampler runs");
  add_common(c_diffuse);
  c_diffuse->add_option("--dim", dim);
  c_diffuse->add_option("--T", total_time, "total diffusion time");
  c_diffuse->add_option("--steps", steps, "discretization steps");
  c_diffuse->add_option("--oracle", oracle_spec,
                        "exact | gaussian | perturbed:EPS[,base] | "
                        "truncate:M[,base]");
  c_diffuse->add_option("--runs", runs);
  c_diffuse->add_option("--direction", direction);
  c_diffuse->add_option("--summary-out", summary_out);

  // distinguish
  int ell = 2000, trials = 20;
  std::string cutoff_spec = "auto", tau_spec = "auto";
  auto* c_dist = app.add_subcommand("distinguish", "Gaussianity test");
  add_common(c_dist);
  c_dist->add_option("--dim", dim);
  c_dist->add_option("--ell", ell, "Gaussian draws per step");
  c_dist->add_option("--M", cutoff_spec, "truncation cutoff or 'auto'");
  c_dist->add_option("--tau", tau_spec, "decision threshold or 'auto'");
  c_dist->add_option("--trials", trials);
  c_dist->add_option("--T", total_time);
  c_dist->add_option("--steps", steps);
  c_dist->add_option("--summary-out", summary_out);

  // estimate
  double eta = 0.01;
  std::string net_spec = "grid", truth = "pancake", dump_objective;
  auto* c_est = app.add_subcommand("estimate", "direction estimation");
  add_common(c_est);
  c_est->add_option("--dim", dim);
  c_est->add_option("--n", n, "samples per trial");
  c_est->add_option("--eta", eta, "net resolution");
  c_est->add_option("--net", net_spec, "grid | fib | random:COUNT");
  c_est->add_option("--trials", trials);
  c_est->add_option("--truth", truth, "pancake | gaussian");
  c_est->add_option("--dump-objective", dump_objective,
                    "write per-candidate objectives of trial 0");

  // hermite
  int max_degree = 0;
  auto* c_herm = app.add_subcommand("hermite", "coefficient spectrum");
  add_common(c_herm);
  c_herm->add_option("--max-degree", max_degree, "table size (0 = default)");

  // verify-bounds
  long mc_samples = 1000000;
  auto* c_bounds = app.add_subcommand("verify-bounds", "analytic bound report");
  add_common(c_bounds);
  c_bounds->add_option("--dim", dim);
  c_bounds->add_option("--mc", mc_samples, "Monte Carlo sample count");

  // selftest
  app.add_subcommand("selftest", "run the built-in invariant suite");

  CLI11_PARSE(app, argc, argv);

  if (c_sample->parsed())
    return cmd_sample(gamma, sigma, dim, n, seed, direction, out);
  if (c_score->parsed())
    return cmd_score(gamma, sigma, zmin, zmax, points, out);
  if (c_diffuse->parsed())
    return cmd_diffuse(gamma, sigma, dim, total_time, steps, oracle_spec, runs,
                       seed, direction, out, summary_out);
  if (c_dist->parsed())
    return cmd_distinguish(gamma, sigma, dim, ell, cutoff_spec, tau_spec,
                           trials, seed, total_time, steps, out, summary_out);
  if (c_est->parsed())
    return cmd_estimate(gamma, sigma, dim, n, eta, net_spec, trials, seed,
                        truth, out, dump_objective);
  if (c_herm->parsed()) return cmd_hermite(gamma, max_degree, out);
  if (c_bounds->parsed())
    return cmd_verify_bounds(gamma, sigma, dim, seed, mc_samples, out);
  return cmd_selftest();
}

}  // namespace
}  // namespace pancakes::cli

int main(int argc, char** argv) {
  try {
    return pancakes::cli::run(argc, argv);
  } catch (const pancakes::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
