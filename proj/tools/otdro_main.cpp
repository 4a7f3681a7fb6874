// Copyright 2026 The otdro Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "otdro/io.hpp"
#include "otdro/trainer.hpp"

namespace {

using namespace otdro;

int cmd_solve(const std::string& path, double tol, int max_iter) {
  const ConicProblemData problem = problem_from_json(read_json_file(path));
  SolverSettings st;
  st.tol = tol;
  st.max_iter = max_iter;
  const PrimalDualSolution sol = solve(problem, st);
  std::cout << solution_to_json(sol).dump(2) << std::endl;
  return sol.status == SolveStatus::Optimal ? 0 : 1;
}

int cmd_distance(const std::string& a_path, const std::string& b_path,
                 const std::string& l_path, int p, bool grad) {
  const Json ja = read_json_file(a_path);
  const Json jb = read_json_file(b_path);
  const TransportParam param = param_from_json(read_json_file(l_path), p);
  Json out;
  if (is_discrete_distribution(ja) != is_discrete_distribution(jb))
    throw ConfigError("distance: both inputs must share a representation");
  if (is_discrete_distribution(ja)) {
    const DiscreteDistribution P = discrete_from_json(ja);
    const DiscreteDistribution Q = discrete_from_json(jb);
    out["distance"] = discrete_distance(P, Q, param);
    if (grad) out["gradient"] = to_json(discrete_distance_gradient(P, Q, param));
  } else {
    const GaussianMoments P = moments_from_json(ja);
    const GaussianMoments Q = moments_from_json(jb);
    out["distance"] = gelbrich_distance(P, Q, param);
    if (grad) out["gradient"] = to_json(gelbrich_gradient(P, Q, param));
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

// Build config: {"family": ..., "epsilon": ..., "L": [[...]],
//   "gamma": ..., "data": {"samples": [[...]]} or {"mean":..., "cov":...}}.
int cmd_build(const std::string& path, const std::string& out_path) {
  const Json j = read_json_file(path);
  const Family family = family_from_string(j.at("family").get<std::string>());
  const BuilderId builder = family_builder(family);
  const double eps = j.at("epsilon").get<double>();
  const double gamma = j.value("gamma", 0.05);
  const int p = (builder == BuilderId::PortfolioT1 ||
                 builder == BuilderId::RegressionAbs)
                    ? 1
                    : 2;
  const TransportParam param = param_from_json(j.at("L"), p);
  ProblemInstance inst;
  if (family == Family::PortfolioGaussian && j.at("data").contains("mean")) {
    inst = build_portfolio_gaussian(moments_from_json(j.at("data")), eps,
                                    gamma, param);
  } else {
    DatasetView data;
    data.samples = matrix_from_json(j.at("data").at("samples"));
    inst = build_instance(builder, data, eps, gamma, param);
  }
  const Json dumped = problem_to_json(inst.conic);
  if (out_path.empty())
    std::cout << dumped.dump(2) << std::endl;
  else
    write_json_file(dumped, out_path);
  return 0;
}

int cmd_train(const std::string& path, const std::string& out_dir) {
  const ExperimentConfig cfg = experiment_config_from_json(read_json_file(path));
  const std::vector<MetricsRow> rows = run_experiment(cfg, out_dir);
  int failures = 0;
  for (const MetricsRow& r : rows)
    if (!r.ok) ++failures;
  std::cout << "trials: " << rows.size() << ", failures: " << failures
            << ", metrics: " << out_dir << "/metrics.csv" << std::endl;
  return failures == 0 ? 0 : 1;
}

// Evaluates a fixed transport parameter on the config's trial-0 data: the
// radius is calibrated at theta0 = I exactly as in training, then the conic
// problem is solved at the given theta.
int cmd_eval(const std::string& path, const std::string& theta_path) {
  const ExperimentConfig cfg = experiment_config_from_json(read_json_file(path));
  const BuilderId builder = family_builder(cfg.family);
  const int p = (builder == BuilderId::PortfolioT1 ||
                 builder == BuilderId::RegressionAbs)
                    ? 1
                    : 2;
  const TransportParam theta = param_from_json(read_json_file(theta_path), p);
  const TrialData trial = make_trial(cfg, 0);

  const BootstrapMode mode = family_mode(builder);
  const Reference ref = make_reference(trial.data, mode);
  const BootstrapSet boots =
      bootstrap(trial.data, cfg.train.n_b, mode, trial.train_seed);
  TrainConfig tc = cfg.train;
  PenaltyConfig pen;
  pen.beta = tc.beta;
  pen.lambda_p = tc.lambda_p;
  pen.eta_p = tc.eta_p;
  if (tc.eps_override) {
    pen.epsilon = *tc.eps_override;
  } else {
    const TransportParam theta0{Matrix::Identity(theta.dim(), theta.dim()),
                                theta.p};
    pen.epsilon = calibrate_epsilon(
        replica_distances(theta0, ref, boots, tc.distance_solver).values,
        tc.beta);
  }

  const ProblemInstance inst =
      build_instance(builder, trial.data, pen.epsilon, tc.gamma, theta);
  const PrimalDualSolution sol = solve(inst.conic, tc.solver);
  if (sol.status != SolveStatus::Optimal) {
    std::cerr << "eval: conic solve did not reach Optimal" << std::endl;
    return 1;
  }
  const Vector w = inst.decision(sol);
  const double value = inst.conic.c.dot(sol.x);
  const double e_val = penalty_value(theta, ref, boots, pen, tc.distance_solver);

  Json out;
  out["epsilon"] = pen.epsilon;
  out["objective"] = inst.reported_objective(value);
  out["conic_value"] = value;
  out["w"] = to_json(w);
  out["e_theta"] = e_val;
  out["oos"] = trial_oos_metric(cfg, trial.truth_sampler, w, trial.oos_seed);
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_repro(const std::string& name, std::uint64_t seed,
              const std::string& out_dir) {
  run_repro(name, seed, out_dir);
  std::cout << "wrote " << out_dir << std::endl;
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<double>& lambda_grid,
              const std::vector<double>& eta_grid, const std::string& out_dir) {
  const ExperimentConfig cfg = experiment_config_from_json(read_json_file(path));
  sensitivity_sweep(cfg, lambda_grid, eta_grid, out_dir);
  std::cout << "wrote " << out_dir << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"otdro: learnable optimal-transport ambiguity sets for DRO"};
  app.require_subcommand(1);

  std::string problem_path, a_path, b_path, l_path, config_path, theta_path;
  std::string out_dir = "out", out_path, repro_name;
  double tol = 1e-9;
  int max_iter = 200000, p = 1;
  bool grad = false;
  std::uint64_t seed = 0;
  std::vector<double> lambda_grid{0.0, 1.0, 10.0}, eta_grid{10.0, 100.0};

  auto* solve_cmd = app.add_subcommand("solve", "solve a conic program JSON");
  solve_cmd->add_option("problem", problem_path)->required();
  solve_cmd->add_option("--tol", tol);
  solve_cmd->add_option("--maxiter", max_iter);

  auto* dist_cmd =
      app.add_subcommand("distance", "parametrized transport distance");
  dist_cmd->add_option("a", a_path)->required();
  dist_cmd->add_option("b", b_path)->required();
  dist_cmd->add_option("--L", l_path)->required();
  dist_cmd->add_option("--p", p)->check(CLI::IsMember({1, 2}));
  dist_cmd->add_flag("--grad", grad);

  auto* build_cmd =
      app.add_subcommand("build", "emit a reformulation in solver JSON");
  build_cmd->add_option("config", config_path)->required();
  build_cmd->add_option("--out", out_path);

  auto* train_cmd = app.add_subcommand("train", "run the bilevel training");
  train_cmd->add_option("config", config_path)->required();
  train_cmd->add_option("--out", out_dir);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a fixed parameter");
  eval_cmd->add_option("config", config_path)->required();
  eval_cmd->add_option("--theta", theta_path)->required();

  auto* repro_cmd = app.add_subcommand("repro", "regenerate result tables");
  repro_cmd->add_option("name", repro_name)
      ->required()
      ->check(CLI::IsMember({"fig1", "fig2", "fig3", "fig4", "sensitivity"}));
  repro_cmd->add_option("--seed", seed)->required();
  repro_cmd->add_option("--out", out_dir);

  auto* sweep_cmd = app.add_subcommand("sweep", "penalty sensitivity sweep");
  sweep_cmd->add_option("config", config_path)->required();
  sweep_cmd->add_option("--lambda-grid", lambda_grid)->delimiter(',');
  sweep_cmd->add_option("--eta-grid", eta_grid)->delimiter(',');
  sweep_cmd->add_option("--out", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(problem_path, tol, max_iter);
    if (dist_cmd->parsed()) return cmd_distance(a_path, b_path, l_path, p, grad);
    if (build_cmd->parsed()) return cmd_build(config_path, out_path);
    if (train_cmd->parsed()) return cmd_train(config_path, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(config_path, theta_path);
    if (repro_cmd->parsed()) return cmd_repro(repro_name, seed, out_dir);
    if (sweep_cmd->parsed())
      return cmd_sweep(config_path, lambda_grid, eta_grid, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
