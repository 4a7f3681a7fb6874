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

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "otdro/rng.hpp"
#include "otdro/trainer.hpp"

namespace otdro {

enum class Family {
  PortfolioGaussian,
  PortfolioDiscrete,
  PortfolioGmm,
  RegressionAbs,
  RegressionSq
};

Family family_from_string(const std::string& name);
std::string family_to_string(Family family);
BuilderId family_builder(Family family);

/// True Gaussian of the portfolio experiments: mu ~ U(-1,1)^k entrywise,
/// Sigma = T T' + 1e-6 I with T ~ U(0.01, 0.1)^{k x k}.
GaussianMoments gen_gaussian_experiment(int k, std::uint64_t seed);

/// True discrete distribution: atoms uniform in [-1,1]^k, Dirichlet(1)
/// weights.
DiscreteDistribution gen_discrete_experiment(int k, int n_atoms,
                                             std::uint64_t seed);

struct GmmSpec {
  Vector weights;
  std::vector<GaussianMoments> components;
  Vector mixture_mean() const;
  Matrix mixture_cov() const;
};

GmmSpec gen_gmm_experiment(int k, int n_comp, std::uint64_t seed);

/// Linear model y = w x + e with e ~ N(0, sigma^2), x ~ U(-10, 10).
struct LinregModel {
  double weight;
  double sigma;  // noise standard deviation
};

/// single_instance: the fixed (w = 1, sigma = 10) model; otherwise
/// w ~ U(-10,10) and sigma^2 ~ U(500, 1000).
LinregModel gen_linreg_experiment(std::uint64_t seed, bool single_instance);

/// The ten reference regression models used by the multi-model runs.
const std::vector<LinregModel>& linreg_model_table();

using Sampler = std::function<Vector(Rng&)>;

Sampler gaussian_sampler(const GaussianMoments& mom);
Sampler discrete_sampler(const DiscreteDistribution& dist);
Sampler gmm_sampler(const GmmSpec& spec);
Sampler linreg_sampler(const LinregModel& model);  // draws (x, y)

Matrix draw_samples(const Sampler& sampler, int count, std::uint64_t seed);

/// Monte-Carlo CVaR_gamma of the loss -w'xi under the sampler: mean of the
/// top gamma fraction of losses.
double eval_oos_cvar(const Vector& w, const Sampler& sampler, double gamma,
                     int n_samples, std::uint64_t seed);

enum class LossKind { Abs, Sq };

/// Monte-Carlo mean of |(-w,1)'xi| or its square.
double eval_oos_expected_loss(const Vector& w, const Sampler& sampler,
                              LossKind loss, int n_samples,
                              std::uint64_t seed);

struct ExperimentConfig {
  Family family = Family::PortfolioGaussian;
  int k = 3;        // asset count / feature count
  int J = 30;       // dataset size
  int trials = 10;
  int oos_samples = 1000000;
  int n_atoms = 10;  // discrete truth support size
  int n_comp = 3;    // GMM components
  bool linreg_single_instance = true;
  std::uint64_t seed = 0;
  TrainConfig train;

  void validate() const;
};

struct MetricsRow {
  int trial = 0;
  double f0 = 0.0;       // worst-case objective at theta0
  double fstar = 0.0;    // worst-case objective at theta*
  double l0 = 0.0;       // out-of-sample metric at theta0
  double lstar = 0.0;    // out-of-sample metric at theta*
  double rel_impr_f = 0.0;
  double rel_impr_l = 0.0;
  double e_star = 0.0;
  double nd_before = 0.0;  // d(truth, reference; theta)/eps at theta0
  double nd_after = 0.0;   // same at theta*
  bool ok = true;
};

/// Truth sampler, dataset and derived seeds of one trial, exactly as
/// run_experiment draws them.
struct TrialData {
  DatasetView data;
  Sampler truth_sampler;
  std::uint64_t train_seed = 0;
  std::uint64_t oos_seed = 0;
};

TrialData make_trial(const ExperimentConfig& cfg, int trial);

/// Family-appropriate out-of-sample metric of a decision under the truth:
/// CVaR_gamma for the Gaussian portfolio, mean loss for the discrete and
/// GMM portfolios, expected absolute/squared error for the regressions.
double trial_oos_metric(const ExperimentConfig& cfg, const Sampler& truth,
                        const Vector& w, std::uint64_t seed);

/// Runs cfg.trials independent experiments (fresh truth + dataset + training
/// per trial, substreams of cfg.seed) and writes metrics.csv plus
/// trace_<t>.csv under out_dir when non-empty. Per-trial failures are
/// recorded and the run continues.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg,
                                       const std::string& out_dir);

void write_metrics_csv(const std::vector<MetricsRow>& rows,
                       const std::string& path);

struct SweepResult {
  std::vector<double> lambda_grid;
  std::vector<double> eta_grid;
  Matrix mean_improvement;  // lambda x eta
  Matrix violation_p90;     // 90th percentile of e(theta*)
};

SweepResult sensitivity_sweep(const ExperimentConfig& cfg,
                              const std::vector<double>& lambda_grid,
                              const std::vector<double>& eta_grid,
                              const std::string& out_dir);

/// Named preset runs that regenerate the headline result tables; all
/// randomness derives from seed and outputs are byte-stable.
void run_repro(const std::string& name, std::uint64_t seed,
               const std::string& out_dir);

}  // namespace otdro
