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
#include <vector>

#include "otdro/dro_problems.hpp"
#include "otdro/transport_metrics.hpp"

namespace otdro {

enum class BootstrapMode { Discrete, Gaussian };

/// Bootstrap replicas of the reference distribution. Discrete replicas keep
/// J atoms with equal weights 1/J (duplicates allowed); Gaussian replicas
/// are the empirical moments of such resamples with a 1e-6 ridge.
struct BootstrapSet {
  BootstrapMode mode = BootstrapMode::Discrete;
  std::vector<DiscreteDistribution> discrete;
  std::vector<GaussianMoments> gaussian;
  std::uint64_t seed = 0;

  int count() const {
    return static_cast<int>(mode == BootstrapMode::Discrete ? discrete.size()
                                                            : gaussian.size());
  }
};

/// Reference distribution the replicas are measured against.
struct Reference {
  BootstrapMode mode = BootstrapMode::Discrete;
  DiscreteDistribution empirical;
  GaussianMoments moments;
};

/// Empirical mean and (population) covariance of the rows, with ridge.
GaussianMoments empirical_moments(const Matrix& rows, double ridge = 1e-6);

Reference make_reference(const DatasetView& data, BootstrapMode mode);

/// Resample the dataset rows with replacement; replica k consumes the
/// substream (seed, k).
BootstrapSet bootstrap(const DatasetView& data, int n_b, BootstrapMode mode,
                       std::uint64_t seed);

/// The ceil((1-beta) n_b)-th smallest distance (order-statistic quantile).
double calibrate_epsilon(std::vector<double> distances, double beta);

struct PenaltyConfig {
  double beta = 0.1;
  double lambda_p = 10.0;
  double eta_p = 100.0;
  double epsilon = 1.0;
};

/// Numerically stable logistic sigmoid with slope eta_p; saturates to
/// exactly 0/1 for large |eta_p * x| without overflow.
double sigmoid(double x, double eta_p);

/// Distance of every replica from the reference under theta. For discrete
/// mode the optimal plans are returned so the envelope gradients reuse the
/// same LP solves.
struct ReplicaDistances {
  std::vector<double> values;
  std::vector<TransportPlan> plans;  // discrete mode only
};

ReplicaDistances replica_distances(const TransportParam& theta,
                                   const Reference& ref,
                                   const BootstrapSet& boots,
                                   const SolverSettings& settings = {});

/// e(theta) from precomputed distances: mean sigmoid((d_k/eps) - 1) - beta.
double penalty_from_distances(const std::vector<double>& distances,
                              const PenaltyConfig& cfg);

/// Sigmoid-smoothed coverage violation e(theta) in [-beta, 1-beta].
double penalty_value(const TransportParam& theta, const Reference& ref,
                     const BootstrapSet& boots, const PenaltyConfig& cfg,
                     const SolverSettings& settings = {});

/// J_e(theta) = (1/(n_b eps)) sum sigma'(d_k/eps - 1) grad_L d_k.
/// The caller multiplies by 2 lambda_p max{0, e(theta)} to form the full
/// penalty gradient; it is exactly zero whenever e(theta) <= 0.
Matrix penalty_gradient(const TransportParam& theta, const Reference& ref,
                        const BootstrapSet& boots, const PenaltyConfig& cfg,
                        const SolverSettings& settings = {});

/// penalty_gradient from distances (and plans) already computed at theta.
Matrix penalty_gradient_from(const TransportParam& theta, const Reference& ref,
                             const BootstrapSet& boots,
                             const PenaltyConfig& cfg,
                             const ReplicaDistances& dist);

}  // namespace otdro
