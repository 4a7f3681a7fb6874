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

#include "otdro/coverage.hpp"

#include <algorithm>
#include <cmath>

#include "otdro/rng.hpp"

namespace otdro {

GaussianMoments empirical_moments(const Matrix& rows, double ridge) {
  const int J = static_cast<int>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  GaussianMoments out;
  out.mean = rows.colwise().mean();
  const Matrix centered = rows.rowwise() - out.mean.transpose();
  out.cov = (centered.transpose() * centered) / J +
            ridge * Matrix::Identity(d, d);
  return out;
}

Reference make_reference(const DatasetView& data, BootstrapMode mode) {
  data.validate();
  Reference ref;
  ref.mode = mode;
  if (mode == BootstrapMode::Discrete) {
    ref.empirical.points = data.samples;
    ref.empirical.weights =
        Vector::Constant(data.count(), 1.0 / data.count());
  } else {
    ref.moments = empirical_moments(data.samples);
  }
  return ref;
}

BootstrapSet bootstrap(const DatasetView& data, int n_b, BootstrapMode mode,
                       std::uint64_t seed) {
  data.validate();
  if (n_b < 1) throw ConfigError("bootstrap: n_b must be >= 1");
  const int J = data.count();
  BootstrapSet out;
  out.mode = mode;
  out.seed = seed;
  for (int k = 0; k < n_b; ++k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    Matrix rows(J, data.dim());
    for (int j = 0; j < J; ++j) rows.row(j) = data.samples.row(rng.uniform_int(J));
    if (mode == BootstrapMode::Discrete) {
      DiscreteDistribution rep;
      rep.points = rows;
      rep.weights = Vector::Constant(J, 1.0 / J);
      out.discrete.push_back(std::move(rep));
    } else {
      out.gaussian.push_back(empirical_moments(rows));
    }
  }
  return out;
}

double calibrate_epsilon(std::vector<double> distances, double beta) {
  if (distances.empty())
    throw ConfigError("calibrate_epsilon: empty distance list");
  if (!(beta > 0.0 && beta < 1.0))
    throw ConfigError("calibrate_epsilon: beta must lie in (0,1)");
  const int n_b = static_cast<int>(distances.size());
  const int idx = static_cast<int>(std::ceil((1.0 - beta) * n_b));
  std::sort(distances.begin(), distances.end());
  return distances[std::max(idx, 1) - 1];
}

double sigmoid(double x, double eta_p) {
  const double t = eta_p * x;
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

ReplicaDistances replica_distances(const TransportParam& theta,
                                   const Reference& ref,
                                   const BootstrapSet& boots,
                                   const SolverSettings& settings) {
  ReplicaDistances out;
  const int n_b = boots.count();
  out.values.reserve(n_b);
  if (boots.mode == BootstrapMode::Discrete) {
    out.plans.reserve(n_b);
    for (const auto& rep : boots.discrete) {
      TransportPlan t = discrete_transport(ref.empirical, rep, theta, settings);
      out.values.push_back(std::pow(t.value, 1.0 / theta.p));
      out.plans.push_back(std::move(t));
    }
  } else {
    for (const auto& rep : boots.gaussian)
      out.values.push_back(gelbrich_distance(ref.moments, rep, theta));
  }
  return out;
}

double penalty_from_distances(const std::vector<double>& distances,
                              const PenaltyConfig& cfg) {
  if (distances.empty()) throw ConfigError("penalty: empty distance list");
  double acc = 0.0;
  for (double d : distances) acc += sigmoid(d / cfg.epsilon - 1.0, cfg.eta_p);
  return acc / static_cast<double>(distances.size()) - cfg.beta;
}

double penalty_value(const TransportParam& theta, const Reference& ref,
                     const BootstrapSet& boots, const PenaltyConfig& cfg,
                     const SolverSettings& settings) {
  return penalty_from_distances(
      replica_distances(theta, ref, boots, settings).values, cfg);
}

Matrix penalty_gradient_from(const TransportParam& theta, const Reference& ref,
                             const BootstrapSet& boots,
                             const PenaltyConfig& cfg,
                             const ReplicaDistances& dist) {
  const int n_b = boots.count();
  const int d = theta.dim();
  require(static_cast<int>(dist.values.size()) == n_b,
          "penalty_gradient: distance list size mismatch");
  Matrix je = Matrix::Zero(d, d);
  for (int k = 0; k < n_b; ++k) {
    const double s = sigmoid(dist.values[k] / cfg.epsilon - 1.0, cfg.eta_p);
    const double sprime = cfg.eta_p * s * (1.0 - s);
    if (sprime == 0.0) continue;
    Matrix grad_d;
    if (boots.mode == BootstrapMode::Discrete) {
      grad_d = discrete_distance_gradient(ref.empirical, boots.discrete[k],
                                          theta, dist.plans[k]);
    } else {
      grad_d = gelbrich_gradient(ref.moments, boots.gaussian[k], theta);
    }
    je += sprime * grad_d;
  }
  je /= (n_b * cfg.epsilon);
  return je;
}

Matrix penalty_gradient(const TransportParam& theta, const Reference& ref,
                        const BootstrapSet& boots, const PenaltyConfig& cfg,
                        const SolverSettings& settings) {
  const ReplicaDistances dist = replica_distances(theta, ref, boots, settings);
  return penalty_gradient_from(theta, ref, boots, cfg, dist);
}

}  // namespace otdro
