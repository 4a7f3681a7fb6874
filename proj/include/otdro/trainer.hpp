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
#include <optional>
#include <string>
#include <vector>

#include "otdro/coverage.hpp"
#include "otdro/dro_problems.hpp"

namespace otdro {

enum class StepSchedule { Constant, InverseIter };

/// Hyperparameters of the bilevel descent loop. Defaults are the values
/// used for every numerical run.
struct TrainConfig {
  double step = 1e-4;                       // alpha_bar
  StepSchedule schedule = StepSchedule::Constant;
  double tol = 1e-6;                        // relative-decrease stop
  double lambda_p = 10.0;
  double eta_p = 100.0;
  long maxiter = 1000000;
  double grad_clip_lo = -1000.0;
  double grad_clip_hi = 1000.0;
  double eig_min = 1e-6;                    // clip on eigenvalues of LL'
  double eig_max = 1e6;
  int n_b = 20;
  double beta = 0.1;
  double gamma = 0.05;                      // CVaR level (Gaussian portfolio)
  std::uint64_t seed = 0;
  std::optional<double> eps_override;       // skip calibration when set
  SolverSettings solver;  // main conic solves
  // Replica transport solves: the values only feed the sigmoid penalty, so a
  // looser tolerance is plenty; degenerate resample LPs have long splitting
  // tails, hence the generous iteration cap.
  SolverSettings distance_solver{1e-6, 2000000, 1.6, true, false};
  void validate() const;
};

// Per-iteration event flags (bitmask in TrainRecord::events).
inline constexpr unsigned kEventGradClipped = 1u;
inline constexpr unsigned kEventSingularFallback = 2u;
inline constexpr unsigned kEventDegeneratePlan = 4u;

struct TrainRecord {
  long iter = 0;
  double phi = 0.0;
  double objective = 0.0;  // conic optimal value c'x*
  double penalty = 0.0;    // lambda_p max{0, e}^2
  double e_theta = 0.0;
  double grad_norm = 0.0;  // Frobenius norm of the clipped hypergradient
  double step = 0.0;
  unsigned events = 0;
};

struct TrainTrace {
  std::vector<TrainRecord> records;
  Matrix theta_star;
  Vector w_star;
  double value_star = 0.0;  // conic value at theta_star
  double e_star = 0.0;
  Matrix theta0;
  Vector w0;
  double value0 = 0.0;
  double e0 = 0.0;
  double epsilon = 0.0;
};

/// One element of J_phi(theta): the adjoint-mode objective hypergradient
/// J_S' c plus the S' J_c term (identically zero here since no builder has a
/// theta-dependent c) plus the gated penalty term 2 lambda_p max{0,e} J_e.
/// On SingularJacobian the Tikhonov fallback is used and *events gets
/// kEventSingularFallback.
Matrix hypergradient(const TransportParam& theta,
                     const ProblemInstance& instance,
                     const PrimalDualSolution& solution, const Reference& ref,
                     const BootstrapSet& boots, const PenaltyConfig& penalty,
                     const ReplicaDistances& dists, unsigned* events = nullptr);

/// Eigenvalue-clipped Cholesky projection: M = L L' with spectrum clamped to
/// [eig_min, eig_max], returned as the lower-triangular Cholesky factor.
TransportParam project_param(const Matrix& l_raw, double eig_min,
                             double eig_max, int p);

double step_size(StepSchedule schedule, double base, long iter);

/// Full bilevel descent: bootstrap, calibrate epsilon at theta0 = I, then
/// iterate solve / hypergradient / clipped step / projection until the
/// relative decrease of phi falls below tol or maxiter.
TrainTrace train(BuilderId builder, const DatasetView& data,
                 const TrainConfig& cfg);

/// Writes the trace as CSV: header plus one row per iteration, 17
/// significant digits.
void write_trace_csv(const TrainTrace& trace, const std::string& path);

/// Bootstrap/penalty mode used for each lower-level family.
BootstrapMode family_mode(BuilderId builder);

/// Builds the family's conic instance at the given parameter.
ProblemInstance build_instance(BuilderId builder, const DatasetView& data,
                               double epsilon, double gamma,
                               const TransportParam& theta);

}  // namespace otdro
