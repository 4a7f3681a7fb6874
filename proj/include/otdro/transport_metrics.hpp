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

#include "otdro/conic_solver.hpp"
#include "otdro/types.hpp"

namespace otdro {

/// Learnable transport-cost parameter: lower-triangular L with strictly
/// positive diagonal, and the cost order p (1 or 2 in scope). The unit cost
/// is kappa(x1, x2) = ||L'(x1 - x2)||_2^p.
struct TransportParam {
  Matrix L;
  int p = 1;

  int dim() const { return static_cast<int>(L.rows()); }
  void validate() const;
};

/// Weighted point cloud; weights nonnegative and summing to one.
struct DiscreteDistribution {
  Matrix points;   // n_pts x d
  Vector weights;  // n_pts

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  void validate() const;
};

/// Mean-covariance pair for the Gelbrich case.
struct GaussianMoments {
  Vector mean;
  Matrix cov;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

double mahalanobis_cost(const Vector& x1, const Vector& x2,
                        const TransportParam& param);

/// Value and optimal plan of the transport LP min <cost, pi> over couplings
/// of P and Q; value equals d(P, Q)^p.
struct TransportPlan {
  double value;  // optimal LP value, clipped at 0
  Matrix plan;   // |P| x |Q|
};

TransportPlan discrete_transport(const DiscreteDistribution& P,
                                 const DiscreteDistribution& Q,
                                 const TransportParam& param,
                                 const SolverSettings& settings = {});

/// Parametrized type-p Mahalanobis distance between discrete distributions:
/// the p-th root of the transport LP optimum.
double discrete_distance(const DiscreteDistribution& P,
                         const DiscreteDistribution& Q,
                         const TransportParam& param,
                         const SolverSettings& settings = {});

/// Envelope-theorem gradient of discrete_distance in L (lower-triangular
/// restriction). Zero-cost plan-supported pairs at p = 1 contribute a zero
/// matrix. The overload with a precomputed plan avoids re-solving the LP.
Matrix discrete_distance_gradient(const DiscreteDistribution& P,
                                  const DiscreteDistribution& Q,
                                  const TransportParam& param,
                                  const SolverSettings& settings = {});
Matrix discrete_distance_gradient(const DiscreteDistribution& P,
                                  const DiscreteDistribution& Q,
                                  const TransportParam& param,
                                  const TransportPlan& solved);

/// Closed-form parametrized Gelbrich distance between moment pairs.
double gelbrich_distance(const GaussianMoments& a, const GaussianMoments& b,
                         const TransportParam& param);

/// Gradient of gelbrich_distance in L via the backward chain of elementary
/// derivative maps (Lyapunov solves for the matrix square root).
Matrix gelbrich_gradient(const GaussianMoments& a, const GaussianMoments& b,
                         const TransportParam& param);

/// Solves X S + S X = RHS for symmetric positive definite S in its
/// eigenbasis. Throws SingularPencil when min(lambda_i + lambda_j) <= 1e-12.
Matrix lyapunov_solve(const Matrix& S, const Matrix& RHS);

/// Principal square root of a symmetric PSD matrix (eigendecomposition,
/// negative eigenvalues clipped to zero). Throws NonSymmetricError.
Matrix sqrtm_psd(const Matrix& M);

}  // namespace otdro
