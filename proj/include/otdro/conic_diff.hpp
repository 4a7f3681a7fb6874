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

namespace otdro {

// Differentiation of the solution map (A, b, c) -> (x, y, s) through the
// homogeneous residual map
//   N(z) = (Q - I) Pi(z) + V + z,   z = (u, v),  u = x,  v = y - s,
// where Q = [[0, A'], [-A, 0]], V = (c, b), and Pi projects onto R^n x K*.
// A zero of N is exactly a KKT point; differentiating N in z and in the data
// gives forward- and adjoint-mode derivatives of the solution.

/// Embedding z = (u, v) of a primal-dual solution: u = x, v = y - s.
struct EmbeddingPoint {
  Vector u;
  Vector v;
  int dim() const { return static_cast<int>(u.size() + v.size()); }
};

EmbeddingPoint embed_solution(const PrimalDualSolution& sol);

/// N(z, A, b, c); zero (up to solver tolerance) at a polished solution.
Vector residual(const EmbeddingPoint& z, const ConicProblemData& problem);

/// One conservative-Jacobian element of N at z, together with the structured
/// directional actions in the problem data. dA never materializes as an
/// N x (m*n) matrix; its action is computed by contraction.
struct ResidualJacobian {
  Matrix J_z;     // (Q - I) * blkdiag(I, J_Pi) + I, size N x N
  Vector u;       // Pi(z) components at the linearization point
  Vector y_proj;  // Pi_{K*}(v)
  Matrix D;       // J_Pi element for the v block

  /// g = dN/d(A,b,c) applied to a direction: (dA' y + dc, -dA u + db).
  Vector data_direction(const Matrix& dA, const Vector& db,
                        const Vector& dc) const;

  /// Adjoint of data_direction at w = (w_u, w_v):
  /// dA = y w_u' - w_v u', db = w_v, dc = w_u.
  void data_adjoint(const Vector& w, Matrix& dA, Vector& db, Vector& dc) const;
};

ResidualJacobian residual_jacobian(const EmbeddingPoint& z,
                                   const ConicProblemData& problem);

struct DataDirections {
  Matrix dA;
  Vector db;
  Vector dc;
};

struct SolutionPerturbation {
  Vector dx;
  Vector dy;
  Vector ds;
};

/// Forward derivative d(x,y,s) in the data direction (dA, db, dc).
/// Throws SingularJacobian when the conditioning estimate of J_z exceeds
/// 1e12 (nondifferentiable point).
SolutionPerturbation forward_derivative(const PrimalDualSolution& sol,
                                        const ConicProblemData& problem,
                                        const DataDirections& dir);

/// Adjoint derivative: contracts a cotangent (dx, dy, ds) into (dA, db, dc)
/// so that <forward(dir), seed> = <dir, adjoint(seed)>.
DataDirections adjoint_derivative(const PrimalDualSolution& sol,
                                  const ConicProblemData& problem,
                                  const SolutionPerturbation& seed);

/// Tikhonov-regularized adjoint, the fallback the trainer uses when
/// adjoint_derivative reports SingularJacobian.
DataDirections adjoint_derivative_regularized(const PrimalDualSolution& sol,
                                              const ConicProblemData& problem,
                                              const SolutionPerturbation& seed,
                                              double ridge = 1e-8);

}  // namespace otdro
