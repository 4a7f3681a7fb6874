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

#include "otdro/cones.hpp"
#include "otdro/types.hpp"

namespace otdro {

/// Standard-form conic program
///   min c'x   s.t.  Ax + s = b,  s in K,
/// with K the product cone described by `cone`.
struct ConicProblemData {
  Matrix A;
  Vector b;
  Vector c;
  ConeSpec cone;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
  void validate() const;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible, Unbounded };

/// Primal-dual triple with diagnostics. On Optimal, the residual fields hold
/// the *normalized* KKT residuals used for termination:
///   primal_res = ||Ax + s - b|| / (1 + ||b||)
///   dual_res   = ||A'y + c|| / (1 + ||c||)
///   gap        = |c'x + b'y| / (1 + |c'x| + |b'y|).
/// Use kkt_residuals() for the raw unnormalized quantities.
struct PrimalDualSolution {
  Vector x;
  Vector y;
  Vector s;
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double gap = 0.0;
};

struct SolverSettings {
  double tol = 1e-9;       // normalized residual tolerance
  int max_iter = 200000;
  double relaxation = 1.6;  // over-relaxation in (0, 2)
  bool scaling = true;      // Ruiz diagonal equilibration
  bool polish = true;       // Newton refinement of the KKT residual map
  void validate() const;
};

/// Solve the conic program by Douglas-Rachford splitting on the primal-dual
/// embedding, with optional equilibration, over-relaxation, and a final
/// Newton polish so downstream differentiation sees residuals near 1e-9.
PrimalDualSolution solve(const ConicProblemData& problem,
                         const SolverSettings& settings = {});

struct KktResiduals {
  double primal;  // ||Ax + s - b||_2
  double dual;    // ||A'y + c||_2
  double gap;     // |s'y|
};

/// Unnormalized KKT residuals of a candidate triple.
KktResiduals kkt_residuals(const ConicProblemData& problem,
                           const PrimalDualSolution& candidate);

}  // namespace otdro
