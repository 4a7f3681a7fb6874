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

#include "otdro/conic_diff.hpp"

#include <Eigen/QR>
#include <cmath>
#include <limits>

namespace otdro {

namespace {

constexpr double kConditionLimit = 1e12;

// Conditioning estimate from the rank-revealing R factor's diagonal.
double qr_condition(const Eigen::ColPivHouseholderQR<Matrix>& qr) {
  const Vector diag = qr.matrixR().diagonal().cwiseAbs();
  const double dmax = diag.maxCoeff();
  const double dmin = diag.minCoeff();
  if (dmin <= 0.0 || dmax <= 0.0) return std::numeric_limits<double>::infinity();
  return dmax / dmin;
}

Vector solve_checked(const Matrix& M, const Vector& rhs, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  if (qr_condition(qr) > kConditionLimit)
    throw SingularJacobian(std::string(what) +
                           ": residual Jacobian conditioning above 1e12");
  return qr.solve(rhs);
}

Vector solve_ridge(const Matrix& M, const Vector& rhs, double ridge) {
  const int N = static_cast<int>(M.cols());
  Matrix G = M.transpose() * M + ridge * Matrix::Identity(N, N);
  return Eigen::LDLT<Matrix>(G).solve(M.transpose() * rhs);
}

void check_polished(const EmbeddingPoint& z, const ConicProblemData& p,
                    const char* what) {
  const double scale = 1.0 + p.b.norm() + p.c.norm();
  if (residual(z, p).norm() > 1e-6 * scale)
    throw SolveError(std::string(what) +
                     ": solution is not polished (KKT residual too large)");
}

DataDirections adjoint_impl(const PrimalDualSolution& sol,
                            const ConicProblemData& problem,
                            const SolutionPerturbation& seed, bool regularized,
                            double ridge) {
  problem.validate();
  const int m = problem.rows(), n = problem.cols();
  require(seed.dx.size() == n && seed.dy.size() == m && seed.ds.size() == m,
          "adjoint_derivative: seed dimension mismatch");
  const EmbeddingPoint z = embed_solution(sol);
  check_polished(z, problem, "adjoint_derivative");
  const ResidualJacobian J = residual_jacobian(z, problem);

  Vector dz(n + m);
  dz.head(n) = seed.dx;
  dz.tail(m) = J.D.transpose() * (seed.dy + seed.ds) - seed.ds;

  const Vector w = regularized
                       ? solve_ridge(J.J_z.transpose(), -dz, ridge)
                       : solve_checked(J.J_z.transpose(), -dz,
                                       "adjoint_derivative");
  DataDirections out;
  J.data_adjoint(w, out.dA, out.db, out.dc);
  return out;
}

}  // namespace

EmbeddingPoint embed_solution(const PrimalDualSolution& sol) {
  return EmbeddingPoint{sol.x, sol.y - sol.s};
}

Vector residual(const EmbeddingPoint& z, const ConicProblemData& problem) {
  const int m = problem.rows(), n = problem.cols();
  require(z.u.size() == n && z.v.size() == m,
          "residual: embedding dimension mismatch");
  const Vector y_proj = project_dual(problem.cone, z.v);
  Vector N(n + m);
  N.head(n) = problem.A.transpose() * y_proj + problem.c;
  N.tail(m) = -problem.A * z.u - y_proj + problem.b + z.v;
  return N;
}

ResidualJacobian residual_jacobian(const EmbeddingPoint& z,
                                   const ConicProblemData& problem) {
  const int m = problem.rows(), n = problem.cols();
  require(z.u.size() == n && z.v.size() == m,
          "residual_jacobian: embedding dimension mismatch");
  ResidualJacobian out;
  out.u = z.u;
  out.y_proj = project_dual(problem.cone, z.v);
  out.D = projection_jacobian_dual(problem.cone, z.v);
  // (Q - I) blkdiag(I, D) + I = [[0, A'D], [-A, I - D]].
  out.J_z = Matrix::Zero(n + m, n + m);
  out.J_z.topRightCorner(n, m).noalias() = problem.A.transpose() * out.D;
  out.J_z.bottomLeftCorner(m, n) = -problem.A;
  out.J_z.bottomRightCorner(m, m) = Matrix::Identity(m, m) - out.D;
  return out;
}

Vector ResidualJacobian::data_direction(const Matrix& dA, const Vector& db,
                                        const Vector& dc) const {
  const int n = static_cast<int>(u.size());
  const int m = static_cast<int>(y_proj.size());
  require(dA.rows() == m && dA.cols() == n && db.size() == m && dc.size() == n,
          "data_direction: direction dimension mismatch");
  Vector g(n + m);
  g.head(n) = dA.transpose() * y_proj + dc;
  g.tail(m) = -dA * u + db;
  return g;
}

void ResidualJacobian::data_adjoint(const Vector& w, Matrix& dA, Vector& db,
                                    Vector& dc) const {
  const int n = static_cast<int>(u.size());
  const int m = static_cast<int>(y_proj.size());
  require(w.size() == n + m, "data_adjoint: dimension mismatch");
  const Vector wu = w.head(n);
  const Vector wv = w.tail(m);
  dA = y_proj * wu.transpose() - wv * u.transpose();
  db = wv;
  dc = wu;
}

SolutionPerturbation forward_derivative(const PrimalDualSolution& sol,
                                        const ConicProblemData& problem,
                                        const DataDirections& dir) {
  problem.validate();
  const int m = problem.rows(), n = problem.cols();
  const EmbeddingPoint z = embed_solution(sol);
  check_polished(z, problem, "forward_derivative");
  const ResidualJacobian J = residual_jacobian(z, problem);
  const Vector g = J.data_direction(dir.dA, dir.db, dir.dc);
  const Vector dz = solve_checked(J.J_z, -g, "forward_derivative");
  SolutionPerturbation out;
  out.dx = dz.head(n);
  out.dy = J.D * dz.tail(m);
  out.ds = out.dy - dz.tail(m);
  return out;
}

DataDirections adjoint_derivative(const PrimalDualSolution& sol,
                                  const ConicProblemData& problem,
                                  const SolutionPerturbation& seed) {
  return adjoint_impl(sol, problem, seed, false, 0.0);
}

DataDirections adjoint_derivative_regularized(const PrimalDualSolution& sol,
                                              const ConicProblemData& problem,
                                              const SolutionPerturbation& seed,
                                              double ridge) {
  return adjoint_impl(sol, problem, seed, true, ridge);
}

}  // namespace otdro
