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

#include <doctest.h>

#include "otdro/conic_diff.hpp"
#include "test_util.hpp"

using namespace otdro;

namespace {

ConicProblemData bound_lp() {
  ConicProblemData p;
  p.A = Matrix::Constant(1, 1, -1.0);
  p.b = Vector::Constant(1, -1.0);
  p.c = Vector::Constant(1, 1.0);
  p.cone = ConeSpec({{ConeKind::NonNegative, 1}});
  return p;
}

// Small random LP with a bounded feasible region: min c'x over
// {x : x >= 0, 1'x = 1} with distinct costs.
ConicProblemData simplex_lp(Rng& rng, int n) {
  ConicProblemData p;
  p.A = Matrix::Zero(1 + n, n);
  p.A.row(0).setOnes();
  p.A.bottomRows(n) = -Matrix::Identity(n, n);
  p.b = Vector::Zero(1 + n);
  p.b(0) = 1.0;
  p.c = Vector(n);
  for (int i = 0; i < n; ++i) p.c(i) = rng.uniform(-1.0, 1.0);
  p.cone = ConeSpec({{ConeKind::Zero, 1}, {ConeKind::NonNegative, n}});
  return p;
}

// Test-only oracle: evaluate N(z) by literally assembling Q, Pi, V.
Vector residual_oracle(const EmbeddingPoint& z, const ConicProblemData& p) {
  const int m = p.rows(), n = p.cols();
  Matrix Q = Matrix::Zero(n + m, n + m);
  Q.topRightCorner(n, m) = p.A.transpose();
  Q.bottomLeftCorner(m, n) = -p.A;
  Vector V(n + m);
  V.head(n) = p.c;
  V.tail(m) = p.b;
  Vector zvec(n + m);
  zvec.head(n) = z.u;
  zvec.tail(m) = z.v;
  Vector Pi(n + m);
  Pi.head(n) = z.u;
  Pi.tail(m) = project_dual(p.cone, z.v);
  return (Q - Matrix::Identity(n + m, n + m)) * Pi + V + zvec;
}

DataDirections random_directions(Rng& rng, int m, int n) {
  DataDirections d;
  d.dA = Matrix(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) d.dA(i, j) = rng.normal();
  d.db = rng.normal_vector(m);
  d.dc = rng.normal_vector(n);
  return d;
}

}  // namespace

TEST_SUITE("conic_diff") {

TEST_CASE("residual vanishes at a polished solution") {
  const ConicProblemData p = bound_lp();
  const PrimalDualSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const EmbeddingPoint z = embed_solution(sol);
  CHECK(residual(z, p).norm() <= 1e-10);
}

TEST_CASE("residual at z = 0 equals V") {
  const ConicProblemData p = bound_lp();
  EmbeddingPoint z{Vector::Zero(1), Vector::Zero(1)};
  const Vector N = residual(z, p);
  CHECK(N(0) == doctest::Approx(p.c(0)));
  CHECK(N(1) == doctest::Approx(p.b(0)));
}

TEST_CASE("residual agrees with the literal Q/Pi/V oracle") {
  Rng rng(5);
  const ConicProblemData p = simplex_lp(rng, 4);
  for (int rep = 0; rep < 20; ++rep) {
    EmbeddingPoint z{rng.normal_vector(p.cols()), rng.normal_vector(p.rows())};
    CHECK((residual(z, p) - residual_oracle(z, p)).lpNorm<Eigen::Infinity>() <=
          1e-14 * (1.0 + residual_oracle(z, p).norm()));
  }
}

TEST_CASE("embedding of a valid solution recovers (y, s)") {
  Rng rng(6);
  const ConicProblemData p = simplex_lp(rng, 5);
  const PrimalDualSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const EmbeddingPoint z = embed_solution(sol);
  CHECK((project_dual(p.cone, z.v) - sol.y).norm() <= 1e-8);
  CHECK((project_dual(p.cone, z.v) - z.v - sol.s).norm() <= 1e-8);
}

TEST_CASE("jacobian reduces to Q on the orthant interior") {
  // If v lies strictly inside the dual orthant, J_Pi = I so J_z = Q.
  ConicProblemData p;
  p.A = Matrix(2, 2);
  p.A << 1.0, 2.0, -0.5, 0.3;
  p.b = Vector(2);
  p.b << 1.0, 2.0;
  p.c = Vector(2);
  p.c << 0.7, -0.2;
  p.cone = ConeSpec({{ConeKind::NonNegative, 2}});
  EmbeddingPoint z{Vector(2), Vector(2)};
  z.u << 0.3, -0.4;
  z.v << 1.5, 2.5;  // strictly positive
  const ResidualJacobian J = residual_jacobian(z, p);
  Matrix Q = Matrix::Zero(4, 4);
  Q.topRightCorner(2, 2) = p.A.transpose();
  Q.bottomLeftCorner(2, 2) = -p.A;
  CHECK((J.J_z - Q).norm() <= 1e-14);
}

TEST_CASE("jacobian matches finite differences of the residual") {
  Rng rng(7);
  const ConicProblemData p = simplex_lp(rng, 4);
  const int N = p.rows() + p.cols();
  int smooth_checked = 0;
  for (int rep = 0; rep < 20 && smooth_checked < 8; ++rep) {
    EmbeddingPoint z{rng.normal_vector(p.cols()), rng.normal_vector(p.rows())};
    if (z.v.cwiseAbs().minCoeff() < 1e-3) continue;  // stay off the kink set
    ++smooth_checked;
    const ResidualJacobian J = residual_jacobian(z, p);
    const double h = 1e-6;
    for (int dir = 0; dir < 3; ++dir) {
      Vector dz = Vector::Zero(N);
      for (int i = 0; i < N; ++i) dz(i) = rng.normal();
      dz.normalize();
      EmbeddingPoint zp{z.u + h * dz.head(p.cols()),
                        z.v + h * dz.tail(p.rows())};
      EmbeddingPoint zm{z.u - h * dz.head(p.cols()),
                        z.v - h * dz.tail(p.rows())};
      const Vector fd = (residual(zp, p) - residual(zm, p)) / (2.0 * h);
      CHECK((J.J_z * dz - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
    }
  }
  CHECK(smooth_checked >= 5);
}

TEST_CASE("zero data direction gives zero derivative") {
  const ConicProblemData p = bound_lp();
  const PrimalDualSolution sol = solve(p);
  DataDirections dir{Matrix::Zero(1, 1), Vector::Zero(1), Vector::Zero(1)};
  const SolutionPerturbation fwd = forward_derivative(sol, p, dir);
  CHECK(fwd.dx.norm() == 0.0);
  CHECK(fwd.dy.norm() == 0.0);
  CHECK(fwd.ds.norm() == 0.0);
}

TEST_CASE("bound shift sensitivity: dx/ddelta = 1") {
  // x >= 1 with b = -1; moving b by -delta moves the bound to 1 + delta.
  const ConicProblemData p = bound_lp();
  const PrimalDualSolution sol = solve(p);
  DataDirections dir{Matrix::Zero(1, 1), Vector::Constant(1, -1.0),
                     Vector::Zero(1)};
  const SolutionPerturbation fwd = forward_derivative(sol, p, dir);
  CHECK(fwd.dx(0) == doctest::Approx(1.0).epsilon(1e-7));

  // Cross-check against re-solves.
  const double h = 1e-6;
  ConicProblemData pp = p, pm = p;
  pp.b(0) -= h;
  pm.b(0) += h;
  const double fd = (solve(pp).x(0) - solve(pm).x(0)) / (2.0 * h);
  CHECK(fwd.dx(0) == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("cost perturbation at a nondegenerate vertex leaves x fixed") {
  Rng rng(8);
  const ConicProblemData p = simplex_lp(rng, 4);
  const PrimalDualSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  DataDirections dir{Matrix::Zero(p.rows(), p.cols()), Vector::Zero(p.rows()),
                     rng.normal_vector(p.cols())};
  const SolutionPerturbation fwd = forward_derivative(sol, p, dir);
  CHECK(fwd.dx.norm() <= 1e-8);
}

TEST_CASE("forward and adjoint satisfy the inner-product identity") {
  Rng rng(9);
  for (int rep = 0; rep < 30; ++rep) {
    const ConicProblemData p = simplex_lp(rng, 3 + rng.uniform_int(3));
    const PrimalDualSolution sol = solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const DataDirections dir = random_directions(rng, p.rows(), p.cols());
    SolutionPerturbation seed;
    seed.dx = rng.normal_vector(p.cols());
    seed.dy = rng.normal_vector(p.rows());
    seed.ds = rng.normal_vector(p.rows());
    SolutionPerturbation fwd;
    DataDirections adj;
    try {
      fwd = forward_derivative(sol, p, dir);
      adj = adjoint_derivative(sol, p, seed);
    } catch (const SingularJacobian&) {
      continue;  // nondifferentiable draw
    }
    const double lhs =
        fwd.dx.dot(seed.dx) + fwd.dy.dot(seed.dy) + fwd.ds.dot(seed.ds);
    const double rhs = (dir.dA.array() * adj.dA.array()).sum() +
                       dir.db.dot(adj.db) + dir.dc.dot(adj.dc);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * (1.0 + std::abs(lhs) + std::abs(rhs)));
  }
}

TEST_CASE("degenerate LP raises SingularJacobian, never silent garbage") {
  // x >= 1 stated twice: duplicate active constraints.
  ConicProblemData p;
  p.A = Matrix(2, 1);
  p.A << -1.0, -1.0;
  p.b = Vector(2);
  p.b << -1.0, -1.0;
  p.c = Vector::Constant(1, 1.0);
  p.cone = ConeSpec({{ConeKind::NonNegative, 2}});
  const PrimalDualSolution sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  DataDirections dir{Matrix::Zero(2, 1), Vector::Constant(2, -1.0),
                     Vector::Zero(1)};
  CHECK_THROWS_AS(forward_derivative(sol, p, dir), SingularJacobian);
  SolutionPerturbation seed{Vector::Constant(1, 1.0), Vector::Zero(2),
                            Vector::Zero(2)};
  CHECK_THROWS_AS(adjoint_derivative(sol, p, seed), SingularJacobian);
  // The regularized fallback still produces a finite answer.
  const DataDirections adj = adjoint_derivative_regularized(sol, p, seed);
  CHECK(adj.dA.allFinite());
}

TEST_CASE("unpolished input is rejected") {
  const ConicProblemData p = bound_lp();
  PrimalDualSolution sol = solve(p);
  sol.x(0) += 0.1;  // break the KKT point
  DataDirections dir{Matrix::Zero(1, 1), Vector::Zero(1), Vector::Zero(1)};
  CHECK_THROWS_AS(forward_derivative(sol, p, dir), SolveError);
}

}  // TEST_SUITE
