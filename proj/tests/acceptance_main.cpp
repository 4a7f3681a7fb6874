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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the binary exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "otdro/experiments.hpp"
#include "otdro/io.hpp"
#include "otdro/trainer.hpp"
#include "test_util.hpp"

using namespace otdro;
using testutil::fd_gradient_lower;
using testutil::rel_err;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            double seconds) {
  std::printf("[%s] criterion %d: %s (%.1f s)\n", pass ? "PASS" : "FAIL",
              criterion, what.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Check {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      detail = msg;
    }
  }
};

DiscreteDistribution dist2(double x11, double x12, double x21, double x22,
                           double w1, double w2) {
  DiscreteDistribution d;
  d.points = Matrix(2, 2);
  d.points << x11, x12, x21, x22;
  d.weights = Vector(2);
  d.weights << w1, w2;
  return d;
}

Matrix lower2(double a, double c, double d) {
  Matrix L(2, 2);
  L << a, 0.0, c, d;
  return L;
}

// ---------------------------------------------------------------------------
// Criterion 1: golden transport/Gelbrich values and nonconvexity witnesses.
// ---------------------------------------------------------------------------
void criterion1() {
  const auto t0 = Clock::now();
  Check c;

  {
    const DiscreteDistribution P = dist2(0.7, 0.4, 1.7, 1.0, 0.4, 0.6);
    const DiscreteDistribution Q = dist2(1.8, 0.1, 0.5, 1.4, 0.5, 0.5);
    const Matrix L1 = lower2(1.0, 0.5, 0.5), L2 = lower2(0.5, 1.0, 1.0);
    const double d1 = discrete_distance(P, Q, {L1, 1});
    const double d2 = discrete_distance(P, Q, {L2, 1});
    const double dm = discrete_distance(P, Q, {0.5 * (L1 + L2), 1});
    c.expect(std::abs(d1 - 0.6203) <= 5e-4, "type-1 value at L1");
    c.expect(std::abs(d2 - 0.5036) <= 5e-4, "type-1 value at L2");
    c.expect(std::abs(dm - 0.6820) <= 5e-4, "type-1 value at midpoint");
    c.expect(dm > 0.5 * (d1 + d2), "type-1 nonconvexity witness");
  }
  {
    const DiscreteDistribution P = dist2(1.2, 1.9, 0.1, 0.1, 0.6, 0.4);
    const DiscreteDistribution Q = dist2(0.2, 1.4, 1.4, 0.3, 0.6, 0.4);
    const Matrix L1 = lower2(1.0, 0.5, 0.5), L2 = lower2(0.5, 1.0, 0.5);
    const double d1 = discrete_distance(P, Q, {L1, 2});
    const double d2 = discrete_distance(P, Q, {L2, 2});
    const double dm = discrete_distance(P, Q, {0.5 * (L1 + L2), 2});
    c.expect(std::abs(d1 - 1.0578) <= 5e-4, "type-2 value at L1");
    c.expect(std::abs(d2 - 0.9646) <= 5e-4, "type-2 value at L2");
    c.expect(std::abs(dm - 1.1433) <= 5e-4, "type-2 value at midpoint");
    c.expect(dm > 0.5 * (d1 + d2), "type-2 nonconvexity witness");
  }
  {
    GaussianMoments P{(Vector(2) << 1.0, 0.6).finished(),
                      (Matrix(2, 2) << 0.1, 0, 0, 1.0).finished()};
    GaussianMoments Q{(Vector(2) << 0.8, 0.6).finished(),
                      (Matrix(2, 2) << 10.0, 0, 0, 1.0).finished()};
    const Matrix L1 = lower2(0.2, 0.2, 1.9), L2 = lower2(0.6, 0.8, 0.5);
    const double g1 = gelbrich_distance(P, Q, {L1, 2});
    const double g2 = gelbrich_distance(P, Q, {L2, 2});
    const double gm = gelbrich_distance(P, Q, {0.5 * (L1 + L2), 2});
    c.expect(std::abs(g1 - 0.5675) <= 5e-4, "gelbrich value at L1");
    c.expect(std::abs(g2 - 1.3142) <= 5e-4, "gelbrich value at L2");
    c.expect(std::abs(gm - 1.0636) <= 5e-4, "gelbrich value at midpoint");
    c.expect(gm > 0.5 * (g1 + g2), "gelbrich nonconvexity witness");
  }
  {
    GaussianMoments P{(Vector(2) << 0.4, 0.6).finished(),
                      (Matrix(2, 2) << 0.1, 0, 0, 1.0).finished()};
    GaussianMoments Q{(Vector(2) << 0.4, 0.4).finished(),
                      (Matrix(2, 2) << 10.0, 0, 0, 1.0).finished()};
    const Matrix L1 = lower2(0.7, 0.4, 1.9), L2 = lower2(0.9, 0.9, 0.6);
    const double q1 = std::pow(gelbrich_distance(P, Q, {L1, 2}), 2);
    const double q2 = std::pow(gelbrich_distance(P, Q, {L2, 2}), 2);
    const double qm =
        std::pow(gelbrich_distance(P, Q, {0.5 * (L1 + L2), 2}), 2);
    c.expect(std::abs(q1 - 3.9720) <= 5e-4, "squared gelbrich at L1");
    c.expect(std::abs(q2 - 4.4900) <= 5e-4, "squared gelbrich at L2");
    c.expect(std::abs(qm - 4.4865) <= 5e-4, "squared gelbrich at midpoint");
    c.expect(qm > 0.5 * (q1 + q2), "squared gelbrich nonconvexity witness");
  }

  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 5.0, "runtime exceeded 5 s");
  report(1, c.ok, "golden distance values and nonconvexity witnesses" +
                      (c.ok ? "" : " -- " + c.detail),
         dt);
}

// ---------------------------------------------------------------------------
// Helpers shared by the random-instance criteria.
// ---------------------------------------------------------------------------

DatasetView random_returns(Rng& rng, int J, int k) {
  DatasetView d;
  d.samples = Matrix(J, k);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < k; ++i) d.samples(j, i) = 0.3 * rng.uniform(-1.0, 1.0);
  return d;
}

DatasetView random_linreg(Rng& rng, int J, double w, double sigma) {
  DatasetView d;
  d.samples = Matrix(J, 2);
  for (int j = 0; j < J; ++j) {
    const double x = rng.uniform(-10.0, 10.0);
    d.samples(j, 0) = x;
    d.samples(j, 1) = w * x + sigma * rng.normal();
  }
  return d;
}

ProblemInstance random_instance(Rng& rng, BuilderId id) {
  const int k = 2 + rng.uniform_int(4);  // portfolio assets <= 5
  const int J = 4 + rng.uniform_int(47);
  const double eps = rng.uniform(0.02, 0.5);
  switch (id) {
    case BuilderId::PortfolioT1:
      return build_portfolio_type1(
          random_returns(rng, J, k), eps,
          {testutil::random_lower_triangular(rng, k), 1});
    case BuilderId::PortfolioT2:
      return build_portfolio_type2(
          random_returns(rng, J, k), eps,
          {testutil::random_lower_triangular(rng, k), 2});
    case BuilderId::PortfolioGaussian: {
      const DatasetView data = random_returns(rng, std::max(J, k + 2), k);
      return build_portfolio_gaussian(empirical_moments(data.samples), eps,
                                      rng.uniform(0.03, 0.3),
                                      {testutil::random_lower_triangular(rng, k), 2});
    }
    case BuilderId::RegressionAbs:
      return build_linreg_abs(
          random_linreg(rng, J, rng.uniform(-3.0, 3.0), 3.0), eps,
          {testutil::random_lower_triangular(rng, 2), 1});
    case BuilderId::RegressionSq:
      return build_linreg_sq(
          random_linreg(rng, J, rng.uniform(-3.0, 3.0), 3.0), eps,
          {testutil::random_lower_triangular(rng, 2), 2});
  }
  throw ConfigError("unreachable");
}

const std::vector<BuilderId> kAllBuilders = {
    BuilderId::PortfolioT1, BuilderId::PortfolioT2,
    BuilderId::PortfolioGaussian, BuilderId::RegressionAbs,
    BuilderId::RegressionSq};

// ---------------------------------------------------------------------------
// Criterion 2: solver correctness on random instances + transport LPs
// against vertex enumeration.
// ---------------------------------------------------------------------------

double transport_bruteforce(const DiscreteDistribution& P,
                            const DiscreteDistribution& Q,
                            const TransportParam& param) {
  const int I = P.size(), J = Q.size(), nv = I * J, nb = I + J - 1;
  Matrix E = Matrix::Zero(nb, nv);
  Vector rhs(nb);
  for (int j = 0; j < J; ++j) {
    for (int i = 0; i < I; ++i) E(j, i * J + j) = 1.0;
    rhs(j) = Q.weights(j);
  }
  for (int i = 0; i + 1 < I; ++i) {
    for (int j = 0; j < J; ++j) E(J + i, i * J + j) = 1.0;
    rhs(J + i) = P.weights(i);
  }
  Vector cost(nv);
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j)
      cost(i * J + j) =
          mahalanobis_cost(P.points.row(i), Q.points.row(j), param);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> idx(nb);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    Matrix B(nb, nb);
    for (int col = 0; col < nb; ++col) B.col(col) = E.col(idx[col]);
    const Eigen::FullPivLU<Matrix> lu(B);
    if (lu.isInvertible()) {
      const Vector basis = lu.solve(rhs);
      if (basis.minCoeff() >= -1e-10) {
        Vector plan = Vector::Zero(nv);
        for (int col = 0; col < nb; ++col) plan(idx[col]) = basis(col);
        bool feasible = true;
        for (int i = 0; i < I && feasible; ++i) {
          double row = 0.0;
          for (int j = 0; j < J; ++j) row += plan(i * J + j);
          feasible = std::abs(row - P.weights(i)) <= 1e-8;
        }
        if (feasible) best = std::min(best, cost.dot(plan));
      }
    }
    int pos = nb - 1;
    while (pos >= 0 && idx[pos] == nv - nb + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int q = pos + 1; q < nb; ++q) idx[q] = idx[q - 1] + 1;
  }
  return best;
}

void criterion2() {
  const auto t0 = Clock::now();
  Check c;
  Rng rng(2026);
  int solved = 0;
  for (BuilderId id : kAllBuilders) {
    for (int rep = 0; rep < 100 && c.ok; ++rep) {
      const ProblemInstance inst = random_instance(rng, id);
      const PrimalDualSolution sol = solve(inst.conic);
      c.expect(sol.status == SolveStatus::Optimal,
               builder_name(id) + " instance not Optimal");
      if (!c.ok) break;
      c.expect(sol.primal_res <= 1e-7 && sol.dual_res <= 1e-7 &&
                   sol.gap <= 1e-7,
               builder_name(id) + " residuals above 1e-7");
      const KktResiduals raw = kkt_residuals(inst.conic, sol);
      const double obj = std::abs(inst.conic.c.dot(sol.x));
      c.expect(raw.gap <= 1e-7 * (1.0 + obj),
               builder_name(id) + " complementarity above 1e-7");
      c.expect(in_cone(inst.conic.cone, sol.s, 1e-8) &&
                   in_dual_cone(inst.conic.cone, sol.y, 1e-8),
               builder_name(id) + " cone membership violated");
      ++solved;
    }
  }
  // Transport LPs (supports up to 4x4) against vertex enumeration.
  for (int rep = 0; rep < 20 && c.ok; ++rep) {
    const int I = 2 + rng.uniform_int(3), J = 2 + rng.uniform_int(3);
    const DiscreteDistribution P = testutil::random_discrete(rng, I, 2);
    const DiscreteDistribution Q = testutil::random_discrete(rng, J, 2);
    const TransportParam param{testutil::random_lower_triangular(rng, 2),
                               1 + rng.uniform_int(2)};
    const TransportPlan t = discrete_transport(P, Q, param);
    const double brute = transport_bruteforce(P, Q, param);
    c.expect(std::abs(t.value - brute) <= 1e-7 * (1.0 + brute),
             "transport LP vs vertex enumeration");
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 60.0, "runtime exceeded 60 s");
  std::ostringstream what;
  what << "solver correctness on " << solved
       << " random instances + transport brute force";
  if (!c.ok) what << " -- " << c.detail;
  report(2, c.ok, what.str(), dt);
}

// ---------------------------------------------------------------------------
// Criterion 3: closed-form equivalences.
// ---------------------------------------------------------------------------
void criterion3() {
  const auto t0 = Clock::now();
  Check c;
  Rng rng(3033);
  for (int rep = 0; rep < 20 && c.ok; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    GaussianMoments mom{rng.uniform_vector(k, -1.0, 1.0),
                        testutil::random_spd(rng, k, 0.3, 1e-4)};
    const TransportParam theta{testutil::random_lower_triangular(rng, k), 2};
    const double eps = rng.uniform(0.01, 0.4);
    const double gamma = rng.uniform(0.03, 0.3);
    const ProblemInstance inst =
        build_portfolio_gaussian(mom, eps, gamma, theta);
    const PrimalDualSolution sol = solve(inst.conic);
    c.expect(sol.status == SolveStatus::Optimal, "gaussian solve failed");
    if (!c.ok) break;
    const Vector w = inst.decision(sol);
    c.expect(rel_err(inst.conic.c.dot(sol.x),
                     closed_form_gaussian_objective(w, mom, eps, gamma,
                                                    theta)) <= 1e-6,
             "gaussian portfolio vs closed form");
  }
  for (int rep = 0; rep < 20 && c.ok; ++rep) {
    const DatasetView data =
        random_linreg(rng, 5 + rng.uniform_int(12), rng.uniform(-3.0, 3.0), 2.0);
    const TransportParam theta{testutil::random_lower_triangular(rng, 2), 1};
    const double eps = rng.uniform(0.02, 0.5);
    const ProblemInstance inst = build_linreg_abs(data, eps, theta);
    const PrimalDualSolution sol = solve(inst.conic);
    c.expect(sol.status == SolveStatus::Optimal, "regression-abs solve failed");
    if (!c.ok) break;
    const Vector w = inst.decision(sol);
    c.expect(rel_err(inst.conic.c.dot(sol.x),
                     closed_form_linreg_abs(w, data, eps, theta)) <= 1e-6,
             "regression-abs vs closed form");
  }
  for (int rep = 0; rep < 20 && c.ok; ++rep) {
    const DatasetView data =
        random_linreg(rng, 5 + rng.uniform_int(12), rng.uniform(-3.0, 3.0), 2.0);
    const TransportParam theta{testutil::random_lower_triangular(rng, 2), 2};
    const double eps = rng.uniform(0.02, 0.5);
    const ProblemInstance inst = build_linreg_sq(data, eps, theta);
    const PrimalDualSolution sol = solve(inst.conic);
    c.expect(sol.status == SolveStatus::Optimal, "regression-sq solve failed");
    if (!c.ok) break;
    const Vector w = inst.decision(sol);
    const double conic_sq = std::pow(inst.conic.c.dot(sol.x), 2);
    const double closed_sq =
        std::pow(closed_form_linreg_sq_root(w, data, eps, theta), 2);
    c.expect(rel_err(conic_sq, closed_sq) <= 1e-6,
             "regression-sq squared optimum vs printed formula");
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 30.0, "runtime exceeded 30 s");
  report(3, c.ok,
         "closed-form equivalences (20 instances per family)" +
             (c.ok ? "" : " -- " + c.detail),
         dt);
}

// ---------------------------------------------------------------------------
// Criterion 4: differentiation. Adjoint identity, end-to-end hypergradient
// finite differences, distance gradient finite differences.
// ---------------------------------------------------------------------------
void criterion4() {
  const auto t0 = Clock::now();
  Check c;
  Rng rng(4044);

  // (a) adjoint inner-product identity on 100 random seeds.
  int identity_checked = 0;
  while (identity_checked < 100 && c.ok) {
    const BuilderId id = kAllBuilders[identity_checked % kAllBuilders.size()];
    Rng local = Rng::substream(4100, identity_checked);
    const ProblemInstance inst = random_instance(local, id);
    const PrimalDualSolution sol = solve(inst.conic);
    if (sol.status != SolveStatus::Optimal) continue;
    const int m = inst.conic.rows(), n = inst.conic.cols();
    DataDirections dir;
    dir.dA = Matrix(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) dir.dA(i, j) = local.normal();
    dir.db = local.normal_vector(m);
    dir.dc = local.normal_vector(n);
    SolutionPerturbation seed{local.normal_vector(n), local.normal_vector(m),
                              local.normal_vector(m)};
    SolutionPerturbation fwd;
    DataDirections adj;
    try {
      fwd = forward_derivative(sol, inst.conic, dir);
      adj = adjoint_derivative(sol, inst.conic, seed);
    } catch (const SingularJacobian&) {
      continue;  // nondifferentiable draw; redraw
    }
    const double lhs =
        fwd.dx.dot(seed.dx) + fwd.dy.dot(seed.dy) + fwd.ds.dot(seed.ds);
    const double rhs = (dir.dA.array() * adj.dA.array()).sum() +
                       dir.db.dot(adj.db) + dir.dc.dot(adj.dc);
    c.expect(std::abs(lhs - rhs) <=
                 1e-8 * (1.0 + std::abs(lhs) + std::abs(rhs)),
             "adjoint inner-product identity");
    ++identity_checked;
  }

  // (b) end-to-end hypergradient vs central differences with full re-solves.
  SolverSettings tight;
  tight.tol = 1e-10;
  for (BuilderId id : kAllBuilders) {
    if (!c.ok) break;
    Rng fam = Rng::substream(4200, static_cast<std::uint64_t>(id));
    const int k = 2;
    const DatasetView data = (id == BuilderId::RegressionAbs ||
                              id == BuilderId::RegressionSq)
                                 ? random_linreg(fam, 8, 1.0, 3.0)
                                 : random_returns(fam, 8, k);
    const int d = data.dim() == 2 && (id == BuilderId::RegressionAbs ||
                                      id == BuilderId::RegressionSq)
                      ? 2
                      : k;
    const int p = (id == BuilderId::PortfolioT1 ||
                   id == BuilderId::RegressionAbs)
                      ? 1
                      : 2;
    const BootstrapMode mode = family_mode(id);
    const Reference ref = make_reference(data, mode);
    const BootstrapSet boots = bootstrap(data, 6, mode, 4300);
    PenaltyConfig pen;
    pen.beta = 0.1;
    pen.lambda_p = 10.0;
    pen.eta_p = 20.0;
    const TransportParam theta0{Matrix::Identity(d, d), p};
    const ReplicaDistances d0 = replica_distances(theta0, ref, boots, tight);
    pen.epsilon = 0.85 * calibrate_epsilon(d0.values, pen.beta);
    const double gamma = 0.05;

    auto phi = [&](const Matrix& L) {
      const TransportParam th{L, p};
      const ProblemInstance inst =
          build_instance(id, data, pen.epsilon, gamma, th);
      const PrimalDualSolution sol = solve(inst.conic, tight);
      if (sol.status != SolveStatus::Optimal)
        throw SolveError("phi re-solve failed");
      const double e_val =
          penalty_from_distances(replica_distances(th, ref, boots, tight).values,
                                 pen);
      return inst.conic.c.dot(sol.x) +
             pen.lambda_p * std::pow(std::max(0.0, e_val), 2);
    };

    int accepted = 0;
    for (int rep = 0; rep < 60 && accepted < 20 && c.ok; ++rep) {
      const Matrix L = testutil::random_lower_triangular(fam, d, 0.7, 1.4, 0.35);
      if (!testutil::fd_is_smooth(phi, L, 1e-5)) continue;
      const TransportParam th{L, p};
      const ProblemInstance inst =
          build_instance(id, data, pen.epsilon, gamma, th);
      const PrimalDualSolution sol = solve(inst.conic, tight);
      if (sol.status != SolveStatus::Optimal) continue;
      const ReplicaDistances dists = replica_distances(th, ref, boots, tight);
      Matrix grad;
      try {
        unsigned events = 0;
        grad = hypergradient(th, inst, sol, ref, boots, pen, dists, &events);
        if (events & kEventSingularFallback) continue;  // kink; redraw
      } catch (const std::exception&) {
        continue;
      }
      ++accepted;
      const Matrix fd = fd_gradient_lower(phi, L, 1e-5);
      c.expect(rel_err(grad, fd) <= 1e-3,
               "hypergradient FD mismatch on " + builder_name(id));
    }
    c.expect(accepted >= 20,
             "not enough smooth draws for " + builder_name(id));
  }

  // (c) distance gradients against finite differences.
  int dist_checked = 0;
  for (int rep = 0; rep < 80 && dist_checked < 20 && c.ok; ++rep) {
    Rng local = Rng::substream(4400, rep);
    const int d = 2 + local.uniform_int(2);
    const DiscreteDistribution P = testutil::random_discrete(local, 3, d);
    const DiscreteDistribution Q = testutil::random_discrete(local, 4, d);
    const int p = 1 + local.uniform_int(2);
    const Matrix L = testutil::random_lower_triangular(local, d);
    auto fn = [&](const Matrix& Lx) {
      return discrete_distance(P, Q, {Lx, p});
    };
    if (!testutil::fd_is_smooth(fn, L)) continue;
    ++dist_checked;
    c.expect(rel_err(discrete_distance_gradient(P, Q, {L, p}),
                     fd_gradient_lower(fn, L, 1e-6)) <= 1e-4,
             "discrete distance gradient FD");
  }
  c.expect(dist_checked >= 20, "not enough smooth discrete-distance draws");
  for (int rep = 0; rep < 20 && c.ok; ++rep) {
    Rng local = Rng::substream(4500, rep);
    const int d = 2 + local.uniform_int(2);
    const GaussianMoments a{local.normal_vector(d),
                            testutil::random_spd(local, d)};
    const GaussianMoments b{local.normal_vector(d),
                            testutil::random_spd(local, d)};
    const Matrix L = testutil::random_lower_triangular(local, d);
    auto fn = [&](const Matrix& Lx) {
      return gelbrich_distance(a, b, {Lx, 2});
    };
    c.expect(rel_err(gelbrich_gradient(a, b, {L, 2}),
                     fd_gradient_lower(fn, L, 1e-6)) <= 1e-4,
             "gelbrich gradient FD");
  }

  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 120.0, "runtime exceeded 2 min");
  report(4, c.ok,
         "differentiation: adjoint identity, hypergradient and distance "
         "gradient FD" +
             (c.ok ? "" : " -- " + c.detail),
         dt);
}

// ---------------------------------------------------------------------------
// Criterion 5: worst-case moment saturation.
// ---------------------------------------------------------------------------
void criterion5() {
  const auto t0 = Clock::now();
  Check c;
  Rng rng(5055);
  for (int rep = 0; rep < 20 && c.ok; ++rep) {
    const int k = 2 + rng.uniform_int(3);
    const Vector w = testutil::random_simplex(rng, k);
    GaussianMoments mom{rng.uniform_vector(k, -1.0, 1.0),
                        testutil::random_spd(rng, k, 0.3, 1e-4)};
    const TransportParam theta{testutil::random_lower_triangular(rng, k), 2};
    const double rho = rng.uniform(0.05, 0.35);
    const double gamma = rng.uniform(0.03, 0.3);
    const GaussianMoments wc = worst_case_moments(w, mom, rho, gamma, theta);
    c.expect(std::abs(gelbrich_distance(mom, wc, theta) - rho) <= 1e-5,
             "worst-case moments do not saturate the ball");
    const double alpha = risk_coefficient(gamma);
    const double nominal_at_wc =
        -wc.mean.dot(w) + alpha * std::sqrt(w.dot(wc.cov * w));
    const double robust =
        closed_form_gaussian_objective(w, mom, rho, gamma, theta);
    c.expect(std::abs(nominal_at_wc - robust) <=
                 1e-5 * (1.0 + std::abs(robust)),
             "nominal CVaR at worst-case moments vs robust objective");
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 10.0, "runtime exceeded 10 s");
  report(5, c.ok,
         "worst-case moment saturation on 20 random draws" +
             (c.ok ? "" : " -- " + c.detail),
         dt);
}

// ---------------------------------------------------------------------------
// Criterion 6: training behavior on the Gaussian portfolio configuration.
// ---------------------------------------------------------------------------
void criterion6() {
  const auto t0 = Clock::now();
  Check c;
  const int trials = 20;
  double sum_rel_f = 0.0, sum_rel_l = 0.0;
  int covered = 0, compared = 0;

  for (int trial = 0; trial < trials && c.ok; ++trial) {
    const std::uint64_t ts = 600000 + 131 * trial;
    const GaussianMoments truth = gen_gaussian_experiment(3, ts + 1);
    DatasetView data;
    data.samples = draw_samples(gaussian_sampler(truth), 30, ts + 2);

    TrainConfig cfg;  // defaults: step 1e-4, tol 1e-6, lambda 10, eta 100,
                      // clips +-1000 / [1e-6, 1e6], n_b 20, beta 0.1
    cfg.gamma = 0.05;
    cfg.seed = ts + 3;
    const TrainTrace pen = train(BuilderId::PortfolioGaussian, data, cfg);

    TrainConfig ablate = cfg;
    ablate.lambda_p = 0.0;
    const TrainTrace nopen = train(BuilderId::PortfolioGaussian, data, ablate);

    // Monotone phi trace within 1e-6 per step.
    for (size_t i = 1; i < pen.records.size(); ++i)
      c.expect(pen.records[i].phi <=
                   pen.records[i - 1].phi +
                       1e-6 * std::max(1.0, std::abs(pen.records[i - 1].phi)),
               "phi trace not monotone within 1e-6");

    sum_rel_f += (pen.value0 - pen.value_star) /
                 std::max(std::abs(pen.value0), 1e-12);
    const Sampler oos = gaussian_sampler(truth);
    const double l0 = eval_oos_cvar(pen.w0, oos, 0.05, 1000000, ts + 4);
    const double ls = eval_oos_cvar(pen.w_star, oos, 0.05, 1000000, ts + 4);
    sum_rel_l += (l0 - ls) / std::max(std::abs(l0), 1e-12);

    if (pen.e_star <= 0.05) ++covered;
    c.expect(nopen.e_star > pen.e_star,
             "unpenalized run did not end with larger violation");
    ++compared;
  }
  c.expect(sum_rel_f / trials > 0.0, "mean worst-case improvement not > 0");
  c.expect(sum_rel_l / trials >= 0.0, "mean OOS CVaR improvement not >= 0");
  c.expect(covered >= static_cast<int>(0.9 * trials),
           "fewer than 90% of trials ended with e(theta*) <= 0.05");

  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 600.0, "runtime exceeded 10 min");
  std::ostringstream what;
  what << "training behavior: mean rel f impr "
       << (sum_rel_f / trials) * 100.0 << "%, mean rel CVaR impr "
       << (sum_rel_l / trials) * 100.0 << "%, coverage " << covered << "/"
       << trials << ", ablation pairs " << compared;
  if (!c.ok) what << " -- " << c.detail;
  report(6, c.ok, what.str(), dt);
}

// ---------------------------------------------------------------------------
// Criterion 7: regression training on the single-instance setup.
// ---------------------------------------------------------------------------
void criterion7() {
  const auto t0 = Clock::now();
  Check c;
  const LinregModel model{1.0, 10.0};
  const int seeds = 10;
  for (int s = 0; s < seeds && c.ok; ++s) {
    const std::uint64_t ts = 700000 + 977 * s;
    DatasetView data;
    data.samples = draw_samples(linreg_sampler(model), 20, ts + 1);
    TrainConfig cfg;
    cfg.n_b = 20;
    cfg.seed = ts + 2;
    // Bounded iteration budget keeps the ten runs inside the time box; the
    // decrease/coverage claims are about the run's endpoints.
    cfg.maxiter = 1500;
    const TrainTrace trace = train(BuilderId::RegressionAbs, data, cfg);
    c.expect(trace.value_star < trace.value0,
             "worst-case error did not decrease");
    const Sampler oos = linreg_sampler(model);
    const double e0 = eval_oos_expected_loss(trace.w0, oos, LossKind::Abs,
                                             1000000, ts + 3);
    const double es = eval_oos_expected_loss(trace.w_star, oos, LossKind::Abs,
                                             1000000, ts + 3);
    c.expect(es <= 1.05 * e0, "OOS error grew by more than 5%");
  }
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(dt < 300.0, "runtime exceeded 5 min");
  report(7, c.ok,
         "regression training: e_wc decreases, e_oos within 5% over 10 seeds" +
             (c.ok ? "" : " -- " + c.detail),
         dt);
}

// ---------------------------------------------------------------------------
// Criterion 8: byte-identical repro outputs.
// ---------------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion8() {
  const auto t0 = Clock::now();
  Check c;
  const std::string a = "acceptance_repro_a", b = "acceptance_repro_b";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  run_repro("fig3", 11, a);
  run_repro("fig3", 11, b);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto other = std::filesystem::path(b) / entry.path().filename();
    c.expect(std::filesystem::exists(other),
             "missing file in second run: " + entry.path().filename().string());
    if (!c.ok) break;
    c.expect(slurp(entry.path()) == slurp(other),
             "byte mismatch in " + entry.path().filename().string());
  }
  c.expect(files >= 2, "repro produced too few files");
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  report(8, c.ok,
         "repro determinism: " + std::to_string(files) +
             " files byte-identical across runs" +
             (c.ok ? "" : " -- " + c.detail),
         dt);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select individual criteria, e.g. `otdro_acceptance 1 4`.
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  auto enabled = [&](int k) {
    return wanted.empty() ||
           std::find(wanted.begin(), wanted.end(), k) != wanted.end();
  };
  if (enabled(1)) criterion1();
  if (enabled(2)) criterion2();
  if (enabled(3)) criterion3();
  if (enabled(4)) criterion4();
  if (enabled(5)) criterion5();
  if (enabled(6)) criterion6();
  if (enabled(7)) criterion7();
  if (enabled(8)) criterion8();
  if (g_failures == 0) {
    std::puts("acceptance: all criteria passed");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return 1;
}
