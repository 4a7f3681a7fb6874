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

#include "otdro/trainer.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace otdro {

void TrainConfig::validate() const {
  if (!(step > 0.0)) throw ConfigError("train: step must be positive");
  if (!(tol > 0.0)) throw ConfigError("train: tol must be positive");
  if (maxiter < 1) throw ConfigError("train: maxiter must be >= 1");
  if (lambda_p < 0.0) throw ConfigError("train: lambda_p must be >= 0");
  if (!(eta_p > 0.0)) throw ConfigError("train: eta_p must be positive");
  if (!(eig_min > 0.0 && eig_max > eig_min))
    throw ConfigError("train: eigenvalue clip bounds invalid");
  if (grad_clip_hi <= grad_clip_lo)
    throw ConfigError("train: gradient clip bounds invalid");
  if (n_b < 1) throw ConfigError("train: n_b must be >= 1");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("train: beta in (0,1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("train: gamma in (0,1)");
}

BootstrapMode family_mode(BuilderId builder) {
  return builder == BuilderId::PortfolioGaussian ? BootstrapMode::Gaussian
                                                 : BootstrapMode::Discrete;
}

ProblemInstance build_instance(BuilderId builder, const DatasetView& data,
                               double epsilon, double gamma,
                               const TransportParam& theta) {
  switch (builder) {
    case BuilderId::PortfolioT1:
      return build_portfolio_type1(data, epsilon, theta);
    case BuilderId::PortfolioT2:
      return build_portfolio_type2(data, epsilon, theta);
    case BuilderId::PortfolioGaussian:
      return build_portfolio_gaussian(empirical_moments(data.samples), epsilon,
                                      gamma, theta);
    case BuilderId::RegressionAbs:
      return build_linreg_abs(data, epsilon, theta);
    case BuilderId::RegressionSq:
      return build_linreg_sq(data, epsilon, theta);
  }
  throw ConfigError("build_instance: unknown builder");
}

Matrix hypergradient(const TransportParam& theta,
                     const ProblemInstance& instance,
                     const PrimalDualSolution& solution, const Reference& ref,
                     const BootstrapSet& boots, const PenaltyConfig& penalty,
                     const ReplicaDistances& dists, unsigned* events) {
  // Objective part J_S(theta)' c: adjoint seed (dx, dy, ds) = (c, 0, 0).
  SolutionPerturbation seed;
  seed.dx = instance.conic.c;
  seed.dy = Vector::Zero(instance.conic.rows());
  seed.ds = Vector::Zero(instance.conic.rows());
  DataDirections adj;
  try {
    adj = adjoint_derivative(solution, instance.conic, seed);
  } catch (const SingularJacobian&) {
    adj = adjoint_derivative_regularized(solution, instance.conic, seed);
    if (events) *events |= kEventSingularFallback;
  }
  Matrix grad = parameter_gradient(instance, adj, theta);
  // S(theta)' J_c term: c is theta-independent for every builder, so the
  // contribution is identically zero.
  grad += Matrix::Zero(theta.dim(), theta.dim());

  const double e_val = penalty_from_distances(dists.values, penalty);
  if (e_val > 0.0 && penalty.lambda_p > 0.0) {
    const Matrix je = penalty_gradient_from(theta, ref, boots, penalty, dists);
    grad += 2.0 * penalty.lambda_p * e_val * je;
  }
  return grad;
}

TransportParam project_param(const Matrix& l_raw, double eig_min,
                             double eig_max, int p) {
  if (!l_raw.allFinite())
    throw NonFiniteError("project_param: non-finite parameter");
  const int d = static_cast<int>(l_raw.rows());
  Matrix M = l_raw * l_raw.transpose();
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  const Vector lam = es.eigenvalues().cwiseMax(eig_min).cwiseMin(eig_max);
  M = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  M = 0.5 * (M + M.transpose());
  Eigen::LLT<Matrix> llt(M);
  TransportParam out;
  out.L = llt.matrixL();
  out.p = p;
  (void)d;
  return out;
}

double step_size(StepSchedule schedule, double base, long iter) {
  if (iter < 1) throw ConfigError("step_size: iteration index must be >= 1");
  return schedule == StepSchedule::Constant ? base
                                            : base / static_cast<double>(iter);
}

namespace {

struct EvalState {
  TransportParam theta;
  ProblemInstance instance;
  PrimalDualSolution solution;
  ReplicaDistances dists;
  double conic_value = 0.0;
  double e_val = 0.0;
  double phi = 0.0;
};

EvalState evaluate(BuilderId builder, const DatasetView& data,
                   const TrainConfig& cfg, const Reference& ref,
                   const BootstrapSet& boots, const PenaltyConfig& penalty,
                   const TransportParam& theta, long iter) {
  EvalState st;
  st.theta = theta;
  st.instance = build_instance(builder, data, penalty.epsilon, cfg.gamma, theta);
  st.solution = solve(st.instance.conic, cfg.solver);
  if (st.solution.status != SolveStatus::Optimal)
    throw TrainError("train: conic solve failed at iteration " +
                     std::to_string(iter));
  st.dists = replica_distances(theta, ref, boots, cfg.distance_solver);
  st.conic_value = st.instance.conic.c.dot(st.solution.x);
  st.e_val = penalty_from_distances(st.dists.values, penalty);
  st.phi = st.conic_value +
           penalty.lambda_p * std::pow(std::max(0.0, st.e_val), 2);
  if (!std::isfinite(st.phi))
    throw TrainError("train: non-finite objective at iteration " +
                     std::to_string(iter));
  return st;
}

// Degenerate transport plans (support larger than a basis) signal multiple
// optimal plans; any of them is an admissible envelope element, the event is
// only recorded.
bool has_degenerate_plan(const ReplicaDistances& d) {
  for (const TransportPlan& t : d.plans) {
    const int I = static_cast<int>(t.plan.rows());
    const int J = static_cast<int>(t.plan.cols());
    int support = 0;
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j)
        if (t.plan(i, j) > 1e-7) ++support;
    if (support > I + J - 1) return true;
  }
  return false;
}

}  // namespace

TrainTrace train(BuilderId builder, const DatasetView& data,
                 const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  const BootstrapMode mode = family_mode(builder);
  const Reference ref = make_reference(data, mode);
  const BootstrapSet boots = bootstrap(data, cfg.n_b, mode, cfg.seed);

  const int d = data.dim();
  TransportParam theta0{Matrix::Identity(d, d),
                        builder == BuilderId::PortfolioT1 ||
                                builder == BuilderId::RegressionAbs
                            ? 1
                            : 2};

  PenaltyConfig penalty;
  penalty.beta = cfg.beta;
  penalty.lambda_p = cfg.lambda_p;
  penalty.eta_p = cfg.eta_p;
  if (cfg.eps_override) {
    penalty.epsilon = *cfg.eps_override;
  } else {
    const ReplicaDistances d0 =
        replica_distances(theta0, ref, boots, cfg.distance_solver);
    penalty.epsilon = calibrate_epsilon(d0.values, cfg.beta);
  }
  if (!(penalty.epsilon > 0.0))
    throw TrainError("train: calibrated radius is not positive");

  TrainTrace trace;
  trace.epsilon = penalty.epsilon;
  trace.theta0 = theta0.L;

  EvalState cur =
      evaluate(builder, data, cfg, ref, boots, penalty, theta0, 0);
  trace.w0 = cur.instance.decision(cur.solution);
  trace.value0 = cur.conic_value;
  trace.e0 = cur.e_val;

  for (long i = 1; i <= cfg.maxiter; ++i) {
    unsigned events = 0;
    if (has_degenerate_plan(cur.dists)) events |= kEventDegeneratePlan;
    Matrix grad = hypergradient(cur.theta, cur.instance, cur.solution, ref,
                                boots, penalty, cur.dists, &events);
    Matrix clipped =
        grad.cwiseMax(cfg.grad_clip_lo).cwiseMin(cfg.grad_clip_hi);
    if ((clipped.array() != grad.array()).any()) events |= kEventGradClipped;
    const double alpha = step_size(cfg.schedule, cfg.step, i);

    TrainRecord rec;
    rec.iter = i;
    rec.phi = cur.phi;
    rec.objective = cur.conic_value;
    rec.penalty = penalty.lambda_p * std::pow(std::max(0.0, cur.e_val), 2);
    rec.e_theta = cur.e_val;
    rec.grad_norm = clipped.norm();
    rec.step = alpha;
    rec.events = events;
    trace.records.push_back(rec);

    const Matrix l_next = cur.theta.L - alpha * clipped;
    const TransportParam theta_next =
        project_param(l_next, cfg.eig_min, cfg.eig_max, theta0.p);
    EvalState next =
        evaluate(builder, data, cfg, ref, boots, penalty, theta_next, i);

    const double rel_decrease =
        (cur.phi - next.phi) / std::max(std::abs(cur.phi), 1e-12);
    if (rel_decrease < cfg.tol) {
      if (next.phi <= cur.phi) cur = std::move(next);
      break;
    }
    cur = std::move(next);
  }

  trace.theta_star = cur.theta.L;
  trace.w_star = cur.instance.decision(cur.solution);
  trace.value_star = cur.conic_value;
  trace.e_star = cur.e_val;
  return trace;
}

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_trace_csv: cannot open " + path);
  out << "iter,phi,objective,penalty,e_theta,grad_norm,step,events\n";
  char buf[512];
  for (const TrainRecord& r : trace.records) {
    std::snprintf(buf, sizeof(buf),
                  "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%u\n", r.iter,
                  r.phi, r.objective, r.penalty, r.e_theta, r.grad_norm,
                  r.step, r.events);
    out << buf;
  }
}

}  // namespace otdro
