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

#include "otdro/transport_metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace otdro {

void TransportParam::validate() const {
  require(L.rows() == L.cols(), "TransportParam: L must be square");
  if (p < 1) throw ConfigError("TransportParam: order p must be >= 1");
  for (int i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > 0.0))
      throw ConfigError("TransportParam: diagonal of L must be positive");
    for (int j = i + 1; j < L.cols(); ++j)
      if (L(i, j) != 0.0)
        throw ConfigError("TransportParam: L must be lower-triangular");
  }
  if (!L.allFinite()) throw NonFiniteError("TransportParam: non-finite L");
}

void DiscreteDistribution::validate() const {
  require(points.rows() == weights.size(),
          "DiscreteDistribution: points/weights mismatch");
  if (size() < 1) throw ConfigError("DiscreteDistribution: empty support");
  if (!points.allFinite() || !weights.allFinite())
    throw NonFiniteError("DiscreteDistribution: non-finite entries");
  if (weights.minCoeff() < 0.0)
    throw ConfigError("DiscreteDistribution: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw ConfigError("DiscreteDistribution: weights must sum to 1");
}

void GaussianMoments::validate() const {
  require(cov.rows() == cov.cols() && cov.rows() == mean.size(),
          "GaussianMoments: dimension mismatch");
  if (!mean.allFinite() || !cov.allFinite())
    throw NonFiniteError("GaussianMoments: non-finite entries");
  if ((cov - cov.transpose()).lpNorm<Eigen::Infinity>() >
      1e-12 * (1.0 + cov.lpNorm<Eigen::Infinity>()))
    throw NonSymmetricError("GaussianMoments: covariance not symmetric");
}

double mahalanobis_cost(const Vector& x1, const Vector& x2,
                        const TransportParam& param) {
  require(x1.size() == x2.size() && x1.size() == param.L.rows(),
          "mahalanobis_cost: dimension mismatch");
  const double nrm = (param.L.transpose() * (x1 - x2)).norm();
  return std::pow(nrm, param.p);
}

namespace {

// Collapses bit-identical support points (bootstrap resamples duplicate
// atoms). The measure is unchanged; the LP loses the duplicate columns that
// make its optimal face badly degenerate. group[i] maps original atoms to
// representatives.
DiscreteDistribution dedupe_support(const DiscreteDistribution& in,
                                    std::vector<int>& group) {
  const int n = in.size();
  group.assign(n, -1);
  std::vector<int> reps;
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < static_cast<int>(reps.size()); ++r) {
      if (in.points.row(i) == in.points.row(reps[r])) {
        group[i] = r;
        break;
      }
    }
    if (group[i] < 0) {
      group[i] = static_cast<int>(reps.size());
      reps.push_back(i);
    }
  }
  DiscreteDistribution out;
  out.points = Matrix(static_cast<int>(reps.size()), in.dim());
  out.weights = Vector::Zero(static_cast<int>(reps.size()));
  for (int r = 0; r < static_cast<int>(reps.size()); ++r)
    out.points.row(r) = in.points.row(reps[r]);
  for (int i = 0; i < n; ++i) out.weights(group[i]) += in.weights(i);
  return out;
}

}  // namespace

TransportPlan discrete_transport(const DiscreteDistribution& P,
                                 const DiscreteDistribution& Q,
                                 const TransportParam& param,
                                 const SolverSettings& settings) {
  P.validate();
  Q.validate();
  param.validate();
  require(P.dim() == Q.dim() && P.dim() == param.dim(),
          "discrete_transport: dimension mismatch");
  std::vector<int> pgroup, qgroup;
  DiscreteDistribution Pd = dedupe_support(P, pgroup);
  DiscreteDistribution Qd = dedupe_support(Q, qgroup);
  const Vector pw_full = Pd.weights;
  const Vector qw_full = Qd.weights;
  Matrix plan_d = Matrix::Zero(Pd.size(), Qd.size());

  // For p = 1 the cost is a norm metric, so the optimal value depends only
  // on P - Q (Kantorovich-Rubinstein): mass shared by identical atoms never
  // moves. Cancelling it onto the plan shrinks the LP dramatically between
  // a sample and its bootstrap resamples.
  if (param.p == 1) {
    for (int i = 0; i < Pd.size(); ++i) {
      for (int j = 0; j < Qd.size(); ++j) {
        if (Pd.points.row(i) == Qd.points.row(j)) {
          const double mass = std::min(Pd.weights(i), Qd.weights(j));
          if (mass > 0.0) {
            plan_d(i, j) += mass;
            Pd.weights(i) -= mass;
            Qd.weights(j) -= mass;
          }
          break;
        }
      }
    }
  }

  // Atoms without residual mass would only add degenerate marginal rows.
  std::vector<int> ip, iq;
  for (int i = 0; i < Pd.size(); ++i)
    if (Pd.weights(i) > 1e-16) ip.push_back(i);
  for (int j = 0; j < Qd.size(); ++j)
    if (Qd.weights(j) > 1e-16) iq.push_back(j);

  double value = 0.0;
  if (!ip.empty() && !iq.empty()) {
    const int I = static_cast<int>(ip.size());
    const int J = static_cast<int>(iq.size());
    const int n = I * J;
    const int m = I + J + n;
    // Plan variable pi laid out row-major, (i, j) -> i*J + j. Equality rows
    // first (column marginals, then row marginals), then pi >= 0.
    ConicProblemData lp;
    lp.A = Matrix::Zero(m, n);
    lp.b = Vector::Zero(m);
    lp.c = Vector::Zero(n);
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j) {
        const int col = i * J + j;
        lp.A(j, col) = 1.0;
        lp.A(J + i, col) = 1.0;
        lp.A(I + J + col, col) = -1.0;
        lp.c(col) = mahalanobis_cost(Pd.points.row(ip[i]),
                                     Qd.points.row(iq[j]), param);
      }
    for (int j = 0; j < J; ++j) lp.b(j) = Qd.weights(iq[j]);
    for (int i = 0; i < I; ++i) lp.b(J + i) = Pd.weights(ip[i]);
    lp.cone = ConeSpec({{ConeKind::Zero, I + J}, {ConeKind::NonNegative, n}});

    const PrimalDualSolution sol = solve(lp, settings);
    if (sol.status != SolveStatus::Optimal)
      throw SolveError(
          "discrete_transport: transport LP did not reach Optimal");
    value = std::max(lp.c.dot(sol.x), 0.0);
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < J; ++j)
        plan_d(ip[i], iq[j]) += std::max(sol.x(i * J + j), 0.0);
  }

  // Expand to the original supports, splitting each group's plan mass
  // proportionally to the original weights.
  TransportPlan out;
  out.value = value;
  out.plan = Matrix::Zero(P.size(), Q.size());
  for (int i = 0; i < P.size(); ++i) {
    const double pi_share =
        pw_full(pgroup[i]) > 0.0 ? P.weights(i) / pw_full(pgroup[i]) : 0.0;
    for (int j = 0; j < Q.size(); ++j) {
      const double qj_share =
          qw_full(qgroup[j]) > 0.0 ? Q.weights(j) / qw_full(qgroup[j]) : 0.0;
      out.plan(i, j) = plan_d(pgroup[i], qgroup[j]) * pi_share * qj_share;
    }
  }
  return out;
}

double discrete_distance(const DiscreteDistribution& P,
                         const DiscreteDistribution& Q,
                         const TransportParam& param,
                         const SolverSettings& settings) {
  const TransportPlan t = discrete_transport(P, Q, param, settings);
  return std::pow(t.value, 1.0 / param.p);
}

Matrix discrete_distance_gradient(const DiscreteDistribution& P,
                                  const DiscreteDistribution& Q,
                                  const TransportParam& param,
                                  const TransportPlan& solved) {
  const int d = param.dim();
  const int I = P.size(), J = Q.size();
  require(solved.plan.rows() == I && solved.plan.cols() == J,
          "discrete_distance_gradient: plan shape mismatch");
  Matrix grad_p = Matrix::Zero(d, d);  // gradient of d^p
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j) {
      const double pi = solved.plan(i, j);
      if (pi <= 0.0) continue;
      const Vector delta = P.points.row(i) - Q.points.row(j);
      const double nrm = (param.L.transpose() * delta).norm();
      if (nrm <= 1e-18) continue;  // zero-cost pair: zero conservative element
      const double coeff = param.p * std::pow(nrm, param.p - 2);
      grad_p.noalias() += (pi * coeff) * (delta * delta.transpose()) * param.L;
    }
  }
  // Chain through the p-th root; at value 0 the distance is 0 and the
  // gradient is taken as 0.
  Matrix grad;
  if (solved.value <= 0.0) {
    grad = Matrix::Zero(d, d);
  } else {
    grad = (std::pow(solved.value, 1.0 / param.p - 1.0) / param.p) * grad_p;
  }
  return grad.triangularView<Eigen::Lower>();
}

Matrix discrete_distance_gradient(const DiscreteDistribution& P,
                                  const DiscreteDistribution& Q,
                                  const TransportParam& param,
                                  const SolverSettings& settings) {
  const TransportPlan t = discrete_transport(P, Q, param, settings);
  return discrete_distance_gradient(P, Q, param, t);
}

double gelbrich_distance(const GaussianMoments& a, const GaussianMoments& b,
                         const TransportParam& param) {
  a.validate();
  b.validate();
  param.validate();
  require(a.dim() == b.dim() && a.dim() == param.dim(),
          "gelbrich_distance: dimension mismatch");
  const Matrix M = param.L * param.L.transpose();
  const Vector dmu = a.mean - b.mean;
  const Matrix sqrt_b = sqrtm_psd(b.cov);
  const Matrix inner = sqrt_b * M * a.cov * M * sqrt_b;
  const double t1 = dmu.dot(M * dmu);
  const double t2 = ((a.cov + b.cov) * M).trace();
  const double t3 = sqrtm_psd(0.5 * (inner + inner.transpose())).trace();
  return std::sqrt(std::max(t1 + t2 - 2.0 * t3, 0.0));
}

Matrix gelbrich_gradient(const GaussianMoments& a, const GaussianMoments& b,
                         const TransportParam& param) {
  a.validate();
  b.validate();
  param.validate();
  require(a.dim() == b.dim() && a.dim() == param.dim(),
          "gelbrich_gradient: dimension mismatch");
  const int d = param.dim();
  const Matrix& L = param.L;
  const Matrix ridge = 1e-10 * Matrix::Identity(d, d);
  const Matrix cov_a = a.cov + ridge;
  const Matrix cov_b = b.cov + ridge;

  const double g = gelbrich_distance(a, b, param);
  if (g <= 1e-14) return Matrix::Zero(d, d);

  const Vector dmu = a.mean - b.mean;
  const Matrix C = dmu * dmu.transpose() + cov_a + cov_b;

  // Backward pass of f(L) = Tr sqrt(B H1 A A H1 B), H1 = L L',
  // A = sqrt(cov_a), B = sqrt(cov_b).
  const Matrix A_rt = sqrtm_psd(cov_a);
  const Matrix B_rt = sqrtm_psd(cov_b);
  const Matrix H1 = L * L.transpose();
  const Matrix P_mat = B_rt * H1 * A_rt;
  const Matrix H2 = P_mat * P_mat.transpose();
  const Matrix S = sqrtm_psd(0.5 * (H2 + H2.transpose()));
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    if (2.0 * es.eigenvalues().minCoeff() <= 1e-12)
      throw SingularSqrt("gelbrich_gradient: inner square root rank-deficient");
  }
  const Matrix G2 = lyapunov_solve(S, Matrix::Identity(d, d));
  const Matrix G3 = 2.0 * G2 * P_mat;
  const Matrix G4 = B_rt * G3 * A_rt;
  const Matrix G5 = G4 * L + G4.transpose() * L;

  const Matrix grad_sq = 2.0 * C * L - 2.0 * G5;  // gradient of g^2
  Matrix grad = grad_sq / (2.0 * g);
  return grad.triangularView<Eigen::Lower>();
}

Matrix lyapunov_solve(const Matrix& S, const Matrix& RHS) {
  require(S.rows() == S.cols() && RHS.rows() == S.rows() &&
              RHS.cols() == S.cols(),
          "lyapunov_solve: dimension mismatch");
  if ((S - S.transpose()).lpNorm<Eigen::Infinity>() >
      1e-10 * (1.0 + S.lpNorm<Eigen::Infinity>()))
    throw NonSymmetricError("lyapunov_solve: S not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector lam = es.eigenvalues();
  const Matrix& U = es.eigenvectors();
  const int d = static_cast<int>(S.rows());
  Matrix Rt = U.transpose() * RHS * U;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double pencil = lam(i) + lam(j);
      if (pencil <= 1e-12)
        throw SingularPencil("lyapunov_solve: singular eigenvalue pencil");
      Rt(i, j) /= pencil;
    }
  return U * Rt * U.transpose();
}

Matrix sqrtm_psd(const Matrix& M) {
  require(M.rows() == M.cols(), "sqrtm_psd: matrix must be square");
  if ((M - M.transpose()).lpNorm<Eigen::Infinity>() >
      1e-10 * (1.0 + M.lpNorm<Eigen::Infinity>()))
    throw NonSymmetricError("sqrtm_psd: matrix not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace otdro
