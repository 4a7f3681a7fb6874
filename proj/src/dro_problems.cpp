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

#include "otdro/dro_problems.hpp"

#include <cmath>

namespace otdro {

std::string builder_name(BuilderId id) {
  switch (id) {
    case BuilderId::PortfolioT1: return "portfolio_t1";
    case BuilderId::PortfolioT2: return "portfolio_t2";
    case BuilderId::PortfolioGaussian: return "portfolio_gaussian";
    case BuilderId::RegressionAbs: return "regression_abs";
    case BuilderId::RegressionSq: return "regression_sq";
  }
  return "unknown";
}

void DatasetView::validate() const {
  if (count() < 1) throw ConfigError("DatasetView: need at least one sample");
  if (!samples.allFinite()) throw NonFiniteError("DatasetView: non-finite");
}

Vector ProblemInstance::decision(const PrimalDualSolution& sol) const {
  const VariableSlice w = variable_map.at("w");
  Vector out = sol.x.segment(w.offset, w.size);
  if (negate_decision) out = -out;
  return out;
}

double ProblemInstance::reported_objective(double conic_value) const {
  if (builder == BuilderId::RegressionSq) return conic_value * conic_value;
  return conic_value;
}

namespace {

void check_builder_inputs(double epsilon, const TransportParam& param,
                          int expected_dim, int expected_p) {
  param.validate();
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("builder: epsilon must be nonnegative and finite");
  require(param.dim() == expected_dim, "builder: L dimension mismatch");
  if (param.p != expected_p)
    throw ConfigError("builder: wrong transport order p for this builder");
}

}  // namespace

ProblemInstance build_portfolio_type1(const DatasetView& data, double epsilon,
                                      const TransportParam& param) {
  data.validate();
  const int k = data.dim();
  const int J = data.count();
  check_builder_inputs(epsilon, param, k, 1);

  // x = (w, lambda, u); cones {0} x {0}^k x R+^k x SOC(k+1).
  const int n = 2 * k + 1;
  const int m = 3 * k + 2;
  ProblemInstance inst;
  inst.builder = BuilderId::PortfolioT1;
  inst.param_dim = k;
  inst.param_order = 1;
  inst.decision_dim = k;
  inst.variable_map = {{"w", {0, k}}, {"lambda", {k, 1}}, {"u", {k + 1, k}}};
  inst.l_row = 1;
  inst.l_col = k + 1;

  ConicProblemData& p = inst.conic;
  p.A = Matrix::Zero(m, n);
  p.b = Vector::Zero(m);
  p.c = Vector::Zero(n);
  const Vector mean = data.samples.colwise().mean();
  p.c.head(k) = -mean;
  p.c(k) = epsilon;
  p.b(0) = 1.0;
  p.A.row(0).head(k).setOnes();                          // 1'w = 1
  p.A.block(1, 0, k, k) = -Matrix::Identity(k, k);       // Lu = w
  p.A.block(1, k + 1, k, k) = param.L;
  p.A.block(1 + k, 0, k, k) = -Matrix::Identity(k, k);   // w >= 0
  p.A(2 * k + 1, k) = -1.0;                              // ||u|| <= lambda
  p.A.block(2 * k + 2, k + 1, k, k) = -Matrix::Identity(k, k);
  p.cone = ConeSpec({{ConeKind::Zero, 1},
                     {ConeKind::Zero, k},
                     {ConeKind::NonNegative, k},
                     {ConeKind::SecondOrder, k + 1}});
  (void)J;
  return inst;
}

ProblemInstance build_portfolio_type2(const DatasetView& data, double epsilon,
                                      const TransportParam& param) {
  data.validate();
  const int k = data.dim();
  const int J = data.count();
  check_builder_inputs(epsilon, param, k, 2);

  // x = (t_1..t_J, w, lambda, z); cones {0}^{1+k} x R+^{k+1} x SOC(k+2)^J.
  const int n = J + 2 * k + 1;
  const int m = 1 + k + (k + 1) + J * (k + 2);
  ProblemInstance inst;
  inst.builder = BuilderId::PortfolioT2;
  inst.param_dim = k;
  inst.param_order = 2;
  inst.decision_dim = k;
  inst.variable_map = {{"t", {0, J}},
                       {"w", {J, k}},
                       {"lambda", {J + k, 1}},
                       {"z", {J + k + 1, k}}};
  inst.l_row = 1;
  inst.l_col = J + k + 1;

  ConicProblemData& p = inst.conic;
  p.A = Matrix::Zero(m, n);
  p.b = Vector::Zero(m);
  p.c = Vector::Zero(n);
  const Vector mean = data.samples.colwise().mean();
  p.c.head(J).setConstant(1.0 / J);
  p.c.segment(J, k) = -mean;
  p.c(J + k) = epsilon * epsilon;
  p.b(0) = 1.0;
  p.A.row(0).segment(J, k).setOnes();                        // 1'w = 1
  p.A.block(1, J, k, k) = -Matrix::Identity(k, k);           // w = Lz
  p.A.block(1, J + k + 1, k, k) = param.L;
  p.A.block(1 + k, J, k, k) = -Matrix::Identity(k, k);       // w >= 0
  p.A(2 * k + 1, J + k) = -1.0;                              // lambda >= 0
  std::vector<ConeBlock> blocks = {{ConeKind::Zero, 1 + k},
                                   {ConeKind::NonNegative, k + 1}};
  for (int j = 0; j < J; ++j) {
    const int base = 2 * k + 2 + j * (k + 2);
    // SOC(k+2): ||(2z, 4 lambda - t_j)|| <= 4 lambda + t_j.
    p.A(base, j) = -1.0;
    p.A(base, J + k) = -4.0;
    for (int i = 0; i < k; ++i) p.A(base + 1 + i, J + k + 1 + i) = -2.0;
    p.A(base + k + 1, j) = 1.0;
    p.A(base + k + 1, J + k) = -4.0;
    blocks.push_back({ConeKind::SecondOrder, k + 2});
  }
  p.cone = ConeSpec(std::move(blocks));
  return inst;
}

ProblemInstance build_portfolio_gaussian(const GaussianMoments& mom,
                                         double epsilon, double gamma,
                                         const TransportParam& param) {
  mom.validate();
  const int k = mom.dim();
  check_builder_inputs(epsilon, param, k, 2);
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("build_portfolio_gaussian: gamma must lie in (0,1)");
  const double alpha = risk_coefficient(gamma);

  // x = (w, u, v, q); cones {0}^{k+1} x R+^k x SOC(k+1) x SOC(k+1).
  const int n = 2 * k + 2;
  const int m = 4 * k + 3;
  ProblemInstance inst;
  inst.builder = BuilderId::PortfolioGaussian;
  inst.param_dim = k;
  inst.param_order = 2;
  inst.decision_dim = k;
  inst.variable_map = {
      {"w", {0, k}}, {"u", {k, 1}}, {"v", {k + 1, 1}}, {"q", {k + 2, k}}};
  inst.l_row = 1;
  inst.l_col = k + 2;

  ConicProblemData& p = inst.conic;
  p.A = Matrix::Zero(m, n);
  p.b = Vector::Zero(m);
  p.c = Vector::Zero(n);
  p.c.head(k) = -mom.mean;
  p.c(k) = alpha;
  p.c(k + 1) = epsilon * std::sqrt(1.0 + alpha * alpha);
  p.b(0) = 1.0;
  p.A.row(0).head(k).setOnes();                            // 1'w = 1
  p.A.block(1, 0, k, k) = -Matrix::Identity(k, k);         // w = Lq
  p.A.block(1, k + 2, k, k) = param.L;
  p.A.block(1 + k, 0, k, k) = -Matrix::Identity(k, k);     // w >= 0
  p.A(2 * k + 1, k) = -1.0;                                // || sqrt(S) w || <= u
  p.A.block(2 * k + 2, 0, k, k) = -sqrtm_psd(mom.cov);
  p.A(3 * k + 2, k + 1) = -1.0;                            // ||q|| <= v
  p.A.block(3 * k + 3, k + 2, k, k) = -Matrix::Identity(k, k);
  p.cone = ConeSpec({{ConeKind::Zero, k + 1},
                     {ConeKind::NonNegative, k},
                     {ConeKind::SecondOrder, k + 1},
                     {ConeKind::SecondOrder, k + 1}});
  return inst;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("normal_quantile: p must lie in (0,1)");
  // Acklam's rational approximation followed by one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double bb[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double cc[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q +
         cc[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((bb[0] * r + bb[1]) * r + bb[2]) * r + bb[3]) * r + bb[4]) * r +
         1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((cc[0] * q + cc[1]) * q + cc[2]) * q + cc[3]) * q + cc[4]) * q +
          cc[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  // Halley step on Phi(x) - p = 0 with Phi via erfc.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

double risk_coefficient(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("risk_coefficient: gamma must lie in (0,1)");
  const double q = normal_quantile(1.0 - gamma);
  const double pdf = std::exp(-0.5 * q * q) / std::sqrt(2.0 * M_PI);
  return pdf / gamma;
}

double closed_form_gaussian_objective(const Vector& w,
                                      const GaussianMoments& mom,
                                      double epsilon, double gamma,
                                      const TransportParam& param) {
  mom.validate();
  param.validate();
  require(w.size() == mom.dim() && w.size() == param.dim(),
          "closed_form_gaussian_objective: dimension mismatch");
  const double alpha = risk_coefficient(gamma);
  const Matrix M = param.L * param.L.transpose();
  const Vector Minv_w = Eigen::LLT<Matrix>(M).solve(w);
  return -mom.mean.dot(w) + alpha * std::sqrt(w.dot(mom.cov * w)) +
         epsilon * std::sqrt(1.0 + alpha * alpha) * std::sqrt(w.dot(Minv_w));
}

GaussianMoments worst_case_moments(const Vector& w, const GaussianMoments& mom,
                                   double rho, double gamma,
                                   const TransportParam& param) {
  mom.validate();
  param.validate();
  require(w.size() == mom.dim() && w.size() == param.dim(),
          "worst_case_moments: dimension mismatch");
  if (w.norm() == 0.0)
    throw ConfigError("worst_case_moments: w must be nonzero");
  if (rho == 0.0) return mom;  // zero radius: nominal moments

  const int k = mom.dim();
  const double alpha = risk_coefficient(gamma);
  const Matrix M = param.L * param.L.transpose();
  const Eigen::LLT<Matrix> llt(M);
  const Vector Minv_w = llt.solve(w);
  const double wMw = w.dot(Minv_w);
  const double norm_w = std::sqrt(wMw);
  const double root = std::sqrt(1.0 + alpha * alpha);

  GaussianMoments out;
  out.mean = mom.mean - (rho / (root * norm_w)) * Minv_w;
  const double gamma_star = root * norm_w / (2.0 * rho);
  const double lambda_star =
      1.0 / (wMw / gamma_star + (2.0 / alpha) * std::sqrt(w.dot(mom.cov * w)));
  const double denom = gamma_star - lambda_star * wMw;
  const Matrix F = Matrix::Identity(k, k) +
                   (lambda_star / denom) * (Minv_w * w.transpose());
  out.cov = F * mom.cov * F.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

ProblemInstance build_linreg_abs(const DatasetView& data, double epsilon,
                                 const TransportParam& param) {
  data.validate();
  const int d = data.dim();
  const int k = d - 1;
  const int J = data.count();
  require(k >= 1, "build_linreg_abs: need at least one feature column");
  check_builder_inputs(epsilon, param, d, 1);
  const Matrix X = data.features();
  const Vector y = data.responses();

  // x = (v, u, z, w); cones {0}^d x R+^J x R+^J x SOC(d+1).
  const int n = J + 1 + d + k;
  const int m = 2 * J + 2 * d + 1;
  ProblemInstance inst;
  inst.builder = BuilderId::RegressionAbs;
  inst.param_dim = d;
  inst.param_order = 1;
  inst.decision_dim = k;
  inst.variable_map = {{"v", {0, J}},
                       {"u", {J, 1}},
                       {"z", {J + 1, d}},
                       {"w", {J + 1 + d, k}}};
  inst.l_row = 0;
  inst.l_col = J + 1;

  ConicProblemData& p = inst.conic;
  p.A = Matrix::Zero(m, n);
  p.b = Vector::Zero(m);
  p.c = Vector::Zero(n);
  p.c.head(J).setConstant(1.0 / J);
  p.c(J) = epsilon;
  // Lz + (w, 0) = (0, ..., 0, 1).
  p.A.block(0, J + 1, d, d) = param.L;
  p.A.block(0, J + 1 + d, k, k) = Matrix::Identity(k, k);
  p.b(d - 1) = 1.0;
  // a_j = v_j - y_j + w'x_j >= 0.
  p.A.block(d, 0, J, J) = -Matrix::Identity(J, J);
  p.A.block(d, J + 1 + d, J, k) = -X;
  p.b.segment(d, J) = -y;
  // b_j = v_j + y_j - w'x_j >= 0.
  p.A.block(d + J, 0, J, J) = -Matrix::Identity(J, J);
  p.A.block(d + J, J + 1 + d, J, k) = X;
  p.b.segment(d + J, J) = y;
  // ||z|| <= u.
  p.A(d + 2 * J, J) = -1.0;
  p.A.block(d + 2 * J + 1, J + 1, d, d) = -Matrix::Identity(d, d);
  p.cone = ConeSpec({{ConeKind::Zero, d},
                     {ConeKind::NonNegative, J},
                     {ConeKind::NonNegative, J},
                     {ConeKind::SecondOrder, d + 1}});
  return inst;
}

double closed_form_linreg_abs(const Vector& w, const DatasetView& data,
                              double epsilon, const TransportParam& param) {
  data.validate();
  param.validate();
  const int d = data.dim();
  require(w.size() == d - 1 && param.dim() == d,
          "closed_form_linreg_abs: dimension mismatch");
  Vector wbar(d);
  wbar.head(d - 1) = -w;
  wbar(d - 1) = 1.0;
  const double fit =
      (data.samples * wbar).cwiseAbs().mean();
  const Vector Linv_wbar =
      param.L.triangularView<Eigen::Lower>().solve(wbar);
  return fit + epsilon * Linv_wbar.norm();
}

ProblemInstance build_linreg_sq(const DatasetView& data, double epsilon,
                                const TransportParam& param) {
  data.validate();
  const int d = data.dim();
  const int k = d - 1;
  const int J = data.count();
  require(k >= 1, "build_linreg_sq: need at least one feature column");
  check_builder_inputs(epsilon, param, d, 2);

  // x = (v, lambda, a, z, q); cones {0}^{d+1+J} x SOC(J+1) x SOC(d+1).
  const int n = d + 1 + J + 1 + d;
  const int m = (d + 1 + J) + (J + 1) + (d + 1);
  ProblemInstance inst;
  inst.builder = BuilderId::RegressionSq;
  inst.param_dim = d;
  inst.param_order = 2;
  inst.decision_dim = k;
  inst.negate_decision = true;
  inst.variable_map = {{"v", {0, d}},
                       {"w", {0, k}},  // w = -v[0:k] at optimality
                       {"lambda", {d, 1}},
                       {"a", {d + 1, J}},
                       {"z", {d + 1 + J, 1}},
                       {"q", {d + 2 + J, d}}};
  inst.l_row = 0;
  inst.l_col = d + 2 + J;

  ConicProblemData& p = inst.conic;
  p.A = Matrix::Zero(m, n);
  p.b = Vector::Zero(m);
  p.c = Vector::Zero(n);
  p.c(d) = 1.0 / std::sqrt(static_cast<double>(J));
  p.c(d + 1 + J) = epsilon;
  // -v + Lq = 0.
  p.A.block(0, 0, d, d) = -Matrix::Identity(d, d);
  p.A.block(0, d + 2 + J, d, d) = param.L;
  // v_d = 1.
  p.A(d, d - 1) = 1.0;
  p.b(d) = 1.0;
  // [X, y] v = a.
  p.A.block(d + 1, 0, J, d) = data.samples;
  p.A.block(d + 1, d + 1, J, J) = -Matrix::Identity(J, J);
  // ||a|| <= lambda.
  p.A(d + 1 + J, d) = -1.0;
  p.A.block(d + 2 + J, d + 1, J, J) = -Matrix::Identity(J, J);
  // ||q|| <= z.
  p.A(d + 2 + 2 * J, d + 1 + J) = -1.0;
  p.A.block(d + 3 + 2 * J, d + 2 + J, d, d) = -Matrix::Identity(d, d);
  p.cone = ConeSpec({{ConeKind::Zero, d + 1 + J},
                     {ConeKind::SecondOrder, J + 1},
                     {ConeKind::SecondOrder, d + 1}});
  return inst;
}

double closed_form_linreg_sq_root(const Vector& w, const DatasetView& data,
                                  double epsilon, const TransportParam& param) {
  data.validate();
  param.validate();
  const int d = data.dim();
  require(w.size() == d - 1 && param.dim() == d,
          "closed_form_linreg_sq_root: dimension mismatch");
  Vector wbar(d);
  wbar.head(d - 1) = -w;
  wbar(d - 1) = 1.0;
  const double mse = (data.samples * wbar).squaredNorm() / data.count();
  const Vector Linv_wbar =
      param.L.triangularView<Eigen::Lower>().solve(wbar);
  return std::sqrt(mse) + epsilon * Linv_wbar.norm();
}

Matrix parameter_gradient(const ProblemInstance& instance,
                          const DataDirections& adjoint,
                          const TransportParam& param) {
  require(param.dim() == instance.param_dim,
          "parameter_gradient: parameter dimension mismatch");
  require(adjoint.dA.rows() == instance.conic.rows() &&
              adjoint.dA.cols() == instance.conic.cols(),
          "parameter_gradient: adjoint built for a different instance");
  const int d = instance.param_dim;
  Matrix grad =
      adjoint.dA.block(instance.l_row, instance.l_col, d, d);
  return grad.triangularView<Eigen::Lower>();
}

}  // namespace otdro
