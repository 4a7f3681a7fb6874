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

#include <map>
#include <string>

#include "otdro/conic_diff.hpp"
#include "otdro/conic_solver.hpp"
#include "otdro/transport_metrics.hpp"

namespace otdro {

enum class BuilderId {
  PortfolioT1,
  PortfolioT2,
  PortfolioGaussian,
  RegressionAbs,
  RegressionSq
};

std::string builder_name(BuilderId id);

/// Rows of sample vectors. For regression problems the samples are
/// xi_j = (x_j, y_j) with the response in the last column, so d = k + 1.
struct DatasetView {
  Matrix samples;  // J x d

  int count() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
  Matrix features() const {  // regression X, first d-1 columns
    return samples.leftCols(samples.cols() - 1);
  }
  Vector responses() const { return samples.rightCols(1); }
  void validate() const;
};

struct VariableSlice {
  int offset = 0;
  int size = 0;
};

/// A standard-form instance plus the bookkeeping needed to extract the
/// decision and to contract data adjoints back into the transport parameter.
/// Each builder places L in exactly one dense block of A;
/// A(l_row + i, l_col + j) = L(i, j).
struct ProblemInstance {
  ConicProblemData conic;
  std::map<std::string, VariableSlice> variable_map;
  BuilderId builder = BuilderId::PortfolioT1;
  int param_dim = 0;   // d of the transport parameter
  int param_order = 1; // p
  int decision_dim = 0;
  int l_row = 0;
  int l_col = 0;
  bool negate_decision = false;  // RegressionSq recovers w = -v[0:k]

  Vector decision(const PrimalDualSolution& sol) const;
  /// Worst-case objective reported to the user. Equals the conic optimum
  /// except for RegressionSq, where the conic value must be squared to
  /// recover the worst-case expectation.
  double reported_objective(double conic_value) const;
};

/// Portfolio over a discrete reference with type-1 Mahalanobis cost.
ProblemInstance build_portfolio_type1(const DatasetView& data, double epsilon,
                                      const TransportParam& param);

/// Portfolio over a discrete reference with type-2 Mahalanobis cost.
ProblemInstance build_portfolio_type2(const DatasetView& data, double epsilon,
                                      const TransportParam& param);

/// CVaR portfolio over a Gaussian reference ball (type-2 cost).
ProblemInstance build_portfolio_gaussian(const GaussianMoments& mom,
                                         double epsilon, double gamma,
                                         const TransportParam& param);

/// Gaussian CVaR coefficient alpha(gamma) = phi(Phi^{-1}(1-gamma)) / gamma.
double risk_coefficient(double gamma);

/// Inverse standard normal CDF (rational approximation polished with one
/// Halley step; absolute error well below 1e-8).
double normal_quantile(double p);

/// -mu'w + alpha sqrt(w' Sigma w) + eps sqrt(1+alpha^2) ||w||_{(LL')^{-1}}.
double closed_form_gaussian_objective(const Vector& w,
                                      const GaussianMoments& mom,
                                      double epsilon, double gamma,
                                      const TransportParam& param);

/// Moments attaining the robust Gaussian objective at decision w and radius
/// rho. rho = 0 returns the nominal moments.
GaussianMoments worst_case_moments(const Vector& w, const GaussianMoments& mom,
                                   double rho, double gamma,
                                   const TransportParam& param);

/// Robust linear regression with absolute loss (type-1 cost).
ProblemInstance build_linreg_abs(const DatasetView& data, double epsilon,
                                 const TransportParam& param);

/// (1/J) sum |(-w,1)' xi_j| + eps ||(-w,1)||_{(LL')^{-1}}.
double closed_form_linreg_abs(const Vector& w, const DatasetView& data,
                              double epsilon, const TransportParam& param);

/// Robust linear regression with squared loss (type-2 cost). The conic
/// optimum is sqrt of the worst-case expectation.
ProblemInstance build_linreg_sq(const DatasetView& data, double epsilon,
                                const TransportParam& param);

/// sqrt(MSE) + eps ||(-w,1)||_{(LL')^{-1}} (conic-value scale, not squared).
double closed_form_linreg_sq_root(const Vector& w, const DatasetView& data,
                                  double epsilon, const TransportParam& param);

/// Contraction of a data adjoint into the gradient of the upper objective
/// with respect to L: reads the dA entries where the builder placed L and
/// restricts to the lower triangle. c and b are L-independent for every
/// builder, so db/dc contribute nothing.
Matrix parameter_gradient(const ProblemInstance& instance,
                          const DataDirections& adjoint,
                          const TransportParam& param);

}  // namespace otdro
