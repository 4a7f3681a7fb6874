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

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace otdro {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Mismatched vector/matrix dimensions between coupled arguments.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The residual-map Jacobian is numerically singular (conditioning estimate
/// above threshold); the solution map is not differentiable at this point.
struct SingularJacobian : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A Lyapunov pencil (lambda_i + lambda_j) is singular beyond tolerance.
struct SingularPencil : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix square root is rank-deficient beyond tolerance.
struct SingularSqrt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input matrix expected to be symmetric is not.
struct NonSymmetricError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// NaN or infinite entries where finite values are required.
struct NonFiniteError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A lower-level solve failed while a pipeline needed it to succeed.
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training aborted (non-finite objective, solver failure with context).
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed configuration (CLI/JSON).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

}  // namespace otdro
