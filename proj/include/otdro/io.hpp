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

#include <string>

// Single-header nlohmann/json from vendor/.
#include <json.hpp>

#include "otdro/conic_solver.hpp"
#include "otdro/experiments.hpp"
#include "otdro/transport_metrics.hpp"

namespace otdro {

using Json = nlohmann::json;

Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);

/// Problem file format of the `solve` subcommand:
/// {"A": [[...]], "b": [...], "c": [...],
///  "cones": [{"kind": "zero"|"nonneg"|"soc", "dim": k}, ...]}.
ConicProblemData problem_from_json(const Json& j);
Json problem_to_json(const ConicProblemData& p);

Json solution_to_json(const PrimalDualSolution& sol);

/// Distribution files: {"points": [[...]], "weights": [...]} or
/// {"mean": [...], "cov": [[...]]}.
bool is_discrete_distribution(const Json& j);
DiscreteDistribution discrete_from_json(const Json& j);
GaussianMoments moments_from_json(const Json& j);

/// {"L": [[...]], "p": 1|2}; a bare array is accepted as L.
TransportParam param_from_json(const Json& j, int default_p = 1);
Json param_to_json(const TransportParam& p);

ExperimentConfig experiment_config_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_full(double v);

}  // namespace otdro
