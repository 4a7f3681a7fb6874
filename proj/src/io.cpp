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

#include "otdro/io.hpp"

#include <cstdio>
#include <fstream>

namespace otdro {

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError("expected a nested array for a matrix");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw ConfigError("ragged matrix rows in JSON");
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array for a vector");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

ConicProblemData problem_from_json(const Json& j) {
  ConicProblemData p;
  try {
    p.A = matrix_from_json(j.at("A"));
    p.b = vector_from_json(j.at("b"));
    p.c = vector_from_json(j.at("c"));
    std::vector<ConeBlock> blocks;
    for (const Json& cb : j.at("cones")) {
      const std::string kind = cb.at("kind").get<std::string>();
      const int dim = cb.at("dim").get<int>();
      if (kind == "zero") blocks.push_back({ConeKind::Zero, dim});
      else if (kind == "nonneg") blocks.push_back({ConeKind::NonNegative, dim});
      else if (kind == "soc") blocks.push_back({ConeKind::SecondOrder, dim});
      else throw ConfigError("unknown cone kind: " + kind);
    }
    p.cone = ConeSpec(std::move(blocks));
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed problem JSON: ") + e.what());
  }
  p.validate();
  return p;
}

Json problem_to_json(const ConicProblemData& p) {
  Json j;
  j["A"] = to_json(p.A);
  j["b"] = to_json(p.b);
  j["c"] = to_json(p.c);
  Json cones = Json::array();
  for (const ConeBlock& b : p.cone.blocks()) {
    const char* kind = b.kind == ConeKind::Zero        ? "zero"
                       : b.kind == ConeKind::NonNegative ? "nonneg"
                                                         : "soc";
    cones.push_back(Json{{"kind", kind}, {"dim", b.dim}});
  }
  j["cones"] = std::move(cones);
  return j;
}

Json solution_to_json(const PrimalDualSolution& sol) {
  Json j;
  j["x"] = to_json(sol.x);
  j["y"] = to_json(sol.y);
  j["s"] = to_json(sol.s);
  switch (sol.status) {
    case SolveStatus::Optimal: j["status"] = "optimal"; break;
    case SolveStatus::MaxIter: j["status"] = "max_iter"; break;
    case SolveStatus::Infeasible: j["status"] = "infeasible"; break;
    case SolveStatus::Unbounded: j["status"] = "unbounded"; break;
  }
  j["iterations"] = sol.iterations;
  j["primal_res"] = sol.primal_res;
  j["dual_res"] = sol.dual_res;
  j["gap"] = sol.gap;
  return j;
}

bool is_discrete_distribution(const Json& j) { return j.contains("points"); }

DiscreteDistribution discrete_from_json(const Json& j) {
  DiscreteDistribution d;
  d.points = matrix_from_json(j.at("points"));
  d.weights = vector_from_json(j.at("weights"));
  d.validate();
  return d;
}

GaussianMoments moments_from_json(const Json& j) {
  GaussianMoments g;
  g.mean = vector_from_json(j.at("mean"));
  g.cov = matrix_from_json(j.at("cov"));
  g.validate();
  return g;
}

TransportParam param_from_json(const Json& j, int default_p) {
  TransportParam p;
  if (j.is_array()) {
    p.L = matrix_from_json(j);
    p.p = default_p;
  } else {
    p.L = matrix_from_json(j.at("L"));
    p.p = j.contains("p") ? j.at("p").get<int>() : default_p;
  }
  p.validate();
  return p;
}

Json param_to_json(const TransportParam& p) {
  return Json{{"L", to_json(p.L)}, {"p", p.p}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig cfg;
  try {
    cfg.family = family_from_string(j.at("family").get<std::string>());
    if (j.contains("k")) cfg.k = j.at("k").get<int>();
    if (j.contains("J")) cfg.J = j.at("J").get<int>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("oos_samples"))
      cfg.oos_samples = j.at("oos_samples").get<int>();
    if (j.contains("n_atoms")) cfg.n_atoms = j.at("n_atoms").get<int>();
    if (j.contains("n_comp")) cfg.n_comp = j.at("n_comp").get<int>();
    if (j.contains("single_instance"))
      cfg.linreg_single_instance = j.at("single_instance").get<bool>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    const Json t = j.value("train", Json::object());
    if (t.contains("step")) cfg.train.step = t.at("step").get<double>();
    if (t.contains("schedule"))
      cfg.train.schedule = t.at("schedule").get<std::string>() == "inverse_iter"
                               ? StepSchedule::InverseIter
                               : StepSchedule::Constant;
    if (t.contains("tol")) cfg.train.tol = t.at("tol").get<double>();
    if (t.contains("lambda_p")) cfg.train.lambda_p = t.at("lambda_p").get<double>();
    if (t.contains("eta_p")) cfg.train.eta_p = t.at("eta_p").get<double>();
    if (t.contains("maxiter")) cfg.train.maxiter = t.at("maxiter").get<long>();
    if (t.contains("n_b")) cfg.train.n_b = t.at("n_b").get<int>();
    if (t.contains("beta")) cfg.train.beta = t.at("beta").get<double>();
    if (t.contains("gamma")) cfg.train.gamma = t.at("gamma").get<double>();
    if (t.contains("eps_override"))
      cfg.train.eps_override = t.at("eps_override").get<double>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace otdro
