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

#include "otdro/coverage.hpp"
#include "test_util.hpp"

using namespace otdro;
using testutil::rel_err;

namespace {

DatasetView tiny_data(Rng& rng, int J, int d) {
  DatasetView out;
  out.samples = Matrix(J, d);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < d; ++i) out.samples(j, i) = rng.normal();
  return out;
}

}  // namespace

TEST_SUITE("coverage") {

TEST_CASE("single-sample bootstrap replicas equal the base distribution") {
  Rng rng(81);
  const DatasetView data = tiny_data(rng, 1, 2);
  const BootstrapSet boots = bootstrap(data, 5, BootstrapMode::Discrete, 3);
  for (const auto& rep : boots.discrete) {
    CHECK((rep.points - data.samples).norm() == 0.0);
    CHECK(rep.weights(0) == 1.0);
  }
}

TEST_CASE("bootstrap is deterministic given the seed") {
  Rng rng(82);
  const DatasetView data = tiny_data(rng, 12, 3);
  const BootstrapSet a = bootstrap(data, 8, BootstrapMode::Discrete, 99);
  const BootstrapSet b = bootstrap(data, 8, BootstrapMode::Discrete, 99);
  for (int k = 0; k < 8; ++k)
    CHECK((a.discrete[k].points - b.discrete[k].points).norm() == 0.0);
  const BootstrapSet c = bootstrap(data, 8, BootstrapMode::Gaussian, 99);
  const BootstrapSet d2 = bootstrap(data, 8, BootstrapMode::Gaussian, 99);
  for (int k = 0; k < 8; ++k) {
    CHECK((c.gaussian[k].mean - d2.gaussian[k].mean).norm() == 0.0);
    CHECK((c.gaussian[k].cov - d2.gaussian[k].cov).norm() == 0.0);
  }
}

TEST_CASE("resampling frequency follows binomial statistics") {
  Rng rng(83);
  const int J = 4;
  const DatasetView data = tiny_data(rng, J, 1);
  const int n_b = 100000;
  const BootstrapSet boots = bootstrap(data, n_b, BootstrapMode::Discrete, 7);
  // Count how often row 0 appears in the first slot of each replica.
  int hits = 0;
  for (const auto& rep : boots.discrete)
    if (rep.points(0, 0) == data.samples(0, 0)) ++hits;
  const double p = 1.0 / J;
  const double sd = std::sqrt(p * (1.0 - p) * n_b);
  CHECK(std::abs(hits - p * n_b) <= 3.0 * sd);
}

TEST_CASE("gaussian replicas carry ridged empirical moments") {
  Rng rng(84);
  const DatasetView data = tiny_data(rng, 30, 3);
  const BootstrapSet boots = bootstrap(data, 4, BootstrapMode::Gaussian, 11);
  for (const auto& g : boots.gaussian) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.cov);
    CHECK(es.eigenvalues().minCoeff() >= 1e-6 - 1e-12);
  }
}

TEST_CASE("calibrate_epsilon order statistics") {
  std::vector<double> d;
  for (int i = 1; i <= 20; ++i) d.push_back(i);
  CHECK(calibrate_epsilon(d, 0.1) == doctest::Approx(18.0));
  CHECK(calibrate_epsilon(std::vector<double>(7, 3.25), 0.25) ==
        doctest::Approx(3.25));
  CHECK(calibrate_epsilon(d, 1e-9) == doctest::Approx(20.0));
  CHECK_THROWS_AS(calibrate_epsilon({}, 0.1), ConfigError);
}

TEST_CASE("sigmoid examples and saturation") {
  CHECK(sigmoid(0.0, 100.0) == 0.5);
  CHECK(sigmoid(1000.0, 100.0) == 1.0);
  CHECK(sigmoid(-1000.0, 100.0) == 0.0);
  Rng rng(85);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-50.0, 50.0);
    CHECK(std::abs(sigmoid(x, 100.0) + sigmoid(-x, 100.0) - 1.0) <= 1e-15);
  }
}

TEST_CASE("penalty saturation values") {
  PenaltyConfig cfg;
  cfg.beta = 0.1;
  cfg.eta_p = 100.0;
  cfg.epsilon = 1.0;
  // All distances far below epsilon.
  CHECK(penalty_from_distances({0.01, 0.02, 0.05}, cfg) ==
        doctest::Approx(-0.1).epsilon(1e-9));
  // All far above.
  CHECK(penalty_from_distances({10.0, 20.0}, cfg) ==
        doctest::Approx(0.9).epsilon(1e-9));
  // One replica exactly at epsilon, one far below: (0.5 + 0)/2 - beta.
  CHECK(penalty_from_distances({1.0, 1e-6}, cfg) ==
        doctest::Approx(0.25 - 0.1).epsilon(1e-9));
}

TEST_CASE("penalty is monotone when distances scale up") {
  Rng rng(86);
  PenaltyConfig cfg;
  cfg.beta = 0.1;
  cfg.eta_p = 100.0;
  cfg.epsilon = 0.7;
  std::vector<double> base;
  for (int i = 0; i < 15; ++i) base.push_back(rng.uniform(0.0, 1.5));
  double prev = penalty_from_distances(base, cfg);
  for (double scale : {1.1, 1.5, 2.0, 5.0}) {
    std::vector<double> scaled = base;
    for (double& v : scaled) v *= scale;
    const double e = penalty_from_distances(scaled, cfg);
    CHECK(e >= prev - 1e-12);
    prev = e;
  }
}

TEST_CASE("penalty value and gradient against the distance pipeline") {
  Rng rng(87);
  const DatasetView data = tiny_data(rng, 8, 2);
  const Reference ref = make_reference(data, BootstrapMode::Discrete);
  const BootstrapSet boots = bootstrap(data, 6, BootstrapMode::Discrete, 21);
  const TransportParam theta{testutil::random_lower_triangular(rng, 2), 1};
  PenaltyConfig cfg;
  cfg.beta = 0.1;
  cfg.eta_p = 8.0;  // mild slope keeps the finite differences clean

  const ReplicaDistances dist = replica_distances(theta, ref, boots);
  cfg.epsilon = std::max(1e-3, 0.9 * dist.values[2]);
  const double e_val = penalty_value(theta, ref, boots, cfg);
  CHECK(e_val == doctest::Approx(penalty_from_distances(dist.values, cfg)));
  CHECK(e_val >= -cfg.beta - 1e-12);
  CHECK(e_val <= 1.0 - cfg.beta + 1e-12);

  auto e_of = [&](const Matrix& L) {
    return penalty_value({L, 1}, ref, boots, cfg);
  };
  if (testutil::fd_is_smooth(e_of, theta.L)) {
    const Matrix je = penalty_gradient(theta, ref, boots, cfg);
    const Matrix fd = testutil::fd_gradient_lower(e_of, theta.L, 1e-6);
    CHECK(rel_err(je, fd) <= 1e-3);
  }
}

TEST_CASE("gaussian mode penalty gradient matches finite differences") {
  Rng rng(88);
  const DatasetView data = tiny_data(rng, 20, 3);
  const Reference ref = make_reference(data, BootstrapMode::Gaussian);
  const BootstrapSet boots = bootstrap(data, 8, BootstrapMode::Gaussian, 22);
  const TransportParam theta{testutil::random_lower_triangular(rng, 3), 2};
  PenaltyConfig cfg;
  cfg.beta = 0.1;
  cfg.eta_p = 10.0;
  const ReplicaDistances dist = replica_distances(theta, ref, boots);
  cfg.epsilon = std::max(1e-3, 0.95 * dist.values[4]);
  auto e_of = [&](const Matrix& L) {
    return penalty_value({L, 2}, ref, boots, cfg);
  };
  const Matrix je = penalty_gradient(theta, ref, boots, cfg);
  const Matrix fd = testutil::fd_gradient_lower(e_of, theta.L, 1e-6);
  CHECK(rel_err(je, fd) <= 1e-3);
}

TEST_CASE("J_e norm vanishes as eta_p -> 0") {
  Rng rng(89);
  const DatasetView data = tiny_data(rng, 10, 2);
  const Reference ref = make_reference(data, BootstrapMode::Gaussian);
  const BootstrapSet boots = bootstrap(data, 5, BootstrapMode::Gaussian, 23);
  const TransportParam theta{testutil::random_lower_triangular(rng, 2), 2};
  PenaltyConfig cfg;
  cfg.beta = 0.1;
  cfg.epsilon = 0.5;
  double prev = std::numeric_limits<double>::infinity();
  for (double eta : {10.0, 1.0, 0.1, 0.01}) {
    cfg.eta_p = eta;
    const double norm = penalty_gradient(theta, ref, boots, cfg).norm();
    CHECK(norm < prev);
    prev = norm;
  }
  CHECK(prev <= 1e-2);
}

TEST_CASE("calibration keeps the initial violation below beta/2") {
  // At theta0 the calibrated radius covers at least the 1-beta fraction, so
  // with a sharp sigmoid e(theta0) stays at or below beta/2.
  Rng rng(90);
  PenaltyConfig cfg;
  cfg.beta = 0.1;
  cfg.eta_p = 100.0;
  for (int rep = 0; rep < 4; ++rep) {
    const int d = 2 + rng.uniform_int(2);
    const DatasetView data = tiny_data(rng, 25, d);
    const TransportParam theta{Matrix::Identity(d, d), rep % 2 == 0 ? 1 : 2};
    const BootstrapMode mode =
        rep % 2 == 0 ? BootstrapMode::Discrete : BootstrapMode::Gaussian;
    const Reference ref = make_reference(data, mode);
    const BootstrapSet boots = bootstrap(data, 20, mode, 400 + rep);
    const ReplicaDistances dist = replica_distances(theta, ref, boots);
    cfg.epsilon = calibrate_epsilon(dist.values, cfg.beta);
    CHECK(penalty_from_distances(dist.values, cfg) <= 0.5 * cfg.beta + 1e-12);
  }
}

}  // TEST_SUITE
