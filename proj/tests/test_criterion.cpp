// Copyright 2026 The Caliper Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "caliper/criterion.hpp"

using namespace caliper;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : values) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

Sample sample(std::uint64_t t, const Vector& x) { return Sample{t, x}; }
}  // namespace

TEST_CASE("scaled_distances: symmetric pair", "[caliper][distances]") {
  const Vector r = scaled_distances(rows({{0.0}, {2.0}}), vec({1.0}));
  REQUIRE(r(0) == 1.0);
  REQUIRE(r(1) == 1.0);
}

TEST_CASE("scaled_distances: divides by the mean raw distance", "[caliper][distances]") {
  const Vector r = scaled_distances(rows({{0.0}, {3.0}}), vec({0.0}));
  REQUIRE(r(0) == 0.0);
  REQUIRE(r(1) == 2.0);
}

TEST_CASE("scaled_distances: all references at the query give zeros", "[caliper][distances]") {
  const Vector r = scaled_distances(rows({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}), vec({1.0, 2.0}));
  REQUIRE(r.isZero(0.0));
}

TEST_CASE("kernel_weights: unit and extreme evaluations", "[caliper][weights]") {
  const Vector r = vec({0.0, 1.0, 2.5});
  REQUIRE(kernel_weights(r, 0.0).isOnes(0.0));
  REQUIRE_THAT(kernel_weights(vec({1.0}), 1.0)(0), WithinRel(0.36787944117144233, 1e-15));
  REQUIRE_THAT(kernel_weights(vec({1.0}), 16.0)(0), WithinRel(1.1253517471925912e-07, 1e-12));
}

TEST_CASE("ess: reference values", "[caliper][ess]") {
  REQUIRE_THAT(ess(Vector::Ones(5)), WithinAbs(5.0, 1e-12));
  REQUIRE_THAT(ess(vec({1.0, 0.5})), WithinAbs(1.8, 1e-12));
  REQUIRE_THAT(ess(vec({1.0, 1e-9, 1e-9, 1e-9})), WithinAbs(1.0, 1e-8));
}

TEST_CASE("ess_gate: inclusive threshold", "[caliper][ess]") {
  REQUIRE(ess_gate(Vector::Ones(9), 3.0, 2));
  Vector w = Vector::Ones(9);
  w(8) = 0.9;
  const double e = ess(w);
  REQUIRE(e > 8.98);
  REQUIRE(e < 9.0);
  REQUIRE_FALSE(ess_gate(w, 3.0, 2));
}

TEST_CASE("ess_gate: ten fixed points in two dimensions fail at the default theta_max", "[caliper][ess]") {
  // Independently evaluated: ESS at theta = 0, 0.1, 1, 2, 4, 8, 16.
  const std::vector<double> expected{8.0, 7.9861966022657445, 7.131979030974498, 5.8615305444094465,
                                     4.0065875928682, 2.5281561966904365, 1.9466417371298128};
  const Matrix pts = rows({{0.31, -1.20}, {1.05, 0.44}, {-0.72, 0.18}, {0.09, -0.35}, {-1.41, 1.02},
                           {0.66, -0.81}, {0.27, 0.93}, {-0.15, -0.06}, {1.32, -0.27}, {-0.48, 0.59}});
  const auto parts = split(normalize_window(pts).first);
  REQUIRE(parts);
  const Vector r = scaled_distances(parts->inputs, parts->query);
  const auto grid = LocalityGrid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    REQUIRE_THAT(ess(kernel_weights(r, grid[k])), WithinRel(expected[k], 1e-12));
  }
  REQUIRE_FALSE(ess_gate(kernel_weights(r, grid.theta_max()), 3.0, 2));
}

TEST_CASE("ess: non-increasing in theta, bounded by [1, n]", "[caliper][ess][property]") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 200);
  std::exponential_distribution<double> expo(1.0);
  for (int trial = 0; trial < 300; ++trial) {
    Vector r(len(rng));
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = expo(rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double theta : {0.0, 0.05, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 8.0, 16.0, 20.0}) {
      const double e = ess(kernel_weights(r, theta));
      REQUIRE(e <= prev + 1e-9);
      REQUIRE(e >= 1.0 - 1e-12);
      REQUIRE(e <= static_cast<double>(r.size()) + 1e-9);
      prev = e;
    }
  }
}

TEST_CASE("ess_gate: passing at theta_max implies passing at every grid point", "[caliper][ess][property]") {
  std::mt19937_64 rng(99);
  std::exponential_distribution<double> expo(1.0);
  const auto grid = LocalityGrid();
  int passes = 0;
  for (int trial = 0; trial < 500; ++trial) {
    Vector r(256);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = 0.3 * expo(rng) + 0.7;
    r /= r.mean();
    if (!ess_gate(kernel_weights(r, grid.theta_max()), 3.0, 2)) continue;
    ++passes;
    for (double theta : grid.values()) REQUIRE(ess(kernel_weights(r, theta)) >= 9.0 - 1e-9);
  }
  REQUIRE(passes > 0);
}

TEST_CASE("wlr_fit: exact recovery of a scalar affine map", "[caliper][wlr]") {
  Matrix x(6, 1);
  Matrix y(6, 1);
  for (Eigen::Index i = 0; i < 6; ++i) {
    x(i, 0) = static_cast<double>(i) - 2.0;
    y(i, 0) = 2.0 * x(i, 0) + 1.0;
  }
  const Matrix beta = wlr_fit(x, y, Vector::Ones(6), 0.0);
  REQUIRE_THAT(beta(0, 0), WithinAbs(2.0, 1e-10));
  REQUIRE_THAT(beta(1, 0), WithinAbs(1.0, 1e-10));
  for (Eigen::Index i = 0; i < 6; ++i) {
    REQUIRE_THAT(wlr_predict(beta, x.row(i).transpose())(0), WithinAbs(y(i, 0), 1e-10));
  }
}

TEST_CASE("wlr_fit: indicator weights interpolate the selected pair", "[caliper][wlr]") {
  const Matrix x = rows({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}});
  const Matrix y = rows({{5.0}, {-1.0}, {2.0}, {7.0}, {0.5}});
  const Vector w = vec({0.0, 1.0, 0.0, 1.0, 0.0});
  const Matrix beta = wlr_fit(x, y, w, 0.0);
  // Line through (1, -1) and (3, 7): slope 4, intercept -5.
  REQUIRE_THAT(beta(0, 0), WithinAbs(4.0, 1e-10));
  REQUIRE_THAT(beta(1, 0), WithinAbs(-5.0, 1e-10));
}

TEST_CASE("wlr_fit: identical references fall back to the weighted target mean", "[caliper][wlr]") {
  const Matrix x = rows({{0.5, -1.0}, {0.5, -1.0}, {0.5, -1.0}, {0.5, -1.0}});
  const Matrix y = rows({{1.0, 2.0}, {3.0, -2.0}, {0.0, 0.0}, {4.0, 1.0}});
  const Vector w = vec({1.0, 0.5, 0.25, 2.0});
  const Matrix beta = wlr_fit(x, y, w, 1e-10);
  REQUIRE(beta.allFinite());
  const Vector mean = (y.transpose() * w) / w.sum();
  const Vector pred = wlr_predict(beta, vec({0.5, -1.0}));
  REQUIRE((pred - mean).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("wlr_fit: singular system without the ridge guard is reported", "[caliper][wlr]") {
  const Matrix x = rows({{1.0}, {1.0}, {1.0}});
  const Matrix y = rows({{1.0}, {2.0}, {3.0}});
  REQUIRE_THROWS_AS(wlr_fit(x, y, Vector::Ones(3), 0.0), NumericalFailure);
}

TEST_CASE("wlr_fit: normal equations hold and perturbations never improve the fit", "[caliper][wlr][property]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 30;
    const Eigen::Index d = 1 + trial % 4;
    Matrix x(n, d);
    Matrix y(n, d);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        x(i, j) = normal(rng);
        y(i, j) = normal(rng);
      }
      w(i) = unit(rng);
    }
    const Matrix xa = augment(x);
    const Matrix beta = wlr_fit(x, y, w, 0.0);
    const Eigen::MatrixXd a = xa.transpose() * w.asDiagonal() * xa;
    const Eigen::MatrixXd b = xa.transpose() * w.asDiagonal() * y;
    REQUIRE((a * beta - b).norm() <= 1e-8 * b.norm());
    auto loss = [&](const Matrix& bt) {
      return (w.array().sqrt().matrix().asDiagonal() * (xa * bt - y)).squaredNorm();
    };
    const double best = loss(beta);
    for (int p = 0; p < 50; ++p) {
      Matrix delta(beta.rows(), beta.cols());
      for (Eigen::Index i = 0; i < delta.size(); ++i) delta.data()[i] = 1e-3 * normal(rng);
      REQUIRE(loss(beta + delta) >= best * (1.0 - 1e-8));
    }
  }
}

TEST_CASE("wlr_predict: affine evaluation", "[caliper][wlr]") {
  REQUIRE(wlr_predict(rows({{2.0}, {1.0}}), vec({3.0}))(0) == 7.0);
  REQUIRE(wlr_predict(Matrix::Zero(3, 2), vec({1.0, 4.0})).isZero(0.0));
  Matrix identity = Matrix::Zero(3, 2);
  identity(0, 0) = 1.0;
  identity(1, 1) = 1.0;
  REQUIRE(wlr_predict(identity, vec({-2.0, 5.0})) == vec({-2.0, 5.0}));
}

TEST_CASE("proxy_error: measured in raw units", "[caliper][proxy]") {
  WindowStats s1{vec({10.0}), vec({2.0})};
  REQUIRE(proxy_error(vec({0.3}), vec({0.3}), s1) == 0.0);
  REQUIRE_THAT(proxy_error(vec({1.0}), vec({0.0}), s1), WithinAbs(2.0, 1e-15));
  WindowStats s2{vec({0.0, 0.0}), vec({1.0, 1.0})};
  REQUIRE_THAT(proxy_error(vec({3.0, 4.0}), vec({0.0, 0.0}), s2), WithinAbs(5.0, 1e-15));
}

TEST_CASE("monotone_test: exact non-increase", "[caliper][monotone]") {
  REQUIRE(monotone_test(vec({5.0, 4.0, 3.0})));
  REQUIRE(monotone_test(vec({3.0, 3.0, 3.0})));
  REQUIRE_FALSE(monotone_test(vec({3.0, 4.0, 2.0})));
  REQUIRE_FALSE(monotone_test(vec({1.0, 1.0 + 1e-15})));
  REQUIRE(monotone_test(vec({1.0, 1.0 + 1e-15}), 1e-12));
}

TEST_CASE("effective_radius: reference values and monotonicity", "[caliper][radius]") {
  REQUIRE_THAT(effective_radius(1.0, std::exp(-1.0)), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(effective_radius(2.0, 0.01), WithinAbs(2.302585092994046, 1e-12));
  REQUIRE(std::isinf(effective_radius(0.0, 0.5)));
  const LocalityGrid grid;
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : grid.values()) {
    if (theta == 0.0) continue;
    const double r = effective_radius(theta, 0.5);
    REQUIRE(r < prev);
    prev = r;
  }
  REQUIRE(effective_radius(1e12, 0.5) < 1e-11);
  REQUIRE_THROWS_AS(effective_radius(1.0, 1.0), InvalidInput);
}

TEST_CASE("LocalityGrid and CaliperConfig validation", "[caliper][config]") {
  REQUIRE(LocalityGrid().values() == std::vector<double>{0.0, 0.1, 1.0, 2.0, 4.0, 8.0, 16.0});
  REQUIRE_THROWS_AS(LocalityGrid({1.0}), InvalidInput);
  REQUIRE_THROWS_AS(LocalityGrid({0.0, 2.0, 1.0}), InvalidInput);
  REQUIRE_THROWS_AS(LocalityGrid({-1.0, 1.0}), InvalidInput);
  REQUIRE(LocalityGrid().with_theta_max(12.0).theta_max() == 12.0);
  CaliperConfig c;
  REQUIRE(c.ess_multiplier == 3.0);
  REQUIRE_NOTHROW(c.validate());
  c.persistence = 0;
  REQUIRE_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.tau = 1.0;
  REQUIRE_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("caliper_step: two samples are insufficient and leave the state untouched", "[caliper][step]") {
  const CaliperConfig cfg;
  PostDriftWindow w(0);
  w.push(sample(0, vec({1.0})));
  w.push(sample(1, vec({2.0})));
  const auto state = CaliperState::fresh(cfg, 0);
  const auto [dec, next] = caliper_step(w, state, cfg);
  REQUIRE(std::holds_alternative<decision::InsufficientWindow>(dec));
  REQUIRE(next == state);
}

TEST_CASE("caliper_step: noiseless contraction triggers at the first gate pass", "[caliper][step]") {
  const CaliperConfig cfg;
  PostDriftWindow w(0);
  auto state = CaliperState::fresh(cfg, 0);
  double x = 1.0;
  bool triggered = false;
  for (std::uint64_t t = 0; t < 400 && !triggered; ++t) {
    w.push(sample(t, vec({x})));
    x *= 0.9;
    StepTrace trace;
    auto [dec, next] = caliper_step(w, state, cfg, &trace);
    state = next;
    if (w.size() < 3) continue;
    const bool gate = trace.ess_at_theta_max >= 3.0 * 2.0;
    if (!gate) {
      REQUIRE(std::holds_alternative<decision::EssGateFailed>(dec));
      continue;
    }
    REQUIRE(is_trigger(dec));
    REQUIRE(std::get<decision::Trigger>(dec).window_size == w.size());
    REQUIRE(trace.errors.maxCoeff() <= 1e-8);
    triggered = true;
  }
  REQUIRE(triggered);
}

TEST_CASE("caliper_step: deterministic, E frozen on gate failure, kept otherwise", "[caliper][step][property]") {
  CaliperConfig cfg;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  PostDriftWindow w(100);
  auto state = CaliperState::fresh(cfg, 100);
  int seen_gate_fail = 0;
  int seen_update = 0;
  for (std::uint64_t t = 100; t < 400; ++t) {
    Vector x(3);
    for (Eigen::Index j = 0; j < 3; ++j) x(j) = normal(rng);
    w.push(sample(t, x));
    const auto a = caliper_step(w, state, cfg);
    const auto b = caliper_step(w, state, cfg);
    REQUIRE(a.first == b.first);
    REQUIRE(a.second == b.second);
    const auto& next = a.second;
    if (std::holds_alternative<decision::EssGateFailed>(a.first)) {
      REQUIRE(next.cumulative_error == state.cumulative_error);
      REQUIRE(next.pass_streak == 0);
      ++seen_gate_fail;
    } else if (!std::holds_alternative<decision::InsufficientWindow>(a.first)) {
      REQUIRE((next.cumulative_error.array() >= state.cumulative_error.array()).all());
      REQUIRE(next.cumulative_error != state.cumulative_error);
      ++seen_update;
    }
    REQUIRE((next.cumulative_error.array() >= 0.0).all());
    state = next;
  }
  REQUIRE(seen_gate_fail > 0);
  REQUIRE(seen_update > 0);
}

TEST_CASE("caliper_step: persistence delays the trigger", "[caliper][step]") {
  CaliperConfig cfg;
  cfg.persistence = 3;
  PostDriftWindow w(0);
  auto state = CaliperState::fresh(cfg, 0);
  double x = 1.0;
  std::vector<std::string> names;
  for (std::uint64_t t = 0; t < 400; ++t) {
    w.push(sample(t, vec({x})));
    x *= 0.9;
    auto [dec, next] = caliper_step(w, state, cfg);
    state = next;
    REQUIRE(state.pass_streak <= cfg.persistence);
    if (decision_name(dec) != "ess_fail" && decision_name(dec) != "insufficient") names.push_back(decision_name(dec));
    if (is_trigger(dec)) break;
  }
  REQUIRE(names == std::vector<std::string>{"pending", "pending", "trigger"});
}

TEST_CASE("caliper_step: mismatched alarm time is rejected", "[caliper][step]") {
  const CaliperConfig cfg;
  PostDriftWindow w(5);
  w.push(sample(5, vec({1.0})));
  REQUIRE_THROWS_AS(caliper_step(w, CaliperState::fresh(cfg, 4), cfg), InvalidInput);
}
