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

#include "caliper/core.hpp"

using namespace caliper;
using Catch::Matchers::WithinAbs;

namespace {
Sample scalar(std::uint64_t t, double v) {
  Sample s;
  s.t = t;
  s.x = Vector::Constant(1, v);
  return s;
}

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}
}  // namespace

TEST_CASE("push: first sample at the alarm time", "[core][window]") {
  PostDriftWindow w(7);
  REQUIRE(w.empty());
  w.push(scalar(7, 1.0));
  REQUIRE(w.size() == 1);
  REQUIRE(w.last_time() == 7);
  REQUIRE(w.dim() == 1);
}

TEST_CASE("push: cap evicts the oldest sample", "[core][window]") {
  PostDriftWindow w(0, 4);
  for (std::uint64_t t = 0; t < 4; ++t) w.push(scalar(t, static_cast<double>(t)));
  REQUIRE_FALSE(w.capped());
  w.push(scalar(4, 4.0));
  REQUIRE(w.size() == 4);
  REQUIRE(w.capped());
  REQUIRE(w[0].t == 1);
  REQUIRE(w[3].t == 4);
}

TEST_CASE("push: rejects gaps, wrong start, dimension changes and non-finite values", "[core][window]") {
  PostDriftWindow w(3);
  REQUIRE_THROWS_AS(w.push(scalar(4, 0.0)), InvalidInput);
  w.push(scalar(3, 0.0));
  REQUIRE_THROWS_AS(w.push(scalar(5, 0.0)), InvalidInput);
  Sample two;
  two.t = 4;
  two.x = Vector::Zero(2);
  REQUIRE_THROWS_AS(w.push(two), InvalidInput);
  REQUIRE_THROWS_AS(w.push(scalar(4, std::numeric_limits<double>::quiet_NaN())), InvalidInput);
  REQUIRE(w.size() == 1);
}

TEST_CASE("normalize_window: two-point z-score", "[core][normalize]") {
  auto [z, stats] = normalize_window(column({0.0, 2.0}));
  REQUIRE(stats.mu(0) == 1.0);
  REQUIRE(stats.sigma(0) == 1.0);
  REQUIRE(z(0, 0) == -1.0);
  REQUIRE(z(1, 0) == 1.0);
}

TEST_CASE("normalize_window: constant column is floored to zeros", "[core][normalize]") {
  auto [z, stats] = normalize_window(column({5.0, 5.0, 5.0}));
  REQUIRE(stats.sigma(0) == kSigmaFloor);
  for (Eigen::Index i = 0; i < 3; ++i) REQUIRE(z(i, 0) == 0.0);
}

TEST_CASE("normalize_window: zero mean, unit population std, round trip", "[core][normalize]") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(3.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x(40, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng) * (1.0 + static_cast<double>(j));
    }
    auto [z, stats] = normalize_window(x);
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double mean = z.col(j).mean();
      const double var = (z.col(j).array() - mean).square().mean();
      REQUIRE(std::abs(mean) <= 1e-10);
      REQUIRE_THAT(std::sqrt(var), WithinAbs(1.0, 1e-10));
    }
    const Matrix back = denormalize(z, stats);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        REQUIRE(std::abs(back(i, j) - x(i, j)) <= 1e-12 * std::max(1.0, std::abs(x(i, j))));
      }
    }
  }
}

TEST_CASE("split: smallest legal window", "[core][split]") {
  const auto parts = split(column({1.0, 2.0, 3.0}));
  REQUIRE(parts);
  REQUIRE(parts->inputs.rows() == 1);
  REQUIRE(parts->inputs(0, 0) == 1.0);
  REQUIRE(parts->targets(0, 0) == 2.0);
  REQUIRE(parts->query(0) == 2.0);
  REQUIRE(parts->query_target(0) == 3.0);
}

TEST_CASE("split: two rows is insufficient", "[core][split]") { REQUIRE_FALSE(split(column({1.0, 2.0}))); }

TEST_CASE("split: five-row index bookkeeping", "[core][split]") {
  const auto parts = split(column({10.0, 11.0, 12.0, 13.0, 14.0}));
  REQUIRE(parts);
  REQUIRE(parts->inputs.rows() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    REQUIRE(parts->inputs(i, 0) == 10.0 + static_cast<double>(i));
    REQUIRE(parts->targets(i, 0) == 11.0 + static_cast<double>(i));
  }
  REQUIRE(parts->query(0) == 13.0);
  REQUIRE(parts->query_target(0) == 14.0);
}

TEST_CASE("split: inputs followed by the query reproduce the leading rows", "[core][split]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix z(12, 3);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = u(rng);
  }
  const auto parts = split(z);
  REQUIRE(parts);
  for (Eigen::Index i = 0; i < parts->inputs.rows(); ++i) REQUIRE(parts->inputs.row(i) == z.row(i));
  REQUIRE(parts->query.transpose() == z.row(z.rows() - 2));
  REQUIRE(parts->query_target.transpose() == z.row(z.rows() - 1));
}
