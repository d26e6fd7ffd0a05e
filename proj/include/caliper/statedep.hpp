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

// Empirical state dependence of a window: among pairs of states within
// radius r of each other, the fraction whose successors stay within c * r.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "caliper/core.hpp"
#include "caliper/criterion.hpp"

namespace caliper {

struct StateDepEstimate {
  double alpha_hat = 0.0;
  std::uint64_t pairs_total = 0;  // conditioning pairs (ordered)
  std::uint64_t pairs_hit = 0;
  double r = 0.0;
  double c = 0.0;
};

class UndefinedEstimate : public Error {
 public:
  using Error::Error;
};

// Exhaustive over ordered pairs (i, j), i != j, both with an in-window
// successor; distances in window z-score coordinates.
inline StateDepEstimate alpha_hat(const Matrix& raw_window, double r, double c) {
  if (raw_window.rows() < 3) throw InvalidInput("alpha_hat needs a window of at least 3 samples");
  if (!(r > 0.0) || !(c > 0.0)) throw InvalidInput("alpha_hat needs r > 0 and c > 0");
  const Matrix z = normalize_window(raw_window).first;
  const auto m = z.rows() - 1;
  const double cr = c * r;
  std::uint64_t total = 0;
  std::uint64_t hit = 0;
  // The relation is symmetric in (i, j): count each unordered pair twice.
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if ((z.row(j) - z.row(i)).norm() <= r) {
        total += 2;
        if ((z.row(j + 1) - z.row(i + 1)).norm() <= cr) hit += 2;
      }
    }
  }
  if (total == 0) throw UndefinedEstimate("no state pairs within radius " + std::to_string(r));
  return {static_cast<double>(hit) / static_cast<double>(total), total, hit, r, c};
}

inline StateDepEstimate alpha_hat(const PostDriftWindow& window, double r, double c) {
  return alpha_hat(window.matrix(), r, c);
}

// Largest successor/state distance ratio over pairs closer than r; the
// plug-in for the local Lipschitz constant.
inline std::optional<double> local_lipschitz(const Matrix& raw_window, double r) {
  const Matrix z = normalize_window(raw_window).first;
  const auto m = z.rows() - 1;
  std::optional<double> best;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double ds = (z.row(j) - z.row(i)).norm();
      if (ds > r || ds == 0.0) continue;
      const double ratio = (z.row(j + 1) - z.row(i + 1)).norm() / ds;
      if (!best || ratio > *best) best = ratio;
    }
  }
  return best;
}

// Default expansion constant: twice the local Lipschitz estimate, 1 if no
// pair is close enough to estimate it.
inline double default_expansion(const Matrix& raw_window, double r) {
  const auto l = local_lipschitz(raw_window, r);
  return l && *l > 0.0 ? 2.0 * *l : 1.0;
}

struct RadiusGap {
  double theta = 0.0;
  double radius = 0.0;
  std::optional<double> gap;  // empty if either estimate is undefined
};

// alpha_hat(triggered) - alpha_hat(rejected) at each radius induced by the grid.
inline std::vector<RadiusGap> compare_windows(const Matrix& triggered, const Matrix& rejected, const LocalityGrid& grid,
                                              double tau, double c) {
  std::vector<RadiusGap> out;
  for (double theta : grid.values()) {
    RadiusGap g;
    g.theta = theta;
    g.radius = effective_radius(theta, tau);
    try {
      g.gap = alpha_hat(triggered, g.radius, c).alpha_hat - alpha_hat(rejected, g.radius, c).alpha_hat;
    } catch (const UndefinedEstimate&) {
      g.gap.reset();
    }
    out.push_back(g);
  }
  return out;
}

}  // namespace caliper
