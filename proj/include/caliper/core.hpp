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

// Stream samples, the post-alarm window buffer and the per-window z-score
// transform shared by the criterion, the learners and the diagnostics.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caliper/errors.hpp"

namespace caliper {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kDefaultWindowCap = 4096;
inline constexpr double kSigmaFloor = 1e-8;

struct Sample {
  std::uint64_t t = 0;
  Vector x;
};

// Copies the rows of `samples` into an n x d matrix.
inline Matrix stack_rows(const std::vector<Sample>& samples) {
  if (samples.empty()) return Matrix(0, 0);
  const auto d = samples.front().x.size();
  Matrix m(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = samples[i].x.transpose();
  return m;
}

// Samples accumulated since a drift alarm. Time indices are consecutive;
// once `cap` samples are held the oldest one is evicted per push.
class PostDriftWindow {
 public:
  explicit PostDriftWindow(std::uint64_t alarm_time, std::size_t cap = kDefaultWindowCap)
      : alarm_time_(alarm_time), cap_(cap) {
    if (cap_ == 0) throw InvalidInput("window cap must be positive");
  }

  void push(const Sample& s) {
    if (s.x.size() == 0) throw InvalidInput("sample dimension must be at least 1");
    if (!s.x.allFinite()) throw InvalidInput("sample at t=" + std::to_string(s.t) + " has non-finite entries");
    if (samples_.empty() && !capped_) {
      if (s.t != alarm_time_) {
        throw InvalidInput("first sample must be at the alarm time " + std::to_string(alarm_time_) + ", got " +
                           std::to_string(s.t));
      }
    } else {
      if (s.t != last_time_ + 1) {
        throw InvalidInput("non-consecutive time index: expected " + std::to_string(last_time_ + 1) + ", got " +
                           std::to_string(s.t));
      }
      if (s.x.size() != dim_) throw InvalidInput("sample dimension mismatch");
    }
    if (samples_.empty()) dim_ = s.x.size();
    samples_.push_back(s);
    last_time_ = s.t;
    if (samples_.size() > cap_) {
      samples_.pop_front();
      capped_ = true;
    }
  }

  [[nodiscard]] std::size_t size() const { return samples_.size(); }
  [[nodiscard]] bool empty() const { return samples_.empty(); }
  [[nodiscard]] Eigen::Index dim() const { return dim_; }
  [[nodiscard]] std::size_t cap() const { return cap_; }
  [[nodiscard]] bool capped() const { return capped_; }
  [[nodiscard]] std::uint64_t alarm_time() const { return alarm_time_; }
  [[nodiscard]] std::uint64_t last_time() const { return last_time_; }
  [[nodiscard]] const std::deque<Sample>& samples() const { return samples_; }
  [[nodiscard]] const Sample& operator[](std::size_t i) const { return samples_[i]; }

  // n x d copy of the raw samples, oldest first.
  [[nodiscard]] Matrix matrix() const {
    Matrix m(static_cast<Eigen::Index>(samples_.size()), dim_);
    for (std::size_t i = 0; i < samples_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = samples_[i].x.transpose();
    return m;
  }

  [[nodiscard]] std::vector<Sample> to_vector() const { return {samples_.begin(), samples_.end()}; }

 private:
  std::uint64_t alarm_time_;
  std::size_t cap_;
  std::deque<Sample> samples_;
  std::uint64_t last_time_ = 0;
  Eigen::Index dim_ = 0;
  bool capped_ = false;
};

struct WindowStats {
  Vector mu;
  Vector sigma;  // already floored

  [[nodiscard]] Vector denormalize(const Vector& z) const { return z.cwiseProduct(sigma) + mu; }
  [[nodiscard]] Vector normalize(const Vector& x) const { return (x - mu).cwiseQuotient(sigma); }
};

// Per-column z-score with population standard deviation.
inline std::pair<Matrix, WindowStats> normalize_window(const Matrix& x, double sigma_floor = kSigmaFloor) {
  if (x.rows() < 1) throw InvalidInput("cannot normalize an empty window");
  const double n = static_cast<double>(x.rows());
  WindowStats stats;
  stats.mu = x.colwise().sum().transpose() / n;
  stats.sigma.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - stats.mu(j)).square().sum() / n;
    stats.sigma(j) = std::max(std::sqrt(var), sigma_floor);
  }
  Matrix z = (x.rowwise() - stats.mu.transpose()).array().rowwise() / stats.sigma.transpose().array();
  return {std::move(z), std::move(stats)};
}

inline std::pair<Matrix, WindowStats> normalize_window(const PostDriftWindow& window,
                                                       double sigma_floor = kSigmaFloor) {
  return normalize_window(window.matrix(), sigma_floor);
}

inline Matrix denormalize(const Matrix& z, const WindowStats& stats) {
  return (z.array().rowwise() * stats.sigma.transpose().array()).rowwise() + stats.mu.transpose().array();
}

// Reference pairs (row i of inputs -> row i of targets) and the current query
// pair. With 0-based rows of Z: inputs are rows 0..n-3, targets rows 1..n-2,
// the query input is row n-2 and its target row n-1.
struct NormalizedSplit {
  Matrix inputs;
  Matrix targets;
  Vector query;
  Vector query_target;
};

// Empty result means the window is too short (n < 3) to hold one reference
// pair plus the query.
inline std::optional<NormalizedSplit> split(const Matrix& z) {
  const auto n = z.rows();
  if (n < 3) return std::nullopt;
  NormalizedSplit s;
  s.inputs = z.topRows(n - 2);
  s.targets = z.middleRows(1, n - 2);
  s.query = z.row(n - 2).transpose();
  s.query_target = z.row(n - 1).transpose();
  return s;
}

}  // namespace caliper
