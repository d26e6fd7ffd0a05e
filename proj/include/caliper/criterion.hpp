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

// Post-drift retraining trigger.
//
// Every update normalizes the post-drift window, forms one-step reference
// pairs, and fits an affine weighted local regression around the current
// query for each locality value on a fixed grid. Kernel weights decay as
// exp(-theta * r) in the mean-scaled query distance r. The update is gated
// on the effective sample size at the tightest locality, and fires once the
// cumulative one-step query errors are non-increasing along the grid.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "caliper/core.hpp"

namespace caliper {

class LocalityGrid {
 public:
  LocalityGrid() : LocalityGrid(default_thetas()) {}

  explicit LocalityGrid(std::vector<double> thetas) : thetas_(std::move(thetas)) {
    if (thetas_.size() < 2) throw InvalidInput("locality grid needs at least two values");
    if (thetas_.front() < 0.0) throw InvalidInput("locality values must be non-negative");
    for (std::size_t k = 1; k < thetas_.size(); ++k) {
      if (!(thetas_[k] > thetas_[k - 1])) throw InvalidInput("locality grid must be strictly increasing");
    }
  }

  static std::vector<double> default_thetas() { return {0.0, 0.1, 1.0, 2.0, 4.0, 8.0, 16.0}; }

  // Same grid with the tightest locality replaced; used by the sweep.
  [[nodiscard]] LocalityGrid with_theta_max(double theta_max) const {
    auto t = thetas_;
    t.back() = theta_max;
    return LocalityGrid(std::move(t));
  }

  [[nodiscard]] std::size_t size() const { return thetas_.size(); }
  [[nodiscard]] double operator[](std::size_t k) const { return thetas_[k]; }
  [[nodiscard]] double theta_max() const { return thetas_.back(); }
  [[nodiscard]] const std::vector<double>& values() const { return thetas_; }

 private:
  std::vector<double> thetas_;
};

struct CaliperConfig {
  LocalityGrid grid;
  double ess_multiplier = 3.0;  // C
  double ridge_lambda = 1e-10;  // relative to trace(A)/p
  int persistence = 1;
  double tau = 0.5;  // only used to map locality values to radii
  // Slack of the monotone test, in normalized units per accepted update.
  double monotone_tol = 1e-6;

  void validate() const {
    if (!(ess_multiplier > 0.0)) throw InvalidInput("ESS multiplier must be positive");
    if (ridge_lambda < 0.0) throw InvalidInput("ridge_lambda must be non-negative");
    if (persistence < 1) throw InvalidInput("persistence must be at least 1");
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("tau must lie in (0, 1)");
    if (monotone_tol < 0.0) throw InvalidInput("monotone_tol must be non-negative");
  }
};

struct CaliperState {
  Vector cumulative_error;  // one entry per locality value, raw units
  double cumulative_scale = 0.0;  // sum of RMS window sigma over accepted updates
  int pass_streak = 0;
  std::uint64_t alarm_time = 0;

  static CaliperState fresh(const CaliperConfig& config, std::uint64_t alarm_time) {
    CaliperState s;
    s.cumulative_error = Vector::Zero(static_cast<Eigen::Index>(config.grid.size()));
    s.alarm_time = alarm_time;
    return s;
  }

  bool operator==(const CaliperState&) const = default;
};

namespace decision {
struct InsufficientWindow {
  bool operator==(const InsufficientWindow&) const = default;
};
struct EssGateFailed {
  double ess = 0.0;
  bool operator==(const EssGateFailed&) const = default;
};
struct NotMonotone {
  bool operator==(const NotMonotone&) const = default;
};
// Monotone test passed but fewer than `persistence` consecutive passes so far.
struct MonotonePending {
  int streak = 0;
  bool operator==(const MonotonePending&) const = default;
};
struct Trigger {
  std::size_t window_size = 0;
  bool operator==(const Trigger&) const = default;
};
}  // namespace decision

using Decision = std::variant<decision::InsufficientWindow, decision::EssGateFailed, decision::NotMonotone,
                              decision::MonotonePending, decision::Trigger>;

inline bool is_trigger(const Decision& d) { return std::holds_alternative<decision::Trigger>(d); }

inline std::string decision_name(const Decision& d) {
  struct {
    std::string operator()(const decision::InsufficientWindow&) const { return "insufficient"; }
    std::string operator()(const decision::EssGateFailed&) const { return "ess_fail"; }
    std::string operator()(const decision::NotMonotone&) const { return "not_monotone"; }
    std::string operator()(const decision::MonotonePending&) const { return "pending"; }
    std::string operator()(const decision::Trigger&) const { return "trigger"; }
  } v;
  return std::visit(v, d);
}

// Euclidean query distances divided by their mean; all zero if the mean is 0.
inline Vector scaled_distances(const Matrix& refs, const Vector& query) {
  if (refs.rows() == 0) throw InvalidInput("scaled_distances needs at least one reference row");
  Vector r = (refs.rowwise() - query.transpose()).rowwise().norm();
  const double mean = r.mean();
  if (mean == 0.0) return Vector::Zero(r.size());
  return r / mean;
}

inline Vector kernel_weights(const Vector& r, double theta) { return (-theta * r.array()).exp().matrix(); }

inline double ess(const Vector& w) {
  const double s = w.sum();
  return s * s / w.squaredNorm();
}

inline bool ess_gate(const Vector& w_at_theta_max, double c, Eigen::Index d) {
  return ess(w_at_theta_max) >= c * static_cast<double>(d + 1);
}

// [X | 1]
inline Matrix augment(const Matrix& x) {
  Matrix a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

// Solves (Xa' W Xa + lambda_eff I) beta = Xa' W Y for an already augmented
// design, lambda_eff = ridge_lambda * trace(A) / p.
inline Matrix wlr_fit_augmented(const Matrix& x_aug, const Matrix& y, const Vector& w, double ridge_lambda) {
  if (x_aug.rows() != y.rows() || x_aug.rows() != w.size() || x_aug.rows() == 0) {
    throw InvalidInput("wlr_fit: inconsistent or empty inputs");
  }
  const auto p = x_aug.cols();
  const Matrix wx = w.asDiagonal() * x_aug;
  Eigen::MatrixXd a = x_aug.transpose() * wx;
  const Eigen::MatrixXd b = wx.transpose() * y;
  if (ridge_lambda > 0.0) {
    a.diagonal().array() += ridge_lambda * a.trace() / static_cast<double>(p);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalFailure("weighted local regression system is not positive definite");
  Matrix beta = llt.solve(b);
  if (!beta.allFinite()) throw NumericalFailure("weighted local regression produced non-finite coefficients");
  return beta;
}

// p x d coefficients, p = d_in + 1 with the bias in the last row.
inline Matrix wlr_fit(const Matrix& inputs, const Matrix& targets, const Vector& w, double ridge_lambda) {
  return wlr_fit_augmented(augment(inputs), targets, w, ridge_lambda);
}

inline Vector wlr_predict(const Matrix& beta, const Vector& query) {
  const auto d_in = beta.rows() - 1;
  if (query.size() != d_in) throw InvalidInput("wlr_predict: query dimension mismatch");
  return beta.topRows(d_in).transpose() * query + beta.row(d_in).transpose();
}

// Distance between target and prediction after mapping both back to raw units.
inline double proxy_error(const Vector& target, const Vector& prediction, const WindowStats& stats) {
  return (stats.denormalize(target) - stats.denormalize(prediction)).norm();
}

// E_k >= E_{k+1} - tol for every consecutive pair.
inline bool monotone_test(const Vector& e, double tol = 0.0) {
  if (e.size() < 2) throw InvalidInput("monotone_test needs at least two entries");
  for (Eigen::Index k = 0; k + 1 < e.size(); ++k) {
    if (!(e(k) >= e(k + 1) - tol)) return false;
  }
  return true;
}

inline double effective_radius(double theta, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("tau must lie in (0, 1)");
  if (theta < 0.0) throw InvalidInput("theta must be non-negative");
  if (theta == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(1.0 / tau) / theta;
}

// Per-locality detail of one update, for diagnostics and tests.
struct StepTrace {
  double ess_at_theta_max = 0.0;
  Vector errors;  // per-locality proxy errors of this update
};

// One update of the criterion. Deterministic in its arguments.
inline std::pair<Decision, CaliperState> caliper_step(const PostDriftWindow& window, const CaliperState& state,
                                                      const CaliperConfig& config, StepTrace* trace = nullptr) {
  if (window.alarm_time() != state.alarm_time) throw InvalidInput("window and state belong to different alarms");
  const auto k_count = static_cast<Eigen::Index>(config.grid.size());
  if (state.cumulative_error.size() != k_count) throw InvalidInput("state does not match the locality grid");

  if (window.size() < 3) return {decision::InsufficientWindow{}, state};
  auto [z, stats] = normalize_window(window);
  auto parts = split(z);
  const Eigen::Index d = z.cols();

  const Vector r = scaled_distances(parts->inputs, parts->query);
  const double gate_ess = ess(kernel_weights(r, config.grid.theta_max()));
  if (trace) trace->ess_at_theta_max = gate_ess;
  CaliperState next = state;
  if (!(gate_ess >= config.ess_multiplier * static_cast<double>(d + 1))) {
    next.pass_streak = 0;
    return {decision::EssGateFailed{gate_ess}, next};
  }

  const Matrix x_aug = augment(parts->inputs);
  Vector q_aug(d + 1);
  q_aug << parts->query, 1.0;
  Vector errors(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const Vector w = kernel_weights(r, config.grid[static_cast<std::size_t>(k)]);
    const Matrix beta = wlr_fit_augmented(x_aug, parts->targets, w, config.ridge_lambda);
    const Vector y_hat = beta.transpose() * q_aug;
    errors(k) = proxy_error(parts->query_target, y_hat, stats);
  }
  if (trace) trace->errors = errors;
  next.cumulative_error += errors;
  next.cumulative_scale += std::sqrt(stats.sigma.squaredNorm() / static_cast<double>(d));

  if (!monotone_test(next.cumulative_error, config.monotone_tol * next.cumulative_scale)) {
    next.pass_streak = 0;
    return {decision::NotMonotone{}, next};
  }
  next.pass_streak = std::min(next.pass_streak + 1, config.persistence);
  if (next.pass_streak >= config.persistence) return {decision::Trigger{window.size()}, next};
  return {decision::MonotonePending{next.pass_streak}, next};
}

}  // namespace caliper
