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

// Retrainable forecasters on delay embeddings: ridge, RBF kernel ridge and
// a per-step SGD linear baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "caliper/core.hpp"

namespace caliper {

struct DelayEmbedding {
  std::size_t past_len = 30;
  std::size_t horizon = 1;
};

// Input row for the L samples ending at samples[end - 1], oldest first.
inline Vector embed_input(std::span<const Sample> samples, std::size_t end, std::size_t past_len) {
  if (end < past_len || end > samples.size()) throw InvalidInput("embed_input: not enough history");
  const auto d = samples.front().x.size();
  Vector row(static_cast<Eigen::Index>(past_len) * d);
  for (std::size_t k = 0; k < past_len; ++k) {
    row.segment(static_cast<Eigen::Index>(k) * d, d) = samples[end - past_len + k].x;
  }
  return row;
}

// Row i: x(i..i+L-1) -> x(i+L-1+h).
inline std::pair<Matrix, Matrix> embed(std::span<const Sample> series, std::size_t past_len, std::size_t horizon) {
  if (past_len < 1 || horizon < 1) throw InvalidInput("embedding needs past_len >= 1 and horizon >= 1");
  if (series.size() < past_len + horizon) {
    throw InvalidInput("series of length " + std::to_string(series.size()) + " is too short for past_len " +
                       std::to_string(past_len) + " and horizon " + std::to_string(horizon));
  }
  const auto d = series.front().x.size();
  const auto rows = static_cast<Eigen::Index>(series.size() - past_len - horizon + 1);
  Matrix inputs(rows, static_cast<Eigen::Index>(past_len) * d);
  Matrix targets(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto end = static_cast<std::size_t>(i) + past_len;
    inputs.row(i) = embed_input(series, end, past_len).transpose();
    targets.row(i) = series[end - 1 + horizon].x.transpose();
  }
  return {std::move(inputs), std::move(targets)};
}

// Affine map with coefficients stored as a p x d matrix, bias in the last row.
struct RidgeLearner {
  Matrix coef;
  double alpha = 1.0;

  [[nodiscard]] Vector predict(const Vector& x) const {
    const auto p = coef.rows() - 1;
    return coef.topRows(p).transpose() * x + coef.row(p).transpose();
  }
};

// Centered ridge: the bias is not penalized, so alpha -> inf leaves the
// target-mean predictor.
inline RidgeLearner fit_ridge(const Matrix& inputs, const Matrix& targets, double alpha) {
  if (inputs.rows() < 1 || inputs.rows() != targets.rows()) throw InvalidInput("fit_ridge: bad training set");
  if (!(alpha > 0.0)) throw InvalidInput("ridge alpha must be positive");
  const Eigen::RowVectorXd x_mean = inputs.colwise().mean();
  const Eigen::RowVectorXd y_mean = targets.colwise().mean();
  const Matrix xc = inputs.rowwise() - x_mean;
  const Matrix yc = targets.rowwise() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::MatrixXd w = gram.llt().solve(xc.transpose() * yc);
  RidgeLearner m;
  m.alpha = alpha;
  m.coef.resize(inputs.cols() + 1, targets.cols());
  m.coef.topRows(inputs.cols()) = w;
  m.coef.row(inputs.cols()) = y_mean - x_mean * w;
  return m;
}

// Sentinel for the median-distance bandwidth heuristic.
inline constexpr double kMedianGamma = 0.0;

inline Eigen::MatrixXd rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd sq = (-2.0 * (a * b.transpose())).colwise() + an;
  sq.rowwise() += bn.transpose();
  return (-gamma * sq.array().max(0.0)).exp().matrix();
}

// 1 / (2 median^2) over all pairwise distances of the rows.
inline double median_gamma(const Matrix& x) {
  std::vector<double> d2;
  const auto n = x.rows();
  d2.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d2.push_back((x.row(i) - x.row(j)).squaredNorm());
  }
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  double med2 = *mid;
  if (d2.size() % 2 == 0) {
    const double lower = *std::max_element(d2.begin(), mid);
    med2 = 0.5 * (med2 + lower);
  }
  if (!(med2 > 0.0)) return 1.0;
  return 1.0 / (2.0 * med2);
}

struct KrrLearner {
  Matrix train_inputs;
  Matrix dual;  // n x d
  double gamma = 1.0;
  double alpha = 1.0;

  [[nodiscard]] Vector predict(const Vector& x) const {
    const Eigen::VectorXd k =
        (-gamma * (train_inputs.rowwise() - x.transpose()).rowwise().squaredNorm().array()).exp().matrix();
    return dual.transpose() * k;
  }
};

// (K + alpha I) c = Y with K_ij = exp(-gamma |x_i - x_j|^2). Pass
// kMedianGamma to pick the bandwidth from the data.
inline KrrLearner fit_krr(const Matrix& inputs, const Matrix& targets, double gamma, double alpha) {
  if (inputs.rows() < 1 || inputs.rows() != targets.rows()) throw InvalidInput("fit_krr: bad training set");
  if (!(alpha > 0.0)) throw InvalidInput("KRR alpha must be positive");
  if (gamma < 0.0) throw InvalidInput("KRR gamma must be positive or the median sentinel");
  KrrLearner m;
  m.gamma = gamma == kMedianGamma ? median_gamma(inputs) : gamma;
  m.alpha = alpha;
  m.train_inputs = inputs;
  Eigen::MatrixXd k = rbf_kernel(inputs, inputs, m.gamma);
  k.diagonal().array() += alpha;
  m.dual = k.llt().solve(Eigen::MatrixXd(targets));
  return m;
}

struct IncrementalLearner {
  Matrix coef;  // p x d, bias last
  double eta = 1e-3;

  [[nodiscard]] Vector predict(const Vector& x) const {
    const auto p = coef.rows() - 1;
    return coef.topRows(p).transpose() * x + coef.row(p).transpose();
  }
};

// One squared-loss gradient step: W <- W - eta * x_aug (x_aug' W - y').
inline void sgd_update(IncrementalLearner& m, const Vector& x, const Vector& y) {
  Vector x_aug(x.size() + 1);
  x_aug << x, 1.0;
  const Vector residual = m.coef.transpose() * x_aug - y;
  m.coef.noalias() -= m.eta * x_aug * residual.transpose();
}

enum class LearnerFamily { Ridge, Krr };

inline std::string family_name(LearnerFamily f) { return f == LearnerFamily::Ridge ? "ridge" : "krr"; }

struct LearnerConfig {
  LearnerFamily family = LearnerFamily::Ridge;
  std::vector<double> ridge_alphas{1e-2, 1e-1, 1.0, 10.0};
  std::vector<double> krr_gammas{kMedianGamma, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<double> krr_alphas{1e-2, 1e-1, 1.0, 10.0};
  double validation_fraction = 0.2;
};

struct Hyperparams {
  double alpha = 1.0;
  double gamma = kMedianGamma;  // KRR only
};

using Model = std::variant<RidgeLearner, KrrLearner>;

inline Vector predict(const Model& m, const Vector& x) {
  return std::visit([&](const auto& l) { return l.predict(x); }, m);
}

inline Model fit_model(LearnerFamily family, const Matrix& inputs, const Matrix& targets, const Hyperparams& hp) {
  if (family == LearnerFamily::Ridge) return fit_ridge(inputs, targets, hp.alpha);
  return fit_krr(inputs, targets, hp.gamma, hp.alpha);
}

inline double mean_squared_error(const Model& m, const Matrix& inputs, const Matrix& targets) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    s += (predict(m, inputs.row(i).transpose()) - targets.row(i).transpose()).squaredNorm();
  }
  return s / static_cast<double>(inputs.rows() * targets.cols());
}

// Grid search on a tail validation split of `train`, chronological, so the
// validation rows never precede training rows.
inline Hyperparams select_hyperparams(std::span<const Sample> train, const DelayEmbedding& emb,
                                      const LearnerConfig& config) {
  const auto [inputs, targets] = embed(train, emb.past_len, emb.horizon);
  const auto n = inputs.rows();
  auto n_val = static_cast<Eigen::Index>(std::floor(config.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<Eigen::Index>(n_val, 1, n - 1);
  if (n < 2) throw InvalidInput("not enough warm-up data for hyperparameter selection");
  const Matrix fit_x = inputs.topRows(n - n_val);
  const Matrix fit_y = targets.topRows(n - n_val);
  const Matrix val_x = inputs.bottomRows(n_val);
  const Matrix val_y = targets.bottomRows(n_val);

  std::vector<Hyperparams> candidates;
  if (config.family == LearnerFamily::Ridge) {
    for (double a : config.ridge_alphas) candidates.push_back({a, kMedianGamma});
  } else {
    for (double g : config.krr_gammas) {
      for (double a : config.krr_alphas) candidates.push_back({a, g});
    }
  }
  if (candidates.empty()) throw InvalidInput("empty hyperparameter grid");
  Hyperparams best = candidates.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& hp : candidates) {
    const double err = mean_squared_error(fit_model(config.family, fit_x, fit_y, hp), val_x, val_y);
    if (err < best_err) {
      best_err = err;
      best = hp;
    }
  }
  return best;
}

}  // namespace caliper
