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

// Scalar change detectors that raise the alarms the retraining trigger
// consumes: ADWIN over an exponential histogram, and KSWIN, a sliding
// two-sample Kolmogorov-Smirnov test.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "caliper/errors.hpp"

namespace caliper {

// Exact sup |F_a - F_b| over the merged support.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidInput("ks_statistic needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
// Below lambda = 1.18 the equivalent Jacobi-theta form converges faster.
inline double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double q = 0.0;
  if (lambda < 1.18) {
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * c);
      s += term;
      if (term < 1e-16) break;
    }
    q = 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * lambda * lambda);
      q += sign * term;
      sign = -sign;
      if (term < 1e-16) break;
    }
    q *= 2.0;
  }
  return std::clamp(q, std::numeric_limits<double>::min(), 1.0);
}

inline double ks_pvalue(double d, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw InvalidInput("ks_pvalue needs positive sample sizes");
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return kolmogorov_tail(d * std::sqrt(nn * mm / (nn + mm)));
}

// Scalar fed to the detectors: mean absolute residual component.
inline double monitor_statistic(const Eigen::VectorXd& residual) {
  if (residual.size() == 0) return 0.0;
  return residual.cwiseAbs().mean();
}

class AdwinDetector {
 public:
  struct Bucket {
    double sum = 0.0;
    double m2 = 0.0;  // sum of squared deviations from the bucket mean
    std::uint64_t count = 0;
  };

  explicit AdwinDetector(double delta = 0.002, std::size_t max_buckets = 5, std::uint64_t min_window = 10,
                         std::uint64_t min_subwindow = 5)
      : delta_(delta), max_buckets_(max_buckets), min_window_(min_window), min_subwindow_(min_subwindow) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("ADWIN delta must lie in (0, 1)");
    if (max_buckets < 2) throw InvalidInput("ADWIN needs at least two buckets per level");
  }

  // Inserts v and returns true if any cut was detected (older part dropped).
  bool update(double v) {
    if (!std::isfinite(v)) throw InvalidInput("ADWIN input must be finite");
    insert(v);
    compress();
    return detect();
  }

  void reset() { *this = AdwinDetector(delta_, max_buckets_, min_window_, min_subwindow_); }

  [[nodiscard]] std::uint64_t width() const { return width_; }
  [[nodiscard]] double sum() const { return sum_; }
  [[nodiscard]] double mean() const { return width_ ? sum_ / static_cast<double>(width_) : 0.0; }
  [[nodiscard]] double m2() const { return m2_; }
  [[nodiscard]] double variance() const { return width_ ? m2_ / static_cast<double>(width_) : 0.0; }
  [[nodiscard]] double delta() const { return delta_; }
  // levels()[i] holds buckets of capacity 2^i, newest first.
  [[nodiscard]] const std::vector<std::deque<Bucket>>& levels() const { return levels_; }

 private:
  void insert(double v) {
    if (levels_.empty()) levels_.emplace_back();
    levels_[0].push_front(Bucket{v, 0.0, 1});
    if (width_ > 0) {
      const double mean_old = sum_ / static_cast<double>(width_);
      const double dv = v - mean_old;
      m2_ += static_cast<double>(width_) / static_cast<double>(width_ + 1) * dv * dv;
    }
    ++width_;
    sum_ += v;
  }

  static Bucket merge(const Bucket& a, const Bucket& b) {
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double diff = a.sum / na - b.sum / nb;
    return Bucket{a.sum + b.sum, a.m2 + b.m2 + na * nb / (na + nb) * diff * diff, a.count + b.count};
  }

  void compress() {
    for (std::size_t level = 0; level < levels_.size(); ++level) {
      if (levels_[level].size() <= max_buckets_) break;
      auto& row = levels_[level];
      const Bucket older = row.back();
      row.pop_back();
      const Bucket newer = row.back();
      row.pop_back();
      if (level + 1 == levels_.size()) levels_.emplace_back();
      levels_[level + 1].push_front(merge(older, newer));
    }
  }

  void drop_oldest() {
    auto level = levels_.size() - 1;
    while (levels_[level].empty()) --level;
    const Bucket b = levels_[level].back();
    levels_[level].pop_back();
    const std::uint64_t rest = width_ - b.count;
    if (rest == 0) {
      width_ = 0;
      sum_ = 0.0;
      m2_ = 0.0;
    } else {
      const double nb = static_cast<double>(b.count);
      const double nr = static_cast<double>(rest);
      const double diff = b.sum / nb - (sum_ - b.sum) / nr;
      m2_ = std::max(0.0, m2_ - b.m2 - nb * nr / (nb + nr) * diff * diff);
      width_ = rest;
      sum_ -= b.sum;
    }
    while (!levels_.empty() && levels_.back().empty()) levels_.pop_back();
  }

  [[nodiscard]] bool cut_violated(std::uint64_t n0, double sum0) const {
    const std::uint64_t n1 = width_ - n0;
    const double u0 = sum0 / static_cast<double>(n0);
    const double u1 = (sum_ - sum0) / static_cast<double>(n1);
    const double n = static_cast<double>(width_);
    const double v = variance();
    const double dd = std::log(2.0 * std::log(n) / delta_);
    const double m = 1.0 / static_cast<double>(n0 - min_subwindow_ + 1) +
                     1.0 / static_cast<double>(n1 - min_subwindow_ + 1);
    const double eps = std::sqrt(2.0 * m * v * dd) + 2.0 / 3.0 * dd * m;
    return std::abs(u0 - u1) > eps;
  }

  bool detect() {
    bool changed = false;
    bool cut = true;
    while (cut && width_ >= min_window_) {
      cut = false;
      std::uint64_t n0 = 0;
      double sum0 = 0.0;
      // Walk cut points from the oldest bucket towards the newest.
      for (auto level = levels_.size(); level-- > 0 && !cut;) {
        const auto& row = levels_[level];
        for (auto it = row.rbegin(); it != row.rend(); ++it) {
          n0 += it->count;
          sum0 += it->sum;
          if (n0 >= width_) break;
          if (n0 >= min_subwindow_ && width_ - n0 >= min_subwindow_ && cut_violated(n0, sum0)) {
            cut = true;
            break;
          }
        }
      }
      if (cut) {
        drop_oldest();
        changed = true;
      }
    }
    return changed;
  }

  double delta_;
  std::size_t max_buckets_;
  std::uint64_t min_window_;
  std::uint64_t min_subwindow_;
  std::vector<std::deque<Bucket>> levels_;
  std::uint64_t width_ = 0;
  double sum_ = 0.0;
  double m2_ = 0.0;
};

class KswinDetector {
 public:
  explicit KswinDetector(double alpha = 0.05, std::size_t window_size = 100, std::size_t stat_size = 30,
                         std::uint64_t seed = 0)
      : alpha_(alpha), window_size_(window_size), stat_size_(stat_size), seed_(seed), rng_(seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("KSWIN alpha must lie in (0, 1)");
    if (stat_size == 0 || stat_size >= window_size) throw InvalidInput("KSWIN needs 0 < stat_size < window_size");
    if (window_size - stat_size < stat_size) throw InvalidInput("KSWIN needs window_size >= 2 * stat_size");
  }

  bool update(double v) {
    if (!std::isfinite(v)) throw InvalidInput("KSWIN input must be finite");
    buffer_.push_back(v);
    if (buffer_.size() > window_size_) buffer_.pop_front();
    if (buffer_.size() < window_size_) return false;

    const auto split = static_cast<std::ptrdiff_t>(window_size_ - stat_size_);
    std::vector<double> older;
    older.reserve(stat_size_);
    std::sample(buffer_.begin(), buffer_.begin() + split, std::back_inserter(older),
                static_cast<std::ptrdiff_t>(stat_size_), rng_);
    std::vector<double> recent(buffer_.begin() + split, buffer_.end());
    last_statistic_ = ks_statistic(older, recent);
    last_pvalue_ = ks_pvalue(last_statistic_, stat_size_, stat_size_);
    ++tests_;
    if (last_pvalue_ < alpha_) {
      buffer_.assign(recent.begin(), recent.end());
      return true;
    }
    return false;
  }

  void reset() {
    buffer_.clear();
    last_statistic_ = 0.0;
    last_pvalue_ = 1.0;
  }

  [[nodiscard]] std::size_t buffered() const { return buffer_.size(); }
  [[nodiscard]] std::uint64_t tests() const { return tests_; }
  [[nodiscard]] double last_statistic() const { return last_statistic_; }
  [[nodiscard]] double last_pvalue() const { return last_pvalue_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] std::size_t window_size() const { return window_size_; }
  [[nodiscard]] std::size_t stat_size() const { return stat_size_; }

 private:
  double alpha_;
  std::size_t window_size_;
  std::size_t stat_size_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::deque<double> buffer_;
  std::uint64_t tests_ = 0;
  double last_statistic_ = 0.0;
  double last_pvalue_ = 1.0;
};

struct DetectorConfig {
  enum class Kind { Adwin, Kswin };
  Kind kind = Kind::Adwin;
  double delta = 0.002;
  double alpha = 0.05;
  std::size_t window_size = 100;
  std::size_t stat_size = 30;
};

inline std::string detector_name(DetectorConfig::Kind k) { return k == DetectorConfig::Kind::Adwin ? "adwin" : "kswin"; }

class DriftDetector {
 public:
  DriftDetector(const DetectorConfig& config, std::uint64_t seed)
      : impl_(config.kind == DetectorConfig::Kind::Adwin
                  ? Impl(AdwinDetector(config.delta))
                  : Impl(KswinDetector(config.alpha, config.window_size, config.stat_size, seed))) {}

  bool update(double v) {
    return std::visit([v](auto& d) { return d.update(v); }, impl_);
  }
  void reset() {
    std::visit([](auto& d) { d.reset(); }, impl_);
  }

 private:
  using Impl = std::variant<AdwinDetector, KswinDetector>;
  Impl impl_;
};

}  // namespace caliper
