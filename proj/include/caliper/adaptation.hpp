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

// Online episode: train on the warm-up split, stream the rest, and react to
// detector alarms with one of three strategies:
//   caliper      collect post-alarm samples until the criterion triggers
//   fixed:N      collect exactly N post-alarm samples
//   incremental  SGD step on every sample, alarms ignored
// The pre-alarm model keeps serving while a strategy waits.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "caliper/criterion.hpp"
#include "caliper/detectors.hpp"
#include "caliper/dynamics.hpp"
#include "caliper/learners.hpp"

namespace caliper {

namespace strategy {
struct Caliper {
  CaliperConfig config;
};
struct FixedWindow {
  std::size_t size = 512;
};
// eta > 0 is a fixed learning rate; eta <= 0 selects the normalized step
// eta_t = eta_scale / |x_aug|^2, which is stable for any input scale.
struct Incremental {
  double eta = 0.0;
  double eta_scale = 0.1;
};
}  // namespace strategy

using AdaptationStrategy = std::variant<strategy::Caliper, strategy::FixedWindow, strategy::Incremental>;

inline std::string strategy_name(const AdaptationStrategy& s) {
  if (std::holds_alternative<strategy::Caliper>(s)) return "caliper";
  if (const auto* f = std::get_if<strategy::FixedWindow>(&s)) return "fixed" + std::to_string(f->size);
  return "incremental";
}

struct EpisodeOptions {
  std::size_t window_cap = kDefaultWindowCap;
  // Smallest window a retrain may use; 0 selects 2 * past_len + max horizon.
  std::size_t min_retrain = 0;
  std::uint64_t detector_seed = 0;
  // Called after every criterion update with the window it inspected.
  std::function<void(const PostDriftWindow&, const Decision&)> on_decision;
};

struct StepRecord {
  std::uint64_t t = 0;
  int model_version = 0;
  bool alarm = false;
  std::string decision;  // "", "waiting", or a criterion decision name
  std::size_t window_n = 0;
  bool retrain = false;
  std::int64_t step_ns = 0;
  Vector truth;
  // Per horizon: prediction targeting t (empty if none) and its errors
  // (mean over dimensions; NaN if none).
  std::vector<Vector> prediction;
  std::vector<double> sq_err;
  std::vector<double> abs_err;
};

struct RetrainRecord {
  std::uint64_t alarm_t = 0;
  std::uint64_t trigger_t = 0;
  std::size_t window_size = 0;
  bool forced = false;  // window cap reached without a trigger
};

struct HorizonMetrics {
  std::size_t horizon = 0;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double mae = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

struct SegmentMetrics {
  std::uint64_t begin = 0;  // inclusive
  std::uint64_t end = 0;    // exclusive
  std::vector<HorizonMetrics> horizons;
};

struct EpisodeSummary {
  std::vector<HorizonMetrics> pooled;
  std::vector<HorizonMetrics> post_drift;  // from the first drift time on; empty without drift
  std::vector<SegmentMetrics> segments;
  std::size_t alarms = 0;
  std::size_t retrains = 0;
  double mean_step_ns = 0.0;
  double median_step_ns = 0.0;
  double median_step_ns_non_retrain = 0.0;
};

struct EpisodeReport {
  std::string strategy;
  std::vector<std::size_t> horizons;
  std::vector<StepRecord> steps;
  std::vector<RetrainRecord> retrains;
  EpisodeSummary summary;
};

namespace detail {
inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

inline std::vector<HorizonMetrics> metrics_between(const std::vector<StepRecord>& steps,
                                                   const std::vector<std::size_t>& horizons, std::uint64_t begin,
                                                   std::uint64_t end) {
  std::vector<HorizonMetrics> out;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    HorizonMetrics m;
    m.horizon = horizons[k];
    double se = 0.0;
    double ae = 0.0;
    for (const auto& s : steps) {
      if (s.t < begin || s.t >= end || std::isnan(s.sq_err[k])) continue;
      se += s.sq_err[k];
      ae += s.abs_err[k];
      ++m.count;
    }
    if (m.count > 0) {
      m.mse = se / static_cast<double>(m.count);
      m.mae = ae / static_cast<double>(m.count);
    }
    out.push_back(m);
  }
  return out;
}
}  // namespace detail

// Summary statistics from per-step records alone, so the same routine can
// re-derive them from a written steps file.
inline EpisodeSummary summarize(const std::vector<StepRecord>& steps, const std::vector<std::size_t>& horizons,
                                const std::vector<std::uint64_t>& drift_times) {
  EpisodeSummary s;
  constexpr auto kEnd = std::numeric_limits<std::uint64_t>::max();
  s.pooled = detail::metrics_between(steps, horizons, 0, kEnd);
  if (!steps.empty()) {
    const std::uint64_t first = steps.front().t;
    const std::uint64_t last = steps.back().t + 1;
    std::vector<std::uint64_t> cuts;
    for (auto d : drift_times) {
      if (d > first && d < last) cuts.push_back(d);
    }
    if (!drift_times.empty()) {
      const auto from = std::max<std::uint64_t>(drift_times.front(), first);
      s.post_drift = detail::metrics_between(steps, horizons, from, kEnd);
    }
    std::uint64_t begin = first;
    for (std::size_t i = 0; i <= cuts.size(); ++i) {
      const std::uint64_t end = i < cuts.size() ? cuts[i] : last;
      s.segments.push_back({begin, end, detail::metrics_between(steps, horizons, begin, end)});
      begin = end;
    }
  }
  std::vector<double> all;
  std::vector<double> quiet;
  double total = 0.0;
  for (const auto& r : steps) {
    if (r.alarm) ++s.alarms;
    if (r.retrain) ++s.retrains;
    const auto ns = static_cast<double>(r.step_ns);
    total += ns;
    all.push_back(ns);
    if (!r.retrain) quiet.push_back(ns);
  }
  if (!steps.empty()) s.mean_step_ns = total / static_cast<double>(steps.size());
  s.median_step_ns = detail::median_of(std::move(all));
  s.median_step_ns_non_retrain = detail::median_of(std::move(quiet));
  return s;
}

struct LearnerSetup {
  DelayEmbedding embedding;  // horizon field ignored; see `horizons`
  std::vector<std::size_t> horizons{1};
  LearnerConfig learner;
};

inline EpisodeReport run_adaptation(const Stream& stream, const DetectorConfig& detector_config,
                                    const AdaptationStrategy& strat, const LearnerSetup& setup,
                                    const EpisodeOptions& options = {}) {
  const std::size_t past_len = setup.embedding.past_len;
  const auto& horizons = setup.horizons;
  if (horizons.empty()) throw InvalidInput("at least one horizon is required");
  const std::size_t max_h = *std::max_element(horizons.begin(), horizons.end());
  const std::size_t min_retrain = options.min_retrain > 0 ? options.min_retrain : 2 * past_len + max_h;
  if (stream.warmup_len < past_len + max_h + 2 || stream.size() <= stream.warmup_len) {
    throw InvalidInput("stream must be longer than a usable warm-up split");
  }
  if (const auto* f = std::get_if<strategy::FixedWindow>(&strat); f && f->size < past_len + max_h + 1) {
    throw InvalidInput("fixed window of " + std::to_string(f->size) + " samples is too small for the embedding");
  }
  if (const auto* c = std::get_if<strategy::Caliper>(&strat)) c->config.validate();

  const std::span<const Sample> all(stream.samples);
  const auto warmup = all.first(stream.warmup_len);
  const std::size_t hn = horizons.size();

  std::vector<Hyperparams> hyper(hn);
  std::vector<Model> models;
  for (std::size_t k = 0; k < hn; ++k) {
    const DelayEmbedding emb{past_len, horizons[k]};
    hyper[k] = select_hyperparams(warmup, emb, setup.learner);
    const auto [x, y] = embed(warmup, past_len, horizons[k]);
    models.push_back(fit_model(setup.learner.family, x, y, hyper[k]));
  }

  std::vector<IncrementalLearner> sgd;
  double inc_rate = 0.0;
  double inc_scale = 0.0;
  if (const auto* inc = std::get_if<strategy::Incremental>(&strat)) {
    if (!(inc->eta > 0.0) && !(inc->eta_scale > 0.0 && inc->eta_scale < 2.0)) {
      throw InvalidInput("normalized incremental step needs eta_scale in (0, 2)");
    }
    inc_rate = inc->eta;
    inc_scale = inc->eta_scale;
    for (std::size_t k = 0; k < hn; ++k) {
      const auto [x, y] = embed(warmup, past_len, horizons[k]);
      const auto base = fit_ridge(x, y, setup.learner.family == LearnerFamily::Ridge ? hyper[k].alpha : 1.0);
      sgd.push_back({base.coef, inc->eta});
    }
  }

  auto serve = [&](std::size_t k, const Vector& input) {
    return sgd.empty() ? predict(models[k], input) : sgd[k].predict(input);
  };

  EpisodeReport report;
  report.strategy = strategy_name(strat);
  report.horizons = horizons;
  DriftDetector detector(detector_config, options.detector_seed);
  // pending[k] holds (target time, prediction) in target order.
  std::vector<std::deque<std::pair<std::uint64_t, Vector>>> pending(hn);
  std::optional<PostDriftWindow> window;
  std::optional<CaliperState> cstate;
  bool trigger_seen = false;
  int version = 0;

  auto retrain = [&](std::uint64_t t, bool forced) {
    const auto data = window->to_vector();
    for (std::size_t k = 0; k < hn; ++k) {
      const auto [x, y] = embed(data, past_len, horizons[k]);
      models[k] = fit_model(setup.learner.family, x, y, hyper[k]);
    }
    report.retrains.push_back({window->alarm_time(), t, window->size(), forced});
    ++version;
    detector.reset();
    window.reset();
    cstate.reset();
    trigger_seen = false;
  };

  report.steps.reserve(stream.size() - stream.warmup_len);
  for (std::size_t t = stream.warmup_len; t < stream.size(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    const Sample& sample = stream.samples[t];
    StepRecord rec;
    rec.t = t;
    rec.truth = sample.x;
    rec.prediction.assign(hn, Vector());
    rec.sq_err.assign(hn, std::numeric_limits<double>::quiet_NaN());
    rec.abs_err.assign(hn, std::numeric_limits<double>::quiet_NaN());

    std::optional<Vector> monitored_residual;
    for (std::size_t k = 0; k < hn; ++k) {
      if (!pending[k].empty() && pending[k].front().first == t) {
        Vector pred = std::move(pending[k].front().second);
        pending[k].pop_front();
        const Vector residual = sample.x - pred;
        rec.sq_err[k] = residual.squaredNorm() / static_cast<double>(residual.size());
        rec.abs_err[k] = residual.cwiseAbs().mean();
        rec.prediction[k] = std::move(pred);
        if (k == 0) monitored_residual = residual;
      }
    }
    if (monitored_residual) rec.alarm = detector.update(monitor_statistic(*monitored_residual));

    if (!sgd.empty()) {
      for (std::size_t k = 0; k < hn; ++k) {
        const std::size_t h = horizons[k];
        if (t < past_len + h - 1) continue;
        const Vector input = embed_input(all, t + 1 - h, past_len);
        if (!(inc_rate > 0.0)) sgd[k].eta = inc_scale / (input.squaredNorm() + 1.0);
        sgd_update(sgd[k], input, sample.x);
      }
    } else {
      if (!window && rec.alarm) {
        window.emplace(t, options.window_cap);
        if (std::holds_alternative<strategy::Caliper>(strat)) {
          cstate = CaliperState::fresh(std::get<strategy::Caliper>(strat).config, t);
        }
      }
      if (window) {
        window->push(sample);
        rec.window_n = window->size();
        bool do_retrain = false;
        bool forced = false;
        if (const auto* c = std::get_if<strategy::Caliper>(&strat)) {
          if (!trigger_seen) {
            auto [dec, next] = caliper_step(*window, *cstate, c->config);
            *cstate = std::move(next);
            rec.decision = decision_name(dec);
            if (options.on_decision) options.on_decision(*window, dec);
            trigger_seen = is_trigger(dec);
          } else {
            rec.decision = "waiting";
          }
          if (trigger_seen && window->size() >= min_retrain) {
            do_retrain = true;
          } else if (!trigger_seen && window->size() >= window->cap()) {
            do_retrain = true;
            forced = true;
          }
        } else {
          const auto& f = std::get<strategy::FixedWindow>(strat);
          rec.decision = "waiting";
          if (window->size() >= f.size) do_retrain = true;
        }
        if (do_retrain) {
          retrain(t, forced);
          rec.retrain = true;
        }
      }
    }

    rec.model_version = version;
    if (t + 1 >= past_len) {
      const Vector input = embed_input(all, t + 1, past_len);
      for (std::size_t k = 0; k < hn; ++k) {
        if (t + horizons[k] < stream.size()) pending[k].emplace_back(t + horizons[k], serve(k, input));
      }
    }
    rec.step_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    report.steps.push_back(std::move(rec));
  }
  report.summary = summarize(report.steps, horizons, stream.drift_times);
  return report;
}

}  // namespace caliper
