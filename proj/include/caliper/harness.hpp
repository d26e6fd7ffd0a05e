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

// Experiment plumbing: JSON configuration, stream CSV ingestion and export,
// per-run report files, strategy x seed orchestration and the parameter
// sweep. Every summary number written here can be re-derived from the
// per-step files by verify_reports().

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include "caliper/adaptation.hpp"

namespace caliper {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Number formatting

inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// ---------------------------------------------------------------------------
// Stream CSV: header row, one numeric column per dimension, LF endings.

inline std::vector<Sample> ingest_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stream file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const auto d = header.size();
  if (d == 0 || line.empty()) throw ConfigError(path.string() + ": missing header row");
  std::vector<Sample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d) {
      throw ConfigError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(d));
    }
    Sample s;
    s.t = out.size();
    s.x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = parse_double(cells[j]);
      if (!v || !std::isfinite(*v)) {
        throw ConfigError(path.string() + ": row " + std::to_string(row) + ", column " + std::to_string(j + 1) +
                          " ('" + header[j] + "'): not a finite number: '" + cells[j] + "'");
      }
      s.x(static_cast<Eigen::Index>(j)) = *v;
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ConfigError(path.string() + ": no data rows");
  return out;
}

inline void write_stream_csv(const fs::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto d = samples.empty() ? 0 : samples.front().x.size();
  for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << 'x' << j;
  out << '\n';
  for (const auto& s : samples) {
    for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << format_double(s.x(j));
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Configuration

struct StreamSource {
  std::optional<fs::path> csv;
  double warmup_fraction = 0.2;  // CSV sources only
  std::string system = "lorenz";
  Eigen::Index dim = 3;
  std::vector<double> params;  // empty keeps the canonical parameters
  StreamSpec spec;
  DriftSchedule schedule;
};

struct ExperimentConfig {
  StreamSource source;
  DetectorConfig detector;
  std::vector<AdaptationStrategy> strategies;
  LearnerSetup learner;
  CaliperConfig caliper;
  EpisodeOptions episode;
  std::vector<std::uint64_t> seeds{0};
  fs::path out_dir = "results";
  json raw;  // as read, for the manifest

  void validate() const {
    if (strategies.empty()) throw ConfigError("config needs at least one strategy");
    if (seeds.empty()) throw ConfigError("config needs at least one seed");
    if (source.csv && !fs::exists(*source.csv)) throw ConfigError("stream file not found: " + source.csv->string());
    if (learner.horizons.empty()) throw ConfigError("config needs at least one horizon");
    try {
      caliper.validate();
      source.spec.validate();
      source.schedule.validate();
      if (!source.csv) (void)builtin_system(source.system, source.dim);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}
}  // namespace detail

inline AdaptationStrategy parse_strategy(const std::string& s, const CaliperConfig& caliper) {
  auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : s.substr(colon + 1);
  if (kind == "caliper" && arg.empty()) return strategy::Caliper{caliper};
  if (kind == "fixed" || kind.rfind("fixed", 0) == 0) {
    std::string digits = kind == "fixed" ? arg : kind.substr(5);
    std::size_t n = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (digits.empty() || res.ec != std::errc() || res.ptr != digits.data() + digits.size() || n == 0) {
      throw ConfigError("bad fixed-window strategy '" + s + "' (expected fixed:N)");
    }
    return strategy::FixedWindow{n};
  }
  if (kind == "incremental") {
    strategy::Incremental inc;
    if (!arg.empty()) {
      const auto eta = parse_double(arg);
      if (!eta || !(*eta > 0.0)) throw ConfigError("bad incremental learning rate in '" + s + "'");
      inc.eta = *eta;
    }
    return inc;
  }
  throw ConfigError("unknown strategy '" + s + "' (expected caliper, fixed:N or incremental[:eta])");
}

inline ExperimentConfig parse_config(const json& j) {
  using detail::check_keys;
  using detail::read;
  ExperimentConfig cfg;
  cfg.raw = j;
  check_keys(j, {"stream", "detector", "strategies", "embedding", "learner", "caliper", "window_cap", "min_retrain",
                 "seeds", "out", "workers"},
             "config");

  if (j.contains("stream")) {
    const auto& s = j.at("stream");
    check_keys(s, {"system", "dim", "params", "csv", "warmup_fraction", "dt", "warmup_len", "online_len",
                   "noise_sigma", "burn_in", "init_scale", "substeps", "schedule"},
               "stream");
    auto& src = cfg.source;
    if (s.contains("csv")) src.csv = fs::path(s.at("csv").get<std::string>());
    read(s, "warmup_fraction", src.warmup_fraction, "stream");
    read(s, "system", src.system, "stream");
    read(s, "dim", src.dim, "stream");
    read(s, "params", src.params, "stream");
    read(s, "dt", src.spec.dt, "stream");
    read(s, "warmup_len", src.spec.warmup_len, "stream");
    read(s, "online_len", src.spec.online_len, "stream");
    read(s, "noise_sigma", src.spec.noise_sigma, "stream");
    read(s, "burn_in", src.spec.burn_in, "stream");
    read(s, "init_scale", src.spec.init_scale, "stream");
    read(s, "substeps", src.spec.substeps, "stream");
    if (s.contains("schedule")) {
      for (const auto& e : s.at("schedule")) {
        check_keys(e, {"t", "system", "params", "reinitialize"}, "stream.schedule[]");
        DriftEvent ev;
        read(e, "t", ev.time, "stream.schedule[]");
        if (e.contains("system")) ev.system = e.at("system").get<std::string>();
        read(e, "params", ev.params, "stream.schedule[]");
        read(e, "reinitialize", ev.reinitialize, "stream.schedule[]");
        src.schedule.events.push_back(std::move(ev));
      }
    }
    if (!(src.warmup_fraction > 0.0 && src.warmup_fraction < 1.0)) {
      throw ConfigError("stream.warmup_fraction must lie in (0, 1)");
    }
  }

  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    check_keys(d, {"kind", "delta", "alpha", "window_size", "stat_size"}, "detector");
    std::string kind = "adwin";
    read(d, "kind", kind, "detector");
    if (kind == "adwin") {
      cfg.detector.kind = DetectorConfig::Kind::Adwin;
    } else if (kind == "kswin") {
      cfg.detector.kind = DetectorConfig::Kind::Kswin;
    } else {
      throw ConfigError("detector.kind must be 'adwin' or 'kswin', got '" + kind + "'");
    }
    read(d, "delta", cfg.detector.delta, "detector");
    read(d, "alpha", cfg.detector.alpha, "detector");
    read(d, "window_size", cfg.detector.window_size, "detector");
    read(d, "stat_size", cfg.detector.stat_size, "detector");
  }

  if (j.contains("caliper")) {
    const auto& c = j.at("caliper");
    check_keys(c, {"thetas", "C", "ridge_lambda", "persistence", "tau", "monotone_tol"}, "caliper");
    if (c.contains("thetas")) {
      try {
        cfg.caliper.grid = LocalityGrid(c.at("thetas").get<std::vector<double>>());
      } catch (const InvalidInput& e) {
        throw ConfigError(std::string("caliper.thetas: ") + e.what());
      }
    }
    read(c, "C", cfg.caliper.ess_multiplier, "caliper");
    read(c, "ridge_lambda", cfg.caliper.ridge_lambda, "caliper");
    read(c, "persistence", cfg.caliper.persistence, "caliper");
    read(c, "tau", cfg.caliper.tau, "caliper");
    read(c, "monotone_tol", cfg.caliper.monotone_tol, "caliper");
  }

  if (j.contains("embedding")) {
    const auto& e = j.at("embedding");
    check_keys(e, {"past_len", "horizons"}, "embedding");
    read(e, "past_len", cfg.learner.embedding.past_len, "embedding");
    read(e, "horizons", cfg.learner.horizons, "embedding");
    if (cfg.learner.embedding.past_len < 1) throw ConfigError("embedding.past_len must be at least 1");
    for (auto h : cfg.learner.horizons) {
      if (h < 1) throw ConfigError("embedding.horizons entries must be at least 1");
    }
  }

  if (j.contains("learner")) {
    const auto& l = j.at("learner");
    check_keys(l, {"family", "ridge_alphas", "krr_gammas", "krr_alphas", "validation_fraction"}, "learner");
    std::string family = "ridge";
    read(l, "family", family, "learner");
    if (family == "ridge") {
      cfg.learner.learner.family = LearnerFamily::Ridge;
    } else if (family == "krr") {
      cfg.learner.learner.family = LearnerFamily::Krr;
    } else {
      throw ConfigError("learner.family must be 'ridge' or 'krr', got '" + family + "'");
    }
    read(l, "ridge_alphas", cfg.learner.learner.ridge_alphas, "learner");
    read(l, "krr_alphas", cfg.learner.learner.krr_alphas, "learner");
    read(l, "validation_fraction", cfg.learner.learner.validation_fraction, "learner");
    if (l.contains("krr_gammas")) {
      cfg.learner.learner.krr_gammas.clear();
      for (const auto& g : l.at("krr_gammas")) {
        if (g.is_string() && g.get<std::string>() == "median") {
          cfg.learner.learner.krr_gammas.push_back(kMedianGamma);
        } else if (g.is_number() && g.get<double>() > 0.0) {
          cfg.learner.learner.krr_gammas.push_back(g.get<double>());
        } else {
          throw ConfigError("learner.krr_gammas entries must be positive numbers or \"median\"");
        }
      }
    }
  }

  detail::read(j, "window_cap", cfg.episode.window_cap, "config");
  detail::read(j, "min_retrain", cfg.episode.min_retrain, "config");
  detail::read(j, "seeds", cfg.seeds, "config");
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();

  std::vector<std::string> names{"caliper"};
  detail::read(j, "strategies", names, "config");
  for (const auto& n : names) cfg.strategies.push_back(parse_strategy(n, cfg.caliper));

  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Streams

inline Stream make_stream(const StreamSource& src, std::uint64_t seed) {
  if (src.csv) {
    Stream s;
    s.samples = ingest_csv(*src.csv);
    s.warmup_len = static_cast<std::size_t>(std::floor(src.warmup_fraction * static_cast<double>(s.samples.size())));
    return s;
  }
  OdeSystem sys = builtin_system(src.system, src.dim);
  if (!src.params.empty()) sys = with_params(std::move(sys), src.params);
  StreamSpec spec = src.spec;
  spec.seed = seed;
  return generate_stream(spec, sys, src.schedule);
}

// ---------------------------------------------------------------------------
// Report files

inline void write_steps_csv(const fs::path& path, const EpisodeReport& r, Eigen::Index d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,version,alarm,decision,window_n,retrain";
  for (Eigen::Index j = 0; j < d; ++j) out << ",truth_x" << j;
  for (auto h : r.horizons) {
    for (Eigen::Index j = 0; j < d; ++j) out << ",pred_h" << h << "_x" << j;
    out << ",sqerr_h" << h << ",abserr_h" << h;
  }
  out << '\n';
  for (const auto& s : r.steps) {
    out << s.t << ',' << s.model_version << ',' << (s.alarm ? 1 : 0) << ',' << s.decision << ',' << s.window_n << ','
        << (s.retrain ? 1 : 0);
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(s.truth(j));
    for (std::size_t k = 0; k < r.horizons.size(); ++k) {
      for (Eigen::Index j = 0; j < d; ++j) {
        out << ',';
        if (s.prediction[k].size() == d) out << format_double(s.prediction[k](j));
      }
      out << ',' << format_double(s.sq_err[k]) << ',' << format_double(s.abs_err[k]);
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

inline void write_timing_csv(const fs::path& path, const EpisodeReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,step_ns,retrain\n";
  for (const auto& s : r.steps) out << s.t << ',' << s.step_ns << ',' << (s.retrain ? 1 : 0) << '\n';
}

inline json metrics_json(const std::vector<HorizonMetrics>& ms) {
  json a = json::array();
  for (const auto& m : ms) {
    a.push_back({{"h", m.horizon},
                 {"mse", std::isnan(m.mse) ? json(nullptr) : json(m.mse)},
                 {"mae", std::isnan(m.mae) ? json(nullptr) : json(m.mae)},
                 {"count", m.count}});
  }
  return a;
}

inline json summary_json(const EpisodeReport& r, std::uint64_t seed, const std::vector<std::uint64_t>& drift_times) {
  json j;
  j["strategy"] = r.strategy;
  j["seed"] = seed;
  j["horizons"] = r.horizons;
  j["drift_times"] = drift_times;
  j["steps"] = r.steps.size();
  j["pooled"] = metrics_json(r.summary.pooled);
  j["post_drift"] = metrics_json(r.summary.post_drift);
  json segs = json::array();
  for (const auto& s : r.summary.segments) segs.push_back({{"begin", s.begin}, {"end", s.end}, {"metrics", metrics_json(s.horizons)}});
  j["segments"] = segs;
  json rt = json::array();
  for (const auto& x : r.retrains) {
    rt.push_back({{"alarm_t", x.alarm_t}, {"trigger_t", x.trigger_t}, {"window_size", x.window_size}, {"forced", x.forced}});
  }
  j["retrains"] = rt;
  j["alarms"] = r.summary.alarms;
  j["timing"] = {{"mean_step_ns", r.summary.mean_step_ns},
                 {"median_step_ns", r.summary.median_step_ns},
                 {"median_step_ns_non_retrain", r.summary.median_step_ns_non_retrain}};
  return j;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

// Reads steps.csv + timing.csv back into step records (errors and timing
// only, which is all summarize() consumes).
inline std::vector<StepRecord> read_step_records(const fs::path& run_dir, const std::vector<std::size_t>& horizons) {
  std::ifstream steps(run_dir / "steps.csv");
  std::ifstream timing(run_dir / "timing.csv");
  if (!steps || !timing) throw Error("missing steps.csv or timing.csv in " + run_dir.string());
  std::string line;
  std::getline(steps, line);
  const auto header = split_csv_line(line);
  std::vector<std::size_t> sq_col;
  std::vector<std::size_t> abs_col;
  for (auto h : horizons) {
    const auto sq = std::find(header.begin(), header.end(), "sqerr_h" + std::to_string(h));
    const auto ab = std::find(header.begin(), header.end(), "abserr_h" + std::to_string(h));
    if (sq == header.end() || ab == header.end()) throw Error("steps.csv lacks error columns for horizon " + std::to_string(h));
    sq_col.push_back(static_cast<std::size_t>(sq - header.begin()));
    abs_col.push_back(static_cast<std::size_t>(ab - header.begin()));
  }
  std::getline(timing, line);
  std::vector<StepRecord> out;
  std::string tline;
  while (std::getline(steps, line) && std::getline(timing, tline)) {
    const auto c = split_csv_line(line);
    const auto tc = split_csv_line(tline);
    if (c.size() != header.size() || tc.size() != 3) throw Error("malformed row in " + run_dir.string());
    StepRecord r;
    r.t = static_cast<std::uint64_t>(std::stoull(c[0]));
    r.model_version = std::stoi(c[1]);
    r.alarm = c[2] == "1";
    r.decision = c[3];
    r.window_n = std::stoull(c[4]);
    r.retrain = c[5] == "1";
    r.step_ns = std::stoll(tc[1]);
    for (std::size_t k = 0; k < horizons.size(); ++k) {
      r.sq_err.push_back(parse_double(c[sq_col[k]]).value_or(std::numeric_limits<double>::quiet_NaN()));
      r.abs_err.push_back(parse_double(c[abs_col[k]]).value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

struct RunResult {
  std::string strategy;
  std::uint64_t seed = 0;
  fs::path dir;
  EpisodeReport report;
};

// Runs every (strategy x seed) pair; each seed's stream is generated once
// and shared by all strategies. Jobs are independent and may run on
// `workers` threads.
inline std::vector<RunResult> run_experiment(const ExperimentConfig& cfg, std::uint64_t seed_offset = 0,
                                             unsigned workers = 1, bool write_files = true) {
  cfg.validate();
  std::vector<Stream> streams;
  for (auto seed : cfg.seeds) streams.push_back(make_stream(cfg.source, seed + seed_offset));

  struct Job {
    std::size_t strategy;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) jobs.push_back({s, k});
  }
  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& job = jobs[i];
      const auto& strat = cfg.strategies[job.strategy];
      const std::uint64_t seed = cfg.seeds[job.seed] + seed_offset;
      try {
        EpisodeOptions opts = cfg.episode;
        opts.detector_seed = seed;
        RunResult r;
        r.strategy = strategy_name(strat);
        r.seed = seed;
        r.dir = cfg.out_dir / r.strategy / std::to_string(seed);
        r.report = run_adaptation(streams[job.seed], cfg.detector, strat, cfg.learner, opts);
        if (write_files) {
          fs::create_directories(r.dir);
          write_steps_csv(r.dir / "steps.csv", r.report, streams[job.seed].dim());
          write_timing_csv(r.dir / "timing.csv", r.report);
          write_json(r.dir / "summary.json", summary_json(r.report, seed, streams[job.seed].drift_times));
        }
        results[i] = std::move(r);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          try {
            throw Error("strategy " + strategy_name(strat) + ", seed " + std::to_string(seed) + ": " + e.what());
          } catch (...) {
            failure = std::current_exception();
          }
        }
      }
    }
  };
  workers = std::max(1u, workers);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  if (write_files) {
    json manifest;
    manifest["config"] = cfg.raw;
    manifest["config_hash"] = fnv1a(cfg.raw.dump());
    manifest["seed_offset"] = seed_offset;
    json runs = json::array();
    for (const auto& r : results) {
      runs.push_back({{"strategy", r.strategy}, {"seed", r.seed}, {"dir", fs::relative(r.dir, cfg.out_dir).string()}});
    }
    manifest["runs"] = runs;
    fs::create_directories(cfg.out_dir);
    write_json(cfg.out_dir / "manifest.json", manifest);
  }
  return results;
}

// Streams for every configured seed as CSV files plus a sidecar listing
// warm-up length and drift times.
inline std::vector<fs::path> generate_streams(const ExperimentConfig& cfg, std::uint64_t seed_offset = 0) {
  cfg.validate();
  if (cfg.source.csv) throw ConfigError("generate needs a synthetic stream source, not a CSV file");
  fs::create_directories(cfg.out_dir);
  std::vector<fs::path> written;
  json meta = json::array();
  for (auto seed : cfg.seeds) {
    const auto s = make_stream(cfg.source, seed + seed_offset);
    const auto path = cfg.out_dir / ("stream_seed" + std::to_string(seed + seed_offset) + ".csv");
    write_stream_csv(path, s.samples);
    meta.push_back({{"file", path.filename().string()},
                    {"seed", seed + seed_offset},
                    {"rows", s.size()},
                    {"warmup_len", s.warmup_len},
                    {"drift_times", s.drift_times}});
    written.push_back(path);
  }
  write_json(cfg.out_dir / "streams.json", meta);
  return written;
}

// Mean over horizons of the pooled online MAE.
inline double run_mae(const EpisodeReport& r) {
  double s = 0.0;
  for (const auto& m : r.summary.pooled) s += m.mae;
  return s / static_cast<double>(r.summary.pooled.size());
}

enum class SweepParam { EssMultiplier, ThetaMax };

struct SweepRow {
  double value = 0.0;
  std::vector<double> per_seed_mae;
  double mean_mae = 0.0;
};

// One caliper-only experiment per value; writes <out>/sweep_<param>/<value>/...
// and <out>/sweep_<param>.csv.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, SweepParam param, const std::vector<double>& values,
                                       std::uint64_t seed_offset = 0, unsigned workers = 1, bool write_files = true) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const std::string pname = param == SweepParam::EssMultiplier ? "C" : "theta_max";
  std::vector<SweepRow> rows;
  for (double v : values) {
    ExperimentConfig cfg = base;
    try {
      if (param == SweepParam::EssMultiplier) {
        cfg.caliper.ess_multiplier = v;
      } else {
        cfg.caliper.grid = cfg.caliper.grid.with_theta_max(v);
      }
      cfg.caliper.validate();
    } catch (const InvalidInput& e) {
      throw ConfigError("sweep value " + format_double(v) + ": " + e.what());
    }
    cfg.strategies = {strategy::Caliper{cfg.caliper}};
    cfg.out_dir = base.out_dir / ("sweep_" + pname) / format_double(v);
    cfg.raw["sweep"] = {{"param", pname}, {"value", v}};
    const auto results = run_experiment(cfg, seed_offset, workers, write_files);
    SweepRow row;
    row.value = v;
    double s = 0.0;
    for (const auto& r : results) {
      row.per_seed_mae.push_back(run_mae(r.report));
      s += row.per_seed_mae.back();
    }
    row.mean_mae = s / static_cast<double>(results.size());
    rows.push_back(std::move(row));
  }
  if (write_files) {
    fs::create_directories(base.out_dir);
    std::ofstream out(base.out_dir / ("sweep_" + pname + ".csv"), std::ios::binary);
    out << "param,value,mean_mae";
    for (auto seed : base.seeds) out << ",mae_seed" << seed + seed_offset;
    out << '\n';
    for (const auto& r : rows) {
      out << pname << ',' << format_double(r.value) << ',' << format_double(r.mean_mae);
      for (double m : r.per_seed_mae) out << ',' << format_double(m);
      out << '\n';
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyResult {
  std::size_t runs_checked = 0;
  std::vector<std::string> mismatches;
  [[nodiscard]] bool ok() const { return mismatches.empty(); }
};

namespace detail {
inline bool same_number(const json& stored, double recomputed) {
  if (stored.is_null()) return std::isnan(recomputed);
  return stored.is_number() && stored.get<double>() == recomputed;
}

inline void compare_metrics(const json& stored, const std::vector<HorizonMetrics>& fresh, const std::string& what,
                            std::vector<std::string>& bad) {
  if (!stored.is_array() || stored.size() != fresh.size()) {
    bad.push_back(what + ": horizon count differs");
    return;
  }
  for (std::size_t k = 0; k < fresh.size(); ++k) {
    const auto& s = stored[k];
    if (!same_number(s.at("mse"), fresh[k].mse)) bad.push_back(what + " h=" + std::to_string(fresh[k].horizon) + ": mse");
    if (!same_number(s.at("mae"), fresh[k].mae)) bad.push_back(what + " h=" + std::to_string(fresh[k].horizon) + ": mae");
    if (s.at("count").get<std::size_t>() != fresh[k].count) bad.push_back(what + ": count");
  }
}
}  // namespace detail

// Recomputes every summary.json listed in the manifest from its per-step
// files and demands exact equality.
inline VerifyResult verify_reports(const fs::path& out_dir) {
  VerifyResult res;
  const auto manifest = read_json(out_dir / "manifest.json");
  for (const auto& run : manifest.at("runs")) {
    const fs::path dir = out_dir / run.at("dir").get<std::string>();
    const auto summary = read_json(dir / "summary.json");
    const auto horizons = summary.at("horizons").get<std::vector<std::size_t>>();
    const auto drift = summary.at("drift_times").get<std::vector<std::uint64_t>>();
    const auto steps = read_step_records(dir, horizons);
    const auto fresh = summarize(steps, horizons, drift);
    const std::string tag = dir.string();
    std::vector<std::string> bad;
    if (summary.at("steps").get<std::size_t>() != steps.size()) bad.push_back("step count");
    detail::compare_metrics(summary.at("pooled"), fresh.pooled, "pooled", bad);
    detail::compare_metrics(summary.at("post_drift"), fresh.post_drift, "post_drift", bad);
    const auto& segs = summary.at("segments");
    if (segs.size() != fresh.segments.size()) {
      bad.push_back("segment count");
    } else {
      for (std::size_t i = 0; i < segs.size(); ++i) {
        detail::compare_metrics(segs[i].at("metrics"), fresh.segments[i].horizons, "segment " + std::to_string(i), bad);
      }
    }
    if (summary.at("alarms").get<std::size_t>() != fresh.alarms) bad.push_back("alarm count");
    if (summary.at("retrains").size() != fresh.retrains) bad.push_back("retrain count");
    const auto& timing = summary.at("timing");
    if (!detail::same_number(timing.at("mean_step_ns"), fresh.mean_step_ns)) bad.push_back("mean_step_ns");
    if (!detail::same_number(timing.at("median_step_ns"), fresh.median_step_ns)) bad.push_back("median_step_ns");
    if (!detail::same_number(timing.at("median_step_ns_non_retrain"), fresh.median_step_ns_non_retrain)) {
      bad.push_back("median_step_ns_non_retrain");
    }
    for (auto& b : bad) res.mismatches.push_back(tag + ": " + b);
    ++res.runs_checked;
  }
  return res;
}

}  // namespace caliper
