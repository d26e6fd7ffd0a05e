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

// caliper: experiment CLI.
//   caliper generate --config cfg.json [--out DIR] [--seed-offset K]
//   caliper run      --config cfg.json [--out DIR] [--workers N] [--seed-offset K]
//   caliper sweep    --config cfg.json --param C|theta_max --values 2,3,4 [...]
//   caliper verify   --out DIR
// Exit status: 0 success, 1 configuration error, 2 runtime error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "caliper/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  unsigned workers = 1;
  std::uint64_t seed_offset = 0;
};

caliper::ExperimentConfig load(const CommonOptions& opts) {
  auto cfg = caliper::load_config(opts.config);
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  return cfg;
}

int cmd_generate(const CommonOptions& opts) {
  const auto cfg = load(opts);
  for (const auto& p : caliper::generate_streams(cfg, opts.seed_offset)) std::cout << p.string() << '\n';
  return 0;
}

int cmd_run(const CommonOptions& opts) {
  const auto cfg = load(opts);
  const auto results = caliper::run_experiment(cfg, opts.seed_offset, opts.workers);
  std::cout << "strategy,seed,retrains,alarms";
  for (auto h : cfg.learner.horizons) std::cout << ",mse_h" << h << ",mae_h" << h;
  std::cout << '\n';
  for (const auto& r : results) {
    std::cout << r.strategy << ',' << r.seed << ',' << r.report.summary.retrains << ',' << r.report.summary.alarms;
    for (const auto& m : r.report.summary.pooled) {
      std::cout << ',' << caliper::format_double(m.mse) << ',' << caliper::format_double(m.mae);
    }
    std::cout << '\n';
  }
  return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param, const std::vector<double>& values) {
  const auto cfg = load(opts);
  caliper::SweepParam p{};
  if (param == "C") {
    p = caliper::SweepParam::EssMultiplier;
  } else if (param == "theta_max") {
    p = caliper::SweepParam::ThetaMax;
  } else {
    throw caliper::ConfigError("--param must be C or theta_max, got '" + param + "'");
  }
  const auto rows = caliper::run_sweep(cfg, p, values, opts.seed_offset, opts.workers);
  std::cout << "param,value,mean_mae\n";
  for (const auto& r : rows) {
    std::cout << param << ',' << caliper::format_double(r.value) << ',' << caliper::format_double(r.mean_mae) << '\n';
  }
  return 0;
}

int cmd_verify(const CommonOptions& opts) {
  if (opts.out.empty()) throw caliper::ConfigError("verify needs --out DIR");
  const auto res = caliper::verify_reports(opts.out);
  for (const auto& m : res.mismatches) std::cerr << "mismatch: " << m << '\n';
  std::cout << res.runs_checked << " runs checked, " << res.mismatches.size() << " mismatches\n";
  return res.ok() ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CALIPER post-drift retraining-window experiments"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string param;
  std::vector<double> values;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opts.config, "JSON experiment configuration");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out, "output directory (overrides the config)");
    sub->add_option("--workers", opts.workers, "parallel (strategy x seed) runs")->check(CLI::PositiveNumber);
    sub->add_option("--seed-offset", opts.seed_offset, "added to every configured seed");
  };
  auto* gen = app.add_subcommand("generate", "write synthetic streams as CSV");
  add_common(gen, true);
  auto* run = app.add_subcommand("run", "run every strategy on every seed");
  add_common(run, true);
  auto* sweep = app.add_subcommand("sweep", "sweep one CALIPER hyperparameter");
  add_common(sweep, true);
  sweep->add_option("--param", param, "C or theta_max")->required();
  sweep->add_option("--values", values, "comma-separated values")->delimiter(',');
  auto* verify = app.add_subcommand("verify", "recompute every summary from its per-step files");
  add_common(verify, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(opts);
    if (*run) return cmd_run(opts);
    if (*sweep) return cmd_sweep(opts, param, values);
    return cmd_verify(opts);
  } catch (const caliper::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
