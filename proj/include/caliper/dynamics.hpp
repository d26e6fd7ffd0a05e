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

// Synthetic streams sampled from ODE flows, with sudden drift injected by
// scheduled parameter or system switches.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "caliper/core.hpp"

namespace caliper {

struct OdeSystem {
  using Rhs = std::function<Vector(const Vector&, const std::vector<double>&)>;

  std::string name;
  Eigen::Index dim = 0;
  std::vector<double> params;
  Rhs rhs;

  [[nodiscard]] Vector derivative(const Vector& x) const { return rhs(x, params); }
};

inline Vector rk4_step(const OdeSystem& sys, const Vector& x, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("rk4_step needs dt > 0");
  const Vector k1 = sys.derivative(x);
  const Vector k2 = sys.derivative(x + 0.5 * dt * k1);
  const Vector k3 = sys.derivative(x + 0.5 * dt * k2);
  const Vector k4 = sys.derivative(x + dt * k3);
  Vector next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw Divergence("system '" + sys.name + "' diverged during integration");
  return next;
}

// Canonical parameters:
//   lorenz (sigma, rho, beta) = (10, 28, 8/3)
//   rossler (a, b, c) = (0.2, 0.2, 5.7)
//   thomas (b) = 0.208186
//   halvorsen (a) = 1.89
//   linear_contraction (a, w, c_1..c_d) = (1, 0, 0..0):
//     dx/dt = -a (x - c), plus a rotation at rate w in the first two coordinates
inline OdeSystem builtin_system(const std::string& name, Eigen::Index dim = 3) {
  OdeSystem s;
  s.name = name;
  if (name == "lorenz") {
    s.dim = 3;
    s.params = {10.0, 28.0, 8.0 / 3.0};
    s.rhs = [](const Vector& x, const std::vector<double>& p) {
      Vector dx(3);
      dx << p[0] * (x(1) - x(0)), x(0) * (p[1] - x(2)) - x(1), x(0) * x(1) - p[2] * x(2);
      return dx;
    };
  } else if (name == "rossler") {
    s.dim = 3;
    s.params = {0.2, 0.2, 5.7};
    s.rhs = [](const Vector& x, const std::vector<double>& p) {
      Vector dx(3);
      dx << -x(1) - x(2), x(0) + p[0] * x(1), p[1] + x(2) * (x(0) - p[2]);
      return dx;
    };
  } else if (name == "thomas") {
    s.dim = 3;
    s.params = {0.208186};
    s.rhs = [](const Vector& x, const std::vector<double>& p) {
      Vector dx(3);
      dx << std::sin(x(1)) - p[0] * x(0), std::sin(x(2)) - p[0] * x(1), std::sin(x(0)) - p[0] * x(2);
      return dx;
    };
  } else if (name == "halvorsen") {
    s.dim = 3;
    s.params = {1.89};
    s.rhs = [](const Vector& x, const std::vector<double>& p) {
      const double a = p[0];
      Vector dx(3);
      dx << -a * x(0) - 4.0 * x(1) - 4.0 * x(2) - x(1) * x(1), -a * x(1) - 4.0 * x(2) - 4.0 * x(0) - x(2) * x(2),
          -a * x(2) - 4.0 * x(0) - 4.0 * x(1) - x(0) * x(0);
      return dx;
    };
  } else if (name == "linear_contraction") {
    if (dim < 1) throw InvalidInput("linear_contraction needs dim >= 1");
    s.dim = dim;
    s.params.assign(static_cast<std::size_t>(dim) + 2, 0.0);
    s.params[0] = 1.0;
    s.rhs = [](const Vector& x, const std::vector<double>& p) {
      const Vector center = Eigen::Map<const Vector>(p.data() + 2, x.size());
      const Vector u = x - center;
      Vector dx = -p[0] * u;
      if (x.size() >= 2 && p[1] != 0.0) {
        dx(0) -= p[1] * u(1);
        dx(1) += p[1] * u(0);
      }
      return dx;
    };
  } else {
    throw InvalidInput("unknown system '" + name + "' (expected lorenz, rossler, thomas, halvorsen, linear_contraction)");
  }
  return s;
}

inline OdeSystem with_params(OdeSystem s, std::vector<double> params) {
  if (params.size() != s.params.size()) {
    throw InvalidInput("system '" + s.name + "' takes " + std::to_string(s.params.size()) + " parameters, got " +
                       std::to_string(params.size()));
  }
  s.params = std::move(params);
  return s;
}

// Regime change applied just before sample `time` is recorded. A parameter
// switch changes the flow from `time` onwards; `reinitialize` restarts the
// state from a fresh random condition (segment concatenation).
struct DriftEvent {
  std::uint64_t time = 0;
  std::optional<std::string> system;
  std::vector<double> params;  // empty keeps the current parameters
  bool reinitialize = false;
};

struct DriftSchedule {
  std::vector<DriftEvent> events;

  void validate() const {
    for (std::size_t i = 1; i < events.size(); ++i) {
      if (!(events[i].time > events[i - 1].time)) throw InvalidInput("drift switch times must be strictly increasing");
    }
  }
};

struct StreamSpec {
  double dt = 0.05;
  std::size_t warmup_len = 1500;
  std::size_t online_len = 6000;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t burn_in = 500;
  double init_scale = 1.0;
  int substeps = 1;

  void validate() const {
    if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
    if (noise_sigma < 0.0) throw InvalidInput("noise_sigma must be non-negative");
    if (substeps < 1) throw InvalidInput("substeps must be at least 1");
    if (warmup_len + online_len == 0) throw InvalidInput("stream must contain at least one sample");
  }
};

struct Stream {
  std::vector<Sample> samples;
  std::size_t warmup_len = 0;
  std::vector<std::uint64_t> drift_times;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] Eigen::Index dim() const { return samples.empty() ? 0 : samples.front().x.size(); }
};

inline Stream generate_stream(const StreamSpec& spec, const OdeSystem& base, const DriftSchedule& schedule) {
  spec.validate();
  schedule.validate();
  // Separate engines so the noise sequence does not depend on the schedule.
  std::seed_seq init_seq{spec.seed, std::uint64_t{1}};
  std::seed_seq noise_seq{spec.seed, std::uint64_t{2}};
  std::mt19937_64 init_rng(init_seq);
  std::mt19937_64 noise_rng(noise_seq);
  std::normal_distribution<double> init_normal(0.0, 1.0);
  std::normal_distribution<double> noise_normal(0.0, 1.0);

  OdeSystem sys = base;
  const double h = spec.dt / spec.substeps;
  auto advance = [&](Vector x) {
    for (int k = 0; k < spec.substeps; ++k) x = rk4_step(sys, x, h);
    return x;
  };
  auto initial_state = [&]() {
    Vector x(sys.dim);
    for (Eigen::Index j = 0; j < sys.dim; ++j) x(j) = spec.init_scale * init_normal(init_rng);
    for (std::size_t i = 0; i < spec.burn_in; ++i) x = advance(std::move(x));
    return x;
  };

  Stream out;
  out.warmup_len = spec.warmup_len;
  const std::size_t total = spec.warmup_len + spec.online_len;
  out.samples.reserve(total);
  Vector state = initial_state();
  std::size_t next_event = 0;
  for (std::size_t t = 0; t < total; ++t) {
    while (next_event < schedule.events.size() && schedule.events[next_event].time == t) {
      const auto& ev = schedule.events[next_event];
      if (ev.system) {
        auto replaced = builtin_system(*ev.system, sys.dim);
        if (replaced.dim != sys.dim) throw InvalidInput("drift cannot change the stream dimension");
        sys = std::move(replaced);
      }
      if (!ev.params.empty()) sys = with_params(std::move(sys), ev.params);
      if (ev.reinitialize) state = initial_state();
      out.drift_times.push_back(t);
      ++next_event;
    }
    Sample s;
    s.t = t;
    s.x = state;
    if (spec.noise_sigma > 0.0) {
      for (Eigen::Index j = 0; j < s.x.size(); ++j) s.x(j) += spec.noise_sigma * noise_normal(noise_rng);
    }
    out.samples.push_back(std::move(s));
    state = advance(std::move(state));
  }
  return out;
}

}  // namespace caliper
