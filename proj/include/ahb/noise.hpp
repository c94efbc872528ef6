// Copyright 2026 The Air Hockey Bench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Sim-to-sim gap factors: observation noise, puck tracking loss and arm /
// puck model mismatch.

#ifndef AHB_NOISE_HPP_
#define AHB_NOISE_HPP_

#include <algorithm>
#include <cmath>

#include "ahb/arm_tracking.hpp"
#include "ahb/common.hpp"
#include "ahb/puck_physics.hpp"
#include "ahb/world.hpp"

namespace ahb {

struct NoiseConfig {
  bool noise_enabled = false;
  double puck_pos_std = 0.003;
  double puck_angle_std = 0.01;
  double joint_pos_std = 0.0;
  double joint_vel_std = 0.0;

  // Tracking loss as a two-state Markov chain: per-step entry probability
  // and mean time spent lost.
  bool loss_enabled = false;
  double loss_enter_prob = 0.005;
  double loss_mean_steps = 10.0;

  void validate() const {
    if (puck_pos_std < 0 || puck_angle_std < 0 || joint_pos_std < 0 ||
        joint_vel_std < 0)
      throw ConfigError("noise: standard deviations must be >= 0");
    if (loss_enter_prob < 0 || loss_enter_prob > 1)
      throw ConfigError("noise: loss_enter_prob must lie in [0, 1]");
    if (!(loss_mean_steps >= 1.0))
      throw ConfigError("noise: loss_mean_steps must be >= 1");
  }
};

// Per-agent state of the observation channel.
struct ObservationChannel {
  int loss_remaining = 0;
  Vec2 frozen = Vec2::Zero();
  double frozen_theta = 0.0;
  bool lost() const { return loss_remaining > 0; }
};

inline Observation corrupt_observation(const Observation& obs,
                                       const NoiseConfig& cfg,
                                       ObservationChannel& ch, Rng& rng) {
  Observation out = obs;
  if (cfg.noise_enabled) {
    if (cfg.puck_pos_std > 0.0) {
      out.puck.x += rng.normal(0.0, cfg.puck_pos_std);
      out.puck.y += rng.normal(0.0, cfg.puck_pos_std);
    }
    if (cfg.puck_angle_std > 0.0)
      out.puck.theta = wrap_angle(out.puck.theta + rng.normal(0.0, cfg.puck_angle_std));
    for (int i = 0; i < kNumJoints; ++i) {
      if (cfg.joint_pos_std > 0.0) out.q[i] += rng.normal(0.0, cfg.joint_pos_std);
      if (cfg.joint_vel_std > 0.0) out.qdot[i] += rng.normal(0.0, cfg.joint_vel_std);
    }
  }
  if (cfg.loss_enabled) {
    if (!ch.lost() && rng.bernoulli(cfg.loss_enter_prob)) {
      // Geometric duration with the configured mean, at least one step.
      const double p_exit = 1.0 / cfg.loss_mean_steps;
      int d = 1;
      if (p_exit < 1.0) {
        const double u = std::max(rng.uniform(), 1e-300);
        d += static_cast<int>(std::floor(std::log(u) / std::log(1.0 - p_exit)));
      }
      ch.loss_remaining = d;
      ch.frozen = out.puck.pos();
      ch.frozen_theta = out.puck.theta;
    }
    if (ch.lost()) {
      --ch.loss_remaining;
      out.puck.set_pos(ch.frozen);
      out.puck.theta = ch.frozen_theta;
      out.puck.vx = out.puck.vy = out.puck.omega = 0.0;
    }
  }
  return out;
}

struct MismatchConfig {
  bool enabled = false;
  double tau = 0.02;
  double gain_scale = 0.98;
  double friction_scale = 1.0;
  double restitution_scale = 1.0;
  // Relative standard deviation of a seeded random perturbation on top.
  double jitter = 0.0;
};

struct EnvParams {
  ArmTrackingModel tracking;
  PuckParams puck;
};

inline EnvParams perturb_model(const EnvParams& p, const MismatchConfig& cfg,
                               Rng& rng) {
  if (!cfg.enabled) return p;
  EnvParams out = p;
  const auto jit = [&]() {
    return cfg.jitter > 0.0 ? std::max(0.05, 1.0 + rng.normal(0.0, cfg.jitter))
                            : 1.0;
  };
  out.tracking.mode = TrackingMode::kFirstOrderLag;
  out.tracking.tau = cfg.tau * jit();
  out.tracking.gain_scale = cfg.gain_scale * jit();
  out.puck.slide_friction = p.puck.slide_friction * cfg.friction_scale * jit();
  const double rs = cfg.restitution_scale * jit();
  out.puck.wall_restitution = std::clamp(p.puck.wall_restitution * rs, 1e-3, 1.0);
  out.puck.mallet_restitution =
      std::clamp(p.puck.mallet_restitution * rs, 1e-3, 1.0);
  return out;
}

}  // namespace ahb

#endif  // AHB_NOISE_HPP_
