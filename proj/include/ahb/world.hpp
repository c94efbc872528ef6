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

// The 1 kHz world. Side 0 owns the goal at x = 0, side 1 the goal at
// x = length. Every agent works in its own frame, in which its goal sits at
// x = 0; side 1's frame is the world rotated by pi about the table center.

#ifndef AHB_WORLD_HPP_
#define AHB_WORLD_HPP_

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ahb/arm_tracking.hpp"
#include "ahb/common.hpp"
#include "ahb/interpolation.hpp"
#include "ahb/kinematics.hpp"
#include "ahb/puck_physics.hpp"
#include "ahb/safety.hpp"
#include "ahb/table.hpp"

namespace ahb {

// Mallet swept along y in front of the far goal; stands in for an opponent
// in single-arm episodes.
struct ScriptedOpponent {
  bool enabled = false;
  double x_offset = 0.2;
  double amplitude = 0.25;
  double period = 2.0;
};

struct WorldConfig {
  TableGeometry geom;
  PuckParams puck;
  RobotSpec robot = iiwa14_spec();
  ArmTrackingModel tracking;
  // 1: only side 0 has an arm (qualifying tasks); 2: match play.
  int num_arms = 2;
  ScriptedOpponent opponent;
  bool faults_enabled = false;
  double fault_limit = 15.0;
  // Goal: serve to the side that conceded. Otherwise the puck stays parked
  // on the goal line.
  bool reset_after_goal = false;
  bool reset_after_fault = true;
  bool height_correction = false;

  void validate() const {
    geom.validate();
    puck.validate();
    robot.validate();
    tracking.validate();
    if (num_arms != 1 && num_arms != 2)
      throw ConfigError("world: num_arms must be 1 or 2");
    if (!(fault_limit > 0.0)) throw ConfigError("world: fault_limit <= 0");
  }
};

struct WorldState {
  PuckState puck;
  std::array<ArmState, 2> arms;
  std::array<Setpoint, 2> last_setpoint;
  std::int64_t time_ms = 0;
  // Seconds the puck has dwelt on each side; counted in whole milliseconds.
  std::array<double, 2> fault_timer = {0.0, 0.0};
  std::array<std::int64_t, 2> dwell_ms = {0, 0};
  std::vector<Event> pending_events;
  std::array<Vec2, 2> contact_normals = {Vec2::UnitX(), Vec2::UnitX()};
  bool puck_parked = false;
};

inline Vec2 to_side_frame(int side, const Vec2& p, double length) {
  return side == 0 ? p : Vec2(length - p.x(), -p.y());
}
inline Vec2 vel_to_side_frame(int side, const Vec2& v) {
  return side == 0 ? v : Vec2(-v.x(), -v.y());
}
inline PuckState puck_to_side_frame(int side, const PuckState& p,
                                    double length) {
  if (side == 0) return p;
  PuckState m = p;
  m.x = length - p.x;
  m.y = -p.y;
  m.vx = -p.vx;
  m.vy = -p.vy;
  m.theta = wrap_angle(p.theta + kPi);
  return m;
}

struct EeState {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
};

// End-effector position and velocity in the arm's own frame.
inline EeState ee_state(const RobotSpec& spec, const JointVector& q,
                        const JointVector& qdot) {
  const detail::ChainState c = detail::evaluate_chain(spec, q);
  EeState s;
  s.pos = c.ee;
  for (int i = 0; i < kNumJoints; ++i)
    s.vel += c.joint_axis[i].cross(c.ee - c.joint_pos[i]) * qdot[i];
  return s;
}

inline MalletState scripted_mallet(const ScriptedOpponent& o,
                                   const TableGeometry& g, double t) {
  const double w = 2.0 * kPi / o.period;
  MalletState m;
  m.pos = Vec2(g.length - o.x_offset, o.amplitude * std::sin(w * t));
  m.vel = Vec2(0.0, o.amplitude * w * std::cos(w * t));
  m.active = true;
  return m;
}

inline std::array<MalletState, 2> world_mallets(const WorldState& w,
                                                const WorldConfig& cfg) {
  std::array<MalletState, 2> m;
  for (int side = 0; side < cfg.num_arms; ++side) {
    const EeState e = ee_state(cfg.robot, w.arms[side].q, w.arms[side].qdot);
    m[side].pos = to_side_frame(side, e.pos.head<2>(), cfg.geom.length);
    m[side].vel = vel_to_side_frame(side, e.vel.head<2>());
    m[side].active = true;
  }
  if (cfg.num_arms == 1 && cfg.opponent.enabled)
    m[1] = scripted_mallet(cfg.opponent, cfg.geom, w.time_ms * kSimDt);
  return m;
}

inline WorldState make_world(const WorldConfig& cfg, const PuckState& puck) {
  WorldState w;
  w.puck = puck;
  for (int side = 0; side < 2; ++side) {
    w.arms[side].q = cfg.robot.q_init;
    w.arms[side].qdot.setZero();
    w.last_setpoint[side].q = cfg.robot.q_init;
  }
  return w;
}

// Puck at rest on the given side, a quarter table from its goal.
inline PuckState serve_position(int side, const TableGeometry& g, Rng& rng) {
  PuckState p;
  p.x = side == 0 ? 0.25 * g.length : 0.75 * g.length;
  p.y = rng.uniform(-0.2, 0.2);
  return p;
}

struct MatchStep {
  WorldState world;
  std::vector<Event> events;
  // The 20 setpoints each arm actually tracked during the tick.
  std::array<std::vector<Setpoint>, 2> setpoints;
  std::array<bool, 2> unsafe = {false, false};
};

// Advances one 20 ms control tick. commands[i] may be null for an absent or
// idle arm, which then holds its last setpoint.
inline MatchStep step_match(const WorldState& world,
                            const std::array<const Command*, 2>& commands,
                            const WorldConfig& cfg, Rng& rng) {
  MatchStep out;
  out.world = world;
  WorldState& w = out.world;
  std::vector<Event>& ev = out.events;
  const TableGeometry& g = cfg.geom;

  for (int side = 0; side < 2; ++side) {
    Setpoint hold = w.last_setpoint[side];
    hold.qdot.setZero();
    hold.qddot.setZero();
    std::vector<Setpoint>& sp = out.setpoints[side];
    if (side >= cfg.num_arms || commands[side] == nullptr) {
      sp.assign(kSubsteps, hold);
      continue;
    }
    Command cmd = *commands[side];
    try {
      if (cfg.height_correction) {
        const HeightCorrection hc =
            safety_height_correct(cfg.robot, w.arms[side].q, cmd, g);
        cmd = hc.cmd;
        out.unsafe[side] = hc.unsafe;
      }
      sp = interpolate_command(w.last_setpoint[side], cmd);
    } catch (const CommandError&) {
      ev.push_back({EventType::kCommandFault, side, 0.0, w.time_ms});
      sp.assign(kSubsteps, hold);
    }
  }

  for (int k = 0; k < kSubsteps; ++k) {
    for (int side = 0; side < cfg.num_arms; ++side) {
      const Setpoint& s = out.setpoints[side][k];
      w.arms[side] = step_arm(cfg.tracking, w.arms[side].q, w.arms[side].qdot,
                              s.q, s.qdot, kSimDt);
    }
    w.time_ms += 1;
    if (w.puck_parked) continue;

    const std::array<MalletState, 2> mallets = world_mallets(w, cfg);
    PuckStepResult r = step_puck(w.puck, mallets, cfg.puck, g, kSimDt, &rng,
                                 w.time_ms, w.contact_normals);
    w.puck = r.puck;
    w.contact_normals = r.contact_normals;
    ev.insert(ev.end(), r.events.begin(), r.events.end());
    if (r.scored) {
      const int conceded = r.events.back().side;
      w.fault_timer = {0.0, 0.0};
      w.dwell_ms = {0, 0};
      if (cfg.reset_after_goal) {
        w.puck = serve_position(conceded, g, rng);
      } else {
        w.puck_parked = true;
      }
      continue;
    }

    if (cfg.faults_enabled) {
      const int side = w.puck.x < g.center_x() ? 0 : 1;
      const auto limit_ms = std::llround(cfg.fault_limit / kSimDt);
      w.dwell_ms[1 - side] = 0;
      w.dwell_ms[side] += 1;
      if (w.dwell_ms[side] > limit_ms) {
        ev.push_back({EventType::kFault, side, w.dwell_ms[side] * kSimDt,
                      w.time_ms});
        w.dwell_ms[side] = 0;
        if (cfg.reset_after_fault) w.puck = serve_position(1 - side, g, rng);
      }
    }
  }
  for (int side = 0; side < 2; ++side) {
    w.last_setpoint[side] = out.setpoints[side].back();
    w.fault_timer[side] = w.dwell_ms[side] * kSimDt;
  }
  w.pending_events = ev;
  return out;
}

namespace detail {

inline void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= 0x100000001b3ULL;
  }
}
inline void fnv_mix(std::uint64_t& h, double d) {
  fnv_mix(h, std::bit_cast<std::uint64_t>(d));
}

}  // namespace detail

// FNV-1a over the exact bit patterns of the state.
inline std::uint64_t hash_world(const WorldState& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const PuckState& p = w.puck;
  for (double d : {p.x, p.y, p.theta, p.vx, p.vy, p.omega}) detail::fnv_mix(h, d);
  for (int s = 0; s < 2; ++s) {
    for (int i = 0; i < kNumJoints; ++i) {
      detail::fnv_mix(h, w.arms[s].q[i]);
      detail::fnv_mix(h, w.arms[s].qdot[i]);
    }
    detail::fnv_mix(h, static_cast<std::uint64_t>(w.dwell_ms[s]));
  }
  detail::fnv_mix(h, static_cast<std::uint64_t>(w.time_ms));
  return h;
}

// What an agent on `side` sees, before any observation noise.
struct Observation {
  PuckState puck;
  JointVector q = JointVector::Zero();
  JointVector qdot = JointVector::Zero();
  Vec2 opponent_mallet = Vec2::Zero();
  std::int64_t time_ms = 0;
};

inline Observation observe(const WorldState& w, const WorldConfig& cfg,
                           int side) {
  Observation o;
  o.puck = puck_to_side_frame(side, w.puck, cfg.geom.length);
  o.q = w.arms[side].q;
  o.qdot = w.arms[side].qdot;
  o.time_ms = w.time_ms;
  const std::array<MalletState, 2> m = world_mallets(w, cfg);
  if (m[1 - side].active)
    o.opponent_mallet = to_side_frame(side, m[1 - side].pos, cfg.geom.length);
  return o;
}

}  // namespace ahb

#endif  // AHB_WORLD_HPP_
