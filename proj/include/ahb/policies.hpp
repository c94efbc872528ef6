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

// Reactive agent machinery: task-space action mapping, the strategy
// ensemble selector, the six-condition skill state machine and the polar
// rule-based controllers with their switcher and home-routing FSM.

#ifndef AHB_POLICIES_HPP_
#define AHB_POLICIES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "ahb/common.hpp"
#include "ahb/interpolation.hpp"
#include "ahb/kinematics.hpp"
#include "ahb/table.hpp"

namespace ahb {

// Puck and end-effector state as seen by one agent, in its own frame (own
// goal line at x = 0, table center at x = length / 2).
struct AgentView {
  Vec2 puck_pos = Vec2::Zero();
  Vec2 puck_vel = Vec2::Zero();
  Vec2 ee_pos = Vec2::Zero();
  Vec2 ee_vel = Vec2::Zero();
};

// ------------------------------------------------------ task-space actions

// Rectangle the normalized action is mapped onto: the own half of the table
// shrunk by the mallet radius and a small safety margin.
struct TaskSpaceBox {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  static TaskSpaceBox from(const TableGeometry& g, double margin = 0.01) {
    TaskSpaceBox b;
    b.x_min = g.l_x + margin;
    b.x_max = g.center_x() - g.mallet_radius;
    b.y_min = g.l_y + margin;
    b.y_max = g.u_y - margin;
    return b;
  }
  Vec2 denormalize(const Vec2& a) const {
    const double ax = std::clamp(a.x(), -1.0, 1.0);
    const double ay = std::clamp(a.y(), -1.0, 1.0);
    return {x_min + 0.5 * (ax + 1.0) * (x_max - x_min),
            y_min + 0.5 * (ay + 1.0) * (y_max - y_min)};
  }
  Vec2 normalize(const Vec2& p) const {
    return {std::clamp(2.0 * (p.x() - x_min) / (x_max - x_min) - 1.0, -1.0, 1.0),
            std::clamp(2.0 * (p.y() - y_min) / (y_max - y_min) - 1.0, -1.0, 1.0)};
  }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x(), x_min, x_max), std::clamp(p.y(), y_min, y_max)};
  }
};

struct TaskSpaceAction {
  Vec2 a = Vec2::Zero();  // normalized target, components in [-1, 1]
};

struct MappedCommand {
  Command cmd;
  JointVector dq = JointVector::Zero();
  bool saturated = false;
  bool degenerate = false;
};

// Moves the end-effector toward a table-plane target within one control
// cycle, with z pinned to the table height.
inline MappedCommand map_target(const Vec2& target, const JointVector& q,
                                const RobotSpec& spec, const TableGeometry& g,
                                const IkOptions& ik = {}) {
  const Vec3 ee = forward_kinematics(spec, q).ee;
  const Vec3 dx(target.x() - ee.x(), target.y() - ee.y(), g.z_table - ee.z());
  const IkStep step = ik_step(spec, q, dx, kControlDt, ik);
  MappedCommand out;
  out.dq = step.dq;
  out.saturated = step.saturated;
  out.degenerate = step.degenerate;
  const ClampedCommand c =
      clamp_joint_command(spec, q + step.dq, step.dq / kControlDt);
  out.cmd = Command::pos_vel(c.q, c.qdot, InterpolationMode::kPosVelLinear);
  return out;
}

inline MappedCommand map_task_action(const TaskSpaceAction& a,
                                     const JointVector& q, const RobotSpec& spec,
                                     const TableGeometry& g,
                                     const IkOptions& ik = {}) {
  return map_target(TaskSpaceBox::from(g).denormalize(a.a), q, spec, g, ik);
}

// Cartesian reset toward the end-effector position of the home posture.
inline MappedCommand reset_to_home(const JointVector& q, const RobotSpec& spec,
                                   const TableGeometry& g) {
  const Vec3 home = forward_kinematics(spec, spec.q_init).ee;
  return map_target(home.head<2>(), q, spec, g);
}

// --------------------------------------------------------- strategy ensemble

enum class Strategy { kBalanced = 0, kAggressive = 1, kDefensive = 2 };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kBalanced: return "balanced";
    case Strategy::kAggressive: return "aggressive";
    case Strategy::kDefensive: return "defensive";
  }
  return "unknown";
}

struct EnsembleMargins {
  double defensive_lead = 2.0;
};

// Trailing -> aggressive; leading by at least the margin -> defensive.
inline Strategy ensemble_select(double score_diff, const EnsembleMargins& m = {}) {
  if (score_diff < 0.0) return Strategy::kAggressive;
  if (score_diff >= m.defensive_lead) return Strategy::kDefensive;
  return Strategy::kBalanced;
}

// ----------------------------------------------- skill state machine (AH)

struct AHConditionParams {
  // Robot base to table center distance used by the printed conditions.
  double x_offset = 1.51;
  // y margin: half the table width minus the mallet radius.
  double m = 1.038 / 2.0 - 0.04815;

  static AHConditionParams from(const TableGeometry& g, double x_offset = 1.51) {
    AHConditionParams p;
    p.x_offset = x_offset;
    p.m = g.half_width() - g.mallet_radius;
    return p;
  }
};

// Quantities in the robot base frame used by the condition table.
struct AHObservation {
  double p_px = 0.0, p_py = 0.0;
  double v_px = 0.0, v_py = 0.0;
  double p_eex = 0.0;
};

// Converts an agent view (table frame) to the robot base frame.
inline AHObservation ah_observation(const AgentView& v, const RobotSpec& spec) {
  const double bx = spec.base_pose.translation.x();
  const double by = spec.base_pose.translation.y();
  AHObservation o;
  o.p_px = v.puck_pos.x() - bx;
  o.p_py = v.puck_pos.y() - by;
  o.v_px = v.puck_vel.x();
  o.v_py = v.puck_vel.y();
  o.p_eex = v.ee_pos.x() - bx;
  return o;
}

inline bool ah_condition(int id, const AHObservation& o,
                         const AHConditionParams& c) {
  const double d = o.p_px - c.x_offset;
  const double m = c.m;
  const bool y_out = std::abs(o.p_py) > m || std::abs(o.p_py + 0.75 * o.v_py) > m;
  switch (id) {
    case 1:
      return d > -0.2 || d + 0.5 * o.v_px > -0.2 || o.p_px <= o.p_eex || y_out;
    case 2:
      return o.v_px > -0.2 || o.p_px < o.p_eex;
    case 3:
      return std::abs(o.p_py) < 0.41 || d > -0.2;
    case 4:
      return (d < -0.2 && std::max(std::abs(o.v_px), std::abs(o.v_py)) < 0.05) &&
             (d <= -0.8 || std::abs(o.p_py) > m);
    case 5:
      return ((d < 0.3 && o.v_px < -0.5) || o.v_px < -1.5) && o.p_eex < o.p_px;
    case 6:
      return (d < -0.2 && d + o.v_px < -0.2) && o.v_px < 0.5 &&
             std::abs(o.v_py) < 0.5 && !y_out && d + 0.75 * o.v_px > -0.8;
    default:
      throw std::invalid_argument("ah_condition: unknown condition id " +
                                  std::to_string(id));
  }
}

enum class AHState { kHit, kDefend, kPrepare, kIk };
enum class Skill { kHit, kDefend, kPrepare, kReset };

inline std::string_view to_string(AHState s) {
  switch (s) {
    case AHState::kHit: return "hit";
    case AHState::kDefend: return "defend";
    case AHState::kPrepare: return "prepare";
    case AHState::kIk: return "ik";
  }
  return "unknown";
}

struct AHStateMachine {
  AHState state = AHState::kIk;
  AHConditionParams params;
};

struct AHStepResult {
  AHStateMachine sm;
  Skill skill = Skill::kReset;
};

inline Skill skill_of(AHState s) {
  switch (s) {
    case AHState::kHit: return Skill::kHit;
    case AHState::kDefend: return Skill::kDefend;
    case AHState::kPrepare: return Skill::kPrepare;
    case AHState::kIk: return Skill::kReset;
  }
  return Skill::kReset;
}

// Skills leave to ik on conditions 1 (hit), 2 (defend), 3 (prepare); ik
// leaves on 5 (defend), 4 (prepare) or 6 (hit), in that order of precedence.
inline AHStepResult ah_step(const AHStateMachine& sm, const AHObservation& o) {
  AHStepResult r{sm, Skill::kReset};
  const AHConditionParams& c = sm.params;
  switch (sm.state) {
    case AHState::kHit:
      if (ah_condition(1, o, c)) r.sm.state = AHState::kIk;
      break;
    case AHState::kDefend:
      if (ah_condition(2, o, c)) r.sm.state = AHState::kIk;
      break;
    case AHState::kPrepare:
      if (ah_condition(3, o, c)) r.sm.state = AHState::kIk;
      break;
    case AHState::kIk:
      if (ah_condition(5, o, c)) {
        r.sm.state = AHState::kDefend;
      } else if (ah_condition(4, o, c)) {
        r.sm.state = AHState::kPrepare;
      } else if (ah_condition(6, o, c)) {
        r.sm.state = AHState::kHit;
      }
      break;
  }
  r.skill = skill_of(r.sm.state);
  return r;
}

// ------------------------------------------- polar rule-based controllers

enum class RulePolicy { kHit, kPrepare };
enum class RulePhase { kAdjustment, kAcceleration, kFinal, kDone };

struct RuleControllerParams {
  // theta[0..3]; the prepare policy uses the first three.
  std::array<double, 4> theta = {0.1, 0.5, 0.01, 0.05};
  double dt = kControlDt;
  double r_mallet = 0.04815;
  double r_puck = 0.03165;
  // Radial step of the slow-down phase (negative: retreat from the puck).
  double final_ds = -0.005;
  double prepare_adjust_ds = 5e-3;
  // |correction| (deg) below which the adjustment phase ends.
  double aligned_deg = 5.0;
  int max_adjust_steps = 25;
  int final_steps = 10;
  double max_ds = 0.06;
};

struct RuleState {
  RulePhase phase = RulePhase::kAdjustment;
  int t_phase = 0;
  double ds_prev = 0.0;
};

struct RuleStep {
  RuleState state;
  Vec2 target = Vec2::Zero();
  double beta_deg = 0.0;
  double correction = 0.0;
  double dbeta = 0.0;
  double ds = 0.0;
  bool degenerate = false;
  bool done = false;
};

// Angle (deg, in [0, 360)) of the end-effector seen from the puck.
inline double polar_beta_deg(const Vec2& ee, const Vec2& puck) {
  double b = rad2deg(std::atan2(ee.y() - puck.y(), ee.x() - puck.x()));
  if (b < 0.0) b += 360.0;
  return b;
}

// Correction angle steering the mallet around the puck (hit: toward 180 deg,
// behind the puck; prepare: toward the side facing the table center line).
// y is the puck's lateral coordinate, 0 on the center line.
inline double rule_correction(RulePolicy p, double beta_deg, double puck_y) {
  if (p == RulePolicy::kHit) return puck_y <= 0.0 ? 180.0 - beta_deg : beta_deg - 180.0;
  return puck_y <= 0.0 ? beta_deg - 90.0 : 270.0 - beta_deg;
}

// Direction in which dbeta is applied. Cases whose correction is written as
// (beta - target) belong to the mirrored half of the table, where the angle
// runs the other way; applying them with +1 would turn away from the target.
inline double rule_rotation_sign(RulePolicy p, double puck_y) {
  if (p == RulePolicy::kHit) return puck_y <= 0.0 ? 1.0 : -1.0;
  return puck_y <= 0.0 ? -1.0 : 1.0;
}

// (dbeta, ds) for the active phase.
inline std::pair<double, double> rule_increments(RulePolicy p,
                                                 const RuleControllerParams& c,
                                                 const RuleState& s,
                                                 double corr, double radius) {
  const auto& th = c.theta;
  const double t = static_cast<double>(s.t_phase);
  if (p == RulePolicy::kHit) {
    switch (s.phase) {
      case RulePhase::kAdjustment:
        return {(th[0] + th[1] * t * c.dt) * corr, th[2]};
      case RulePhase::kAcceleration:
        return {corr / 2.0, (s.ds_prev + th[3] * t * c.dt) / (radius + c.r_mallet)};
      default:
        return {(th[0] + th[1] * c.dt) * corr, c.final_ds};
    }
  }
  if (s.phase == RulePhase::kAdjustment)
    return {th[0] * t + th[1] * corr, c.prepare_adjust_ds};
  return {corr, th[2]};
}

inline RuleStep rl3_rule_step(RulePolicy p, const AgentView& v,
                              const RuleControllerParams& c, const RuleState& s) {
  RuleStep out;
  out.state = s;
  out.target = v.ee_pos;
  const Vec2 rel = v.ee_pos - v.puck_pos;
  const double dist = rel.norm();
  if (dist < 1e-9) {
    out.degenerate = true;
    return out;
  }
  if (s.phase == RulePhase::kDone) {
    out.done = true;
    return out;
  }
  const double beta = polar_beta_deg(v.ee_pos, v.puck_pos);
  const double corr = rule_correction(p, beta, v.puck_pos.y());
  // Distance between the puck center and the end-effector.
  const double radius = dist;
  auto [dbeta, ds] = rule_increments(p, c, s, corr, radius);
  ds = std::clamp(ds, -c.max_ds, c.max_ds);
  out.beta_deg = beta;
  out.correction = corr;
  out.dbeta = dbeta;
  out.ds = ds;

  // Positive ds closes in on the puck; the target never gets closer than
  // the contact distance.
  const double contact = c.r_puck + c.r_mallet;
  const double new_radius = std::max(radius - ds, contact);
  const double b = deg2rad(beta + rule_rotation_sign(p, v.puck_pos.y()) * dbeta);
  out.target = v.puck_pos + new_radius * Vec2(std::cos(b), std::sin(b));

  RuleState& n = out.state;
  n.ds_prev = ds;
  ++n.t_phase;
  const bool touching = new_radius <= contact + 1e-9;
  switch (s.phase) {
    case RulePhase::kAdjustment:
      if (std::abs(corr) < c.aligned_deg || n.t_phase >= c.max_adjust_steps) {
        n.phase = RulePhase::kAcceleration;
        n.t_phase = 0;
      }
      break;
    case RulePhase::kAcceleration:
      if (touching) {
        n.phase = p == RulePolicy::kHit ? RulePhase::kFinal : RulePhase::kDone;
        n.t_phase = 0;
      }
      break;
    case RulePhase::kFinal:
      if (n.t_phase >= c.final_steps) n.phase = RulePhase::kDone;
      break;
    case RulePhase::kDone:
      break;
  }
  out.done = n.phase == RulePhase::kDone;
  return out;
}

// ------------------------------------------------- switcher and home FSM

enum class RL3Task { kHome, kHit, kPrepare, kDefend, kCounterAttack };

inline std::string_view to_string(RL3Task t) {
  switch (t) {
    case RL3Task::kHome: return "home";
    case RL3Task::kHit: return "hit";
    case RL3Task::kPrepare: return "prepare";
    case RL3Task::kDefend: return "defend";
    case RL3Task::kCounterAttack: return "counter-attack";
  }
  return "unknown";
}

struct SwitcherParams {
  double defend_vx = -0.3;
  double prepare_abs_y = 0.41;
  // Puck closer than this to the own end rail is prepared, not hit.
  double prepare_x = 0.25;
  double slow_speed = 0.5;
};

inline RL3Task rl3_switch(const AgentView& v, const TableGeometry& g,
                          const SwitcherParams& p = {}) {
  if (v.puck_pos.x() > g.center_x()) return RL3Task::kHome;
  if (v.puck_vel.x() < p.defend_vx) return RL3Task::kDefend;
  const bool slow = v.puck_vel.norm() < p.slow_speed;
  if (slow && (std::abs(v.puck_pos.y()) > p.prepare_abs_y || v.puck_pos.x() < p.prepare_x))
    return RL3Task::kPrepare;
  return RL3Task::kHit;
}

struct RL3FSM {
  RL3Task state = RL3Task::kHome;
};

struct RL3FsmStep {
  RL3FSM fsm;
  RL3Task task = RL3Task::kHome;
  bool request_denied = false;
};

// A task runs until it reports completion, then control returns home; only
// from home can a new task start. `request` overrides the switcher at home.
inline RL3FsmStep rl3_fsm_step(const RL3FSM& fsm, const AgentView& v,
                               bool completed, const TableGeometry& g,
                               std::optional<RL3Task> request = std::nullopt,
                               const SwitcherParams& sp = {}) {
  RL3FsmStep r{fsm, fsm.state, false};
  if (fsm.state != RL3Task::kHome) {
    if (completed) {
      r.fsm.state = RL3Task::kHome;
    } else if (request && *request != fsm.state) {
      r.request_denied = true;
    }
  } else {
    r.fsm.state = request ? *request : rl3_switch(v, g, sp);
  }
  r.task = r.fsm.state;
  return r;
}

}  // namespace ahb

#endif  // AHB_POLICIES_HPP_
