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

// Shipped agents. Every agent sees the game in its own side frame and
// returns one Command per 20 ms control step.

#ifndef AHB_AGENTS_HPP_
#define AHB_AGENTS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ahb/common.hpp"
#include "ahb/kalman.hpp"
#include "ahb/kinematics.hpp"
#include "ahb/metrics.hpp"
#include "ahb/planning.hpp"
#include "ahb/policies.hpp"
#include "ahb/puck_model.hpp"
#include "ahb/world.hpp"

namespace ahb {

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  // Called before every episode or game.
  virtual void reset(std::uint64_t seed) = 0;
  virtual Command act(const Observation& obs) = 0;
  // Current game score from this agent's point of view.
  virtual void set_score(int /*own*/, int /*opponent*/) {}
  // The qualifying task being evaluated; empty during full games.
  virtual void set_task(std::optional<Task> /*task*/) {}
};

struct AgentContext {
  RobotSpec robot = iiwa14_spec();
  TableGeometry geom;
  PuckParams puck;
};

namespace detail {

// Caps the displacement toward `target` to speed * dt.
inline Vec2 approach(const Vec2& from, const Vec2& target, double speed) {
  const Vec2 d = target - from;
  const double lim = speed * kControlDt;
  const double n = d.norm();
  return n <= lim ? target : Vec2(from + d * (lim / n));
}

// Where an incoming puck crosses x = line, folding rail reflections.
inline double intercept_y(const Vec2& p, const Vec2& v, double line,
                          const TableGeometry& g) {
  if (v.x() >= -1e-6) return p.y();
  const double t = (line - p.x()) / v.x();
  if (t <= 0.0) return p.y();
  const double h = g.puck_y_max();
  double y = p.y() + v.y() * t + h;
  const double period = 4.0 * h;
  y = std::fmod(y, period);
  if (y < 0.0) y += period;
  return y <= 2.0 * h ? y - h : 3.0 * h - y;
}

// Position filter shared by the agents that do their own tracking.
class PuckTracker {
 public:
  void reset() { init_ = false; }
  // Returns filtered (position, velocity).
  std::pair<Vec2, Vec2> update(const Vec2& z) {
    if (!init_ || (z - kf_.mean.head<2>()).norm() > 0.15) {
      kf_ = KalmanState{};
      kf_.mean << z.x(), z.y(), 0.0, 0.0;
      kf_.cov = Mat4::Identity() * 1e-2;
      kf_.cov.block<2, 2>(0, 0) *= 1e-3;
      init_ = true;
    } else {
      kf_ = kalman_step(kf_, z, kControlDt);
    }
    return {kf_.mean.head<2>(), kf_.mean.tail<2>()};
  }
  const KalmanState& state() const { return kf_; }

 private:
  KalmanState kf_;
  bool init_ = false;
};

}  // namespace detail

// ------------------------------------------------------------------ idle

// Holds the home posture.
class IdleAgent : public Agent {
 public:
  explicit IdleAgent(AgentContext ctx = {}) : ctx_(std::move(ctx)) {}
  std::string name() const override { return "idle"; }
  void reset(std::uint64_t) override {}
  Command act(const Observation&) override { return Command::hold(ctx_.robot.q_init); }

 private:
  AgentContext ctx_;
};

// -------------------------------------------------------------- composite

struct CompositeParams {
  // Gap between mallet and puck edges while lining up a strike.
  double standoff = 0.05;
  double align_tol = 0.025;
  // Distance the strike target is placed beyond the puck center.
  double follow_through = 0.2;
  int strike_steps = 15;
  int replan_every = 25;
  double align_speed = 2.0;
  // Catch: contact line, and how long before contact the mallet starts
  // moving with the puck.
  double catch_x = 0.45;
  double catch_lead = 0.3;
  // Prepare taps: gap kept before the tap and speed bounds.
  double tap_standoff = 0.01;
  double tap_min_speed = 0.01;
  double tap_max_speed = 0.3;
  // Puck at most this slow counts as settled.
  double settled_speed = 0.03;
  SamplerConfig sampler{4, 12, 24, deg2rad(15.0), 0.5, 1};
  ShotConfig shot{1.5, 1.5};
};

// Skill state machine driving model-based skills: a stochastic shot
// planner for hitting, a soft catch planned on the predicted crossing for
// defending, and distance-scaled taps toward the table center for
// preparing. Positions are Kalman filtered; observed velocities are not
// used. When told the qualifying task, skills that would defeat it are
// replaced (no strikes while defending or preparing).
class CompositeAgent : public Agent {
 public:
  explicit CompositeAgent(AgentContext ctx = {}, CompositeParams p = {})
      : ctx_(std::move(ctx)),
        p_(std::move(p)),
        model_(analytic_puck_model(ctx_.puck, kControlDt, 0.05)) {}

  std::string name() const override { return "composite"; }
  void set_task(std::optional<Task> task) override { task_ = task; }

  void reset(std::uint64_t seed) override {
    rng_ = Rng(seed);
    tracker_.reset();
    sm_ = {};
    caught_ = false;
    restart_skill();
  }

  AHState state() const { return sm_.state; }

  Command act(const Observation& obs) override {
    const TableGeometry& g = ctx_.geom;
    const auto [pp, pv] = tracker_.update(obs.puck.pos());
    const EeState ee = ee_state(ctx_.robot, obs.q, obs.qdot);
    AgentView v{pp, pv, ee.pos.head<2>(), ee.vel.head<2>()};
    const AHStepResult r = ah_step(sm_, ah_observation(v, ctx_.robot));
    const bool changed = r.sm.state != sm_.state;
    sm_ = r.sm;
    Skill skill = skill_of(sm_.state);
    if (task_ == Task::kPrepare && skill != Skill::kDefend &&
        v.puck_pos.x() < g.center_x()) {
      // The prepare/reset edges can alternate every step near the own end
      // rail; the skill phase is kept across them.
      if (skill_of(r.sm.state) != Skill::kDefend) keep_phase_ = true;
      skill = Skill::kPrepare;
    }
    if (task_ == Task::kDefend && (skill == Skill::kHit || skill == Skill::kPrepare))
      skill = Skill::kReset;
    if (changed && !keep_phase_) restart_skill();
    keep_phase_ = false;
    if (task_ == Task::kDefend && skill == Skill::kReset && caught_) return hold(obs, v);
    Vec2 target = v.ee_pos;
    switch (skill) {
      case Skill::kHit: target = hit_target(v); break;
      case Skill::kDefend: target = defend_target(v); break;
      case Skill::kPrepare: target = prepare_target(v); break;
      case Skill::kReset:
        return reset_to_home(obs.q, ctx_.robot, g).cmd;
    }
    return map_target(workspace().clamp(target), obs.q, ctx_.robot, g).cmd;
  }

 private:
  enum class Phase { kAlign, kStrike };

  struct Catch {
    double t_contact = 0.0;
    Vec2 mallet_pos = Vec2::Zero();
    Vec2 mallet_vel = Vec2::Zero();
  };

  void restart_skill() {
    phase_ = Phase::kAlign;
    phase_steps_ = 0;
    plan_age_ = 1 << 20;
    catch_.reset();
  }

  Command hold(const Observation& obs, const AgentView& v) const {
    return map_target(workspace().clamp(v.ee_pos), obs.q, ctx_.robot, ctx_.geom).cmd;
  }

  TaskSpaceBox workspace() const { return TaskSpaceBox::from(ctx_.geom); }

  double contact() const { return ctx_.geom.puck_radius + ctx_.geom.mallet_radius; }

  EKFBelief belief(const AgentView& v) const {
    EKFBelief b;
    b.mean << v.puck_pos, v.puck_vel;
    b.cov = tracker_.state().cov;
    return b;
  }

  // Line up behind the puck along `dir`, then drive through it.
  Vec2 strike_toward(const AgentView& v, const Vec2& dir, double strike_speed,
                     double standoff, double follow_through) {
    const Vec2 lead = v.puck_pos + v.puck_vel * 0.1;
    const Vec2 ready = lead - (contact() + standoff) * dir;
    ++phase_steps_;
    if (phase_ == Phase::kAlign) {
      if ((v.ee_pos - ready).norm() < p_.align_tol) {
        phase_ = Phase::kStrike;
        phase_steps_ = 0;
      } else {
        return detail::approach(v.ee_pos, route_around(v, ready, dir), p_.align_speed);
      }
    }
    const int max_steps = std::max(
        p_.strike_steps,
        static_cast<int>(std::ceil((standoff + follow_through) / (strike_speed * kControlDt))));
    if (phase_steps_ > max_steps) {
      phase_ = Phase::kAlign;
      phase_steps_ = 0;
      plan_age_ = 1 << 20;
    }
    return detail::approach(v.ee_pos, lead + follow_through * dir, strike_speed);
  }

  // Detours sideways when the straight path to `goal` would run into the
  // puck from the front.
  Vec2 route_around(const AgentView& v, const Vec2& goal, const Vec2& dir) const {
    const Vec2 rel = v.ee_pos - v.puck_pos;
    const double along = rel.dot(dir);
    const double clear = contact() + 0.03;
    if (along < -0.5 * clear) return goal;
    Vec2 side(-dir.y(), dir.x());
    if (rel.dot(side) < 0.0) side = -side;
    const Vec2 via = v.puck_pos + (clear + 0.03) * side - 0.5 * clear * dir;
    return std::abs(rel.dot(side)) < clear ? via : Vec2(via - clear * dir);
  }

  Vec2 hit_target(const AgentView& v) {
    if (phase_ == Phase::kAlign && ++plan_age_ >= p_.replan_every) {
      try {
        shot_angle_ =
            plan_shot(belief(v), model_, p_.sampler, {}, ctx_.geom, rng_, p_.shot).angle;
      } catch (const PlanningFailure&) {
        shot_angle_ = std::atan2(-v.puck_pos.y(), ctx_.geom.length - v.puck_pos.x());
      }
      plan_age_ = 0;
    }
    return strike_toward(v, unit(shot_angle_), 10.0, p_.standoff, p_.follow_through);
  }

  // Meets the puck on the catch line moving with it, so that the rebound
  // leaves it nearly at rest: u = e / (1 + e) * v along the contact normal.
  Vec2 defend_target(const AgentView& v) {
    const TableGeometry& g = ctx_.geom;
    if (++plan_age_ >= 3) {
      plan_age_ = 0;
      DeflectionConfig band;
      band.band_x = p_.catch_x;
      const auto crossing = predict_band_crossing(model_, belief(v), g, band);
      if (crossing) {
        const auto& [t_c, pc] = *crossing;
        const Vec2 pv = pc.tail<2>();
        const double e = ctx_.puck.mallet_restitution;
        Catch c;
        c.t_contact = t_c;
        c.mallet_pos = pc.head<2>() + contact() * pv.normalized();
        c.mallet_vel = e / (1.0 + e) * pv;
        catch_ = c;
        catch_steps_ = 0;
      }
    }
    if (!catch_) return v.ee_pos;
    ++catch_steps_;
    const double t_rem = catch_->t_contact - catch_steps_ * kControlDt;
    if (t_rem <= 0.0) caught_ = true;
    const double lead = std::clamp(t_rem, -0.15, p_.catch_lead);
    return catch_->mallet_pos - catch_->mallet_vel * lead;
  }

  // Taps the settled puck toward the middle of the own half with the speed
  // that lets friction stop it there.
  Vec2 prepare_target(const AgentView& v) {
    const TableGeometry& g = ctx_.geom;
    const Vec2 goal(g.center_x() - 0.5, 0.0);
    Vec2 dir = goal - v.puck_pos;
    const double dist = dir.norm();
    if (dist < 0.05) return retreat(v);
    if (v.puck_vel.norm() > p_.settled_speed && phase_ == Phase::kAlign) return retreat(v);
    dir /= dist;
    const double e = ctx_.puck.mallet_restitution;
    double puck_speed = std::max(ctx_.puck.slide_friction, 0.05) * dist;
    // No room behind the puck against a rail: bank it off that rail.
    const TaskSpaceBox box = workspace();
    const Vec2 ready = v.puck_pos - (contact() + p_.tap_standoff) * dir;
    if (ready.y() < box.y_min || ready.y() > box.y_max) {
      dir.y() = -dir.y();
      puck_speed /= ctx_.puck.wall_restitution;
    }
    if (ready.x() < box.x_min) {
      dir.x() = -dir.x();
      puck_speed /= ctx_.puck.wall_restitution;
    }
    const double tap = std::clamp(puck_speed / (1.0 + e), p_.tap_min_speed, p_.tap_max_speed);
    return strike_toward(v, dir, tap, p_.tap_standoff, 0.0);
  }

  // Backs away from the puck toward the own goal.
  Vec2 retreat(const AgentView& v) const {
    const Vec2 rel = v.ee_pos - v.puck_pos;
    if (rel.norm() > contact() + 0.1) return v.ee_pos;
    return v.ee_pos + 0.05 * rel.normalized();
  }

  AgentContext ctx_;
  CompositeParams p_;
  PiecewiseLinearPuckModel model_;
  std::optional<Task> task_;
  Rng rng_{0};
  detail::PuckTracker tracker_;
  AHStateMachine sm_;
  Phase phase_ = Phase::kAlign;
  int phase_steps_ = 0;
  int plan_age_ = 1 << 20;
  double shot_angle_ = 0.0;
  std::optional<Catch> catch_;
  int catch_steps_ = 0;
  bool caught_ = false;
  bool keep_phase_ = false;
};

// ---------------------------------------------------------- chase / block

struct ChaseBlockParams {
  EnsembleMargins margins;
  // Block line (table frame x) per strategy: balanced, aggressive, defensive.
  std::array<double, 3> block_x = {0.25, 0.3, 0.18};
  std::array<double, 3> strike_speed = {1.2, 1.8, 0.8};
  double incoming_vx = -0.3;
};

// Strategy-ensemble agent whose members share one hand-written
// chase-and-block policy emitting normalized task-space actions; the
// strategy only changes how far forward it blocks and how hard it strikes.
class ChaseBlockAgent : public Agent {
 public:
  explicit ChaseBlockAgent(AgentContext ctx = {}, ChaseBlockParams p = {})
      : ctx_(std::move(ctx)), p_(p) {}

  std::string name() const override { return "spacer"; }
  void reset(std::uint64_t) override { diff_ = 0; }
  void set_score(int own, int opponent) override { diff_ = own - opponent; }
  Strategy strategy() const { return ensemble_select(diff_, p_.margins); }

  Command act(const Observation& obs) override {
    const TableGeometry& g = ctx_.geom;
    const TaskSpaceBox box = TaskSpaceBox::from(g);
    const int k = static_cast<int>(strategy());
    const Vec2 p = obs.puck.pos(), vel = obs.puck.vel();
    const Vec2 ee = forward_kinematics(ctx_.robot, obs.q).ee.head<2>();
    const double contact = g.puck_radius + g.mallet_radius;
    Vec2 target;
    if (p.x() > g.center_x()) {
      target = {p_.block_x[k], 0.3 * p.y()};
    } else if (vel.x() < p_.incoming_vx && p.x() > p_.block_x[k]) {
      target = {p_.block_x[k], detail::intercept_y(p, vel, p_.block_x[k], g)};
    } else {
      Vec2 dir = Vec2(g.length, 0.0) - p;
      dir.normalize();
      const Vec2 behind = p - (contact + 0.02) * dir;
      if ((ee - p).dot(dir) > -0.5 * contact) {
        // Wrong side of the puck: swing around it.
        const Vec2 side(-dir.y(), dir.x());
        target = p + (contact + 0.05) * ((ee - p).dot(side) >= 0 ? side : Vec2(-side)) -
                 contact * dir;
      } else if ((ee - behind).norm() > 0.03) {
        target = behind;
      } else {
        target = detail::approach(ee, p + 0.2 * dir, p_.strike_speed[k]);
      }
    }
    return map_task_action({box.normalize(target)}, obs.q, ctx_.robot, g).cmd;
  }

 private:
  AgentContext ctx_;
  ChaseBlockParams p_;
  int diff_ = 0;
};

// ------------------------------------------------------------ polar rules

struct PolarRuleParams {
  RuleControllerParams rules;
  SwitcherParams switcher;
  int task_timeout = 150;
  double home_tol = 0.03;
  double block_x = 0.2;
  double strike_overshoot = 0.1;
};

// Switcher plus home-routing FSM over the polar rule controllers; defend
// and counter-attack are a block on the predicted crossing.
class PolarRuleAgent : public Agent {
 public:
  explicit PolarRuleAgent(AgentContext ctx = {}, PolarRuleParams p = {})
      : ctx_(std::move(ctx)), p_(p) {
    p_.rules.r_puck = ctx_.geom.puck_radius;
    p_.rules.r_mallet = ctx_.geom.mallet_radius;
  }

  std::string name() const override { return "rl3"; }

  void reset(std::uint64_t) override {
    fsm_ = {};
    rule_ = {};
    task_steps_ = 0;
    tracker_.reset();
  }

  RL3Task task() const { return fsm_.state; }

  Command act(const Observation& obs) override {
    const TableGeometry& g = ctx_.geom;
    const auto [pp, pv] = tracker_.update(obs.puck.pos());
    const EeState ee = ee_state(ctx_.robot, obs.q, obs.qdot);
    // The rule controllers use a lateral coordinate centered on the table.
    AgentView v{pp, pv, ee.pos.head<2>(), ee.vel.head<2>()};
    const Vec2 home = forward_kinematics(ctx_.robot, ctx_.robot.q_init).ee.head<2>();

    bool completed = task_steps_ >= p_.task_timeout;
    switch (fsm_.state) {
      case RL3Task::kHome:
        completed = (v.ee_pos - home).norm() < p_.home_tol;
        break;
      case RL3Task::kHit:
      case RL3Task::kPrepare:
        completed = completed || rule_.phase == RulePhase::kDone ||
                    v.puck_pos.x() > g.center_x();
        break;
      case RL3Task::kDefend:
      case RL3Task::kCounterAttack:
        completed = completed || v.puck_vel.x() > -0.05 || v.puck_pos.x() < v.ee_pos.x();
        break;
    }
    const RL3Task before = fsm_.state;
    // Home only hands over once the mallet is back.
    const bool at_home = fsm_.state != RL3Task::kHome || completed;
    if (at_home) fsm_ = rl3_fsm_step(fsm_, v, completed, g, std::nullopt, p_.switcher).fsm;
    if (fsm_.state != before) {
      rule_ = {};
      task_steps_ = 0;
    }
    ++task_steps_;

    Vec2 target = v.ee_pos;
    switch (fsm_.state) {
      case RL3Task::kHome:
        return reset_to_home(obs.q, ctx_.robot, g).cmd;
      case RL3Task::kHit:
      case RL3Task::kPrepare: {
        const RulePolicy pol =
            fsm_.state == RL3Task::kHit ? RulePolicy::kHit : RulePolicy::kPrepare;
        const RuleState rule_before = rule_;
        const RuleStep s = rl3_rule_step(pol, v, p_.rules, rule_);
        rule_ = s.state;
        target = s.target;
        // The controller stops its targets at the contact circle and assumes
        // the mallet reaches each target within a step. The lagging mallet
        // would never touch the puck, so the touching step commits a strike
        // through the puck that is held for the final phase.
        if (pol == RulePolicy::kHit && s.state.phase == RulePhase::kFinal) {
          if (rule_before.phase != RulePhase::kFinal)
            strike_ = v.puck_pos + p_.strike_overshoot *
                                       (v.puck_pos - v.ee_pos).normalized();
          target = strike_;
        }
        break;
      }
      case RL3Task::kDefend:
      case RL3Task::kCounterAttack:
        target = {p_.block_x,
                  detail::intercept_y(v.puck_pos, v.puck_vel, p_.block_x, g)};
        break;
    }
    return map_target(TaskSpaceBox::from(g).clamp(target), obs.q, ctx_.robot, g).cmd;
  }

 private:
  AgentContext ctx_;
  PolarRuleParams p_;
  RL3FSM fsm_;
  RuleState rule_;
  int task_steps_ = 0;
  Vec2 strike_ = Vec2::Zero();
  detail::PuckTracker tracker_;
};

// --------------------------------------------------------------- factory

inline std::vector<std::string> agent_names() {
  return {"composite", "spacer", "rl3", "idle"};
}

inline std::unique_ptr<Agent> make_agent(std::string_view name,
                                         const AgentContext& ctx = {}) {
  if (name == "composite") return std::make_unique<CompositeAgent>(ctx);
  if (name == "spacer") return std::make_unique<ChaseBlockAgent>(ctx);
  if (name == "rl3") return std::make_unique<PolarRuleAgent>(ctx);
  if (name == "idle") return std::make_unique<IdleAgent>(ctx);
  throw AgentError("unknown agent: " + std::string(name));
}

}  // namespace ahb

#endif  // AHB_AGENTS_HPP_
