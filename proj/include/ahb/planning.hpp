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

// Sampling-based planners: shooting-angle optimization over predicted puck
// rollouts, deflection contact planning, and minimum-acceleration mallet
// trajectories toward a planned contact.

#ifndef AHB_PLANNING_HPP_
#define AHB_PLANNING_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "ahb/common.hpp"
#include "ahb/puck_model.hpp"
#include "ahb/table.hpp"

namespace ahb {

struct ShotCostWeights {
  double w_goal = 1.0;
  double w_vel = 0.5;
  // Penalty added when the scoring probability falls below the threshold.
  double low_prob_threshold = 0.3;
  double low_prob_penalty = 1.0;
};

struct ShotConfig {
  // Mallet speed along the shooting direction at contact.
  double mallet_speed = 1.5;
  // Rollout horizon.
  double max_time = 2.0;
};

struct SamplerConfig {
  int iterations = 12;
  int population = 32;
  // The first iteration spreads this many samples evenly over the range.
  int initial_population = 64;
  double initial_std = deg2rad(20.0);
  double shrink = 0.6;
  int rollouts = 1;

  void validate() const {
    if (iterations < 1) throw ConfigError("sampler: iterations must be >= 1");
    if (population < 2 || initial_population < 2)
      throw ConfigError("sampler: population must be >= 2");
    if (!(shrink > 0.0 && shrink < 1.0))
      throw ConfigError("sampler: shrink must lie in (0, 1)");
    if (rollouts < 1) throw ConfigError("sampler: rollouts must be >= 1");
  }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Mallet state that strikes a puck at `puck` along `angle` (0 rad points at
// the opponent goal).
inline MalletState strike_mallet(const Vec2& puck, double angle,
                                 const TableGeometry& g, double speed) {
  MalletState m;
  m.pos = puck - (g.puck_radius + g.mallet_radius) * unit(angle);
  m.vel = speed * unit(angle);
  m.active = true;
  return m;
}

struct GoalLinePrediction {
  bool reached = false;
  double p_goal = 0.0;
  double speed = 0.0;
  int steps = 0;
};

// Rolls a belief forward (mallet present on the first step only) until the
// mean reaches the opponent goal line or the horizon ends.
inline GoalLinePrediction predict_goal_line(const PiecewiseLinearPuckModel& model,
                                            const EKFBelief& start,
                                            const std::optional<MalletState>& mallet,
                                            const TableGeometry& g,
                                            double max_time) {
  GoalLinePrediction out;
  const int max_steps = std::max(1, static_cast<int>(std::ceil(max_time / model.dt)));
  const double line = g.puck_x_max();
  EKFBelief b = start;
  for (int k = 0; k < max_steps; ++k) {
    b = ekf_predict(model, b, k == 0 ? mallet : std::nullopt, g);
    out.steps = k + 1;
    if (b.mean[0] >= line) {
      out.reached = true;
      const double half = g.goal_width / 2.0;
      const double mu = b.mean[1];
      const double var = b.cov(1, 1);
      if (var <= 1e-18) {
        out.p_goal = g.in_goal_mouth(mu) ? 1.0 : 0.0;
      } else {
        const double sd = std::sqrt(var);
        out.p_goal = normal_cdf((half - mu) / sd) - normal_cdf((-half - mu) / sd);
      }
      out.speed = b.mean.tail<2>().norm();
      return out;
    }
    if (b.mean[2] <= 0.0 && k > 0) return out;  // heading back, no goal
  }
  return out;
}

// Cost of a shot along `angle`. With rollouts > 1 the start state is also
// sampled from the belief covariance.
inline double shot_cost(double angle, const EKFBelief& belief,
                        const PiecewiseLinearPuckModel& model,
                        const ShotCostWeights& w, const TableGeometry& g,
                        int rollouts = 1, Rng* rng = nullptr,
                        const ShotConfig& cfg = {}) {
  if (rollouts < 1) throw std::invalid_argument("shot_cost: rollouts must be >= 1");
  double p_sum = 0.0, v_sum = 0.0;
  Eigen::LLT<Mat4> llt(belief.cov + 1e-15 * Mat4::Identity());
  for (int r = 0; r < rollouts; ++r) {
    EKFBelief b = belief;
    if (r > 0 && rng != nullptr) {
      Vec4 e;
      for (int i = 0; i < 4; ++i) e[i] = rng->normal();
      b.mean += llt.matrixL() * e;
    }
    const MalletState m = strike_mallet(b.mean.head<2>(), angle, g, cfg.mallet_speed);
    const GoalLinePrediction pr = predict_goal_line(model, b, m, g, cfg.max_time);
    p_sum += pr.p_goal;
    v_sum += pr.p_goal * pr.speed;
  }
  const double p = p_sum / rollouts;
  const double speed = p > 0.0 ? v_sum / p_sum : 0.0;
  double cost = -w.w_goal * p - w.w_vel * speed;
  if (p < w.low_prob_threshold) cost += w.low_prob_penalty;
  return cost;
}

struct ShotPlan {
  double angle = 0.0;
  double cost = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  // Lowest cost among every evaluated candidate (equals cost).
  double min_sampled = std::numeric_limits<double>::infinity();
};

struct AngleRange {
  double lo = deg2rad(-80.0);
  double hi = deg2rad(80.0);
};

// Cross-entropy style search over the shooting angle: an even sweep, then
// Gaussian resampling around the best candidate with shrinking spread.
inline ShotPlan plan_shot(const EKFBelief& belief,
                          const PiecewiseLinearPuckModel& model,
                          const SamplerConfig& s, const ShotCostWeights& w,
                          const TableGeometry& g, Rng& rng,
                          const ShotConfig& cfg = {}, const AngleRange& range = {}) {
  s.validate();
  ShotPlan best;
  const auto consider = [&](double a) {
    a = std::clamp(a, range.lo, range.hi);
    const double c = shot_cost(a, belief, model, w, g, s.rollouts, &rng, cfg);
    ++best.evaluations;
    if (std::isfinite(c) && c < best.cost) {
      best.cost = c;
      best.angle = a;
    }
  };
  const int n0 = s.initial_population;
  const double width = range.hi - range.lo;
  for (int i = 0; i < n0; ++i)
    consider(range.lo + width * (i + rng.uniform()) / n0);
  double sd = s.initial_std;
  for (int it = 1; it < s.iterations; ++it) {
    const double center = best.angle;
    for (int i = 0; i < s.population; ++i) consider(center + sd * rng.normal());
    sd *= s.shrink;
  }
  if (!std::isfinite(best.cost)) throw PlanningFailure("plan_shot: no finite-cost angle");
  best.min_sampled = best.cost;
  return best;
}

// ------------------------------------------------------------- deflection

enum class ContactIntent { kShoot, kDeflect, kPrepare };

inline std::string_view to_string(ContactIntent i) {
  switch (i) {
    case ContactIntent::kShoot: return "shoot";
    case ContactIntent::kDeflect: return "deflect";
    case ContactIntent::kPrepare: return "prepare";
  }
  return "unknown";
}

struct ContactPlan {
  double t_contact = 0.0;
  Vec2 mallet_pos = Vec2::Zero();
  Vec2 mallet_vel = Vec2::Zero();
  Vec4 puck_at_contact = Vec4::Zero();
  Vec2 puck_vel_after = Vec2::Zero();
  double target_vy = 0.0;
  double cost = std::numeric_limits<double>::infinity();
  ContactIntent intent = ContactIntent::kDeflect;
};

struct DeflectionConfig {
  // x of the line where contacts are planned (own half, table frame).
  double band_x = 0.35;
  double max_push_speed = 1.0;
  double max_time = 2.0;
  double restitution = 0.7;
  // Lateral speed used by the prepare intent to bank off the nearer rail.
  double prepare_vy = 0.5;
  double max_offset = deg2rad(80.0);
};

// Puck velocity after an instantaneous kinematic-mallet contact with normal
// angle psi (from mallet to puck) and mallet speed s along that normal.
inline Vec2 deflected_velocity(const Vec2& v, double psi, double s, double e) {
  const Vec2 n = unit(psi);
  const double vn = (v - s * n).dot(n);
  if (vn >= 0.0) return v;
  return v - (1.0 + e) * vn * n;
}

inline double deflection_cost(const Vec2& v, double psi, double s,
                              double target_vy, double e) {
  return std::abs(deflected_velocity(v, psi, s, e).y() - target_vy);
}

// Predicts where the incoming puck crosses the contact band.
inline std::optional<std::pair<double, Vec4>> predict_band_crossing(
    const PiecewiseLinearPuckModel& model, const EKFBelief& belief,
    const TableGeometry& g, const DeflectionConfig& cfg) {
  if (belief.mean[0] < cfg.band_x) return std::nullopt;
  if (belief.mean[2] >= 0.0) return std::nullopt;
  EKFBelief b = belief;
  const int max_steps = static_cast<int>(std::ceil(cfg.max_time / model.dt));
  for (int k = 0; k < max_steps; ++k) {
    const EKFBelief n = ekf_predict(model, b, std::nullopt, g);
    if (n.mean[0] <= cfg.band_x) {
      // Linear interpolation to the band.
      const double f = (b.mean[0] - cfg.band_x) / (b.mean[0] - n.mean[0]);
      const Vec4 s = b.mean + f * (n.mean - b.mean);
      return std::make_pair((k + f) * model.dt, s);
    }
    b = n;
  }
  return std::nullopt;
}

inline ContactPlan plan_deflection(const EKFBelief& belief, double target_vy,
                                   ContactIntent intent,
                                   const PiecewiseLinearPuckModel& model,
                                   const SamplerConfig& s, const TableGeometry& g,
                                   Rng& rng, const DeflectionConfig& cfg = {}) {
  s.validate();
  const auto crossing = predict_band_crossing(model, belief, g, cfg);
  if (!crossing) throw PlanningFailure("plan_deflection: puck does not reach the band");
  const auto [t_c, pc] = *crossing;
  const Vec2 v = pc.tail<2>();
  if (intent == ContactIntent::kPrepare)
    target_vy = (pc[1] >= 0.0 ? 1.0 : -1.0) * cfg.prepare_vy;

  ContactPlan best;
  best.intent = intent;
  best.target_vy = target_vy;
  best.t_contact = t_c;
  best.puck_at_contact = pc;
  double best_psi = 0.0, best_s = 0.0;
  const auto consider = [&](double psi, double sp) {
    psi = std::clamp(psi, -cfg.max_offset, cfg.max_offset);
    sp = std::clamp(sp, 0.0, cfg.max_push_speed);
    const double c = deflection_cost(v, psi, sp, target_vy, cfg.restitution);
    if (c < best.cost) {
      best.cost = c;
      best_psi = psi;
      best_s = sp;
    }
  };
  const int n0 = s.initial_population;
  for (int i = 0; i < n0; ++i)
    consider(-cfg.max_offset + 2.0 * cfg.max_offset * (i + rng.uniform()) / n0,
             cfg.max_push_speed * rng.uniform());
  double sd_psi = s.initial_std, sd_s = 0.25 * cfg.max_push_speed;
  for (int it = 1; it < s.iterations; ++it) {
    const double cp = best_psi, cs = best_s;
    for (int i = 0; i < s.population; ++i)
      consider(cp + sd_psi * rng.normal(), cs + sd_s * rng.normal());
    sd_psi *= s.shrink;
    sd_s *= s.shrink;
  }
  // Compass-search polish around the sampled optimum.
  double step_psi = sd_psi, step_s = sd_s;
  for (int it = 0; it < 60 && (step_psi > 1e-9 || step_s > 1e-9); ++it) {
    const double before = best.cost, cp = best_psi, cs = best_s;
    consider(cp + step_psi, cs);
    consider(cp - step_psi, cs);
    consider(cp, cs + step_s);
    consider(cp, cs - step_s);
    if (!(best.cost < before)) {
      step_psi *= 0.5;
      step_s *= 0.5;
    }
  }
  const Vec2 n = unit(best_psi);
  best.mallet_pos = pc.head<2>() - (g.puck_radius + g.mallet_radius) * n;
  best.mallet_vel = best_s * n;
  best.puck_vel_after = deflected_velocity(v, best_psi, best_s, cfg.restitution);
  return best;
}

// ------------------------------------------------------- mallet trajectory

struct TrajectoryParams {
  double dt = kControlDt;
  int candidates = 32;
  // Spread of sampled final velocities around the planned contact velocity.
  double velocity_std = 0.2;
};

struct MalletTrajectory {
  std::vector<Vec2> pos;  // samples at dt, 2dt, ..., T
  std::vector<Vec2> vel;
  Vec2 final_velocity = Vec2::Zero();
  double velocity_error = 0.0;
  double accel_cost = 0.0;
  Vec2 first_pos() const { return pos.front(); }
  Vec2 first_vel() const { return vel.front(); }
};

// Cubic Hermite segment: the unique minimum of integrated squared
// acceleration for fixed end positions and velocities.
struct CubicSegment {
  Vec2 c0, c1, c2, c3;
  double T;
  static CubicSegment fit(const Vec2& p0, const Vec2& v0, const Vec2& p1,
                          const Vec2& v1, double T) {
    CubicSegment s;
    s.T = T;
    s.c0 = p0;
    s.c1 = v0;
    s.c2 = (3.0 * (p1 - p0) - (2.0 * v0 + v1) * T) / (T * T);
    s.c3 = (2.0 * (p0 - p1) + (v0 + v1) * T) / (T * T * T);
    return s;
  }
  Vec2 pos(double t) const { return c0 + t * (c1 + t * (c2 + t * c3)); }
  Vec2 vel(double t) const { return c1 + t * (2.0 * c2 + 3.0 * t * c3); }
  // Integral of |a|^2 over [0, T].
  double accel_cost() const {
    // a(t) = 2 c2 + 6 c3 t
    return 4.0 * c2.squaredNorm() * T + 12.0 * c2.dot(c3) * T * T +
           12.0 * c3.squaredNorm() * T * T * T;
  }
};

inline MalletTrajectory plan_mallet_trajectory(const Vec2& pos, const Vec2& vel,
                                               const ContactPlan& contact,
                                               const TrajectoryParams& params,
                                               const TableGeometry& g, Rng& rng) {
  const double x_lo = g.l_x, x_hi = g.length - g.l_x;
  const double y_lo = g.l_y, y_hi = g.u_y;
  const auto inside = [&](const Vec2& p) {
    return p.x() >= x_lo - 1e-12 && p.x() <= x_hi + 1e-12 &&
           p.y() >= y_lo - 1e-12 && p.y() <= y_hi + 1e-12;
  };
  if (!inside(contact.mallet_pos))
    throw PlanningFailure("plan_mallet_trajectory: contact outside workspace");
  const double T = std::max(contact.t_contact, params.dt);
  const int n = std::max(1, static_cast<int>(std::ceil(T / params.dt - 1e-9)));

  std::optional<MalletTrajectory> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int c = 0; c < std::max(1, params.candidates); ++c) {
    Vec2 vf = contact.mallet_vel;
    if (c > 0)
      vf += params.velocity_std * Vec2(rng.normal(), rng.normal());
    const CubicSegment seg = CubicSegment::fit(pos, vel, contact.mallet_pos, vf, T);
    MalletTrajectory tr;
    bool ok = true;
    for (int k = 1; k <= n && ok; ++k) {
      const double t = k == n ? T : k * params.dt;
      const Vec2 p = seg.pos(t);
      ok = inside(p);
      tr.pos.push_back(k == n ? contact.mallet_pos : p);
      tr.vel.push_back(k == n ? vf : seg.vel(t));
    }
    if (!ok) continue;
    tr.final_velocity = vf;
    tr.velocity_error = (vf - contact.mallet_vel).norm();
    tr.accel_cost = seg.accel_cost();
    const double cost = tr.velocity_error + 1e-6 * tr.accel_cost;
    if (cost < best_cost) {
      best_cost = cost;
      best = std::move(tr);
    }
  }
  if (!best) throw PlanningFailure("plan_mallet_trajectory: no in-bounds candidate");
  return *best;
}

}  // namespace ahb

#endif  // AHB_PLANNING_HPP_
