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

// Planar puck dynamics: exponential sliding decay, restitution reflection at
// the rails, impulsive contact with kinematic (infinite-mass) mallets and an
// optional Gaussian airflow disturbance.

#ifndef AHB_PUCK_PHYSICS_HPP_
#define AHB_PUCK_PHYSICS_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ahb/common.hpp"
#include "ahb/table.hpp"

namespace ahb {

struct PuckState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Vec2 pos() const { return {x, y}; }
  Vec2 vel() const { return {vx, vy}; }
  double speed() const { return std::hypot(vx, vy); }
  double kinetic_energy() const { return 0.5 * (vx * vx + vy * vy); }
  void set_pos(const Vec2& p) { x = p.x(); y = p.y(); }
  void set_vel(const Vec2& v) { vx = v.x(); vy = v.y(); }

  bool operator==(const PuckState&) const = default;
};

struct PuckParams {
  // v' = v * exp(-slide_friction * dt)
  double slide_friction = 0.1;
  double wall_restitution = 0.8;
  double mallet_restitution = 0.7;
  // Fraction of rail-tangent velocity converted into spin at a rail hit.
  double spin_coupling = 0.0;
  // Standard deviation of the airflow acceleration noise (m/s^2).
  double disturbance_std = 0.0;

  void validate() const {
    if (!(wall_restitution > 0.0 && wall_restitution <= 1.0) ||
        !(mallet_restitution > 0.0 && mallet_restitution <= 1.0))
      throw ConfigError("puck params: restitution must lie in (0, 1]");
    if (slide_friction < 0.0 || disturbance_std < 0.0)
      throw ConfigError("puck params: friction/disturbance must be >= 0");
  }
};

struct MalletState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  bool active = false;
};

enum class EventType : std::uint8_t {
  kGoal,           // side = side whose goal was entered
  kFault,          // side = side charged with the fault
  kCommandFault,   // side = agent whose command was rejected
  kMalletContact,  // side = mallet owner, value = approach speed
  kWallContact,
};

inline std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::kGoal: return "goal";
    case EventType::kFault: return "fault";
    case EventType::kCommandFault: return "command_fault";
    case EventType::kMalletContact: return "mallet_contact";
    case EventType::kWallContact: return "wall_contact";
  }
  return "unknown";
}

struct Event {
  EventType type = EventType::kGoal;
  int side = 0;
  double value = 0.0;
  std::int64_t time_ms = 0;

  bool operator==(const Event&) const = default;
};

struct MalletContactResult {
  PuckState puck;
  Vec2 normal = Vec2::UnitX();
  bool impulse_applied = false;
  bool degenerate = false;
};

// Impulse exchange with a kinematic mallet. The contact normal points from
// the mallet to the puck; only its component of the relative velocity is
// changed, so the tangential puck velocity is preserved.
inline MalletContactResult resolve_mallet_contact(
    const PuckState& puck, const MalletState& mallet, const PuckParams& params,
    const TableGeometry& geom, const Vec2& previous_normal = Vec2::UnitX()) {
  MalletContactResult out{puck, previous_normal, false, false};
  const Vec2 d = puck.pos() - mallet.pos;
  const double dist = d.norm();
  if (dist < 1e-12) {
    out.degenerate = true;
    out.normal = previous_normal.norm() > 0.0 ? previous_normal.normalized()
                                              : Vec2::UnitX();
  } else {
    out.normal = d / dist;
  }
  const double vn = (puck.vel() - mallet.vel).dot(out.normal);
  if (vn >= 0.0) return out;

  const double e = params.mallet_restitution;
  out.puck.set_vel(puck.vel() - (1.0 + e) * vn * out.normal);
  const double contact = geom.puck_radius + geom.mallet_radius;
  if (dist < contact) out.puck.set_pos(mallet.pos + contact * out.normal);
  out.impulse_applied = true;
  return out;
}

struct PuckStepResult {
  PuckState puck;
  std::vector<Event> events;
  // Set once the puck center crossed a goal line inside the mouth. The puck
  // is then parked on that line at rest until the caller resets it.
  bool scored = false;
  std::array<Vec2, 2> contact_normals = {Vec2::UnitX(), Vec2::UnitX()};
};

namespace detail {

// Reflects the puck off a rail located at `limit` along one axis. Overshoot
// past the rail is mirrored and shortened by the restitution, matching the
// distance travelled after the bounce within the substep.
inline bool reflect_axis(double& pos, double& vel, double limit, bool upper,
                         double e) {
  const double over = upper ? pos - limit : limit - pos;
  if (over <= 0.0) return false;
  const bool approaching = upper ? vel > 0.0 : vel < 0.0;
  if (approaching) {
    pos = upper ? limit - e * over : limit + e * over;
    vel = -e * vel;
  } else {
    pos = limit;
  }
  return approaching;
}

}  // namespace detail

// Advances the puck by dt (normally 1 ms). The step is subdivided whenever
// the puck would travel more than half its radius, so fast pucks cannot
// tunnel through a mallet or rail. rng may be null when disturbance is off.
inline PuckStepResult step_puck(
    const PuckState& puck, std::span<const MalletState> mallets,
    const PuckParams& params, const TableGeometry& geom, double dt, Rng* rng,
    std::int64_t time_ms = 0,
    const std::array<Vec2, 2>& previous_normals = {Vec2::UnitX(),
                                                   Vec2::UnitX()}) {
  PuckStepResult out;
  out.puck = puck;
  out.contact_normals = previous_normals;
  PuckState& p = out.puck;

  const double travel = p.speed() * dt;
  const int n_sub =
      std::max(1, static_cast<int>(std::ceil(travel / (0.5 * geom.puck_radius))));
  const double h = dt / n_sub;
  const double decay = std::exp(-params.slide_friction * h);
  const double r = geom.puck_radius;

  for (int s = 0; s < n_sub; ++s) {
    if (params.disturbance_std > 0.0 && rng != nullptr) {
      p.vx += rng->normal(0.0, params.disturbance_std) * h;
      p.vy += rng->normal(0.0, params.disturbance_std) * h;
    }
    p.vx *= decay;
    p.vy *= decay;
    p.omega *= decay;
    p.x += p.vx * h;
    p.y += p.vy * h;
    p.theta = wrap_angle(p.theta + p.omega * h);

    for (std::size_t i = 0; i < mallets.size() && i < 2; ++i) {
      const MalletState& m = mallets[i];
      if (!m.active) continue;
      if ((p.pos() - m.pos).norm() > geom.puck_radius + geom.mallet_radius)
        continue;
      const MalletContactResult c =
          resolve_mallet_contact(p, m, params, geom, out.contact_normals[i]);
      out.contact_normals[i] = c.normal;
      if (c.impulse_applied) {
        const double approach = -(p.vel() - m.vel).dot(c.normal);
        p = c.puck;
        out.events.push_back({EventType::kMalletContact, static_cast<int>(i),
                              approach, time_ms});
      }
    }

    const double e = params.wall_restitution;
    const double ymax = geom.puck_y_max();
    const double vx_before = p.vx;
    if (detail::reflect_axis(p.y, p.vy, ymax, true, e)) {
      p.omega -= params.spin_coupling * vx_before / r;
      out.events.push_back({EventType::kWallContact, 1, 0.0, time_ms});
    }
    if (detail::reflect_axis(p.y, p.vy, -ymax, false, e)) {
      p.omega += params.spin_coupling * vx_before / r;
      out.events.push_back({EventType::kWallContact, 0, 0.0, time_ms});
    }

    // End rails, open across the goal mouth.
    for (int side = 0; side < 2; ++side) {
      const bool upper = side == 1;
      const double line = upper ? geom.length : 0.0;
      const double rail = upper ? geom.puck_x_max() : geom.puck_x_min();
      const bool beyond_rail = upper ? p.x > rail : p.x < rail;
      if (!beyond_rail) continue;
      if (geom.in_goal_mouth(p.y)) {
        const bool crossed = upper ? p.x >= line : p.x <= line;
        if (crossed) {
          out.events.push_back({EventType::kGoal, side, p.speed(), time_ms});
          p.x = line;
          p.vx = p.vy = p.omega = 0.0;
          out.scored = true;
          return out;
        }
        continue;
      }
      const double vy_before = p.vy;
      if (detail::reflect_axis(p.x, p.vx, rail, upper, e)) {
        p.omega += (upper ? 1.0 : -1.0) * params.spin_coupling * vy_before / r;
        out.events.push_back({EventType::kWallContact, 2 + side, 0.0, time_ms});
      }
    }
  }
  return out;
}

}  // namespace ahb

#endif  // AHB_PUCK_PHYSICS_HPP_
