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

#ifndef AHB_INTERPOLATION_HPP_
#define AHB_INTERPOLATION_HPP_

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ahb/common.hpp"

namespace ahb {

enum class InterpolationMode {
  kPosLinear,
  kPosQuadratic,
  kPosVelLinear,
  kPosVelCubic,
  kPosVelQuartic,
  kPosVelAccQuintic,
  kDirect,
};

inline constexpr std::array<std::pair<InterpolationMode, std::string_view>, 7>
    kInterpolationModeNames = {{
        {InterpolationMode::kPosLinear, "pos-linear"},
        {InterpolationMode::kPosQuadratic, "pos-quadratic"},
        {InterpolationMode::kPosVelLinear, "posvel-linear"},
        {InterpolationMode::kPosVelCubic, "posvel-cubic"},
        {InterpolationMode::kPosVelQuartic, "posvel-quartic"},
        {InterpolationMode::kPosVelAccQuintic, "posvelacc-quintic"},
        {InterpolationMode::kDirect, "direct-1kHz"},
    }};

inline std::string_view to_string(InterpolationMode m) {
  for (const auto& [mode, name] : kInterpolationModeNames)
    if (mode == m) return name;
  return "unknown";
}

inline InterpolationMode interpolation_mode_from_string(std::string_view s) {
  for (const auto& [mode, name] : kInterpolationModeNames)
    if (name == s) return mode;
  throw ConfigError("unknown interpolation mode: " + std::string(s));
}

// One 1 ms joint setpoint.
struct Setpoint {
  JointVector q = JointVector::Zero();
  JointVector qdot = JointVector::Zero();
  JointVector qddot = JointVector::Zero();

  bool operator==(const Setpoint&) const = default;
};

// Agent -> simulator contract at 50 Hz.
struct Command {
  InterpolationMode mode = InterpolationMode::kPosLinear;
  JointVector q_des = JointVector::Zero();
  std::optional<JointVector> qdot_des;
  std::optional<JointVector> qddot_des;
  // Used only in kDirect mode: one sample per simulation step.
  std::vector<Setpoint> direct;

  static Command hold(const JointVector& q) {
    Command c;
    c.mode = InterpolationMode::kPosVelLinear;
    c.q_des = q;
    c.qdot_des = JointVector::Zero();
    return c;
  }
  static Command pos_vel(const JointVector& q, const JointVector& qdot,
                         InterpolationMode mode) {
    Command c;
    c.mode = mode;
    c.q_des = q;
    c.qdot_des = qdot;
    return c;
  }
};

class CommandError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws CommandError when a field required by the mode is missing or any
// supplied value is not finite.
inline void validate_command(const Command& cmd, int horizon_ms = kSubsteps) {
  const auto finite = [](const JointVector& v) { return v.allFinite(); };
  const std::string name(to_string(cmd.mode));
  switch (cmd.mode) {
    case InterpolationMode::kPosLinear:
    case InterpolationMode::kPosQuadratic:
      break;
    case InterpolationMode::kPosVelLinear:
    case InterpolationMode::kPosVelCubic:
    case InterpolationMode::kPosVelQuartic:
      if (!cmd.qdot_des) throw CommandError(name + " requires qdot_des");
      break;
    case InterpolationMode::kPosVelAccQuintic:
      if (!cmd.qdot_des || !cmd.qddot_des)
        throw CommandError(name + " requires qdot_des and qddot_des");
      break;
    case InterpolationMode::kDirect:
      if (static_cast<int>(cmd.direct.size()) != horizon_ms)
        throw CommandError(name + " requires one sample per millisecond");
      for (const Setpoint& s : cmd.direct)
        if (!finite(s.q) || !finite(s.qdot) || !finite(s.qddot))
          throw CommandError(name + " sample is not finite");
      return;
  }
  if (!finite(cmd.q_des)) throw CommandError(name + ": q_des not finite");
  if (cmd.qdot_des && !finite(*cmd.qdot_des))
    throw CommandError(name + ": qdot_des not finite");
  if (cmd.qddot_des && !finite(*cmd.qddot_des))
    throw CommandError(name + ": qddot_des not finite");
}

namespace detail {

// q(t) = sum_k c[k] t^k, evaluated per joint.
template <std::size_t N>
Setpoint eval_poly(const std::array<JointVector, N>& c, double t) {
  Setpoint s;
  s.q.setZero();
  s.qdot.setZero();
  s.qddot.setZero();
  double tk = 1.0;
  for (std::size_t k = 0; k < N; ++k) {
    s.q += c[k] * tk;
    tk *= t;
  }
  tk = 1.0;
  for (std::size_t k = 1; k < N; ++k) {
    s.qdot += c[k] * (static_cast<double>(k) * tk);
    tk *= t;
  }
  tk = 1.0;
  for (std::size_t k = 2; k < N; ++k) {
    s.qddot += c[k] * (static_cast<double>(k * (k - 1)) * tk);
    tk *= t;
  }
  return s;
}

}  // namespace detail

// Expands a command into horizon_ms setpoints at t = 1..horizon_ms ms,
// starting from the end state of the previous segment.
inline std::vector<Setpoint> interpolate_command(const Setpoint& boundary,
                                                 const Command& cmd,
                                                 int horizon_ms = kSubsteps) {
  validate_command(cmd, horizon_ms);
  if (cmd.mode == InterpolationMode::kDirect) return cmd.direct;

  const double T = horizon_ms * kSimDt;
  const JointVector& q0 = boundary.q;
  const JointVector& v0 = boundary.qdot;
  const JointVector& a0 = boundary.qddot;
  const JointVector& q1 = cmd.q_des;
  std::vector<Setpoint> out(horizon_ms);

  switch (cmd.mode) {
    case InterpolationMode::kPosLinear: {
      const JointVector v = (q1 - q0) / T;
      for (int k = 1; k <= horizon_ms; ++k) {
        const double s = static_cast<double>(k) / horizon_ms;
        out[k - 1].q = (1.0 - s) * q0 + s * q1;
        out[k - 1].qdot = v;
        out[k - 1].qddot.setZero();
      }
      break;
    }
    case InterpolationMode::kPosQuadratic: {
      const std::array<JointVector, 3> c = {q0, v0,
                                            (q1 - q0 - v0 * T) / (T * T)};
      for (int k = 1; k <= horizon_ms; ++k)
        out[k - 1] = detail::eval_poly(c, k * kSimDt);
      out.back().q = q1;
      break;
    }
    case InterpolationMode::kPosVelLinear: {
      const JointVector& v1 = *cmd.qdot_des;
      const JointVector acc = (v1 - v0) / T;
      for (int k = 1; k <= horizon_ms; ++k) {
        const double s = static_cast<double>(k) / horizon_ms;
        out[k - 1].q = (1.0 - s) * q0 + s * q1;
        // Clamped to the end values so rounding never leaves their hull.
        out[k - 1].qdot = (v0 + s * (v1 - v0)).cwiseMax(v0.cwiseMin(v1)).cwiseMin(v0.cwiseMax(v1));
        out[k - 1].qddot = acc;
      }
      break;
    }
    case InterpolationMode::kPosVelCubic: {
      const JointVector& v1 = *cmd.qdot_des;
      const JointVector d = q1 - q0;
      const std::array<JointVector, 4> c = {
          q0, v0, (3.0 * d - (2.0 * v0 + v1) * T) / (T * T),
          (-2.0 * d + (v0 + v1) * T) / (T * T * T)};
      for (int k = 1; k <= horizon_ms; ++k)
        out[k - 1] = detail::eval_poly(c, k * kSimDt);
      out.back().q = q1;
      out.back().qdot = v1;
      break;
    }
    case InterpolationMode::kPosVelQuartic: {
      const JointVector& v1 = *cmd.qdot_des;
      const JointVector c2 = a0 / 2.0;
      const JointVector d = q1 - q0 - v0 * T - c2 * T * T;
      const JointVector e = v1 - v0 - 2.0 * c2 * T;
      const JointVector c3 = (4.0 * d / T - e) / (T * T);
      const JointVector c4 = (e - 3.0 * c3 * T * T) / (4.0 * T * T * T);
      const std::array<JointVector, 5> c = {q0, v0, c2, c3, c4};
      for (int k = 1; k <= horizon_ms; ++k)
        out[k - 1] = detail::eval_poly(c, k * kSimDt);
      out.back().q = q1;
      out.back().qdot = v1;
      break;
    }
    case InterpolationMode::kPosVelAccQuintic: {
      const JointVector& v1 = *cmd.qdot_des;
      const JointVector& a1 = *cmd.qddot_des;
      const JointVector d = q1 - q0;
      const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
      const std::array<JointVector, 6> c = {
          q0,
          v0,
          a0 / 2.0,
          (20.0 * d - (8.0 * v1 + 12.0 * v0) * T - (3.0 * a0 - a1) * T2) /
              (2.0 * T3),
          (-30.0 * d + (14.0 * v1 + 16.0 * v0) * T +
           (3.0 * a0 - 2.0 * a1) * T2) /
              (2.0 * T4),
          (12.0 * d - 6.0 * (v1 + v0) * T + (a1 - a0) * T2) / (2.0 * T5)};
      for (int k = 1; k <= horizon_ms; ++k)
        out[k - 1] = detail::eval_poly(c, k * kSimDt);
      out.back().q = q1;
      out.back().qdot = v1;
      out.back().qddot = a1;
      break;
    }
    case InterpolationMode::kDirect:
      break;
  }
  return out;
}

}  // namespace ahb

#endif  // AHB_INTERPOLATION_HPP_
