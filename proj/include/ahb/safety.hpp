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

// Setpoint-level safety filter: 100 ms trajectory extension so that late
// actions never leave the controller without a reference, and an IK-based
// height correction that keeps the mallet on the table plane.

#ifndef AHB_SAFETY_HPP_
#define AHB_SAFETY_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "ahb/common.hpp"
#include "ahb/interpolation.hpp"
#include "ahb/kinematics.hpp"
#include "ahb/table.hpp"

namespace ahb {

inline constexpr int kSafetyHorizonMs = 100;

// Samples at t = 1..100 ms. The first 20 ms are a cubic Hermite segment from
// the current state to the action; the rest extrapolates at the action's
// velocity.
inline std::vector<Setpoint> safety_extend_trajectory(const Setpoint& current,
                                                      const Setpoint& action) {
  Setpoint start = current;
  start.qddot.setZero();
  std::vector<Setpoint> out = interpolate_command(
      start, Command::pos_vel(action.q, action.qdot,
                              InterpolationMode::kPosVelCubic));
  out.reserve(kSafetyHorizonMs);
  for (int k = kSubsteps + 1; k <= kSafetyHorizonMs; ++k) {
    Setpoint s;
    s.q = action.q + action.qdot * ((k - kSubsteps) * kSimDt);
    s.qdot = action.qdot;
    s.qddot.setZero();
    out.push_back(s);
  }
  return out;
}

// Executes the extended trajectory one millisecond at a time. A new action
// replaces whatever tail is left, starting from the last executed sample.
class SetpointBuffer {
 public:
  explicit SetpointBuffer(const Setpoint& initial) : last_(initial) {}

  void replace(const Setpoint& action) {
    trajectory_ = safety_extend_trajectory(last_, action);
    cursor_ = 0;
  }

  const Setpoint& next() {
    if (cursor_ < trajectory_.size()) {
      last_ = trajectory_[cursor_++];
    } else {
      last_.qdot.setZero();
      last_.qddot.setZero();
    }
    return last_;
  }

  const Setpoint& last() const { return last_; }
  std::size_t remaining() const { return trajectory_.size() - cursor_; }

 private:
  std::vector<Setpoint> trajectory_;
  std::size_t cursor_ = 0;
  Setpoint last_;
};

struct HeightCorrectionOptions {
  double band = 0.02;
  double tolerance = 1e-6;
  int max_iterations = 10;
  // Duration over which the correction has to be realised (one control tick).
  double dt = kControlDt;
  IkOptions ik;
};

struct HeightCorrection {
  Command cmd;
  bool unsafe = false;
  bool corrected = false;
};

// Pulls the commanded end-effector height back to z_table. The total joint
// change is limited to qdot_limit * dt per joint; if the residual error still
// lies outside the band the command is flagged unsafe.
inline HeightCorrection safety_height_correct(
    const RobotSpec& spec, const JointVector& q, const Command& cmd,
    const TableGeometry& geom, const HeightCorrectionOptions& opt = {}) {
  (void)q;
  HeightCorrection out{cmd, false, false};
  if (cmd.mode == InterpolationMode::kDirect) return out;

  JointVector qc = cmd.q_des;
  double err = geom.z_table - forward_kinematics(spec, qc).ee.z();
  if (std::abs(err) <= opt.tolerance) return out;

  const JointVector budget = spec.qdot_limit * opt.dt;
  for (int it = 0; it < opt.max_iterations && std::abs(err) > opt.tolerance;
       ++it) {
    const IkStep step = ik_step(spec, qc, Vec3(0.0, 0.0, err), opt.dt, opt.ik);
    JointVector delta = qc + step.dq - cmd.q_des;
    delta = delta.cwiseMax(-budget).cwiseMin(budget);
    const JointVector next = cmd.q_des + delta;
    if (next == qc) break;
    qc = next;
    err = geom.z_table - forward_kinematics(spec, qc).ee.z();
  }
  out.cmd.q_des = qc;
  out.corrected = true;
  out.unsafe = std::abs(err) > opt.band;
  return out;
}

}  // namespace ahb

#endif  // AHB_SAFETY_HPP_
