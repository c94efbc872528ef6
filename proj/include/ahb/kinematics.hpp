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

// Position-level kinematics of the 7-DoF striker arm.
//
// The chain is a list of revolute joints. Each joint frame is reached from the
// previous one by a fixed origin transform (translation followed by
// roll-pitch-yaw rotation) and then rotated about its local axis by q_i. The
// end-effector sits at a fixed tool offset in the last joint frame. The
// default chain encodes the KUKA LBR iiwa 14 Denavit-Hartenberg table plus a
// 0.54 m striker rod, mounted so that the table center lies 1.51 m in front
// of the robot base.

#ifndef AHB_KINEMATICS_HPP_
#define AHB_KINEMATICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "ahb/common.hpp"

namespace ahb {

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }

  RigidTransform compose(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  static RigidTransform from_xyz_rpy(const Vec3& xyz, const Vec3& rpy) {
    RigidTransform t;
    t.rotation = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                  Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
    t.translation = xyz;
    return t;
  }

  static RigidTransform planar(double x, double y, double yaw) {
    return from_xyz_rpy(Vec3(x, y, 0.0), Vec3(0.0, 0.0, yaw));
  }
};

struct JointFrame {
  Vec3 origin_xyz = Vec3::Zero();
  Vec3 origin_rpy = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
};

struct RobotSpec {
  JointVector q_upper;
  JointVector q_lower;
  JointVector qdot_limit;
  JointVector q_init;
  std::array<JointFrame, kNumJoints> chain;
  Vec3 tool_offset = Vec3::Zero();
  // Pose of the robot base in the frame the caller works in.
  RigidTransform base_pose;
  // Joint whose origin is reported as the elbow / wrist point.
  int elbow_joint = 3;
  int wrist_joint = 5;

  // Throws ConfigError when the limit invariants do not hold.
  void validate() const {
    for (int i = 0; i < kNumJoints; ++i) {
      std::ostringstream where;
      where << "joint " << i + 1;
      if (!(q_lower[i] < q_upper[i]))
        throw ConfigError("robot spec: q_lower >= q_upper at " + where.str());
      if (!(qdot_limit[i] > 0.0))
        throw ConfigError("robot spec: non-positive velocity limit at " +
                          where.str());
      if (q_init[i] < q_lower[i] || q_init[i] > q_upper[i])
        throw ConfigError("robot spec: q_init outside limits at " +
                          where.str());
      if (std::abs(chain[i].axis.norm() - 1.0) > 1e-9)
        throw ConfigError("robot spec: joint axis not unit length at " +
                          where.str());
    }
    if (elbow_joint < 0 || elbow_joint >= kNumJoints || wrist_joint < 0 ||
        wrist_joint >= kNumJoints)
      throw ConfigError("robot spec: elbow/wrist joint index out of range");
  }
};

// Joint limits and home posture of the challenge arm.
inline RobotSpec iiwa14_spec() {
  RobotSpec s;
  s.q_upper << 2.967, 2.09, 2.967, 2.094, 2.967, 2.094, 3.054;
  s.q_lower << -2.967, -2.094, -2.967, -2.094, -2.967, -2.094, -3.054;
  s.qdot_limit << 1.483, 1.483, 1.745, 1.308, 2.268, 2.356, 2.356;
  s.q_init << 0.0, -0.1960, 0.0, -1.8436, 0.0, 0.9704, 0.0;

  constexpr std::array<double, kNumJoints> d = {0.36, 0.0, 0.42, 0.0,
                                                0.4,  0.0, 0.126};
  constexpr double h = kPi / 2.0;
  constexpr std::array<double, kNumJoints> alpha = {-h, h, h, -h, -h, h, 0.0};
  for (int i = 0; i < kNumJoints; ++i) {
    JointFrame& f = s.chain[i];
    if (i > 0) {
      f.origin_xyz = Vec3(0.0, 0.0, d[i - 1]);
      f.origin_rpy = Vec3(alpha[i - 1], 0.0, 0.0);
    }
    f.axis = Vec3::UnitZ();
  }
  constexpr double kStrikerLength = 0.54;
  s.tool_offset = Vec3(0.0, 0.0, d[6] + kStrikerLength);
  // Robot base sits 1.51 m behind the table center; the world origin is the
  // center of the own goal line (table length 1.948 m).
  s.base_pose.translation = Vec3(1.948 / 2.0 - 1.51, 0.0, 0.0);
  return s;
}

struct FramePoses {
  Vec3 ee = Vec3::Zero();
  double elbow_z = 0.0;
  double wrist_z = 0.0;
};

namespace detail {

struct ChainState {
  std::array<Vec3, kNumJoints> joint_pos;
  std::array<Vec3, kNumJoints> joint_axis;
  Vec3 ee;
};

inline ChainState evaluate_chain(const RobotSpec& spec, const JointVector& q) {
  ChainState out;
  RigidTransform t = spec.base_pose;
  for (int i = 0; i < kNumJoints; ++i) {
    const JointFrame& f = spec.chain[i];
    t = t.compose(RigidTransform::from_xyz_rpy(f.origin_xyz, f.origin_rpy));
    out.joint_pos[i] = t.translation;
    out.joint_axis[i] = t.rotation * f.axis;
    RigidTransform rot;
    rot.rotation = Eigen::AngleAxisd(q[i], f.axis).toRotationMatrix();
    t = t.compose(rot);
  }
  out.ee = t.apply(spec.tool_offset);
  return out;
}

}  // namespace detail

inline FramePoses forward_kinematics(const RobotSpec& spec,
                                     const JointVector& q) {
  const detail::ChainState c = detail::evaluate_chain(spec, q);
  FramePoses p;
  p.ee = c.ee;
  p.elbow_z = c.joint_pos[spec.elbow_joint].z();
  p.wrist_z = c.joint_pos[spec.wrist_joint].z();
  return p;
}

// Linear-velocity Jacobian of the end-effector point.
inline Jacobian jacobian(const RobotSpec& spec, const JointVector& q) {
  const detail::ChainState c = detail::evaluate_chain(spec, q);
  Jacobian j;
  for (int i = 0; i < kNumJoints; ++i)
    j.col(i) = c.joint_axis[i].cross(c.ee - c.joint_pos[i]);
  return j;
}

struct IkOptions {
  double damping = 1e-3;
  double z_weight = 10.0;
  // Smallest singular value of the weighted Jacobian below which the step is
  // reported as degenerate.
  double singular_threshold = 1e-4;
};

struct IkStep {
  JointVector dq = JointVector::Zero();
  bool degenerate = false;
  // True when the raw solution was scaled down to meet the velocity limits.
  bool saturated = false;
};

// Damped, z-weighted least-squares step toward an end-effector displacement
// dx. The result is uniformly scaled so that |dq_i| <= qdot_limit_i * dt; the
// binding joint lands on its limit exactly.
inline IkStep ik_step(const RobotSpec& spec, const JointVector& q,
                      const Vec3& dx, double dt, const IkOptions& opt = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("ik_step: dt must be positive");
  if (!(opt.z_weight >= 1.0))
    throw std::invalid_argument("ik_step: z_weight must be >= 1");
  IkStep out;
  if (dx.isZero(0.0)) return out;

  const Jacobian j = jacobian(spec, q);
  const Vec3 w(1.0, 1.0, opt.z_weight);
  const Jacobian jw = w.asDiagonal() * j;
  const Vec3 dxw = w.asDiagonal() * dx;

  // Smallest singular value of J from the eigenvalues of J J^T.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(j * j.transpose());
  const double sigma_min = std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
  out.degenerate = sigma_min < opt.singular_threshold;

  // (Jw^T Jw + lambda I)^-1 Jw^T dxw, solved in the 3x3 task space.
  const Eigen::Matrix3d gram =
      jw * jw.transpose() + opt.damping * Eigen::Matrix3d::Identity();
  out.dq = jw.transpose() * gram.ldlt().solve(dxw);

  double scale = 1.0;
  int binding = -1;
  for (int i = 0; i < kNumJoints; ++i) {
    const double cap = spec.qdot_limit[i] * dt;
    const double mag = std::abs(out.dq[i]);
    if (mag > cap && cap / mag < scale) {
      scale = cap / mag;
      binding = i;
    }
  }
  if (binding >= 0) {
    out.saturated = true;
    const double cap = spec.qdot_limit[binding] * dt;
    const bool negative = out.dq[binding] < 0.0;
    out.dq *= scale;
    for (int i = 0; i < kNumJoints; ++i) {
      const double c = spec.qdot_limit[i] * dt;
      out.dq[i] = std::clamp(out.dq[i], -c, c);
    }
    out.dq[binding] = negative ? -cap : cap;
  }
  return out;
}

struct ClampedCommand {
  JointVector q;
  JointVector qdot;
  bool clipped = false;
};

inline ClampedCommand clamp_joint_command(const RobotSpec& spec,
                                          const JointVector& q_cmd,
                                          const JointVector& qdot_cmd) {
  ClampedCommand out{q_cmd, qdot_cmd, false};
  for (int i = 0; i < kNumJoints; ++i) {
    out.q[i] = std::clamp(q_cmd[i], spec.q_lower[i], spec.q_upper[i]);
    out.qdot[i] =
        std::clamp(qdot_cmd[i], -spec.qdot_limit[i], spec.qdot_limit[i]);
  }
  out.clipped = out.q != q_cmd || out.qdot != qdot_cmd;
  return out;
}

}  // namespace ahb

#endif  // AHB_KINEMATICS_HPP_
