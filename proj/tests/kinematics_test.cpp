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

#include <gtest/gtest.h>

#include "ahb/kinematics.hpp"
#include "ahb/table.hpp"
#include "test_util.hpp"

namespace ahb {
namespace {

using testing::planar_two_link;
using testing::random_config;

TEST(ForwardKinematics, InitialPostureOnTablePlane) {
  const RobotSpec s = iiwa14_spec();
  const FramePoses p = forward_kinematics(s, s.q_init);
  EXPECT_NEAR(p.ee.z(), TableGeometry{}.z_table, 0.02);
  EXPECT_NEAR(p.ee.y(), 0.0, 1e-9);
  EXPECT_GT(p.ee.x(), 0.0);
  EXPECT_GT(p.elbow_z, 0.25);
  EXPECT_GT(p.wrist_z, 0.25);
}

TEST(ForwardKinematics, SingleStraightLink) {
  RobotSpec s = planar_two_link(0.0, 0.7);
  s.base_pose.translation = Vec3(0.1, -0.2, 0.3);
  const FramePoses p = forward_kinematics(s, JointVector::Zero());
  EXPECT_NEAR((p.ee - Vec3(0.8, -0.2, 0.3)).norm(), 0.0, 1e-15);
}

TEST(ForwardKinematics, Deterministic) {
  const RobotSpec s = iiwa14_spec();
  Rng rng(7);
  const JointVector q = random_config(s, rng);
  const FramePoses a = forward_kinematics(s, q);
  const FramePoses b = forward_kinematics(s, q);
  EXPECT_EQ(a.ee, b.ee);
  EXPECT_EQ(a.elbow_z, b.elbow_z);
  EXPECT_EQ(a.wrist_z, b.wrist_z);
}

TEST(Jacobian, MatchesCentralDifferences) {
  const RobotSpec s = iiwa14_spec();
  Rng rng(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const JointVector q = random_config(s, rng);
    const Jacobian j = jacobian(s, q);
    for (int i = 0; i < kNumJoints; ++i) {
      JointVector qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Vec3 fd = (forward_kinematics(s, qp).ee -
                       forward_kinematics(s, qm).ee) / (2.0 * h);
      const double scale = std::max(j.col(i).norm(), 1e-3);
      EXPECT_LE((fd - j.col(i)).norm() / scale, 1e-6)
          << "trial " << trial << " joint " << i;
    }
  }
}

TEST(Jacobian, PlanarTwoLinkClosedForm) {
  const RobotSpec s = planar_two_link(0.5, 0.3);
  const Jacobian j = jacobian(s, JointVector::Zero());
  EXPECT_NEAR(j(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(j(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(j(1, 0), 0.8, 1e-15);
  EXPECT_NEAR(j(1, 1), 0.3, 1e-15);
  EXPECT_NEAR(j.row(2).norm(), 0.0, 1e-15);
}

TEST(Jacobian, ScalesWithGeometry) {
  const Jacobian a = jacobian(planar_two_link(0.5, 0.3), JointVector::Constant(0.2));
  const Jacobian b = jacobian(planar_two_link(1.0, 0.6), JointVector::Constant(0.2));
  EXPECT_LE((b - 2.0 * a).norm(), 1e-12);
}

TEST(IkStep, ZeroDisplacement) {
  const RobotSpec s = iiwa14_spec();
  const IkStep st = ik_step(s, s.q_init, Vec3::Zero(), 0.02);
  EXPECT_EQ(st.dq, JointVector::Zero());
}

TEST(IkStep, SmallReachableDisplacement) {
  const RobotSpec s = iiwa14_spec();
  const Vec3 dx(0.01, -0.005, 0.0);
  const IkStep st = ik_step(s, s.q_init, dx, 0.02);
  EXPECT_FALSE(st.saturated);
  const Vec3 target = forward_kinematics(s, s.q_init).ee + dx;
  EXPECT_LE((forward_kinematics(s, s.q_init + st.dq).ee - target).norm(),
            0.05 * dx.norm());
}

TEST(IkStep, OverspeedHitsLimitExactly) {
  const RobotSpec s = iiwa14_spec();
  const double dt = 0.02;
  const IkStep st = ik_step(s, s.q_init, Vec3(0.5, 0.3, 0.0), dt);
  EXPECT_TRUE(st.saturated);
  bool exact = false;
  for (int i = 0; i < kNumJoints; ++i) {
    EXPECT_LE(std::abs(st.dq[i]), s.qdot_limit[i] * dt);
    exact = exact || std::abs(st.dq[i]) == s.qdot_limit[i] * dt;
  }
  EXPECT_TRUE(exact);
}

TEST(IkStep, NeverExceedsVelocityLimits) {
  const RobotSpec s = iiwa14_spec();
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const JointVector q = random_config(s, rng);
    const Vec3 dx(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double dt = rng.uniform(0.001, 0.05);
    const IkStep st = ik_step(s, q, dx, dt);
    ASSERT_TRUE(st.dq.allFinite());
    for (int i = 0; i < kNumJoints; ++i)
      ASSERT_LE(std::abs(st.dq[i]), s.qdot_limit[i] * dt);
  }
}

TEST(IkStep, SingularConfigurationIsDampedAndFlagged) {
  const RobotSpec s = iiwa14_spec();
  // Fully stretched arm pointing straight up.
  const IkStep st = ik_step(s, JointVector::Zero(), Vec3(0.0, 0.0, 0.1), 0.02);
  EXPECT_TRUE(st.degenerate);
  EXPECT_TRUE(st.dq.allFinite());
}

TEST(IkStep, RejectsBadArguments) {
  const RobotSpec s = iiwa14_spec();
  EXPECT_THROW(ik_step(s, s.q_init, Vec3::UnitX(), 0.0), std::invalid_argument);
  IkOptions o;
  o.z_weight = 0.5;
  EXPECT_THROW(ik_step(s, s.q_init, Vec3::UnitX(), 0.02, o),
               std::invalid_argument);
}

TEST(ClampJointCommand, InLimitIsIdentity) {
  const RobotSpec s = iiwa14_spec();
  const ClampedCommand c =
      clamp_joint_command(s, s.q_init, JointVector::Constant(0.1));
  EXPECT_FALSE(c.clipped);
  EXPECT_EQ(c.q, s.q_init);
}

TEST(ClampJointCommand, ClipsPositionAndVelocity) {
  const RobotSpec s = iiwa14_spec();
  JointVector q = s.q_init;
  q[0] = 3.1;
  const ClampedCommand c = clamp_joint_command(s, q, 2.0 * s.qdot_limit);
  EXPECT_TRUE(c.clipped);
  EXPECT_EQ(c.q[0], 2.967);
  EXPECT_EQ(c.qdot, s.qdot_limit);
}

TEST(RobotSpec, ValidateRejectsBrokenLimits) {
  RobotSpec s = iiwa14_spec();
  EXPECT_NO_THROW(s.validate());
  s.q_lower[2] = s.q_upper[2];
  EXPECT_THROW(s.validate(), ConfigError);
  s = iiwa14_spec();
  s.qdot_limit[4] = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = iiwa14_spec();
  s.q_init[1] = 3.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

}  // namespace
}  // namespace ahb
