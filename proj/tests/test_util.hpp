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

#ifndef AHB_TESTS_TEST_UTIL_HPP_
#define AHB_TESTS_TEST_UTIL_HPP_

#include "ahb/common.hpp"
#include "ahb/kinematics.hpp"

namespace ahb::testing {

inline JointVector random_config(const RobotSpec& s, Rng& rng,
                                 double shrink = 0.9) {
  JointVector q;
  for (int i = 0; i < kNumJoints; ++i)
    q[i] = shrink * rng.uniform(s.q_lower[i], s.q_upper[i]);
  return q;
}

// Planar chain in the base x-y plane: joint 0 at the base, joint 1 at
// (l1, 0, 0), joints 2..6 stacked on joint 1, tool at l2 beyond.
inline RobotSpec planar_two_link(double l1, double l2) {
  RobotSpec s = iiwa14_spec();
  for (auto& f : s.chain) f = JointFrame{};
  s.chain[1].origin_xyz = Vec3(l1, 0.0, 0.0);
  s.tool_offset = Vec3(l2, 0.0, 0.0);
  s.base_pose = RigidTransform{};
  s.q_init.setZero();
  return s;
}

}  // namespace ahb::testing

#endif  // AHB_TESTS_TEST_UTIL_HPP_
