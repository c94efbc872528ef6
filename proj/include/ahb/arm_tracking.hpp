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


#ifndef AHB_ARM_TRACKING_HPP_
#define AHB_ARM_TRACKING_HPP_

#include <cmath>
#include <stdexcept>
#include <utility>

#include "ahb/common.hpp"

namespace ahb {

enum class TrackingMode { kIdeal, kFirstOrderLag };

// Setpoint-level model of the joint controller. In lag mode each joint
// relaxes toward anchor + gain_scale * (q_s - anchor) with time constant tau.
struct ArmTrackingModel {
  TrackingMode mode = TrackingMode::kIdeal;
  double tau = 0.02;
  double gain_scale = 1.0;
  JointVector anchor = JointVector::Zero();

  void validate() const {
    if (mode == TrackingMode::kFirstOrderLag && !(tau > 0.0))
      throw ConfigError("arm tracking: tau must be positive in lag mode");
    if (!(gain_scale > 0.0))
      throw ConfigError("arm tracking: gain_scale must be positive");
  }
};

struct ArmState {
  JointVector q = JointVector::Zero();
  JointVector qdot = JointVector::Zero();
};

inline ArmState step_arm(const ArmTrackingModel& model, const JointVector& q,
                         const JointVector& qdot, const JointVector& q_s,
                         const JointVector& qdot_s, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_arm: dt must be positive");
  (void)qdot;
  if (model.mode == TrackingMode::kIdeal) return {q_s, qdot_s};
  const JointVector target = model.anchor + model.gain_scale * (q_s - model.anchor);
  const double alpha = 1.0 - std::exp(-dt / model.tau);
  const JointVector q_next = q + alpha * (target - q);
  return {q_next, (q_next - q) / dt};
}

}  // namespace ahb

#endif  // AHB_ARM_TRACKING_HPP_
