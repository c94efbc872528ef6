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

// Umbrella header.

#ifndef AHB_AHB_HPP_
#define AHB_AHB_HPP_

#include "ahb/agents.hpp"
#include "ahb/arm_tracking.hpp"
#include "ahb/common.hpp"
#include "ahb/harness.hpp"
#include "ahb/interpolation.hpp"
#include "ahb/kalman.hpp"
#include "ahb/kinematics.hpp"
#include "ahb/learning.hpp"
#include "ahb/metrics.hpp"
#include "ahb/noise.hpp"
#include "ahb/planning.hpp"
#include "ahb/policies.hpp"
#include "ahb/puck_model.hpp"
#include "ahb/puck_physics.hpp"
#include "ahb/report.hpp"
#include "ahb/safety.hpp"
#include "ahb/table.hpp"
#include "ahb/world.hpp"

#endif  // AHB_AHB_HPP_
