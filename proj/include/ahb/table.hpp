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

#ifndef AHB_TABLE_HPP_
#define AHB_TABLE_HPP_

#include <cmath>

#include "ahb/common.hpp"

namespace ahb {

// Table frame: origin at the center of the own goal line, +x toward the
// opponent goal, y centered, z up. Defaults follow the public challenge
// documentation.
struct TableGeometry {
  double length = 1.948;
  double width = 1.038;
  double goal_width = 0.25;
  double z_table = 0.1645;
  double puck_radius = 0.03165;
  double mallet_radius = 0.04815;
  // End-effector workspace bounds: l_x < x_ee, l_y < y_ee < u_y.
  double l_x = 0.04815;
  double l_y = -(1.038 / 2.0 - 0.04815);
  double u_y = 1.038 / 2.0 - 0.04815;

  double half_width() const { return width / 2.0; }
  double center_x() const { return length / 2.0; }
  double diagonal() const { return std::hypot(length, width); }

  // Limits of the puck center.
  double puck_x_min() const { return puck_radius; }
  double puck_x_max() const { return length - puck_radius; }
  double puck_y_max() const { return half_width() - puck_radius; }

  bool in_goal_mouth(double y) const { return std::abs(y) < goal_width / 2.0; }

  // Table-centered x used by several published controllers and rewards.
  double centered_x(double x) const { return x - center_x(); }

  void validate() const {
    if (!(length > 0 && width > 0 && goal_width > 0 && z_table > 0 &&
          puck_radius > 0 && mallet_radius > 0))
      throw ConfigError("table geometry: dimensions must be positive");
    if (!(goal_width < width))
      throw ConfigError("table geometry: goal wider than table");
    if (!(l_y < u_y)) throw ConfigError("table geometry: l_y >= u_y");
  }
};

}  // namespace ahb

#endif  // AHB_TABLE_HPP_
