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

// Constant-velocity Kalman filter over the planar puck state (x, y, vx, vy).

#ifndef AHB_KALMAN_HPP_
#define AHB_KALMAN_HPP_

#include <optional>
#include <stdexcept>
#include <string>

#include "ahb/common.hpp"

namespace ahb {

// Rejects matrices that are not symmetric positive semi-definite.
inline void require_psd(const Mat4& p, const char* what) {
  if (!p.allFinite()) throw std::invalid_argument(std::string(what) + ": not finite");
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + p.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string(what) + ": not symmetric");
  const Eigen::SelfAdjointEigenSolver<Mat4> eig(p);
  if (eig.eigenvalues()(0) < -1e-10)
    throw std::invalid_argument(std::string(what) + ": not positive semi-definite");
}

inline Mat4 symmetrize(const Mat4& p) { return 0.5 * (p + p.transpose()); }

struct KalmanState {
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  // White-acceleration intensity of the process (m/s^2) and position
  // measurement covariance (m^2).
  double accel_std = 4.0;
  Eigen::Matrix2d meas_cov = Eigen::Matrix2d::Identity() * 0.003 * 0.003;
};

inline Mat4 cv_transition(double dt) {
  Mat4 f = Mat4::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

inline Mat4 cv_process_noise(double accel_std, double dt) {
  const double q = accel_std * accel_std;
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  Mat4 m = Mat4::Zero();
  for (int a = 0; a < 2; ++a) {
    m(a, a) = q * dt4 / 4.0;
    m(a, a + 2) = m(a + 2, a) = q * dt3 / 2.0;
    m(a + 2, a + 2) = q * dt2;
  }
  return m;
}

// Predict, then update with z when present. Without z (tracking loss) only
// the prediction is applied.
inline KalmanState kalman_step(const KalmanState& kf,
                               const std::optional<Vec2>& z, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("kalman_step: dt must be positive");
  require_psd(kf.cov, "kalman covariance");
  KalmanState out = kf;
  const Mat4 f = cv_transition(dt);
  out.mean = f * kf.mean;
  out.cov = symmetrize(f * kf.cov * f.transpose() + cv_process_noise(kf.accel_std, dt));
  if (!z) return out;

  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Eigen::Matrix2d s = h * out.cov * h.transpose() + kf.meas_cov;
  const Eigen::Matrix<double, 4, 2> k =
      out.cov * h.transpose() * s.inverse();
  out.mean += k * (*z - h * out.mean);
  // Joseph form keeps the covariance PSD.
  const Mat4 ikh = Mat4::Identity() - k * h;
  out.cov = symmetrize(ikh * out.cov * ikh.transpose() +
                       k * kf.meas_cov * k.transpose());
  return out;
}

}  // namespace ahb

#endif  // AHB_KALMAN_HPP_
