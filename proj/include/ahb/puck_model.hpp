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

// Piecewise-linear stochastic puck model with three contact modes (free,
// wall, mallet) and a mode-switching EKF used for prediction.
//
// Each mode's (A, B, Sigma) act in a mode-local frame: the table frame for
// free sliding, a frame aligned with the wall (tangent, outward normal; the
// normal coordinate measured from the contact line) for wall contact, and a
// frame aligned with the contact normal (origin on the contact circle) for
// mallet contact. This way one matrix triple covers all four walls and any
// contact direction.

#ifndef AHB_PUCK_MODEL_HPP_
#define AHB_PUCK_MODEL_HPP_

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ahb/common.hpp"
#include "ahb/kalman.hpp"
#include "ahb/puck_physics.hpp"
#include "ahb/table.hpp"

namespace ahb {

enum class ContactMode { kFree = 0, kWall = 1, kMallet = 2 };
inline constexpr std::array<ContactMode, 3> kAllModes = {
    ContactMode::kFree, ContactMode::kWall, ContactMode::kMallet};

inline std::string_view to_string(ContactMode m) {
  switch (m) {
    case ContactMode::kFree: return "free";
    case ContactMode::kWall: return "wall";
    case ContactMode::kMallet: return "mallet";
  }
  return "unknown";
}

inline ContactMode contact_mode_from_string(std::string_view s) {
  for (ContactMode m : kAllModes)
    if (to_string(m) == s) return m;
  throw IoError("unknown contact mode: " + std::string(s));
}

inline constexpr double kContactMargin = 0.005;

// Positional classification; mallet contact takes precedence over walls.
inline ContactMode classify_contact_mode(const Vec2& puck,
                                         std::span<const MalletState> mallets,
                                         const TableGeometry& g,
                                         double margin = kContactMargin) {
  const double reach = g.puck_radius + g.mallet_radius + margin;
  for (const MalletState& m : mallets)
    if (m.active && (puck - m.pos).norm() <= reach) return ContactMode::kMallet;
  if (std::abs(puck.y()) >= g.puck_y_max() - margin) return ContactMode::kWall;
  const bool near_end =
      puck.x() <= g.puck_x_min() + margin || puck.x() >= g.puck_x_max() - margin;
  if (near_end && !g.in_goal_mouth(puck.y())) return ContactMode::kWall;
  return ContactMode::kFree;
}

struct LinearMode {
  Mat4 A = Mat4::Identity();
  Mat4 B = Mat4::Zero();
  Mat4 Sigma = Mat4::Zero();
};

struct PiecewiseLinearPuckModel {
  double dt = 0.005;
  std::array<LinearMode, 3> modes;

  const LinearMode& mode(ContactMode m) const {
    return modes[static_cast<int>(m)];
  }
  LinearMode& mode(ContactMode m) { return modes[static_cast<int>(m)]; }

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("puck model: dt must be positive");
    for (ContactMode m : kAllModes) {
      const LinearMode& lm = mode(m);
      if (!lm.A.allFinite() || !lm.B.allFinite())
        throw ConfigError("puck model: non-finite matrices in mode " +
                          std::string(to_string(m)));
      require_psd(lm.Sigma, "puck model Sigma");
    }
  }
};

// State vectors are (x, y, vx, vy).
inline Vec4 puck_vector(const PuckState& p) { return {p.x, p.y, p.vx, p.vy}; }
inline Vec4 mallet_vector(const MalletState& m) {
  return {m.pos.x(), m.pos.y(), m.vel.x(), m.vel.y()};
}

// Rigid change of coordinates into a mode-local frame: the local position is
// rot * p - offset, the local velocity rot * v. Rows of rot are (tangent,
// normal) with tangent = (n_y, -n_x).
struct LocalFrame {
  Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
  Vec2 offset = Vec2::Zero();

  static LocalFrame from_normal(const Vec2& n, const Vec2& offset) {
    LocalFrame f;
    f.rot << n.y(), -n.x(), n.x(), n.y();
    f.offset = offset;
    return f;
  }
  Mat4 T() const {
    Mat4 t = Mat4::Zero();
    t.topLeftCorner<2, 2>() = rot;
    t.bottomRightCorner<2, 2>() = rot;
    return t;
  }
  Vec4 to_local(const Vec4& s) const {
    Vec4 o;
    o.head<2>() = rot * s.head<2>() - offset;
    o.tail<2>() = rot * s.tail<2>();
    return o;
  }
  Vec4 from_local(const Vec4& s) const {
    Vec4 o;
    o.head<2>() = rot.transpose() * (s.head<2>() + offset);
    o.tail<2>() = rot.transpose() * s.tail<2>();
    return o;
  }
  // Mallet states only carry velocity information in the local frame.
  Vec4 mallet_to_local(const Vec4& m) const {
    Vec4 o = Vec4::Zero();
    o.tail<2>() = rot * m.tail<2>();
    return o;
  }
};

struct Wall {
  Vec2 normal;
  double limit;  // n . p at the contact line
};

inline std::array<Wall, 4> table_walls(const TableGeometry& g) {
  return {{{Vec2(0.0, 1.0), g.puck_y_max()},
           {Vec2(0.0, -1.0), g.puck_y_max()},
           {Vec2(1.0, 0.0), g.puck_x_max()},
           {Vec2(-1.0, 0.0), -g.puck_x_min()}}};
}

inline LocalFrame wall_frame(const Wall& w) {
  return LocalFrame::from_normal(w.normal, Vec2(0.0, w.limit));
}

inline LocalFrame mallet_frame(const Vec2& puck, const Vec2& mallet,
                               const TableGeometry& g,
                               const Vec2& fallback = Vec2::UnitX()) {
  Vec2 d = puck - mallet;
  const Vec2 n = d.norm() > 1e-12 ? Vec2(d.normalized()) : fallback;
  LocalFrame f = LocalFrame::from_normal(n, Vec2::Zero());
  f.offset = f.rot * mallet + Vec2(0.0, g.puck_radius + g.mallet_radius);
  return f;
}

struct ModeSelection {
  ContactMode mode = ContactMode::kFree;
  LocalFrame frame;
};

// Mode used for one prediction step: mallet contact when touching and
// approaching; a wall when the free step would carry the puck over its
// contact line (end walls are open across the goal mouth); else free.
inline ModeSelection select_rollout_mode(const Vec4& s,
                                         const std::optional<MalletState>& m,
                                         const TableGeometry& g, double dt,
                                         double margin = kContactMargin) {
  ModeSelection sel;
  const Vec2 p = s.head<2>(), v = s.tail<2>();
  if (m && m->active) {
    const Vec2 d = p - m->pos;
    const double reach = g.puck_radius + g.mallet_radius + margin;
    if (d.norm() <= reach && d.norm() > 1e-12 &&
        (v - m->vel).dot(d.normalized()) < 0.0) {
      sel.mode = ContactMode::kMallet;
      sel.frame = mallet_frame(p, m->pos, g);
      return sel;
    }
  }
  double best = 0.0;
  for (const Wall& w : table_walls(g)) {
    const double vn = w.normal.dot(v);
    if (vn <= 0.0) continue;
    const double after = w.normal.dot(p) + vn * dt - w.limit;
    if (after <= 0.0) continue;
    if (w.normal.x() != 0.0) {
      const double y_at = p.y() + v.y() * dt;
      if (g.in_goal_mouth(y_at)) continue;
    }
    if (after > best) {
      best = after;
      sel.mode = ContactMode::kWall;
      sel.frame = wall_frame(w);
    }
  }
  return sel;
}

struct EKFBelief {
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Zero();
  ContactMode mode = ContactMode::kFree;
};

inline EKFBelief ekf_predict(const PiecewiseLinearPuckModel& model,
                             const EKFBelief& b,
                             const std::optional<MalletState>& mallet,
                             const TableGeometry& g) {
  const ModeSelection sel = select_rollout_mode(b.mean, mallet, g, model.dt);
  const LinearMode& lm = model.mode(sel.mode);
  const Mat4 t = sel.frame.T();
  const Vec4 s_local = sel.frame.to_local(b.mean);
  const Vec4 m_local = mallet && mallet->active
                           ? sel.frame.mallet_to_local(mallet_vector(*mallet))
                           : Vec4::Zero();
  EKFBelief out;
  out.mode = sel.mode;
  out.mean = sel.frame.from_local(lm.A * s_local + lm.B * m_local);
  const Mat4 p_local = t * b.cov * t.transpose();
  out.cov = symmetrize(t.transpose() *
                       (lm.A * p_local * lm.A.transpose() + lm.Sigma) * t);
  return out;
}

// K prediction steps. The mallet plan supplies one state per step; the last
// entry is held when the plan is shorter, an empty plan means no mallet.
inline std::vector<EKFBelief> ekf_rollout(const PiecewiseLinearPuckModel& model,
                                          const EKFBelief& belief,
                                          std::span<const MalletState> plan,
                                          int steps, const TableGeometry& g) {
  if (steps < 1) throw std::invalid_argument("ekf_rollout: K must be >= 1");
  std::vector<EKFBelief> out;
  out.reserve(steps);
  EKFBelief b = belief;
  for (int k = 0; k < steps; ++k) {
    std::optional<MalletState> m;
    if (!plan.empty()) m = plan[std::min<std::size_t>(k, plan.size() - 1)];
    b = ekf_predict(model, b, m, g);
    out.push_back(b);
  }
  return out;
}

// Matrices implied by the simulator's own laws over one model step, with
// an isotropic velocity process noise.
inline PiecewiseLinearPuckModel analytic_puck_model(const PuckParams& params,
                                                    double dt,
                                                    double velocity_std = 0.0) {
  PiecewiseLinearPuckModel m;
  m.dt = dt;
  const double d = std::exp(-params.slide_friction * dt);
  // Displacement per unit velocity under the simulator's 1 ms semi-implicit
  // integration of the decay law.
  const int n = std::max(1, static_cast<int>(std::lround(dt / kSimDt)));
  const double h = dt / n, d1 = std::exp(-params.slide_friction * h);
  double c = 0.0;
  for (int k = 1; k <= n; ++k) c += h * std::pow(d1, k);
  const double ew = params.wall_restitution;
  const double em = params.mallet_restitution;
  Mat4 sigma = Mat4::Zero();
  const double var_v = velocity_std * velocity_std;
  sigma(2, 2) = sigma(3, 3) = var_v;
  sigma(0, 0) = sigma(1, 1) = var_v * dt * dt;
  sigma(0, 2) = sigma(2, 0) = sigma(1, 3) = sigma(3, 1) = var_v * dt;

  LinearMode& f = m.mode(ContactMode::kFree);
  f.A << 1, 0, c, 0, 0, 1, 0, c, 0, 0, d, 0, 0, 0, 0, d;
  f.Sigma = sigma;

  // Local state (t, w, v_t, v_n); w is the distance past the contact line.
  LinearMode& w = m.mode(ContactMode::kWall);
  w.A << 1, 0, c, 0, 0, -ew, 0, -ew * c, 0, 0, d, 0, 0, 0, 0, -ew * d;
  w.Sigma = sigma;

  // Local state (t, n - R, v_t, v_n); impulse then free flight from the
  // contact circle.
  LinearMode& ml = m.mode(ContactMode::kMallet);
  ml.A << 1, 0, c, 0, 0, 0, 0, -em * c, 0, 0, d, 0, 0, 0, 0, -em * d;
  ml.B.setZero();
  ml.B(1, 3) = (1.0 + em) * c;
  ml.B(3, 3) = (1.0 + em) * d;
  ml.Sigma = sigma;
  return m;
}

// ------------------------------------------------------------------ fitting

class ModelFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One transition expressed in its mode's local frame.
struct PuckTransition {
  Vec4 sp = Vec4::Zero();
  Vec4 sm = Vec4::Zero();
  Vec4 sp_next = Vec4::Zero();
  ContactMode mode = ContactMode::kFree;
};

inline constexpr int kMinSamplesPerMode = 20;

inline PiecewiseLinearPuckModel fit_piecewise_model(
    std::span<const PuckTransition> data, double dt) {
  PiecewiseLinearPuckModel model;
  model.dt = dt;
  for (ContactMode mode : kAllModes) {
    std::vector<const PuckTransition*> rows;
    for (const PuckTransition& t : data)
      if (t.mode == mode) rows.push_back(&t);
    const int n = static_cast<int>(rows.size());
    if (n < kMinSamplesPerMode)
      throw ModelFitError("fit_piecewise_model: mode '" +
                          std::string(to_string(mode)) + "' has " +
                          std::to_string(n) + " samples, need " +
                          std::to_string(kMinSamplesPerMode));
    Eigen::MatrixXd x(n, 8), y(n, 4);
    for (int i = 0; i < n; ++i) {
      x.row(i).head<4>() = rows[i]->sp.transpose();
      x.row(i).tail<4>() = rows[i]->sm.transpose();
      y.row(i) = rows[i]->sp_next.transpose();
    }
    // Minimum-norm least squares; columns that never vary get zero weight.
    const Eigen::MatrixXd w = x.completeOrthogonalDecomposition().solve(y);
    LinearMode& lm = model.mode(mode);
    lm.A = w.topRows<4>().transpose();
    lm.B = w.bottomRows<4>().transpose();
    const Eigen::MatrixXd r = y - x * w;
    const int rank = x.completeOrthogonalDecomposition().rank();
    const double dof = std::max(1, n - rank);
    lm.Sigma = symmetrize((r.transpose() * r) / dof);
  }
  return model;
}

// Simulates one model step of the ground-truth physics from a puck state and
// a mallet moving at constant velocity, returning the transition in the
// frame of the mode selected at its start.
inline PuckTransition simulate_transition(const PuckState& p,
                                          const MalletState& m,
                                          const PuckParams& params,
                                          const TableGeometry& g, double dt,
                                          Rng* rng) {
  const ModeSelection sel =
      select_rollout_mode(puck_vector(p), std::optional<MalletState>(m), g, dt);
  PuckState cur = p;
  MalletState mm = m;
  const int steps = std::max(1, static_cast<int>(std::lround(dt / kSimDt)));
  for (int k = 0; k < steps; ++k) {
    const std::array<MalletState, 1> ms = {mm};
    cur = step_puck(cur, ms, params, g, kSimDt, rng).puck;
    mm.pos += mm.vel * kSimDt;
  }
  PuckTransition t;
  t.mode = sel.mode;
  t.sp = sel.frame.to_local(puck_vector(p));
  t.sm = sel.frame.mallet_to_local(mallet_vector(m));
  t.sp_next = sel.frame.to_local(puck_vector(cur));
  return t;
}

// Draws transitions of all three modes from the simulator.
inline std::vector<PuckTransition> collect_puck_dataset(
    const PuckParams& params, const TableGeometry& g, double dt,
    int per_mode, Rng& rng) {
  std::vector<PuckTransition> out;
  std::array<int, 3> count = {0, 0, 0};
  const double R = g.puck_radius + g.mallet_radius;
  int guard = 0;
  while ((count[0] < per_mode || count[1] < per_mode || count[2] < per_mode) &&
         guard++ < 200 * per_mode) {
    const int want = (count[0] < per_mode) ? 0 : (count[1] < per_mode) ? 1 : 2;
    PuckState p;
    MalletState m;
    m.active = true;
    const double speed = rng.uniform(0.2, 3.0);
    const double dir = rng.uniform(-kPi, kPi);
    p.vx = speed * std::cos(dir);
    p.vy = speed * std::sin(dir);
    if (want == 0) {
      p.x = rng.uniform(0.3, g.length - 0.3);
      p.y = rng.uniform(-0.3, 0.3);
      m.pos = Vec2(-1.0, 0.0);
    } else if (want == 1) {
      const int side = rng.bernoulli(0.5) ? 1 : -1;
      p.x = rng.uniform(0.3, g.length - 0.3);
      p.y = side * (g.puck_y_max() - rng.uniform(0.0, 0.004));
      p.vy = side * std::abs(p.vy) + side * 0.5;
      m.pos = Vec2(-1.0, 0.0);
    } else {
      p.x = rng.uniform(0.4, g.length - 0.4);
      p.y = rng.uniform(-0.25, 0.25);
      const double a = rng.uniform(-kPi, kPi);
      const Vec2 n(std::cos(a), std::sin(a));
      m.pos = p.pos() - (R - rng.uniform(0.0, 0.002)) * n;
      m.vel = rng.uniform(0.0, 1.5) * n;
      p.set_vel(p.vel() - 1.5 * n);
    }
    const PuckTransition t = simulate_transition(p, m, params, g, dt, nullptr);
    if (static_cast<int>(t.mode) != want) continue;
    ++count[want];
    out.push_back(t);
  }
  return out;
}

// ------------------------------------------------------------------ file I/O

inline constexpr std::string_view kPuckModelMagic = "ahb-puck-model";
inline constexpr int kPuckModelVersion = 1;

inline void write_puck_model(std::ostream& os, const PiecewiseLinearPuckModel& m) {
  os << kPuckModelMagic << ' ' << kPuckModelVersion << '\n';
  os << std::setprecision(17);
  os << "dt " << m.dt << '\n';
  const auto dump = [&](const char* name, const Mat4& a) {
    os << name;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) os << ' ' << a(r, c);
    os << '\n';
  };
  for (ContactMode mode : kAllModes) {
    os << "mode " << to_string(mode) << '\n';
    dump("A", m.mode(mode).A);
    dump("B", m.mode(mode).B);
    dump("Sigma", m.mode(mode).Sigma);
  }
}

inline PiecewiseLinearPuckModel read_puck_model(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kPuckModelMagic)
    throw IoError("puck model: bad header");
  if (version != kPuckModelVersion)
    throw IoError("puck model: unsupported version " + std::to_string(version));
  PiecewiseLinearPuckModel m;
  std::string key;
  if (!(is >> key >> m.dt) || key != "dt") throw IoError("puck model: missing dt");
  std::array<bool, 3> seen = {false, false, false};
  for (int i = 0; i < 3; ++i) {
    std::string label;
    if (!(is >> key >> label) || key != "mode")
      throw IoError("puck model: expected mode line");
    const ContactMode mode = contact_mode_from_string(label);
    seen[static_cast<int>(mode)] = true;
    for (const char* name : {"A", "B", "Sigma"}) {
      if (!(is >> key) || key != name)
        throw IoError(std::string("puck model: expected ") + name);
      Mat4 a;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          if (!(is >> a(r, c))) throw IoError("puck model: truncated matrix");
      LinearMode& lm = m.mode(mode);
      (key == "A" ? lm.A : key == "B" ? lm.B : lm.Sigma) = a;
    }
  }
  if (!(seen[0] && seen[1] && seen[2])) throw IoError("puck model: missing mode");
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw IoError(std::string("puck model: ") + e.what());
  }
  return m;
}

inline void save_puck_model(const std::string& path,
                            const PiecewiseLinearPuckModel& m) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  write_puck_model(f, m);
  if (!f) throw IoError("write failed: " + path);
}

inline PiecewiseLinearPuckModel load_puck_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return read_puck_model(f);
}

}  // namespace ahb

#endif  // AHB_PUCK_MODEL_HPP_
