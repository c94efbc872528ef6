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

// Reward functions of the three learning-based entries, parameter-space
// optimizers (PGPE and CMA-ES), arm-tracking system identification and the
// staged curriculum sampler.

#ifndef AHB_LEARNING_HPP_
#define AHB_LEARNING_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ahb/arm_tracking.hpp"
#include "ahb/common.hpp"
#include "ahb/policies.hpp"
#include "ahb/table.hpp"

namespace ahb {

// Inputs of one reward evaluation, in the agent's table frame (own goal line
// at x = 0).
struct TransitionRecord {
  Vec2 puck_pos = Vec2::Zero();
  Vec2 puck_vel = Vec2::Zero();
  Vec2 ee_pos = Vec2::Zero();
  Vec2 ee_vel = Vec2::Zero();
  bool hit = false;          // mallet touched the puck during this step
  bool first_touch = false;  // first touch of the episode
  bool has_hit = false;      // a touch happened at an earlier step
  bool scored = false;
  bool conceded = false;
  bool fault = false;
  bool episode_end = false;
  int t = 0;
  int T = 0;

  void validate() const {
    if ((scored || conceded) && !episode_end)
      throw std::invalid_argument("transition: goal without episode end");
    if (first_touch && !hit)
      throw std::invalid_argument("transition: first touch without hit");
  }
};

namespace detail {

inline Vec2 unit_or_zero(const Vec2& v) {
  const double n = v.norm();
  return n > 0.0 ? Vec2(v / n) : Vec2::Zero();
}

// Reward for driving the end-effector toward a slow puck in the own half.
inline double approach_term(const Vec2& p, const Vec2& v_p, const Vec2& ee,
                            const Vec2& v_ee) {
  if (!(v_p.norm() < 0.25 && p.x() < 0.0)) return 0.0;
  return std::max(0.0, unit_or_zero(p - ee).dot(v_ee));
}

}  // namespace detail

// ------------------------------------------------ state-machine sub-agents

enum class AHRewardTask { kHit, kDefendSlow, kDefendFast, kPrepareClose, kPrepareFar };

inline AHRewardTask ah_reward_task_from_string(std::string_view s) {
  if (s == "hit") return AHRewardTask::kHit;
  if (s == "defend_slow") return AHRewardTask::kDefendSlow;
  if (s == "defend_fast") return AHRewardTask::kDefendFast;
  if (s == "prepare_close") return AHRewardTask::kPrepareClose;
  if (s == "prepare_far") return AHRewardTask::kPrepareFar;
  throw std::invalid_argument("unknown reward task '" + std::string(s) + "'");
}

// Positions are re-centered on the table middle before evaluation.
inline double reward_airhockit(AHRewardTask task, const TransitionRecord& tr,
                               const TableGeometry& g) {
  const Vec2 p(g.centered_x(tr.puck_pos.x()), tr.puck_pos.y());
  const Vec2 ee(g.centered_x(tr.ee_pos.x()), tr.ee_pos.y());
  const Vec2& v = tr.puck_vel;
  const double speed = v.norm();
  switch (task) {
    case AHRewardTask::kHit:
      if (tr.scored) return 2000.0 + 5000.0 * speed;
      if (tr.hit) return 10.0 * speed;
      return detail::approach_term(p, v, ee, tr.ee_vel);
    case AHRewardTask::kDefendSlow: {
      double r = 0.01;
      if (tr.first_touch && v.x() > -0.2) r = 30.0 + std::pow(100.0, 1.0 - 0.25 * speed);
      if (tr.t == tr.T && speed < 0.1 && p.x() > -0.7 && p.x() < -0.2) r += 70.0;
      return r;
    }
    case AHRewardTask::kDefendFast:
      return tr.conceded ? -100.0 : 0.0;
    case AHRewardTask::kPrepareClose: {
      const double prox = detail::approach_term(p, v, ee, tr.ee_vel);
      const bool success = speed < 0.5 && p.x() > -0.65 && p.x() < -0.35 &&
                           p.y() > -0.4 && p.y() < 0.4;
      const double bonus = success ? 2000.0 : 0.0;
      const Vec2 to_target = detail::unit_or_zero(Vec2(-0.5, 0.0) - p);
      return prox + bonus + 10.0 * std::max(0.0, std::min(0.5, to_target.dot(v)));
    }
    case AHRewardTask::kPrepareFar:
      if (speed < 0.25 && p.x() < 0.0) return detail::approach_term(p, v, ee, tr.ee_vel);
      if (p.x() > 0.2) return 3000.0;
      return 10.0 * speed;
  }
  throw std::invalid_argument("reward_airhockit: unknown task");
}

// --------------------------------------------------------- sparse rewards

enum class SparseEvent { kNone, kScore, kConcede, kOwnFault };

inline double reward_spacer(SparseEvent e, Strategy s) {
  switch (e) {
    case SparseEvent::kNone: return 0.0;
    case SparseEvent::kConcede: return -1.0;
    case SparseEvent::kOwnFault: return -1.0 / 3.0;
    case SparseEvent::kScore:
      switch (s) {
        case Strategy::kBalanced: return 2.0 / 3.0;
        case Strategy::kAggressive: return 1.0;
        case Strategy::kDefensive: return 0.0;
      }
  }
  return 0.0;
}

// ---------------------------------------------------------- triangle reward

struct TriangleRewardParams {
  double A = 100.0;
  double B = 10.0;
  double gamma = 0.99;
  double table_diag = std::hypot(1.948, 1.038);
  double max_vel = 3.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw ConfigError("triangle reward: gamma must lie in (0, 1)");
    if (!(table_diag > 0.0 && max_vel > 0.0))
      throw ConfigError("triangle reward: table_diag and max_vel must be > 0");
  }
};

// Puck position at the hit plus the two posts of the opponent goal.
struct HitTriangle {
  Vec2 apex = Vec2::Zero();
  Vec2 post_left = Vec2::Zero();
  Vec2 post_right = Vec2::Zero();

  static HitTriangle at_hit(const Vec2& puck, const TableGeometry& g) {
    return {puck, Vec2(g.length, g.goal_width / 2.0), Vec2(g.length, -g.goal_width / 2.0)};
  }

  double area() const {
    const Vec2 a = post_left - apex, b = post_right - apex;
    return 0.5 * std::abs(a.x() * b.y() - a.y() * b.x());
  }

  // Degenerate triangles (apex on the goal line) count as containing all.
  bool contains(const Vec2& p) const {
    if (area() < 1e-12) return true;
    const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
      return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    const double d1 = cross(apex, post_left, p);
    const double d2 = cross(post_left, post_right, p);
    const double d3 = cross(post_right, apex, p);
    const bool neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    const bool pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    return !(neg && pos);
  }

  // Angular gap (rad, >= 0) between a heading and the nearer of the two
  // apex-to-post borders.
  double diff_angle(const Vec2& v) const {
    const double heading = std::atan2(v.y(), v.x());
    const Vec2 l = post_left - apex, r = post_right - apex;
    const double dl = std::abs(wrap_angle(heading - std::atan2(l.y(), l.x())));
    const double dr = std::abs(wrap_angle(heading - std::atan2(r.y(), r.x())));
    return std::min(dl, dr);
  }
};

inline double reward_rl3_hit(const TransitionRecord& tr, const TriangleRewardParams& p,
                             const std::optional<HitTriangle>& triangle) {
  if (tr.scored) return 1.0 / (1.0 - p.gamma);
  if (tr.hit && !tr.has_hit) {
    const double alpha = std::atan2(tr.ee_vel.y(), tr.ee_vel.x());
    const double k = 2.0 * alpha / kPi;
    return p.A + p.B * (1.0 - k * k) * tr.ee_vel.norm() / p.max_vel;
  }
  if (tr.has_hit) {
    if (!triangle) throw std::invalid_argument("reward_rl3_hit: missing hit triangle");
    if (triangle->contains(tr.puck_pos)) return p.B + tr.puck_vel.norm();
    return -triangle->diff_angle(tr.puck_vel);
  }
  return -(tr.ee_pos - tr.puck_pos).norm() / (0.5 * p.table_diag);
}

// ------------------------------------------------------------------- PGPE

struct PGPEConfig {
  double alpha_mu = 0.2;
  double alpha_sigma = 0.1;
  double sigma_min = 1e-3;
};

struct PGPEState {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  double baseline = 0.0;
  PGPEConfig cfg;

  void validate() const {
    if (mu.size() != sigma.size() || mu.size() == 0)
      throw std::invalid_argument("pgpe: mu/sigma size mismatch");
    if ((sigma.array() <= 0.0).any())
      throw std::invalid_argument("pgpe: sigma must be positive");
  }
};

inline std::vector<Eigen::VectorXd> pgpe_sample(const PGPEState& s, int n, Rng& rng) {
  std::vector<Eigen::VectorXd> out(n, s.mu);
  for (auto& th : out)
    for (Eigen::Index i = 0; i < th.size(); ++i) th[i] += s.sigma[i] * rng.normal();
  return out;
}

// Baseline-subtracted likelihood-ratio step on mu and sigma. Returns are
// normalized by their spread so the step size is objective-scale free.
inline PGPEState pgpe_update(const PGPEState& s,
                             const std::vector<Eigen::VectorXd>& thetas,
                             const std::vector<double>& returns) {
  s.validate();
  if (thetas.size() < 2 || thetas.size() != returns.size())
    throw std::invalid_argument("pgpe_update: need >= 2 matching samples");
  const double n = static_cast<double>(returns.size());
  const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  PGPEState out = s;
  out.baseline = mean;
  // Spread at rounding level means all returns are equal: no gradient.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return out;

  Eigen::VectorXd g_mu = Eigen::VectorXd::Zero(s.mu.size());
  Eigen::VectorXd g_sigma = Eigen::VectorXd::Zero(s.mu.size());
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    const double a = (returns[k] - mean) / sd;
    const Eigen::VectorXd d = thetas[k] - s.mu;
    g_mu += a * d;
    g_sigma += a * ((d.array().square() - s.sigma.array().square()) / s.sigma.array()).matrix();
  }
  out.mu += s.cfg.alpha_mu * g_mu / n;
  out.sigma += s.cfg.alpha_sigma * g_sigma / n;
  out.sigma = out.sigma.cwiseMax(s.cfg.sigma_min);
  return out;
}

// ----------------------------------------------------------------- CMA-ES

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BlackboxConfig {
  double sigma0 = 0.5;
  // 0 selects the default 4 + floor(3 ln n).
  int population = 0;
};

struct OptimizerTraceRow {
  int iteration = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct BlackboxResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::quiet_NaN();
  int evaluations = 0;
  std::vector<OptimizerTraceRow> trace;
};

// Rank-based (mu/mu_w, lambda) evolution strategy with full covariance
// adaptation. Returns the best evaluated point; budget 0 returns x0.
inline BlackboxResult blackbox_fit(const Objective& f, const Eigen::VectorXd& x0,
                                   int budget, Rng& rng, const BlackboxConfig& cfg = {}) {
  BlackboxResult res;
  res.x = x0;
  if (budget <= 0) return res;
  if (!(cfg.sigma0 > 0.0)) throw ConfigError("blackbox_fit: sigma0 must be > 0");
  const int n = static_cast<int>(x0.size());
  if (n == 0) throw std::invalid_argument("blackbox_fit: empty x0");
  const int lambda = cfg.population > 0
                         ? cfg.population
                         : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  if (lambda < 2) throw ConfigError("blackbox_fit: population must be >= 2");
  const int mu = lambda / 2;
  Eigen::VectorXd w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();
  const double dn = static_cast<double>(n);
  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double c1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) /
                                            ((dn + 2.0) * (dn + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double chin = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  Eigen::VectorXd mean = x0, pc = Eigen::VectorXd::Zero(n), ps = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd B = C, invsqrtC = C;
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  double sigma = cfg.sigma0;
  res.f = std::numeric_limits<double>::infinity();

  for (int gen = 0; res.evaluations < budget; ++gen) {
    std::vector<Eigen::VectorXd> xs;
    std::vector<double> fs;
    for (int k = 0; k < lambda && res.evaluations < budget; ++k) {
      Eigen::VectorXd z(n);
      for (int i = 0; i < n; ++i) z[i] = rng.normal();
      Eigen::VectorXd x = mean + sigma * (B * D.asDiagonal() * z);
      const double fx = f(x);
      ++res.evaluations;
      if (fx < res.f) {
        res.f = fx;
        res.x = x;
      }
      xs.push_back(std::move(x));
      fs.push_back(fx);
    }
    const double gen_mean = std::accumulate(fs.begin(), fs.end(), 0.0) / fs.size();
    res.trace.push_back({gen, res.f, gen_mean});
    if (static_cast<int>(xs.size()) < lambda) break;

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    const Eigen::VectorXd old = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += w[i] * xs[order[i]];
    const Eigen::VectorXd step = (mean - old) / sigma;
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (invsqrtC * step);
    const double gen_count = gen + 1.0;
    const bool hsig = ps.norm() / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen_count)) / chin <
                      1.4 + 2.0 / (dn + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * step;
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const Eigen::VectorXd y = (xs[order[i]] - old) / sigma;
      rank_mu += w[i] * y * y.transpose();
    }
    C = (1.0 - c1 - cmu) * C +
        c1 * (pc * pc.transpose() + (hsig ? 0.0 : cc * (2.0 - cc)) * C) + cmu * rank_mu;
    sigma *= std::exp((cs / damps) * (ps.norm() / chin - 1.0));
    C = 0.5 * (C + C.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
    invsqrtC = B * D.cwiseInverse().asDiagonal() * B.transpose();
    if (!std::isfinite(sigma) || sigma < 1e-300) break;
  }
  return res;
}

// ------------------------------------------------- arm system identification

// Joint trajectory recorded while the controller tracked a setpoint
// sequence, sampled every dt.
struct ArmResponse {
  double dt = kSimDt;
  JointVector q0 = JointVector::Zero();
  std::vector<JointVector> setpoints;
  std::vector<JointVector> measured;

  void validate() const {
    if (setpoints.empty() || setpoints.size() != measured.size())
      throw std::invalid_argument("arm response: setpoint/measurement length mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("arm response: dt must be > 0");
  }
};

inline std::vector<JointVector> simulate_arm_response(const ArmTrackingModel& m,
                                                      const ArmResponse& r) {
  std::vector<JointVector> out;
  out.reserve(r.setpoints.size());
  ArmState s{r.q0, JointVector::Zero()};
  for (const JointVector& sp : r.setpoints) {
    s = step_arm(m, s.q, s.qdot, sp, JointVector::Zero(), r.dt);
    out.push_back(s.q);
  }
  return out;
}

inline double arm_response_mse(const ArmTrackingModel& m, const ArmResponse& r) {
  const std::vector<JointVector> sim = simulate_arm_response(m, r);
  double e = 0.0;
  for (std::size_t k = 0; k < sim.size(); ++k) e += (sim[k] - r.measured[k]).squaredNorm();
  return e / static_cast<double>(sim.size() * kNumJoints);
}

struct ArmFitResult {
  ArmTrackingModel model;
  double mse = 0.0;
  BlackboxResult search;
};

// Fits (tau, gain_scale) of the lag model in log space.
inline ArmFitResult fit_arm_tracking(const ArmResponse& r, Rng& rng, int budget = 1500,
                                     const ArmTrackingModel& initial = {}) {
  r.validate();
  ArmTrackingModel base = initial;
  base.mode = TrackingMode::kFirstOrderLag;
  const auto make = [&](const Eigen::VectorXd& x) {
    ArmTrackingModel m = base;
    m.tau = std::exp(x[0]);
    m.gain_scale = std::exp(x[1]);
    return m;
  };
  const Objective obj = [&](const Eigen::VectorXd& x) { return arm_response_mse(make(x), r); };
  Eigen::VectorXd x0(2);
  x0 << std::log(base.tau), std::log(base.gain_scale);
  ArmFitResult out;
  out.search = blackbox_fit(obj, x0, budget, rng, BlackboxConfig{0.3, 0});
  out.model = make(out.search.x);
  out.mse = arm_response_mse(out.model, r);
  return out;
}

// ---------------------------------------------------------------- curriculum

enum class CurriculumLevel { kEasy = 0, kMedium = 1, kHard = 2 };

inline std::string_view to_string(CurriculumLevel l) {
  switch (l) {
    case CurriculumLevel::kEasy: return "easy";
    case CurriculumLevel::kMedium: return "medium";
    case CurriculumLevel::kHard: return "hard";
  }
  return "unknown";
}

struct Range {
  double lo = 0.0, hi = 0.0;
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

// Initial puck distribution of one level, agent table frame.
struct LevelDistribution {
  Range x, y, vx, vy;
};

struct CurriculumConfig {
  // Epoch windows of the two soft switches.
  double easy_to_medium_start = 3000.0, easy_to_medium_end = 4000.0;
  double medium_to_hard_start = 6000.0, medium_to_hard_end = 7000.0;
  double steepness = 10.0;
  // Incoming-puck levels: slow and straight from the far end (easy), fast
  // and angled from the table middle (hard).
  std::array<LevelDistribution, 3> levels = {
      LevelDistribution{{1.55, 1.75}, {-0.35, 0.35}, {-1.0, -0.5}, {-0.1, 0.1}},
      LevelDistribution{{1.25, 1.55}, {-0.4, 0.4}, {-1.8, -1.0}, {-0.5, 0.5}},
      LevelDistribution{{0.9, 1.05}, {-0.4, 0.4}, {-2.5, -1.5}, {-1.0, 1.0}}};

  void validate() const {
    if (!(easy_to_medium_start < easy_to_medium_end &&
          easy_to_medium_end <= medium_to_hard_start &&
          medium_to_hard_start < medium_to_hard_end))
      throw ConfigError("curriculum: switch windows must be ordered");
    if (!(steepness > 0.0)) throw ConfigError("curriculum: steepness must be > 0");
  }
};

// Sigmoid ramp normalized to 0 at the window start and 1 at its end.
inline double sigmoid_ramp(double x, double start, double end, double k) {
  if (x <= start) return 0.0;
  if (x >= end) return 1.0;
  const auto s = [k](double u) { return 1.0 / (1.0 + std::exp(-k * (u - 0.5))); };
  const double u = (x - start) / (end - start);
  return (s(u) - s(0.0)) / (s(1.0) - s(0.0));
}

struct CurriculumState {
  CurriculumConfig cfg;
  double progress = 0.0;  // epochs completed

  std::array<double, 3> weights() const {
    const double a = sigmoid_ramp(progress, cfg.easy_to_medium_start,
                                  cfg.easy_to_medium_end, cfg.steepness);
    const double b = sigmoid_ramp(progress, cfg.medium_to_hard_start,
                                  cfg.medium_to_hard_end, cfg.steepness);
    return {1.0 - a, a - b, b};
  }
};

struct CurriculumDraw {
  CurriculumLevel level = CurriculumLevel::kEasy;
  Vec2 puck_pos = Vec2::Zero();
  Vec2 puck_vel = Vec2::Zero();
};

inline CurriculumDraw curriculum_sample(const CurriculumState& s, Rng& rng) {
  const std::array<double, 3> w = s.weights();
  const double u = rng.uniform();
  int level = 0;
  double acc = w[0];
  while (level < 2 && u >= acc) acc += w[++level];
  // Skip levels with zero weight that the cumulative walk may land on.
  while (level > 0 && w[level] <= 0.0) --level;
  const LevelDistribution& d = s.cfg.levels[level];
  CurriculumDraw out;
  out.level = static_cast<CurriculumLevel>(level);
  out.puck_pos = Vec2(d.x.sample(rng), d.y.sample(rng));
  out.puck_vel = Vec2(d.vx.sample(rng), d.vy.sample(rng));
  return out;
}

inline CurriculumState curriculum_advance(const CurriculumState& s, double epochs = 1.0) {
  CurriculumState out = s;
  out.progress += epochs;
  return out;
}

}  // namespace ahb

#endif  // AHB_LEARNING_HPP_
