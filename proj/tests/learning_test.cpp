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

#include <cmath>

#include "ahb/learning.hpp"

namespace ahb {
namespace {

// Builds a record from table-centered coordinates.
TransitionRecord centered(const TableGeometry& g, Vec2 p, Vec2 v, Vec2 ee = Vec2(-0.9, 0.0),
                          Vec2 v_ee = Vec2::Zero()) {
  TransitionRecord tr;
  tr.puck_pos = Vec2(p.x() + g.center_x(), p.y());
  tr.puck_vel = v;
  tr.ee_pos = Vec2(ee.x() + g.center_x(), ee.y());
  tr.ee_vel = v_ee;
  tr.T = 100;
  return tr;
}

// ------------------------------------------ state-machine sub-agent rewards

TEST(RewardAirHocKIT, HitScored) {
  const TableGeometry g;
  TransitionRecord tr = centered(g, Vec2(0.97, 0.0), Vec2(1.0, 0.0));
  tr.scored = tr.episode_end = true;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kHit, tr, g), 7000.0);
}

TEST(RewardAirHocKIT, HitContact) {
  const TableGeometry g;
  TransitionRecord tr = centered(g, Vec2(-0.5, 0.0), Vec2(1.2, -1.6));
  tr.hit = true;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kHit, tr, g), 20.0);
}

TEST(RewardAirHocKIT, HitApproach) {
  const TableGeometry g;
  const TransitionRecord tr =
      centered(g, Vec2(-0.5, 0.0), Vec2::Zero(), Vec2(-0.8, 0.0), Vec2(1.0, 0.0));
  EXPECT_EQ(reward_airhockit(AHRewardTask::kHit, tr, g), 1.0);
  // Moving away is clipped at zero.
  const TransitionRecord away =
      centered(g, Vec2(-0.5, 0.0), Vec2::Zero(), Vec2(-0.8, 0.0), Vec2(-1.0, 0.0));
  EXPECT_EQ(reward_airhockit(AHRewardTask::kHit, away, g), 0.0);
}

TEST(RewardAirHocKIT, DefendSlowFirstTouch) {
  const TableGeometry g;
  TransitionRecord tr = centered(g, Vec2(-0.5, 0.0), Vec2::Zero());
  tr.hit = tr.first_touch = true;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kDefendSlow, tr, g), 130.0);
}

TEST(RewardAirHocKIT, DefendSlowEndBonusAndDefault) {
  const TableGeometry g;
  TransitionRecord tr = centered(g, Vec2(-0.5, 0.0), Vec2(0.05, 0.0));
  EXPECT_EQ(reward_airhockit(AHRewardTask::kDefendSlow, tr, g), 0.01);
  tr.t = tr.T;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kDefendSlow, tr, g), 70.01);
  // Touch with |v_p| = 4: 30 + 100^0 = 31, plus the end bonus does not apply.
  TransitionRecord fast = centered(g, Vec2(-0.5, 0.0), Vec2(4.0, 0.0));
  fast.hit = fast.first_touch = true;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kDefendSlow, fast, g), 31.0);
}

TEST(RewardAirHocKIT, DefendFast) {
  const TableGeometry g;
  TransitionRecord tr = centered(g, Vec2(-0.97, 0.0), Vec2(-2.0, 0.0));
  EXPECT_EQ(reward_airhockit(AHRewardTask::kDefendFast, tr, g), 0.0);
  tr.conceded = tr.episode_end = true;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kDefendFast, tr, g), -100.0);
}

TEST(RewardAirHocKIT, PrepareFarCases) {
  const TableGeometry g;
  EXPECT_EQ(reward_airhockit(AHRewardTask::kPrepareFar,
                             centered(g, Vec2(0.25, 0.1), Vec2(1.0, 0.0)), g),
            3000.0);
  EXPECT_EQ(reward_airhockit(AHRewardTask::kPrepareFar,
                             centered(g, Vec2(0.1, 0.1), Vec2(0.0, 0.5)), g),
            5.0);
}

TEST(RewardAirHocKIT, PrepareCloseBonus) {
  const TableGeometry g;
  // Puck resting on the target: bonus only (direction term is zero).
  EXPECT_EQ(reward_airhockit(AHRewardTask::kPrepareClose,
                             centered(g, Vec2(-0.5, 0.0), Vec2::Zero()), g),
            2000.0);
  // Puck at (-0.3, 0) rolling toward the target at 1 m/s: capped at 0.5.
  EXPECT_EQ(reward_airhockit(AHRewardTask::kPrepareClose,
                             centered(g, Vec2(-0.3, 0.0), Vec2(-1.0, 0.0)), g),
            5.0);
}

TEST(RewardAirHocKIT, UnknownTaskName) {
  EXPECT_THROW(ah_reward_task_from_string("juggle"), std::invalid_argument);
  EXPECT_EQ(ah_reward_task_from_string("prepare_far"), AHRewardTask::kPrepareFar);
}

// ----------------------------------------------------------- sparse rewards

TEST(RewardSparse, Table) {
  EXPECT_EQ(reward_spacer(SparseEvent::kScore, Strategy::kBalanced), 2.0 / 3.0);
  EXPECT_EQ(reward_spacer(SparseEvent::kScore, Strategy::kAggressive), 1.0);
  EXPECT_EQ(reward_spacer(SparseEvent::kScore, Strategy::kDefensive), 0.0);
  for (Strategy s : {Strategy::kBalanced, Strategy::kAggressive, Strategy::kDefensive}) {
    EXPECT_EQ(reward_spacer(SparseEvent::kConcede, s), -1.0);
    EXPECT_EQ(reward_spacer(SparseEvent::kOwnFault, s), -1.0 / 3.0);
    EXPECT_EQ(reward_spacer(SparseEvent::kNone, s), 0.0);
  }
  EXPECT_GT(reward_spacer(SparseEvent::kScore, Strategy::kAggressive),
            reward_spacer(SparseEvent::kScore, Strategy::kBalanced));
  EXPECT_GT(reward_spacer(SparseEvent::kScore, Strategy::kBalanced),
            reward_spacer(SparseEvent::kScore, Strategy::kDefensive));
}

// ---------------------------------------------------------- triangle reward

TEST(RewardTriangle, BeforeHitNormalizedDistance) {
  const TriangleRewardParams p;
  TransitionRecord tr;
  tr.puck_pos = Vec2(0.5, 0.0);
  tr.ee_pos = tr.puck_pos - Vec2(0.5 * p.table_diag, 0.0);
  EXPECT_EQ(reward_rl3_hit(tr, p, std::nullopt), -1.0);
}

TEST(RewardTriangle, HitBonus) {
  const TriangleRewardParams p;
  TransitionRecord tr;
  tr.hit = tr.first_touch = true;
  tr.ee_vel = Vec2(p.max_vel, 0.0);
  EXPECT_EQ(reward_rl3_hit(tr, p, std::nullopt), 110.0);
  // Sideways strike: alpha = pi/2 removes the velocity term.
  tr.ee_vel = Vec2(0.0, 2.0);
  EXPECT_EQ(reward_rl3_hit(tr, p, std::nullopt), 100.0);
}

TEST(RewardTriangle, GoalValue) {
  const TriangleRewardParams p;
  TransitionRecord tr;
  tr.scored = tr.episode_end = true;
  EXPECT_NEAR(reward_rl3_hit(tr, p, std::nullopt), 100.0, 1e-9);
}

TEST(RewardTriangle, InsideAndOutside) {
  const TableGeometry g;
  const TriangleRewardParams p;
  const HitTriangle tri = HitTriangle::at_hit(Vec2(0.5, 0.0), g);
  TransitionRecord tr;
  tr.has_hit = true;
  tr.puck_pos = Vec2(0.8, 0.0);
  tr.puck_vel = Vec2(1.0, 0.0);
  EXPECT_EQ(reward_rl3_hit(tr, p, tri), 11.0);

  // Outside, heading 90 degrees: penalty is the gap to the nearer border.
  tr.puck_pos = Vec2(0.8, 0.3);
  tr.puck_vel = Vec2(0.0, 1.0);
  const double border = std::atan2(g.goal_width / 2.0, g.length - 0.5);
  EXPECT_NEAR(reward_rl3_hit(tr, p, tri), -(kPi / 2.0 - border), 1e-12);
  EXPECT_THROW(reward_rl3_hit(tr, p, std::nullopt), std::invalid_argument);
}

TEST(RewardTriangle, DegenerateCountsAsInside) {
  const TableGeometry g;
  const HitTriangle tri = HitTriangle::at_hit(Vec2(g.length, 0.0), g);
  EXPECT_TRUE(tri.contains(Vec2(0.2, 0.4)));
}

TEST(RewardTriangle, ParamsValidated) {
  TriangleRewardParams p;
  p.gamma = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

// ------------------------------------------------------------------- PGPE

PGPEState pgpe_1d(double mu, double sigma) {
  PGPEState s;
  s.mu = Eigen::VectorXd::Constant(1, mu);
  s.sigma = Eigen::VectorXd::Constant(1, sigma);
  return s;
}

TEST(Pgpe, EqualReturnsLeaveMuUnchanged) {
  const PGPEState s = pgpe_1d(1.0, 0.5);
  Rng rng(1);
  const auto th = pgpe_sample(s, 10, rng);
  const PGPEState n = pgpe_update(s, th, std::vector<double>(10, 4.2));
  EXPECT_EQ(n.mu[0], 1.0);
  EXPECT_EQ(n.sigma[0], 0.5);
}

TEST(Pgpe, ConstantShiftInvariance) {
  const PGPEState s = pgpe_1d(0.0, 1.0);
  Rng rng(2);
  const auto th = pgpe_sample(s, 20, rng);
  std::vector<double> r, r2;
  for (const auto& t : th) {
    r.push_back(-(t[0] - 3.0) * (t[0] - 3.0));
    r2.push_back(r.back() + 1000.0);
  }
  const PGPEState a = pgpe_update(s, th, r), b = pgpe_update(s, th, r2);
  EXPECT_NEAR(a.mu[0], b.mu[0], 1e-12);
  EXPECT_NEAR(a.sigma[0], b.sigma[0], 1e-12);
}

TEST(Pgpe, ConvergesOnQuadratic) {
  PGPEState s = pgpe_1d(0.0, 1.0);
  Rng rng(3);
  int it = 0;
  for (; it < 500 && std::abs(s.mu[0] - 3.0) >= 0.1; ++it) {
    const auto th = pgpe_sample(s, 20, rng);
    std::vector<double> r;
    for (const auto& t : th) r.push_back(-(t[0] - 3.0) * (t[0] - 3.0));
    s = pgpe_update(s, th, r);
    ASSERT_GE(s.sigma[0], s.cfg.sigma_min);
  }
  EXPECT_LT(std::abs(s.mu[0] - 3.0), 0.1) << "after " << it << " iterations";
}

TEST(Pgpe, SigmaFloor) {
  PGPEState s = pgpe_1d(0.0, 0.01);
  s.cfg.alpha_sigma = 5.0;
  Rng rng(4);
  for (int it = 0; it < 200; ++it) {
    const auto th = pgpe_sample(s, 8, rng);
    std::vector<double> r;
    for (const auto& t : th) r.push_back(-std::abs(t[0]));
    s = pgpe_update(s, th, r);
    ASSERT_GE(s.sigma[0], s.cfg.sigma_min);
  }
}

TEST(Pgpe, RejectsTooFewSamples) {
  const PGPEState s = pgpe_1d(0.0, 1.0);
  EXPECT_THROW(pgpe_update(s, {s.mu}, {1.0}), std::invalid_argument);
}

// ----------------------------------------------------------------- CMA-ES

TEST(Blackbox, SolvesSphere) {
  Rng rng(5);
  const Objective sphere = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  Eigen::VectorXd x0(4);
  x0 << 1.0, -2.0, 0.5, 3.0;
  const BlackboxResult r = blackbox_fit(sphere, x0, 2000, rng, BlackboxConfig{1.0, 0});
  EXPECT_LT(r.x.norm(), 1e-2);
  EXPECT_LE(r.evaluations, 2000);
  for (std::size_t i = 1; i < r.trace.size(); ++i)
    ASSERT_LE(r.trace[i].best, r.trace[i - 1].best);
}

TEST(Blackbox, ZeroBudgetReturnsStart) {
  Rng rng(1);
  Eigen::VectorXd x0(2);
  x0 << 0.3, 0.4;
  int calls = 0;
  const BlackboxResult r = blackbox_fit(
      [&](const Eigen::VectorXd&) { return static_cast<double>(++calls); }, x0, 0, rng);
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(calls, 0);
}

TEST(Blackbox, Deterministic) {
  const Objective rosen = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  Rng a(9), b(9);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  EXPECT_EQ(blackbox_fit(rosen, x0, 300, a).x, blackbox_fit(rosen, x0, 300, b).x);
}

TEST(SysId, RecoversLagParameters) {
  ArmTrackingModel truth;
  truth.mode = TrackingMode::kFirstOrderLag;
  truth.tau = 0.035;
  truth.gain_scale = 0.92;
  ArmResponse r;
  r.dt = kSimDt;
  r.q0 = iiwa14_spec().q_init;
  for (int k = 0; k < 400; ++k) {
    JointVector sp = r.q0;
    if (k >= 20) sp.array() += 0.3;
    if (k >= 200) sp.array() -= 0.5;
    r.setpoints.push_back(sp);
  }
  r.measured = simulate_arm_response(truth, r);
  Rng rng(6);
  const ArmFitResult fit = fit_arm_tracking(r, rng);
  EXPECT_NEAR(fit.model.tau, truth.tau, 0.05 * truth.tau);
  EXPECT_NEAR(fit.model.gain_scale, truth.gain_scale, 0.05 * truth.gain_scale);
}

// ---------------------------------------------------------------- curriculum

TEST(Curriculum, StartsEasy) {
  CurriculumState s;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i)
    ASSERT_EQ(curriculum_sample(s, rng).level, CurriculumLevel::kEasy);
  const auto w = s.weights();
  EXPECT_EQ(w[0], 1.0);
}

TEST(Curriculum, MonteCarloMatchesWeights) {
  for (double epoch : {3400.0, 3500.0, 6700.0}) {
    CurriculumState s;
    s.progress = epoch;
    const auto w = s.weights();
    EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-12);
    Rng rng(static_cast<std::uint64_t>(epoch));
    std::array<int, 3> count{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++count[static_cast<int>(curriculum_sample(s, rng).level)];
    for (int l = 0; l < 3; ++l) EXPECT_NEAR(count[l] / double(n), w[l], 0.02) << epoch;
  }
}

TEST(Curriculum, ScheduleMilestones) {
  CurriculumState s;
  s.progress = 5000.0;
  EXPECT_EQ(s.weights()[1], 1.0);
  s.progress = 7500.0;
  EXPECT_EQ(s.weights()[2], 1.0);
  s.progress = 3500.0;
  EXPECT_NEAR(s.weights()[1], 0.5, 1e-12);
  EXPECT_EQ(curriculum_advance(s, 10.0).progress, 3510.0);
}

TEST(Curriculum, HardLevelStartsMidTable) {
  CurriculumState s;
  s.progress = 8000.0;
  Rng rng(3);
  const TableGeometry g;
  for (int i = 0; i < 500; ++i) {
    const CurriculumDraw d = curriculum_sample(s, rng);
    ASSERT_EQ(d.level, CurriculumLevel::kHard);
    ASSERT_GE(d.puck_pos.x(), s.cfg.levels[2].x.lo);
    ASSERT_LE(d.puck_pos.x(), s.cfg.levels[2].x.hi);
    ASSERT_LT(std::abs(d.puck_pos.x() - g.center_x()), 0.1);
  }
}

}  // namespace
}  // namespace ahb
