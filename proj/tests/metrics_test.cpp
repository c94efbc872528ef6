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

#include <vector>

#include "ahb/kinematics.hpp"
#include "ahb/metrics.hpp"

namespace ahb {
namespace {

struct Fixture {
  RobotSpec spec = iiwa14_spec();
  TableGeometry g;
  ConstraintSet set = ConstraintSet::from(spec, g);
  FramePoses poses = forward_kinematics(spec, spec.q_init);
};

TEST(Constraints, InitialPostureClean) {
  Fixture f;
  const ViolationFlags v =
      check_constraints(f.spec.q_init, JointVector::Zero(), f.poses, f.set);
  EXPECT_FALSE(v.any());
}

TEST(Constraints, ElbowLow) {
  Fixture f;
  FramePoses p = f.poses;
  p.elbow_z = 0.20;
  EXPECT_TRUE(check_constraints(f.spec.q_init, JointVector::Zero(), p, f.set).link);
}

TEST(Constraints, EeAboveBand) {
  Fixture f;
  FramePoses p = f.poses;
  p.ee.z() = f.g.z_table + 0.03;
  const ViolationFlags v =
      check_constraints(f.spec.q_init, JointVector::Zero(), p, f.set);
  EXPECT_TRUE(v.ee);
  EXPECT_FALSE(v.link);
}

TEST(Constraints, BoundsAreAdmissible) {
  Fixture f;
  JointVector q = f.spec.q_upper;
  JointVector qd = f.spec.qdot_limit;
  FramePoses p = f.poses;
  p.ee.z() = f.g.z_table + 0.02;
  EXPECT_FALSE(check_constraints(q, qd, p, f.set).joint_pos);
  EXPECT_FALSE(check_constraints(q, qd, p, f.set).joint_vel);
  EXPECT_FALSE(check_constraints(q, qd, p, f.set).ee);
  q[3] += 1e-9;
  qd[0] = -f.spec.qdot_limit[0] - 1e-9;
  EXPECT_TRUE(check_constraints(q, qd, p, f.set).joint_pos);
  EXPECT_TRUE(check_constraints(q, qd, p, f.set).joint_vel);
}

TEST(Penalty, SingleEeStep) {
  std::vector<ViolationFlags> flags(500);
  flags[10].ee = true;
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, {}).total(), 3.0);
}

TEST(Penalty, OncePerEpisode) {
  std::vector<ViolationFlags> flags(500);
  for (int i = 0; i < 100; ++i) flags[i].ee = true;
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, {}).total(), 3.0);
}

TEST(Penalty, LinkChargedAsEe) {
  std::vector<ViolationFlags> flags(5);
  flags[1].link = true;
  flags[2].ee = true;
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, {}).total(), 3.0);
}

TEST(Penalty, ComputeBands) {
  std::vector<ViolationFlags> flags(3);
  const std::vector<double> slow = {0.03, 0.03, 0.03};
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, slow).total(), 2.0);
  const std::vector<double> spike = {0.001, 0.001, 0.03};
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, spike).total(), 0.5);
  const std::vector<double> big = {0.001, 0.001, 0.05};
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, big).total(), 1.0);
  const std::vector<double> fast = {0.001, 0.02, 0.01};
  EXPECT_DOUBLE_EQ(accumulate_episode(flags, fast).total(), 0.0);
}

TEST(Penalty, MonotoneAndBounded) {
  Rng rng(7);
  PenaltyLedger ledger;
  const int episodes = 200;
  for (int e = 0; e < episodes; ++e) {
    std::vector<ViolationFlags> flags(50);
    std::vector<double> times(50);
    for (int k = 0; k < 50; ++k) {
      flags[k].ee = rng.bernoulli(0.01);
      flags[k].joint_pos = rng.bernoulli(0.01);
      flags[k].joint_vel = rng.bernoulli(0.01);
      flags[k].link = rng.bernoulli(0.01);
      times[k] = rng.uniform(0.0, 0.03);
      if (k > 0) {
        const EpisodePenalty a = accumulate_episode(
            std::span(flags.data(), k + 1), {});
        const EpisodePenalty b = accumulate_episode(std::span(flags.data(), k), {});
        EXPECT_GE(a.total(), b.total());
      }
      ledger.add_step(flags[k], times[k]);
    }
    ledger.end_episode();
  }
  EXPECT_GE(ledger.ds(), 0.0);
  EXPECT_LE(ledger.ds(), episodes * 8.0);
  EXPECT_DOUBLE_EQ(PenaltyWeights{}.max_per_episode(), 8.0);
}

TEST(Penalty, LedgerMatchesBatch) {
  PenaltyLedger ledger;
  std::vector<ViolationFlags> flags(4);
  flags[2].joint_vel = true;
  const std::vector<double> times = {0.01, 0.03, 0.01, 0.01};
  for (int k = 0; k < 4; ++k) ledger.add_step(flags[k], times[k]);
  const EpisodePenalty p = ledger.end_episode();
  EXPECT_DOUBLE_EQ(p.total(), accumulate_episode(flags, times).total());
  EXPECT_DOUBLE_EQ(p.total(), 1.5);
  ledger.forfeit_episode();
  EXPECT_DOUBLE_EQ(ledger.ds(), 9.5);
}

TEST(Deployability, Thresholds) {
  EXPECT_EQ(classify_deployability(500, Stage::kQualifying),
            Deployability::kDeployable);
  EXPECT_EQ(classify_deployability(501, Stage::kQualifying),
            Deployability::kImprovable);
  EXPECT_EQ(classify_deployability(1500, Stage::kQualifying),
            Deployability::kImprovable);
  EXPECT_EQ(classify_deployability(1501, Stage::kQualifying),
            Deployability::kNonDeployable);
  EXPECT_EQ(classify_deployability(45, Stage::kTournament),
            Deployability::kDeployable);
  EXPECT_EQ(classify_deployability(136, Stage::kTournament),
            Deployability::kNonDeployable);
  EXPECT_THROW(classify_deployability(-1, Stage::kTournament),
               std::invalid_argument);
}

TEST(Deployability, ScaledThresholds) {
  const DeployabilityThresholds t =
      deployability_thresholds(Stage::kQualifying, 100);
  EXPECT_DOUBLE_EQ(t.deployable, 50.0);
  EXPECT_DOUBLE_EQ(t.improvable, 150.0);
  const DeployabilityThresholds r =
      deployability_thresholds(Stage::kTournament, 90);
  EXPECT_DOUBLE_EQ(r.improvable, 135.0);
}

EpisodeTrace trace_with(std::vector<PuckState> puck, std::vector<Event> ev) {
  EpisodeTrace t;
  t.puck = std::move(puck);
  t.events = std::move(ev);
  return t;
}

PuckState at(double x, double y, double vx = 0, double vy = 0) {
  PuckState p;
  p.x = x;
  p.y = y;
  p.vx = vx;
  p.vy = vy;
  return p;
}

TEST(Success, Hit) {
  const TableGeometry g;
  SuccessCriteria c;
  c.hit_min_speed = 0.5;
  const auto t = trace_with({at(1.0, 0), at(g.length, 0)},
                            {{EventType::kGoal, 1, 1.5, 300}});
  EXPECT_TRUE(judge_task(Task::kHit, t, c, g));
  const auto slow = trace_with({at(1.0, 0), at(g.length, 0)},
                               {{EventType::kGoal, 1, 0.3, 300}});
  EXPECT_FALSE(judge_task(Task::kHit, slow, c, g));
  EXPECT_FALSE(judge_task(Task::kHit, trace_with({at(1, 0)}, {}), c, g));
}

TEST(Success, Defend) {
  const TableGeometry g;
  const SuccessCriteria c;
  const std::vector<Event> touch = {{EventType::kMalletContact, 0, 1.0, 40}};
  EXPECT_TRUE(judge_task(
      Task::kDefend,
      trace_with({at(1.5, 0, -2), at(0.5, 0, -1), at(0.4, 0, 0.05)}, touch), c,
      g));
  EXPECT_FALSE(judge_task(
      Task::kDefend,
      trace_with({at(1.5, 0, -2), at(0.5, 0, 1), at(1.2, 0, 0.05)}, touch), c,
      g));
  EXPECT_FALSE(judge_task(Task::kDefend,
                          trace_with({at(1.5, 0, -2), at(0.4, 0, 0.0)}, {}), c,
                          g));
}

TEST(Success, Prepare) {
  const TableGeometry g;
  const SuccessCriteria c;
  const double x = g.center_x() - 0.5;
  EXPECT_TRUE(judge_task(Task::kPrepare, trace_with({at(0.2, 0.4), at(x, 0)}, {}),
                         c, g));
  EXPECT_FALSE(judge_task(Task::kPrepare,
                          trace_with({at(0.2, 0.4), at(x, 0, 0.5)}, {}), c, g));
  EXPECT_FALSE(judge_task(Task::kPrepare,
                          trace_with({at(0.2, 0.4), at(0.2, 0)}, {}), c, g));
}

TEST(Match, SimpleScore) {
  const MatchScore m = score_match_counts({2, 1}, {0, 0});
  EXPECT_EQ(m.final_score[0], 2);
  EXPECT_EQ(m.final_score[1], 1);
  EXPECT_EQ(m.points[0], 3);
  EXPECT_EQ(m.points[1], 0);
}

TEST(Match, FaultPoints) {
  const MatchScore m = score_match_counts({2, 12}, {33, 0});
  EXPECT_EQ(m.final_score[0], 2);
  EXPECT_EQ(m.final_score[1], 23);
  EXPECT_EQ(m.outcome[1], Outcome::kWin);
}

TEST(Match, FromEvents) {
  std::vector<Event> ev = {{EventType::kGoal, 1, 1.0, 1},
                           {EventType::kGoal, 0, 1.0, 2},
                           {EventType::kGoal, 1, 1.0, 3},
                           {EventType::kFault, 0, 15.0, 4}};
  const MatchScore m = score_match(ev);
  EXPECT_EQ(m.goals[0], 2);
  EXPECT_EQ(m.goals[1], 1);
  EXPECT_EQ(m.faults[0], 1);
  EXPECT_EQ(m.final_score[1], 1);
  EXPECT_EQ(m.outcome[0], Outcome::kWin);
}

TEST(Match, NonDeployableLoses) {
  const MatchScore m = score_match_counts({5, 0}, {0, 0}, {200.0, 10.0});
  EXPECT_EQ(m.outcome[0], Outcome::kLoss);
  EXPECT_EQ(m.outcome[1], Outcome::kWin);
  const MatchScore d = score_match_counts({5, 0}, {0, 0}, {200.0, 300.0});
  EXPECT_EQ(d.outcome[0], Outcome::kDraw);
  EXPECT_EQ(d.points[1], 1);
}

TEST(Match, StandingsPoints) {
  std::vector<MatchRecord> recs;
  const std::vector<std::string> names = {"a", "b"};
  for (int i = 0; i < 3; ++i) recs.push_back({0, 1, score_match_counts({2, 0}, {0, 0})});
  for (int i = 0; i < 2; ++i) recs.push_back({0, 1, score_match_counts({1, 1}, {0, 0})});
  const auto rows = standings(names, recs);
  EXPECT_EQ(rows[0].name, "a");
  EXPECT_EQ(rows[0].points, 11);
  EXPECT_EQ(rows[0].wins, 3);
  EXPECT_EQ(rows[0].draws, 2);
  EXPECT_EQ(rows[1].points, 2);
}

TEST(Qualifying, LevelBeforeScore) {
  std::vector<QualifyingRow> rows(2);
  rows[0].name = "improvable";
  rows[0].success = {0.227, 0.616, 0.362};
  rows[0].penalty = 920.0;
  rows[1].name = "deployable";
  rows[1].success = {0.144, 0.478, 0.478};
  rows[1].penalty = 221.0;
  const auto r = qualifying_rank(rows);
  EXPECT_EQ(r[0].name, "deployable");
  EXPECT_NEAR(r[0].score, 34.4, 0.05);
  EXPECT_NEAR(r[1].score, 41.0, 0.05);
}

TEST(Qualifying, ScoreOrderAndEmpty) {
  std::vector<QualifyingRow> rows(2);
  rows[0].name = "b";
  rows[0].success = {0.522, 0.790, 0.686};
  rows[1].name = "a";
  rows[1].success = {0.549, 0.845, 0.903};
  const auto r = qualifying_rank(rows);
  EXPECT_EQ(r[0].name, "a");
  EXPECT_NEAR(r[0].score, 73.8, 0.05);
  EXPECT_NEAR(r[1].score, 66.2, 0.05);
  EXPECT_TRUE(qualifying_rank({}).empty());
}

TEST(Tasks, Names) {
  for (Task t : kAllTasks) EXPECT_EQ(task_from_string(to_string(t)), t);
  EXPECT_THROW(task_from_string("serve"), ConfigError);
}

}  // namespace
}  // namespace ahb
