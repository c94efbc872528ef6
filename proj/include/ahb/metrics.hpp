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

// Constraint checking, per-episode penalty points, deployability levels,
// task success judgement and match/tournament scoring.

#ifndef AHB_METRICS_HPP_
#define AHB_METRICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ahb/common.hpp"
#include "ahb/kinematics.hpp"
#include "ahb/puck_physics.hpp"
#include "ahb/table.hpp"

namespace ahb {

// ------------------------------------------------------------- constraints

// 14 joint position, 14 joint velocity, 5 end-effector and 2 link
// constraints. A value on a bound is admissible; only values strictly
// beyond it count as violations.
struct ConstraintSet {
  JointVector q_lower, q_upper, qdot_limit;
  double l_x = 0.0, l_y = 0.0, u_y = 0.0;
  double z_table = 0.1645;
  double ee_band = 0.02;
  double elbow_min_z = 0.25;
  double wrist_min_z = 0.25;

  static ConstraintSet from(const RobotSpec& spec, const TableGeometry& g) {
    ConstraintSet c;
    c.q_lower = spec.q_lower;
    c.q_upper = spec.q_upper;
    c.qdot_limit = spec.qdot_limit;
    c.l_x = g.l_x;
    c.l_y = g.l_y;
    c.u_y = g.u_y;
    c.z_table = g.z_table;
    return c;
  }

  static constexpr int kJointPosCount = 2 * kNumJoints;
  static constexpr int kJointVelCount = 2 * kNumJoints;
  static constexpr int kEeCount = 5;
  static constexpr int kLinkCount = 2;
};

struct ViolationFlags {
  bool joint_pos = false;
  bool joint_vel = false;
  bool ee = false;
  bool link = false;

  bool any() const { return joint_pos || joint_vel || ee || link; }
  ViolationFlags& operator|=(const ViolationFlags& o) {
    joint_pos |= o.joint_pos;
    joint_vel |= o.joint_vel;
    ee |= o.ee;
    link |= o.link;
    return *this;
  }
  bool operator==(const ViolationFlags&) const = default;
};

inline ViolationFlags check_constraints(const JointVector& q_cmd,
                                        const JointVector& qdot_cmd,
                                        const FramePoses& poses,
                                        const ConstraintSet& c) {
  ViolationFlags f;
  for (int i = 0; i < kNumJoints; ++i) {
    f.joint_pos |= q_cmd[i] < c.q_lower[i] || q_cmd[i] > c.q_upper[i];
    f.joint_vel |= qdot_cmd[i] < -c.qdot_limit[i] || qdot_cmd[i] > c.qdot_limit[i];
  }
  f.ee = poses.ee.x() < c.l_x || poses.ee.y() < c.l_y || poses.ee.y() > c.u_y ||
         poses.ee.z() < c.z_table - c.ee_band ||
         poses.ee.z() > c.z_table + c.ee_band;
  f.link = poses.elbow_z < c.elbow_min_z || poses.wrist_z < c.wrist_min_z;
  return f;
}

// ------------------------------------------------------------- penalties

struct ComputeTimeBands {
  double avg_limit = 0.02;
  double avg_points = 2.0;
  double max_high = 0.04;
  double max_high_points = 1.0;
  double max_low = 0.02;
  double max_low_points = 0.5;
};

struct PenaltyWeights {
  double ee_position = 3.0;
  double joint_position = 2.0;
  double joint_velocity = 1.0;
  // Link-height violations are charged through the end-effector metric.
  ComputeTimeBands compute;

  double max_per_episode() const {
    return ee_position + joint_position + joint_velocity +
           std::max({compute.avg_points, compute.max_high_points,
                     compute.max_low_points});
  }
};

struct EpisodePenalty {
  double ee = 0.0;
  double joint_pos = 0.0;
  double joint_vel = 0.0;
  double compute = 0.0;
  double total() const { return ee + joint_pos + joint_vel + compute; }
};

inline double compute_time_points(double avg, double max,
                                  const ComputeTimeBands& b) {
  if (avg > b.avg_limit) return b.avg_points;
  if (max > b.max_high) return b.max_high_points;
  if (max > b.max_low) return b.max_low_points;
  return 0.0;
}

inline EpisodePenalty accumulate_episode(std::span<const ViolationFlags> flags,
                                         std::span<const double> compute_times,
                                         const PenaltyWeights& w = {}) {
  ViolationFlags any;
  for (const ViolationFlags& f : flags) any |= f;
  EpisodePenalty p;
  if (any.ee || any.link) p.ee = w.ee_position;
  if (any.joint_pos) p.joint_pos = w.joint_position;
  if (any.joint_vel) p.joint_vel = w.joint_velocity;
  if (!compute_times.empty()) {
    const double sum =
        std::accumulate(compute_times.begin(), compute_times.end(), 0.0);
    const double avg = sum / static_cast<double>(compute_times.size());
    const double max = *std::max_element(compute_times.begin(), compute_times.end());
    p.compute = compute_time_points(avg, max, w.compute);
  }
  return p;
}

// Streaming variant used by the runners.
class PenaltyLedger {
 public:
  explicit PenaltyLedger(PenaltyWeights w = {}) : weights_(w) {}

  void add_step(const ViolationFlags& f, double compute_time) {
    flags_ |= f;
    if (compute_time >= 0.0) {
      time_sum_ += compute_time;
      time_max_ = std::max(time_max_, compute_time);
      ++time_count_;
    }
  }

  // Closes the running episode and returns its points.
  EpisodePenalty end_episode() {
    const std::array<ViolationFlags, 1> f = {flags_};
    EpisodePenalty p = accumulate_episode(f, {}, weights_);
    if (time_count_ > 0)
      p.compute = compute_time_points(time_sum_ / time_count_, time_max_,
                                      weights_.compute);
    ds_ += p.total();
    episodes_.push_back(p);
    flags_ = {};
    time_sum_ = time_max_ = 0.0;
    time_count_ = 0;
    return p;
  }

  // Charges a whole episode at the maximum rate (forfeits).
  void forfeit_episode() {
    EpisodePenalty p;
    p.ee = weights_.ee_position;
    p.joint_pos = weights_.joint_position;
    p.joint_vel = weights_.joint_velocity;
    p.compute = std::max({weights_.compute.avg_points,
                          weights_.compute.max_high_points,
                          weights_.compute.max_low_points});
    ds_ += p.total();
    episodes_.push_back(p);
  }

  double ds() const { return ds_; }
  const std::vector<EpisodePenalty>& episodes() const { return episodes_; }
  const PenaltyWeights& weights() const { return weights_; }

 private:
  PenaltyWeights weights_;
  ViolationFlags flags_;
  double time_sum_ = 0.0;
  double time_max_ = 0.0;
  int time_count_ = 0;
  double ds_ = 0.0;
  std::vector<EpisodePenalty> episodes_;
};

// ----------------------------------------------------------- deployability

enum class Stage { kQualifying, kTournament };
enum class Deployability { kDeployable = 0, kImprovable = 1, kNonDeployable = 2 };

inline std::string_view to_string(Deployability d) {
  switch (d) {
    case Deployability::kDeployable: return "Deployable";
    case Deployability::kImprovable: return "Improvable";
    case Deployability::kNonDeployable: return "Non-Deployable";
  }
  return "unknown";
}

struct DeployabilityThresholds {
  double deployable = 500.0;
  double improvable = 1500.0;
};

inline constexpr int kQualifyingReferenceEpisodes = 1000;
inline constexpr int kTournamentReferenceEpisodes = 90;

// Thresholds for a run with `episodes` penalty episodes. Scaled linearly from
// the reference episode counts (1000 per task, 90 per game).
inline DeployabilityThresholds deployability_thresholds(Stage stage,
                                                        int episodes = -1) {
  DeployabilityThresholds t = stage == Stage::kQualifying
                                  ? DeployabilityThresholds{500.0, 1500.0}
                                  : DeployabilityThresholds{45.0, 135.0};
  const int ref = stage == Stage::kQualifying ? kQualifyingReferenceEpisodes
                                              : kTournamentReferenceEpisodes;
  if (episodes > 0 && episodes != ref) {
    const double s = static_cast<double>(episodes) / ref;
    t.deployable *= s;
    t.improvable *= s;
  }
  return t;
}

inline Deployability classify_deployability(double ds,
                                            const DeployabilityThresholds& t) {
  if (ds < 0.0) throw std::invalid_argument("deployability score must be >= 0");
  if (ds <= t.deployable) return Deployability::kDeployable;
  if (ds <= t.improvable) return Deployability::kImprovable;
  return Deployability::kNonDeployable;
}

inline Deployability classify_deployability(double ds, Stage stage) {
  return classify_deployability(ds, deployability_thresholds(stage));
}

// ----------------------------------------------------------- task success

enum class Task { kHit = 0, kDefend = 1, kPrepare = 2 };
inline constexpr std::array<Task, 3> kAllTasks = {Task::kHit, Task::kDefend,
                                                 Task::kPrepare};

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::kHit: return "hit";
    case Task::kDefend: return "defend";
    case Task::kPrepare: return "prepare";
  }
  return "unknown";
}

inline Task task_from_string(std::string_view s) {
  for (Task t : kAllTasks)
    if (to_string(t) == s) return t;
  throw ConfigError("unknown task: " + std::string(s));
}

struct SuccessCriteria {
  double hit_min_speed = 0.25;
  double defend_max_speed = 0.1;
  double prepare_max_speed = 0.1;
  // Prepare region in table-centered coordinates.
  double prepare_x_min = -0.65;
  double prepare_x_max = -0.35;
  double prepare_abs_y = 0.4;
};

// Everything judge_task needs, in the agent's (side 0) frame.
struct EpisodeTrace {
  std::vector<PuckState> puck;
  std::vector<Event> events;
};

inline bool judge_task(Task task, const EpisodeTrace& trace,
                       const SuccessCriteria& c, const TableGeometry& g) {
  if (trace.puck.empty()) return false;
  bool scored = false, conceded = false;
  double score_speed = 0.0;
  std::int64_t first_touch = -1;
  for (const Event& e : trace.events) {
    if (e.type == EventType::kGoal && e.side == 1) {
      scored = true;
      score_speed = std::max(score_speed, e.value);
    }
    if (e.type == EventType::kGoal && e.side == 0) conceded = true;
    if (e.type == EventType::kMalletContact && e.side == 0 && first_touch < 0)
      first_touch = e.time_ms;
  }
  const PuckState& last = trace.puck.back();
  switch (task) {
    case Task::kHit:
      return scored && score_speed >= c.hit_min_speed;
    case Task::kDefend: {
      if (scored || conceded || first_touch < 0) return false;
      const std::size_t start =
          static_cast<std::size_t>(first_touch / kSubsteps);
      for (std::size_t k = start; k < trace.puck.size(); ++k)
        if (trace.puck[k].x > g.center_x()) return false;
      return last.speed() <= c.defend_max_speed;
    }
    case Task::kPrepare: {
      if (scored || conceded) return false;
      const double xc = g.centered_x(last.x);
      return xc > c.prepare_x_min && xc < c.prepare_x_max &&
             std::abs(last.y) < c.prepare_abs_y &&
             last.speed() <= c.prepare_max_speed;
    }
  }
  return false;
}

// ----------------------------------------------------------- match scoring

struct FaultRule {
  int faults_per_point = 3;
};

enum class Outcome { kWin, kDraw, kLoss };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kWin: return "win";
    case Outcome::kDraw: return "draw";
    case Outcome::kLoss: return "loss";
  }
  return "unknown";
}

struct OutcomePoints {
  int win = 3;
  int draw = 1;
  int loss = 0;
  int of(Outcome o) const {
    return o == Outcome::kWin ? win : o == Outcome::kDraw ? draw : loss;
  }
};

struct MatchScore {
  std::array<int, 2> goals = {0, 0};
  std::array<int, 2> faults = {0, 0};
  // Points awarded to each side from the opponent's faults.
  std::array<int, 2> fault_points = {0, 0};
  std::array<int, 2> final_score = {0, 0};
  std::array<double, 2> penalty = {0.0, 0.0};
  std::array<Deployability, 2> level = {Deployability::kDeployable,
                                        Deployability::kDeployable};
  std::array<Outcome, 2> outcome = {Outcome::kDraw, Outcome::kDraw};
  std::array<int, 2> points = {0, 0};
};

// Goals and faults in, score out. A side whose game penalty is
// non-deployable loses regardless of the score; two such sides draw.
inline MatchScore score_match_counts(std::array<int, 2> goals,
                                     std::array<int, 2> faults,
                                     std::array<double, 2> penalty = {0.0, 0.0},
                                     const FaultRule& rule = {},
                                     const OutcomePoints& pts = {},
                                     const DeployabilityThresholds& th =
                                         deployability_thresholds(Stage::kTournament)) {
  if (rule.faults_per_point < 1)
    throw ConfigError("fault rule: faults_per_point must be >= 1");
  MatchScore m;
  m.goals = goals;
  m.faults = faults;
  m.penalty = penalty;
  for (int s = 0; s < 2; ++s) {
    m.fault_points[s] = faults[1 - s] / rule.faults_per_point;
    m.final_score[s] = goals[s] + m.fault_points[s];
    m.level[s] = classify_deployability(penalty[s], th);
  }
  const bool bad0 = m.level[0] == Deployability::kNonDeployable;
  const bool bad1 = m.level[1] == Deployability::kNonDeployable;
  int winner = -1;  // -1 draw
  if (bad0 && bad1) {
    winner = -1;
  } else if (bad0 != bad1) {
    winner = bad0 ? 1 : 0;
  } else if (m.final_score[0] != m.final_score[1]) {
    winner = m.final_score[0] > m.final_score[1] ? 0 : 1;
  }
  for (int s = 0; s < 2; ++s) {
    m.outcome[s] = winner < 0 ? Outcome::kDraw
                              : (winner == s ? Outcome::kWin : Outcome::kLoss);
    m.points[s] = pts.of(m.outcome[s]);
  }
  return m;
}

inline MatchScore score_match(std::span<const Event> events,
                              std::array<double, 2> penalty = {0.0, 0.0},
                              const FaultRule& rule = {},
                              const OutcomePoints& pts = {},
                              const DeployabilityThresholds& th =
                                  deployability_thresholds(Stage::kTournament)) {
  std::array<int, 2> goals = {0, 0}, faults = {0, 0};
  for (const Event& e : events) {
    // A goal event names the side whose goal was entered.
    if (e.type == EventType::kGoal) ++goals[1 - e.side];
    if (e.type == EventType::kFault) ++faults[e.side];
  }
  return score_match_counts(goals, faults, penalty, rule, pts, th);
}

struct StandingRow {
  std::string name;
  int wins = 0, losses = 0, draws = 0;
  int goals_scored = 0, goals_received = 0;
  double penalty = 0.0;
  int points = 0;
};

struct MatchRecord {
  int a = 0, b = 0;  // indices into the team list
  MatchScore score;
};

inline std::vector<StandingRow> standings(const std::vector<std::string>& names,
                                          const std::vector<MatchRecord>& matches) {
  std::vector<StandingRow> rows(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) rows[i].name = names[i];
  for (const MatchRecord& m : matches) {
    const std::array<int, 2> idx = {m.a, m.b};
    for (int s = 0; s < 2; ++s) {
      StandingRow& r = rows.at(idx[s]);
      r.wins += m.score.outcome[s] == Outcome::kWin;
      r.draws += m.score.outcome[s] == Outcome::kDraw;
      r.losses += m.score.outcome[s] == Outcome::kLoss;
      r.goals_scored += m.score.goals[s];
      r.goals_received += m.score.goals[1 - s];
      r.penalty += m.score.penalty[s];
      r.points += m.score.points[s];
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const StandingRow& x, const StandingRow& y) {
                     if (x.points != y.points) return x.points > y.points;
                     return x.goals_scored - x.goals_received >
                            y.goals_scored - y.goals_received;
                   });
  return rows;
}

// ---------------------------------------------------------- qualifying rank

struct TaskWeights {
  double hit = 0.4;
  double defend = 0.4;
  double prepare = 0.2;
};

struct QualifyingRow {
  std::string name;
  std::array<double, 3> success = {0.0, 0.0, 0.0};  // fractions, task order
  std::array<double, 3> task_penalty = {0.0, 0.0, 0.0};
  // Team penalty: the worst per-task deployability score.
  double penalty = 0.0;
  double score = 0.0;
  Deployability level = Deployability::kDeployable;
};

inline double qualifying_score(const std::array<double, 3>& success,
                               const TaskWeights& w = {}) {
  const double total = w.hit + w.defend + w.prepare;
  if (!(total > 0.0)) throw ConfigError("task weights must sum to > 0");
  return 100.0 *
         (w.hit * success[0] + w.defend * success[1] + w.prepare * success[2]) /
         total;
}

// Fills score and level, then orders by level and score.
inline std::vector<QualifyingRow> qualifying_rank(
    std::vector<QualifyingRow> rows, const DeployabilityThresholds& th =
                                         deployability_thresholds(Stage::kQualifying),
    const TaskWeights& w = {}) {
  for (QualifyingRow& r : rows) {
    r.score = qualifying_score(r.success, w);
    r.level = classify_deployability(r.penalty, th);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const QualifyingRow& a, const QualifyingRow& b) {
                     if (a.level != b.level) return a.level < b.level;
                     return a.score > b.score;
                   });
  return rows;
}

}  // namespace ahb

#endif  // AHB_METRICS_HPP_
