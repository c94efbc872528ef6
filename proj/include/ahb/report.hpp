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

// Leaderboard, match, ablation and optimizer-trace emitters: plain-text
// tables, CSV rows and JSON.

#ifndef AHB_REPORT_HPP_
#define AHB_REPORT_HPP_

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ahb/harness.hpp"
#include "ahb/learning.hpp"
#include "ahb/metrics.hpp"

namespace ahb {

// A rectangular table of preformatted cells.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string fmt(double v, int decimals = 1) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline void write_text(std::ostream& os, const Table& t) {
  std::vector<std::size_t> w(t.header.size(), 0);
  const auto widen = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < w.size(); ++i)
      w[i] = std::max(w[i], r[i].size());
  };
  widen(t.header);
  for (const auto& r : t.rows) widen(r);
  const auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      // First column left-aligned, numbers right-aligned.
      if (i == 0)
        os << cell << std::string(w[i] - cell.size(), ' ');
      else
        os << "  " << std::string(w[i] - cell.size(), ' ') << cell;
    }
    os << '\n';
  };
  line(t.header);
  std::size_t total = 0;
  for (std::size_t x : w) total += x + 2;
  os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
  for (const auto& r : t.rows) line(r);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& os, const Table& t) {
  const auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_escape(r[i]);
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

// ------------------------------------------------------------- qualifying

inline Table qualifying_table(const std::vector<QualifyingRow>& ranked) {
  Table t;
  t.header = {"Team", "Hit %", "Defend %", "Prepare %", "Penalty", "Score", "Level"};
  for (const QualifyingRow& r : ranked)
    t.rows.push_back({r.name, fmt(100.0 * r.success[0]), fmt(100.0 * r.success[1]),
                      fmt(100.0 * r.success[2]), fmt(r.penalty), fmt(r.score),
                      std::string(to_string(r.level))});
  return t;
}

inline Json qualifying_json(const QualifyingResult& q) {
  Json j;
  j["agent"] = q.agent;
  j["episodes_per_task"] = q.n;
  j["thresholds"] = {{"deployable", q.thresholds.deployable},
                     {"improvable", q.thresholds.improvable}};
  j["tasks"] = Json::array();
  for (const TaskStats& s : q.tasks)
    j["tasks"].push_back({{"task", to_string(s.task)},
                          {"episodes", s.episodes},
                          {"successes", s.successes},
                          {"failures", s.failures},
                          {"success_rate", s.success_rate()},
                          {"ds", s.ds}});
  j["penalty"] = q.row.penalty;
  j["score"] = q.row.score;
  j["level"] = to_string(q.row.level);
  return j;
}

// ------------------------------------------------------------- tournament

inline Table standings_table(const std::vector<StandingRow>& rows) {
  Table t;
  t.header = {"Team", "W", "L", "D", "Goals scored", "Goals received", "Penalty", "Points"};
  for (const StandingRow& r : rows)
    t.rows.push_back({r.name, std::to_string(r.wins), std::to_string(r.losses),
                      std::to_string(r.draws), std::to_string(r.goals_scored),
                      std::to_string(r.goals_received), fmt(r.penalty),
                      std::to_string(r.points)});
  return t;
}

inline Table matches_table(const std::vector<MatchResult>& matches) {
  Table t;
  t.header = {"Match", "Final score", "Goals", "Penalty", "Winner"};
  for (const MatchResult& m : matches) {
    const MatchScore& s = m.score;
    std::string winner = "draw";
    for (int side = 0; side < 2; ++side)
      if (s.outcome[side] == Outcome::kWin) winner = m.names[side];
    t.rows.push_back({m.names[0] + " x " + m.names[1],
                      std::to_string(s.final_score[0]) + " - " +
                          std::to_string(s.final_score[1]),
                      std::to_string(s.goals[0]) + " - " + std::to_string(s.goals[1]),
                      fmt(s.penalty[0]) + " / " + fmt(s.penalty[1]), winner});
  }
  return t;
}

inline Json tournament_json(const TournamentResult& r) {
  Json j;
  j["game_steps"] = r.game_steps;
  j["standings"] = Json::array();
  for (const StandingRow& s : r.standings)
    j["standings"].push_back({{"team", s.name},
                              {"wins", s.wins},
                              {"losses", s.losses},
                              {"draws", s.draws},
                              {"goals_scored", s.goals_scored},
                              {"goals_received", s.goals_received},
                              {"penalty", s.penalty},
                              {"points", s.points}});
  j["matches"] = Json::array();
  for (const MatchResult& m : r.matches) {
    Json mj = {{"teams", m.names},
               {"final_score", m.score.final_score},
               {"goals", m.score.goals},
               {"faults", m.score.faults},
               {"penalty", m.score.penalty},
               {"penalty_episodes", m.penalty_episodes},
               {"outcome", {to_string(m.score.outcome[0]), to_string(m.score.outcome[1])}},
               {"forfeited", m.forfeited},
               {"steps", m.steps},
               {"seed", m.seed}};
    if (m.forfeited[0] || m.forfeited[1]) mj["error"] = m.error;
    j["matches"].push_back(std::move(mj));
  }
  return j;
}

// --------------------------------------------------------------- ablation

inline Table ablation_table(const AblationResult& r) {
  Table t;
  t.header = {"Task"};
  for (const std::string& c : r.columns) t.header.push_back(c + " %");
  for (std::size_t i = 0; i < r.tasks.size(); ++i) {
    std::vector<std::string> row = {std::string(to_string(r.tasks[i]))};
    for (double s : r.success[i]) row.push_back(fmt(100.0 * s));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Json ablation_json(const AblationResult& r) {
  Json j;
  j["columns"] = r.columns;
  j["tasks"] = Json::array();
  for (Task t : r.tasks) j["tasks"].push_back(to_string(t));
  j["success"] = r.success;
  j["changed_fields"] = r.changed_fields;
  return j;
}

// ------------------------------------------------------- optimizer traces

inline Table trace_table(const std::vector<OptimizerTraceRow>& trace) {
  Table t;
  t.header = {"iteration", "best", "mean"};
  for (const OptimizerTraceRow& r : trace)
    t.rows.push_back({std::to_string(r.iteration), fmt(r.best, 9), fmt(r.mean, 9)});
  return t;
}

}  // namespace ahb

#endif  // AHB_REPORT_HPP_
