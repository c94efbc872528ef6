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

// Command-line front end: qualifying, tournament, ablation, model fitting,
// controller tuning and replay inspection.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ahb/ahb.hpp"

namespace fs = std::filesystem;
using namespace ahb;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAgent = 3;
constexpr int kExitIo = 4;
constexpr int kExitModel = 5;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile;
  std::string factor;
  bool no_timing = false;
  bool full_scale = false;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Environment config JSON");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--profile", c.profile, "ideal | evaluation | ablation");
  app->add_option("--factor", c.factor,
                  "Ablation factor: model_mismatch | obs_noise | puck_disturbance | track_loss");
  app->add_flag("--no-timing", c.no_timing, "Do not measure or charge compute time");
  app->add_flag("--full-scale", c.full_scale,
                "1000 episodes per task and 45000-step games");
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

EnvConfig make_env(const Common& c) {
  EnvConfig env = c.config.empty() ? EnvConfig::ideal() : load_env_config(c.config);
  if (c.seed) env.seed = *c.seed;
  if (!c.profile.empty()) {
    const Profile p = profile_from_string(c.profile);
    std::optional<Factor> f;
    if (!c.factor.empty()) f = factor_from_string(c.factor);
    env = env.with_profile(p, f);
  } else if (!c.factor.empty()) {
    env = env.with_profile(Profile::kAblation, factor_from_string(c.factor));
  }
  if (c.no_timing) env.timing = false;
  if (c.full_scale) env.game_steps = 45000;
  env.validate();
  return env;
}

fs::path out_dir(const Common& c) {
  if (c.out.empty()) return {};
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create output directory " + c.out + ": " + ec.message());
  return fs::path(c.out);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string text_of(const Table& t) {
  std::ostringstream ss;
  write_text(ss, t);
  return ss.str();
}

std::string csv_of(const Table& t) {
  std::ostringstream ss;
  write_csv(ss, t);
  return ss.str();
}

// rl3 accepts a parameter file holding {"theta": [4 numbers]}.
PolarRuleParams read_rl3_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open agent parameters: " + path);
  PolarRuleParams p;
  try {
    const Json j = Json::parse(f);
    const auto th = j.at("theta").get<std::vector<double>>();
    if (th.size() != p.rules.theta.size())
      throw ConfigError("agent parameters: theta needs 4 values");
    std::copy(th.begin(), th.end(), p.rules.theta.begin());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("agent parameters: ") + e.what());
  }
  return p;
}

AgentFactory factory_for(const std::string& name, const std::string& params) {
  if (params.empty()) return agent_factory(name);
  if (name != "rl3") throw ConfigError("agent parameters are only supported for rl3");
  const PolarRuleParams p = read_rl3_params(params);
  return [p] { return std::make_unique<PolarRuleAgent>(AgentContext{}, p); };
}

std::vector<Task> parse_tasks(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllTasks.begin(), kAllTasks.end()};
  std::vector<Task> out;
  for (const auto& n : names) out.push_back(task_from_string(n));
  return out;
}

// ------------------------------------------------------------ subcommands

int cmd_qualify(const Common& c, const std::vector<std::string>& agents,
                const std::string& params, std::optional<int> episodes,
                const std::vector<std::string>& task_names, bool record) {
  const EnvConfig env = make_env(c);
  const int n = episodes.value_or(c.full_scale ? 1000 : 100);
  const std::vector<Task> tasks = parse_tasks(task_names);
  const fs::path dir = out_dir(c);
  RunOptions opt{c.threads, record && !dir.empty()};
  std::vector<QualifyingRow> rows;
  Json all = Json::array();
  for (const std::string& name : agents) {
    const QualifyingResult q =
        run_qualifying(factory_for(name, params), n, env, opt, tasks, name);
    rows.push_back(q.row);
    all.push_back(qualifying_json(q));
    if (opt.record)
      for (std::size_t i = 0; i < q.replays.size(); ++i)
        save_replay((dir / (name + "_" + std::string(to_string(tasks[i])) + ".jsonl")).string(),
                    q.replays[i]);
  }
  const Table t = qualifying_table(
      qualifying_rank(rows, deployability_thresholds(Stage::kQualifying, n)));
  std::cout << text_of(t);
  if (!dir.empty()) {
    write_file(dir / "qualifying.csv", csv_of(t));
    write_file(dir / "qualifying.json", all.dump(2) + "\n");
  }
  return 0;
}

int cmd_tournament(const Common& c, const std::vector<std::string>& agents,
                   std::optional<int> game_steps, bool record) {
  const EnvConfig env = make_env(c);
  std::vector<AgentFactory> f;
  for (const auto& a : agents) f.push_back(agent_factory(a));
  const fs::path dir = out_dir(c);
  RunOptions opt{c.threads, record && !dir.empty()};
  const TournamentResult r = run_tournament(agents, f, env, opt, game_steps);
  const Table s = standings_table(r.standings);
  const Table m = matches_table(r.matches);
  std::cout << text_of(m) << '\n' << text_of(s);
  if (!dir.empty()) {
    write_file(dir / "standings.csv", csv_of(s));
    write_file(dir / "matches.csv", csv_of(m));
    write_file(dir / "tournament.json", tournament_json(r).dump(2) + "\n");
    for (std::size_t i = 0; i < r.replays.size(); ++i)
      save_replay((dir / ("match_" + r.matches[i].names[0] + "_" + r.matches[i].names[1] +
                          ".jsonl")).string(),
                  r.replays[i]);
  }
  return 0;
}

int cmd_ablate(const Common& c, const std::string& agent, std::optional<int> episodes,
               const std::vector<std::string>& task_names) {
  const EnvConfig env = make_env(c);
  const std::vector<Task> tasks = parse_tasks(task_names);
  const AblationResult r = run_ablation(agent_factory(agent), tasks, kAllFactors,
                                        episodes.value_or(100), env, {c.threads});
  const Table t = ablation_table(r);
  std::cout << text_of(t);
  const fs::path dir = out_dir(c);
  if (!dir.empty()) {
    write_file(dir / "ablation.csv", csv_of(t));
    write_file(dir / "ablation.json", ablation_json(r).dump(2) + "\n");
  }
  return 0;
}

int cmd_fit_puck(const Common& c, int per_mode, double dt) {
  const EnvConfig env = make_env(c);
  Rng rng(derive_seed(env.seed, 3000));
  const auto data = collect_puck_dataset(env.puck, env.geom, dt, per_mode, rng);
  const PiecewiseLinearPuckModel m = fit_piecewise_model(data, dt);
  Table t;
  t.header = {"Mode", "Samples", "RMS residual"};
  for (ContactMode mode : kAllModes) {
    double se = 0.0;
    int count = 0;
    for (const PuckTransition& tr : data) {
      if (tr.mode != mode) continue;
      const LinearMode& lm = m.modes[static_cast<int>(mode)];
      se += (lm.A * tr.sp + lm.B * tr.sm - tr.sp_next).squaredNorm() / 4.0;
      ++count;
    }
    t.rows.push_back({std::string(to_string(mode)), std::to_string(count),
                      fmt(std::sqrt(se / std::max(count, 1)), 6)});
  }
  std::cout << text_of(t);
  const fs::path dir = out_dir(c);
  if (!dir.empty()) save_puck_model((dir / "puck_model.txt").string(), m);
  return 0;
}

// Step response of the configured (or default) mismatched arm.
ArmResponse synthetic_arm_response(const EnvConfig& env) {
  ArmTrackingModel truth;
  truth.mode = TrackingMode::kFirstOrderLag;
  truth.tau = env.mismatch.tau;
  truth.gain_scale = env.mismatch.gain_scale;
  ArmResponse r;
  r.q0 = iiwa14_spec().q_init;
  for (int k = 0; k < 400; ++k) {
    JointVector sp = r.q0;
    if (k >= 20) sp.array() += 0.3;
    if (k >= 200) sp.array() -= 0.5;
    r.setpoints.push_back(sp);
  }
  r.measured = simulate_arm_response(truth, r);
  return r;
}

// CSV with 14 columns per row: 7 setpoints then 7 measured positions.
ArmResponse read_arm_response(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open arm response: " + path);
  ArmResponse r;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        v.clear();
        break;
      }
    }
    if (v.empty() && r.setpoints.empty()) continue;  // header row
    if (v.size() != 2 * kNumJoints)
      throw ConfigError("arm response line " + std::to_string(line_no) + ": expected 14 numbers");
    JointVector sp, q;
    for (int i = 0; i < kNumJoints; ++i) {
      sp[i] = v[i];
      q[i] = v[kNumJoints + i];
    }
    r.setpoints.push_back(sp);
    r.measured.push_back(q);
  }
  if (r.setpoints.empty()) throw ConfigError("arm response: no samples in " + path);
  r.q0 = r.measured.front();
  return r;
}

int cmd_fit_arm(const Common& c, const std::string& response, int budget) {
  const EnvConfig env = make_env(c);
  const ArmResponse r = response.empty() ? synthetic_arm_response(env) : read_arm_response(response);
  Rng rng(derive_seed(env.seed, 3100));
  const ArmFitResult fit = fit_arm_tracking(r, rng, budget);
  std::cout << "tau " << fmt(fit.model.tau, 6) << "  gain_scale " << fmt(fit.model.gain_scale, 6)
            << "  mse " << fit.mse << "  evaluations " << fit.search.evaluations << "\n";
  const fs::path dir = out_dir(c);
  if (!dir.empty()) {
    write_file(dir / "fit_arm_trace.csv", csv_of(trace_table(fit.search.trace)));
    const Json j = {{"tau", fit.model.tau},
                    {"gain_scale", fit.model.gain_scale},
                    {"mse", fit.mse},
                    {"evaluations", fit.search.evaluations}};
    write_file(dir / "fit_arm.json", j.dump(2) + "\n");
  }
  return 0;
}

// PGPE on the rl3 hit controller: the return of a parameter vector is its
// hit success rate minus its penalty points per episode.
int cmd_tune(const Common& c, int iterations, int samples, int episodes) {
  const EnvConfig env = make_env(c);
  PGPEState s;
  const PolarRuleParams base;
  s.mu = Eigen::Map<const Eigen::VectorXd>(base.rules.theta.data(), 4);
  s.sigma = 0.25 * s.mu.cwiseAbs().cwiseMax(0.01);
  Rng rng(derive_seed(env.seed, 3200));
  const std::array<Task, 1> hit = {Task::kHit};
  const auto evaluate = [&](const Eigen::VectorXd& th, std::uint64_t seed) {
    PolarRuleParams p;
    for (int i = 0; i < 4; ++i) p.rules.theta[i] = th[i];
    EnvConfig e = env;
    e.seed = seed;
    const auto q = run_qualifying(
        [p] { return std::make_unique<PolarRuleAgent>(AgentContext{}, p); }, episodes, e,
        {c.threads}, hit);
    return q.tasks[0].success_rate() - q.tasks[0].ds / episodes;
  };
  std::vector<OptimizerTraceRow> trace;
  for (int it = 0; it < iterations; ++it) {
    const auto thetas = pgpe_sample(s, samples, rng);
    std::vector<double> returns;
    const std::uint64_t seed = derive_seed(env.seed, 3300, it);
    for (const auto& th : thetas) returns.push_back(evaluate(th, seed));
    double best = returns.front(), mean = 0.0;
    for (double r : returns) {
      best = std::max(best, r);
      mean += r / samples;
    }
    trace.push_back({it, best, mean});
    std::cout << "iteration " << it << "  best " << fmt(best, 3) << "  mean " << fmt(mean, 3)
              << '\n';
    s = pgpe_update(s, thetas, returns);
  }
  std::cout << "theta";
  for (int i = 0; i < 4; ++i) std::cout << ' ' << s.mu[i];
  std::cout << '\n';
  const fs::path dir = out_dir(c);
  if (!dir.empty()) {
    write_file(dir / "tune_trace.csv", csv_of(trace_table(trace)));
    const Json j = {{"theta", std::vector<double>(s.mu.data(), s.mu.data() + 4)}};
    write_file(dir / "rl3_params.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_replay(const Common& c, const std::string& path) {
  const ReplayFile f = load_replay(path);
  const auto ds = replay_penalties(f);
  std::cout << "kind " << f.header.kind << "\nagents";
  for (const auto& a : f.header.agents) std::cout << ' ' << a;
  std::cout << "\nrecords " << f.records.size() << "\npenalty_episodes "
            << f.header.penalty_episodes << "\nconfig_hash " << hex64(f.header.config_hash)
            << '\n';
  std::array<int, 2> goals = {0, 0};
  for (const ReplayRecord& r : f.records)
    for (const Event& e : r.events)
      if (e.type == EventType::kGoal) ++goals[1 - e.side];
  for (std::size_t s = 0; s < f.header.agents.size() && s < 2; ++s)
    std::cout << f.header.agents[s] << ": goals " << goals[s] << "  deployability score "
              << fmt(ds[s]) << '\n';
  const fs::path dir = out_dir(c);
  if (!dir.empty()) {
    const Json j = {{"kind", f.header.kind},
                    {"agents", f.header.agents},
                    {"records", f.records.size()},
                    {"goals", goals},
                    {"ds", ds}};
    write_file(dir / "replay_summary.json", j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Air hockey benchmark harness"};
  app.require_subcommand(1);
  Common common;

  auto* qualify = app.add_subcommand("qualify", "Run the qualifying tasks");
  std::vector<std::string> q_agents = {"composite"};
  std::string q_params;
  std::optional<int> q_episodes;
  std::vector<std::string> q_tasks;
  bool q_record = false;
  qualify->add_option("--agent", q_agents, "Agent name(s)");
  qualify->add_option("--agent-params", q_params, "Agent parameter file (JSON)");
  qualify->add_option("--episodes", q_episodes, "Episodes per task")->check(CLI::NonNegativeNumber);
  qualify->add_option("--task", q_tasks, "hit | defend | prepare (default: all)");
  qualify->add_flag("--replay", q_record, "Write JSONL replays to --out");
  add_common(qualify, common);

  auto* tournament = app.add_subcommand("tournament", "Round-robin tournament");
  std::vector<std::string> t_agents = {"composite", "spacer", "rl3"};
  std::optional<int> t_steps;
  bool t_record = false;
  tournament->add_option("--agent", t_agents, "Agent names");
  tournament->add_option("--game-steps", t_steps, "Control steps per game");
  tournament->add_flag("--replay", t_record, "Write JSONL replays to --out");
  add_common(tournament, common);

  auto* ablate = app.add_subcommand("ablate", "Single-factor ablation");
  std::string a_agent = "composite";
  std::optional<int> a_episodes;
  std::vector<std::string> a_tasks;
  ablate->add_option("--agent", a_agent, "Agent name");
  ablate->add_option("--episodes", a_episodes, "Episodes per task and column");
  ablate->add_option("--task", a_tasks, "hit | defend | prepare (default: all)");
  add_common(ablate, common);

  auto* fit_puck = app.add_subcommand("fit-puck-model", "Fit the piecewise-linear puck model");
  int per_mode = 2000;
  double model_dt = 0.005;
  fit_puck->add_option("--samples", per_mode, "Transitions per contact mode");
  fit_puck->add_option("--dt", model_dt, "Model step (s)");
  add_common(fit_puck, common);

  auto* fit_arm = app.add_subcommand("fit-arm", "Identify arm tracking lag and gain");
  std::string response;
  int budget = 1500;
  fit_arm->add_option("--response", response, "CSV: 7 setpoints, 7 measured positions per row");
  fit_arm->add_option("--budget", budget, "Objective evaluations");
  add_common(fit_arm, common);

  auto* tune = app.add_subcommand("tune", "Tune the rl3 hit controller with PGPE");
  int iterations = 10, samples = 6, tune_episodes = 4;
  tune->add_option("--iterations", iterations, "PGPE iterations");
  tune->add_option("--samples", samples, "Parameter samples per iteration");
  tune->add_option("--episodes", tune_episodes, "Hit episodes per sample");
  add_common(tune, common);

  auto* replay = app.add_subcommand("replay", "Validate and summarize a replay file");
  std::string replay_path;
  replay->add_option("file", replay_path, "Replay JSONL file")->required();
  add_common(replay, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*qualify) return cmd_qualify(common, q_agents, q_params, q_episodes, q_tasks, q_record);
    if (*tournament) return cmd_tournament(common, t_agents, t_steps, t_record);
    if (*ablate) return cmd_ablate(common, a_agent, a_episodes, a_tasks);
    if (*fit_puck) return cmd_fit_puck(common, per_mode, model_dt);
    if (*fit_arm) return cmd_fit_arm(common, response, budget);
    if (*tune) return cmd_tune(common, iterations, samples, tune_episodes);
    if (*replay) return cmd_replay(common, replay_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const AgentError& e) {
    std::cerr << "agent error: " << e.what() << '\n';
    return kExitAgent;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ModelFitError& e) {
    std::cerr << "model fit error: " << e.what() << '\n';
    return kExitModel;
  }
  return 0;
}
