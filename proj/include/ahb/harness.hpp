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

// Evaluation harness: environment profiles, episode and match loops,
// qualifying / tournament / ablation runners, replay logs and config I/O.

#ifndef AHB_HARNESS_HPP_
#define AHB_HARNESS_HPP_

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ahb/agents.hpp"
#include "ahb/common.hpp"
#include "ahb/metrics.hpp"
#include "ahb/noise.hpp"
#include "ahb/world.hpp"
#include "json.hpp"

namespace ahb {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- profiles

enum class Profile { kIdeal, kEvaluation, kAblation };
enum class Factor { kModelMismatch, kObsNoise, kPuckDisturbance, kTrackLoss };
inline constexpr std::array<Factor, 4> kAllFactors = {
    Factor::kModelMismatch, Factor::kObsNoise, Factor::kPuckDisturbance,
    Factor::kTrackLoss};

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::kIdeal: return "ideal";
    case Profile::kEvaluation: return "evaluation";
    case Profile::kAblation: return "ablation";
  }
  return "unknown";
}

inline std::string_view to_string(Factor f) {
  switch (f) {
    case Factor::kModelMismatch: return "model_mismatch";
    case Factor::kObsNoise: return "obs_noise";
    case Factor::kPuckDisturbance: return "puck_disturbance";
    case Factor::kTrackLoss: return "track_loss";
  }
  return "unknown";
}

inline Profile profile_from_string(std::string_view s) {
  for (Profile p : {Profile::kIdeal, Profile::kEvaluation, Profile::kAblation})
    if (to_string(p) == s) return p;
  throw ConfigError("unknown profile: " + std::string(s));
}

inline Factor factor_from_string(std::string_view s) {
  for (Factor f : kAllFactors)
    if (to_string(f) == s) return f;
  throw ConfigError("unknown factor: " + std::string(s));
}

struct PuckDisturbanceConfig {
  bool enabled = false;
  // Airflow acceleration noise (m/s^2).
  double std = 2.0;
};

struct EnvConfig {
  Profile profile = Profile::kIdeal;
  std::optional<Factor> factor;
  std::uint64_t seed = 0;
  TableGeometry geom;
  PuckParams puck;
  // Observation noise and tracking loss are separate factors but share the
  // noise struct; their field groups are disjoint.
  NoiseConfig noise;
  MismatchConfig mismatch;
  PuckDisturbanceConfig disturbance;
  SuccessCriteria success;
  int episode_steps = 500;
  int game_steps = 4500;
  // Off: compute time is not measured and never penalized.
  bool timing = true;

  bool factor_enabled(Factor f) const {
    switch (f) {
      case Factor::kModelMismatch: return mismatch.enabled;
      case Factor::kObsNoise: return noise.noise_enabled;
      case Factor::kPuckDisturbance: return disturbance.enabled;
      case Factor::kTrackLoss: return noise.loss_enabled;
    }
    return false;
  }

  void set_factor(Factor f, bool on) {
    switch (f) {
      case Factor::kModelMismatch: mismatch.enabled = on; break;
      case Factor::kObsNoise: noise.noise_enabled = on; break;
      case Factor::kPuckDisturbance: disturbance.enabled = on; break;
      case Factor::kTrackLoss: noise.loss_enabled = on; break;
    }
  }

  // Same parameters, switched to another profile.
  EnvConfig with_profile(Profile p, std::optional<Factor> f = std::nullopt) const {
    EnvConfig c = *this;
    c.profile = p;
    c.factor = p == Profile::kAblation ? f : std::nullopt;
    if (p == Profile::kAblation && !f)
      throw ConfigError("ablation profile needs a factor");
    for (Factor x : kAllFactors)
      c.set_factor(x, p == Profile::kEvaluation || (f && *f == x && p == Profile::kAblation));
    return c;
  }

  static EnvConfig ideal(std::uint64_t seed = 0) {
    EnvConfig c;
    c.seed = seed;
    return c.with_profile(Profile::kIdeal);
  }
  static EnvConfig evaluation(std::uint64_t seed = 0) {
    return ideal(seed).with_profile(Profile::kEvaluation);
  }
  static EnvConfig ablation(Factor f, std::uint64_t seed = 0) {
    return ideal(seed).with_profile(Profile::kAblation, f);
  }

  void validate() const {
    geom.validate();
    puck.validate();
    noise.validate();
    if (!(disturbance.std >= 0.0)) throw ConfigError("disturbance std must be >= 0");
    if (mismatch.enabled && !(mismatch.tau > 0.0 && mismatch.gain_scale > 0.0))
      throw ConfigError("mismatch: tau and gain_scale must be positive");
    if (episode_steps < 1) throw ConfigError("episode_steps must be >= 1");
    if (game_steps < 1) throw ConfigError("game_steps must be >= 1");
    int on = 0;
    for (Factor f : kAllFactors) on += factor_enabled(f);
    switch (profile) {
      case Profile::kIdeal:
        if (on != 0) throw ConfigError("ideal profile must enable no factor");
        if (factor) throw ConfigError("ideal profile takes no factor");
        break;
      case Profile::kEvaluation:
        if (on != 4) throw ConfigError("evaluation profile must enable all factors");
        if (factor) throw ConfigError("evaluation profile takes no factor");
        break;
      case Profile::kAblation:
        if (!factor) throw ConfigError("ablation profile needs a factor");
        if (on != 1 || !factor_enabled(*factor))
          throw ConfigError("ablation profile must enable exactly its factor");
        break;
    }
  }
};

// ------------------------------------------------------------ config JSON

inline Json to_json(const EnvConfig& c) {
  Json j;
  j["profile"] = to_string(c.profile);
  j["factor"] = c.factor ? Json(to_string(*c.factor)) : Json(nullptr);
  j["seed"] = c.seed;
  j["geometry"] = {{"length", c.geom.length},
                   {"width", c.geom.width},
                   {"goal_width", c.geom.goal_width},
                   {"z_table", c.geom.z_table},
                   {"puck_radius", c.geom.puck_radius},
                   {"mallet_radius", c.geom.mallet_radius}};
  j["puck"] = {{"slide_friction", c.puck.slide_friction},
               {"wall_restitution", c.puck.wall_restitution},
               {"mallet_restitution", c.puck.mallet_restitution}};
  j["model_mismatch"] = {{"enabled", c.mismatch.enabled},
                         {"tau", c.mismatch.tau},
                         {"gain_scale", c.mismatch.gain_scale},
                         {"friction_scale", c.mismatch.friction_scale},
                         {"restitution_scale", c.mismatch.restitution_scale},
                         {"jitter", c.mismatch.jitter}};
  j["obs_noise"] = {{"enabled", c.noise.noise_enabled},
                    {"puck_pos_std", c.noise.puck_pos_std},
                    {"puck_angle_std", c.noise.puck_angle_std},
                    {"joint_pos_std", c.noise.joint_pos_std},
                    {"joint_vel_std", c.noise.joint_vel_std}};
  j["puck_disturbance"] = {{"enabled", c.disturbance.enabled},
                           {"std", c.disturbance.std}};
  j["track_loss"] = {{"enabled", c.noise.loss_enabled},
                     {"enter_prob", c.noise.loss_enter_prob},
                     {"mean_steps", c.noise.loss_mean_steps}};
  j["success"] = {{"hit_min_speed", c.success.hit_min_speed},
                  {"defend_max_speed", c.success.defend_max_speed},
                  {"prepare_max_speed", c.success.prepare_max_speed},
                  {"prepare_x_min", c.success.prepare_x_min},
                  {"prepare_x_max", c.success.prepare_x_max},
                  {"prepare_abs_y", c.success.prepare_abs_y}};
  j["episode_steps"] = c.episode_steps;
  j["game_steps"] = c.game_steps;
  j["timing"] = c.timing;
  return j;
}

namespace detail {

template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

// Missing keys keep their defaults; the result is validated.
inline EnvConfig env_config_from_json(const Json& j) {
  EnvConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    using detail::read_field;
    if (j.contains("profile")) c.profile = profile_from_string(j["profile"].get<std::string>());
    if (j.contains("factor") && !j["factor"].is_null())
      c.factor = factor_from_string(j["factor"].get<std::string>());
    read_field(j, "seed", c.seed);
    if (j.contains("geometry")) {
      const Json& g = j["geometry"];
      read_field(g, "length", c.geom.length);
      read_field(g, "width", c.geom.width);
      read_field(g, "goal_width", c.geom.goal_width);
      read_field(g, "z_table", c.geom.z_table);
      read_field(g, "puck_radius", c.geom.puck_radius);
      read_field(g, "mallet_radius", c.geom.mallet_radius);
      c.geom.l_x = c.geom.mallet_radius;
      c.geom.u_y = c.geom.width / 2.0 - c.geom.mallet_radius;
      c.geom.l_y = -c.geom.u_y;
    }
    if (j.contains("puck")) {
      const Json& p = j["puck"];
      read_field(p, "slide_friction", c.puck.slide_friction);
      read_field(p, "wall_restitution", c.puck.wall_restitution);
      read_field(p, "mallet_restitution", c.puck.mallet_restitution);
    }
    if (j.contains("model_mismatch")) {
      const Json& m = j["model_mismatch"];
      read_field(m, "enabled", c.mismatch.enabled);
      read_field(m, "tau", c.mismatch.tau);
      read_field(m, "gain_scale", c.mismatch.gain_scale);
      read_field(m, "friction_scale", c.mismatch.friction_scale);
      read_field(m, "restitution_scale", c.mismatch.restitution_scale);
      read_field(m, "jitter", c.mismatch.jitter);
    }
    if (j.contains("obs_noise")) {
      const Json& n = j["obs_noise"];
      read_field(n, "enabled", c.noise.noise_enabled);
      read_field(n, "puck_pos_std", c.noise.puck_pos_std);
      read_field(n, "puck_angle_std", c.noise.puck_angle_std);
      read_field(n, "joint_pos_std", c.noise.joint_pos_std);
      read_field(n, "joint_vel_std", c.noise.joint_vel_std);
    }
    if (j.contains("puck_disturbance")) {
      read_field(j["puck_disturbance"], "enabled", c.disturbance.enabled);
      read_field(j["puck_disturbance"], "std", c.disturbance.std);
    }
    if (j.contains("track_loss")) {
      const Json& t = j["track_loss"];
      read_field(t, "enabled", c.noise.loss_enabled);
      read_field(t, "enter_prob", c.noise.loss_enter_prob);
      read_field(t, "mean_steps", c.noise.loss_mean_steps);
    }
    if (j.contains("success")) {
      const Json& s = j["success"];
      read_field(s, "hit_min_speed", c.success.hit_min_speed);
      read_field(s, "defend_max_speed", c.success.defend_max_speed);
      read_field(s, "prepare_max_speed", c.success.prepare_max_speed);
      read_field(s, "prepare_x_min", c.success.prepare_x_min);
      read_field(s, "prepare_x_max", c.success.prepare_x_max);
      read_field(s, "prepare_abs_y", c.success.prepare_abs_y);
    }
    read_field(j, "episode_steps", c.episode_steps);
    read_field(j, "game_steps", c.game_steps);
    read_field(j, "timing", c.timing);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

inline std::uint64_t config_hash(const Json& config) { return fnv1a(config.dump()); }
inline std::uint64_t config_hash(const EnvConfig& c) { return config_hash(to_json(c)); }

inline EnvConfig load_env_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return env_config_from_json(j);
}

inline void save_env_config(const std::string& path, const EnvConfig& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_json(c).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

namespace detail {

inline void flatten(const Json& j, const std::string& prefix,
                    std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace detail

// Dotted paths of parameter fields that differ; the profile/factor labels
// themselves are not parameters.
inline std::vector<std::string> config_diff(const EnvConfig& a, const EnvConfig& b) {
  std::map<std::string, std::string> fa, fb;
  detail::flatten(to_json(a), "", fa);
  detail::flatten(to_json(b), "", fb);
  std::vector<std::string> out;
  for (const auto& [k, v] : fa) {
    if (k == "profile" || k == "factor") continue;
    const auto it = fb.find(k);
    if (it == fb.end() || it->second != v) out.push_back(k);
  }
  for (const auto& [k, v] : fb)
    if (!fa.count(k) && k != "profile" && k != "factor") out.push_back(k);
  return out;
}

// JSON group holding a factor's fields.
inline std::string factor_group(Factor f) { return std::string(to_string(f)); }

// Throws std::logic_error unless `b` differs from `a` only inside the
// field group of `f`.
inline void check_single_factor_diff(const EnvConfig& a, const EnvConfig& b, Factor f) {
  const std::string prefix = factor_group(f) + ".";
  const std::vector<std::string> d = config_diff(a, b);
  if (d.empty()) throw std::logic_error("ablation config identical to ideal for " + prefix);
  for (const std::string& k : d)
    if (k.rfind(prefix, 0) != 0)
      throw std::logic_error("ablation " + std::string(to_string(f)) +
                             " changes unrelated field " + k);
}

// -------------------------------------------------------------- worker pool

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers store
// results by index, so the outcome does not depend on scheduling. The
// exception of the lowest failing index is rethrown.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
  if (n <= 0) return;
  threads = std::clamp(threads, 1, n);
  std::vector<std::exception_ptr> errors(n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (std::thread& th : pool) th.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

// ------------------------------------------------------------- replay log

inline constexpr int kReplaySchemaVersion = 1;

class ReplaySchemaError : public IoError {
 public:
  using IoError::IoError;
};

// What one arm did during one control tick. Setpoint extremes are enough
// to recompute joint-limit violations exactly.
struct ArmTickLog {
  bool active = false;
  Vec2 puck_obs = Vec2::Zero();
  JointVector q_des = JointVector::Zero();
  JointVector qdot_des = JointVector::Zero();
  JointVector sp_q_min = JointVector::Zero(), sp_q_max = JointVector::Zero();
  JointVector sp_qdot_min = JointVector::Zero(), sp_qdot_max = JointVector::Zero();
  JointVector q = JointVector::Zero();
  double compute_time = -1.0;
  bool failed = false;

  bool operator==(const ArmTickLog&) const = default;
};

struct ReplayRecord {
  int episode = 0;
  int step = 0;
  std::int64_t time_ms = 0;
  PuckState puck;
  std::array<ArmTickLog, 2> arms;
  std::vector<Event> events;

  bool operator==(const ReplayRecord&) const = default;
};

struct ReplayHeader {
  int schema_version = kReplaySchemaVersion;
  std::string kind;  // "qualifying" or "match"
  std::vector<std::string> agents;
  Json config;
  std::uint64_t config_hash = 0;
  // Penalty episodes per side in the run (forfeits included).
  int penalty_episodes = 0;

  bool operator==(const ReplayHeader& o) const {
    return schema_version == o.schema_version && kind == o.kind &&
           agents == o.agents && config == o.config &&
           config_hash == o.config_hash && penalty_episodes == o.penalty_episodes;
  }
};

struct ReplayFile {
  ReplayHeader header;
  std::vector<ReplayRecord> records;
  bool operator==(const ReplayFile&) const = default;
};

namespace detail {

inline Json vec_json(const JointVector& v) {
  Json a = Json::array();
  for (int i = 0; i < kNumJoints; ++i) a.push_back(v[i]);
  return a;
}
inline JointVector json_vec(const Json& a) {
  if (!a.is_array() || a.size() != kNumJoints)
    throw std::invalid_argument("joint vector needs 7 entries");
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = a[i].get<double>();
  return v;
}

inline EventType event_type_from_string(std::string_view s) {
  for (EventType t : {EventType::kGoal, EventType::kFault, EventType::kCommandFault,
                      EventType::kMalletContact, EventType::kWallContact})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown event type");
}

}  // namespace detail

inline Json to_json(const Event& e) {
  return {{"type", to_string(e.type)}, {"side", e.side}, {"value", e.value},
          {"time_ms", e.time_ms}};
}

inline Event event_from_json(const Json& j) {
  return {detail::event_type_from_string(j.at("type").get<std::string>()),
          j.at("side").get<int>(), j.at("value").get<double>(),
          j.at("time_ms").get<std::int64_t>()};
}

inline Json to_json(const ReplayRecord& r) {
  Json j;
  j["episode"] = r.episode;
  j["step"] = r.step;
  j["time_ms"] = r.time_ms;
  j["puck"] = {r.puck.x, r.puck.y, r.puck.theta, r.puck.vx, r.puck.vy, r.puck.omega};
  Json arms = Json::array();
  for (const ArmTickLog& a : r.arms) {
    if (!a.active) {
      arms.push_back(nullptr);
      continue;
    }
    arms.push_back({{"puck_obs", {a.puck_obs.x(), a.puck_obs.y()}},
                    {"q_des", detail::vec_json(a.q_des)},
                    {"qdot_des", detail::vec_json(a.qdot_des)},
                    {"sp_q_min", detail::vec_json(a.sp_q_min)},
                    {"sp_q_max", detail::vec_json(a.sp_q_max)},
                    {"sp_qdot_min", detail::vec_json(a.sp_qdot_min)},
                    {"sp_qdot_max", detail::vec_json(a.sp_qdot_max)},
                    {"q", detail::vec_json(a.q)},
                    {"compute_time", a.compute_time},
                    {"failed", a.failed}});
  }
  j["arms"] = arms;
  Json ev = Json::array();
  for (const Event& e : r.events) ev.push_back(to_json(e));
  j["events"] = ev;
  return j;
}

inline ReplayRecord replay_record_from_json(const Json& j) {
  ReplayRecord r;
  r.episode = j.at("episode").get<int>();
  r.step = j.at("step").get<int>();
  r.time_ms = j.at("time_ms").get<std::int64_t>();
  const Json& p = j.at("puck");
  if (!p.is_array() || p.size() != 6) throw std::invalid_argument("puck needs 6 entries");
  r.puck = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
            p[3].get<double>(), p[4].get<double>(), p[5].get<double>()};
  const Json& arms = j.at("arms");
  if (!arms.is_array() || arms.size() != 2) throw std::invalid_argument("arms needs 2 entries");
  for (int s = 0; s < 2; ++s) {
    if (arms[s].is_null()) continue;
    const Json& a = arms[s];
    ArmTickLog& l = r.arms[s];
    l.active = true;
    l.puck_obs = {a.at("puck_obs").at(0).get<double>(), a.at("puck_obs").at(1).get<double>()};
    l.q_des = detail::json_vec(a.at("q_des"));
    l.qdot_des = detail::json_vec(a.at("qdot_des"));
    l.sp_q_min = detail::json_vec(a.at("sp_q_min"));
    l.sp_q_max = detail::json_vec(a.at("sp_q_max"));
    l.sp_qdot_min = detail::json_vec(a.at("sp_qdot_min"));
    l.sp_qdot_max = detail::json_vec(a.at("sp_qdot_max"));
    l.q = detail::json_vec(a.at("q"));
    l.compute_time = a.at("compute_time").get<double>();
    l.failed = a.at("failed").get<bool>();
  }
  for (const Json& e : j.at("events")) r.events.push_back(event_from_json(e));
  return r;
}

inline void write_replay(std::ostream& os, const ReplayFile& f) {
  Json h;
  h["schema_version"] = f.header.schema_version;
  h["kind"] = f.header.kind;
  h["agents"] = f.header.agents;
  h["penalty_episodes"] = f.header.penalty_episodes;
  h["config_hash"] = hex64(f.header.config_hash);
  h["config"] = f.header.config;
  os << h.dump() << '\n';
  for (const ReplayRecord& r : f.records) os << to_json(r).dump() << '\n';
}

// Validates the header, the config hash and the step order. A line that
// does not parse is reported together with the last valid line.
inline ReplayFile read_replay(std::istream& is) {
  ReplayFile f;
  std::string line;
  int line_no = 0;
  const auto bad = [&](const std::string& why) {
    return IoError("replay: line " + std::to_string(line_no) + " " + why +
                   "; last valid line is " + std::to_string(line_no - 1));
  };
  if (!std::getline(is, line)) throw IoError("replay: empty file, no header line");
  line_no = 1;
  Json h;
  try {
    h = Json::parse(line);
  } catch (const Json::exception&) {
    throw IoError("replay: header line 1 is truncated or malformed; no valid line");
  }
  if (!h.is_object() || !h.contains("schema_version") ||
      !h["schema_version"].is_number_integer())
    throw ReplaySchemaError("replay: header has no schema_version");
  const int version = h["schema_version"].get<int>();
  if (version != kReplaySchemaVersion)
    throw ReplaySchemaError("replay: schema version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kReplaySchemaVersion) + ")");
  try {
    f.header.schema_version = version;
    f.header.kind = h.at("kind").get<std::string>();
    f.header.agents = h.at("agents").get<std::vector<std::string>>();
    f.header.penalty_episodes = h.at("penalty_episodes").get<int>();
    f.header.config = h.at("config");
    f.header.config_hash = std::stoull(h.at("config_hash").get<std::string>(), nullptr, 16);
  } catch (const std::exception& e) {
    throw ReplaySchemaError(std::string("replay: malformed header: ") + e.what());
  }
  if (config_hash(f.header.config) != f.header.config_hash)
    throw IoError("replay: config hash mismatch in header");
  while (std::getline(is, line)) {
    ++line_no;
    ReplayRecord r;
    try {
      r = replay_record_from_json(Json::parse(line));
    } catch (const std::exception&) {
      throw bad("is truncated or malformed");
    }
    if (!f.records.empty() && r.step <= f.records.back().step)
      throw bad("breaks the monotone step order");
    f.records.push_back(std::move(r));
  }
  return f;
}

inline void save_replay(const std::string& path, const ReplayFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write replay: " + path);
  write_replay(out, f);
  if (!out) throw IoError("write failed: " + path);
}

inline ReplayFile load_replay(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open replay: " + path);
  return read_replay(in);
}

// ---------------------------------------------------------- episode loop

inline ViolationFlags tick_violations(const ArmTickLog& a, const RobotSpec& spec,
                                      const ConstraintSet& cs) {
  ViolationFlags f = check_constraints(a.q, JointVector::Zero(),
                                       forward_kinematics(spec, a.q), cs);
  f.joint_pos = false;
  for (int i = 0; i < kNumJoints; ++i) {
    f.joint_pos |= a.sp_q_min[i] < cs.q_lower[i] || a.sp_q_max[i] > cs.q_upper[i];
    f.joint_vel |= a.sp_qdot_min[i] < -cs.qdot_limit[i] ||
                   a.sp_qdot_max[i] > cs.qdot_limit[i];
  }
  return f;
}

struct ComputeStats {
  double avg = 0.0;
  double max = 0.0;
  int count = 0;
};

struct EpisodeResult {
  Task task = Task::kHit;
  bool success = false;
  bool agent_failed = false;
  std::string error;
  EpisodePenalty penalty;
  int steps = 0;
  std::vector<Event> events;
  ComputeStats compute;
  std::uint64_t seed = 0;
  std::uint64_t final_world_hash = 0;

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    detail::fnv_mix(h, static_cast<std::uint64_t>(task));
    detail::fnv_mix(h, static_cast<std::uint64_t>(success));
    detail::fnv_mix(h, static_cast<std::uint64_t>(agent_failed));
    for (double d : {penalty.ee, penalty.joint_pos, penalty.joint_vel, penalty.compute})
      detail::fnv_mix(h, d);
    detail::fnv_mix(h, static_cast<std::uint64_t>(steps));
    for (const Event& e : events) {
      detail::fnv_mix(h, static_cast<std::uint64_t>(e.type));
      detail::fnv_mix(h, static_cast<std::uint64_t>(e.side));
      detail::fnv_mix(h, e.value);
      detail::fnv_mix(h, static_cast<std::uint64_t>(e.time_ms));
    }
    detail::fnv_mix(h, seed);
    detail::fnv_mix(h, final_world_hash);
    return h;
  }
};

// Independent streams per episode seed.
enum class Stream : std::uint64_t { kWorld = 1, kNoise = 2, kInit = 3, kModel = 4, kAgent = 5 };
inline std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t k = 0) {
  return derive_seed(seed, static_cast<std::uint64_t>(s), k);
}

inline WorldConfig make_world_config(const EnvConfig& env, int num_arms, Rng& model_rng) {
  WorldConfig w;
  w.geom = env.geom;
  w.puck = env.puck;
  w.robot = iiwa14_spec();
  w.tracking.anchor = w.robot.q_init;
  EnvParams p{w.tracking, w.puck};
  p = perturb_model(p, env.mismatch, model_rng);
  w.tracking = p.tracking;
  w.puck = p.puck;
  w.puck.disturbance_std = env.disturbance.enabled ? env.disturbance.std : 0.0;
  w.num_arms = num_arms;
  return w;
}

// Task start states in the agent's frame.
inline PuckState initial_puck(Task task, const TableGeometry& g, Rng& rng) {
  PuckState p;
  switch (task) {
    case Task::kHit: {
      // Own half, clear of the rails, slowly drifting.
      p.x = rng.uniform(0.35, 0.7);
      p.y = rng.uniform(-0.35, 0.35);
      const double a = rng.uniform(-kPi, kPi), s = rng.uniform(0.0, 0.1);
      p.vx = s * std::cos(a);
      p.vy = s * std::sin(a);
      break;
    }
    case Task::kDefend: {
      // Shot from the opponent half toward the own goal area.
      p.x = rng.uniform(1.2, 1.5);
      p.y = rng.uniform(-0.4, 0.4);
      const Vec2 aim(0.0, rng.uniform(-0.3, 0.3));
      const Vec2 d = (aim - p.pos()).normalized();
      const double s = rng.uniform(1.0, 2.0);
      p.vx = s * d.x();
      p.vy = s * d.y();
      break;
    }
    case Task::kPrepare: {
      // At rest close to a side rail or to the own end rail.
      if (rng.bernoulli(0.5)) {
        p.x = rng.uniform(0.15, 0.75);
        p.y = (rng.bernoulli(0.5) ? 1.0 : -1.0) *
              rng.uniform(0.42, g.puck_y_max() - 0.01);
      } else {
        p.x = rng.uniform(g.puck_radius + 0.05, 0.2);
        p.y = rng.uniform(-0.4, 0.4);
      }
      break;
    }
  }
  return p;
}

// Runs a callable, returning its wall time in seconds.
template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

namespace detail {

inline ArmTickLog tick_log(const Observation& obs, const Command& cmd,
                           const std::vector<Setpoint>& sp, const JointVector& q,
                           double compute_time) {
  ArmTickLog l;
  l.active = true;
  l.puck_obs = obs.puck.pos();
  l.q_des = cmd.q_des;
  l.qdot_des = cmd.qdot_des.value_or(JointVector::Zero());
  l.sp_q_min = l.sp_q_max = sp.front().q;
  l.sp_qdot_min = l.sp_qdot_max = sp.front().qdot;
  for (const Setpoint& s : sp) {
    l.sp_q_min = l.sp_q_min.cwiseMin(s.q);
    l.sp_q_max = l.sp_q_max.cwiseMax(s.q);
    l.sp_qdot_min = l.sp_qdot_min.cwiseMin(s.qdot);
    l.sp_qdot_max = l.sp_qdot_max.cwiseMax(s.qdot);
  }
  l.q = q;
  l.compute_time = compute_time;
  return l;
}

}  // namespace detail

// One qualifying episode. An exception from the agent ends the episode as
// a failure charged with the maximum penalty.
inline EpisodeResult run_episode(Task task, Agent& agent, const EnvConfig& env,
                                 std::uint64_t seed,
                                 std::vector<ReplayRecord>* log = nullptr,
                                 int episode_index = 0) {
  env.validate();
  Rng model_rng(stream_seed(seed, Stream::kModel));
  Rng init_rng(stream_seed(seed, Stream::kInit));
  Rng world_rng(stream_seed(seed, Stream::kWorld));
  Rng noise_rng(stream_seed(seed, Stream::kNoise));
  WorldConfig cfg = make_world_config(env, 1, model_rng);
  cfg.opponent.enabled = task == Task::kHit;
  const ConstraintSet cs = ConstraintSet::from(cfg.robot, cfg.geom);
  WorldState w = make_world(cfg, initial_puck(task, cfg.geom, init_rng));

  EpisodeResult res;
  res.task = task;
  res.seed = seed;
  PenaltyLedger ledger;
  EpisodeTrace trace;
  ObservationChannel channel;
  double t_sum = 0.0;
  try {
    agent.set_task(task);
    agent.reset(stream_seed(seed, Stream::kAgent));
  } catch (const std::exception& e) {
    res.agent_failed = true;
    res.error = e.what();
  }
  for (int k = 0; k < env.episode_steps && !res.agent_failed; ++k) {
    const Observation obs =
        corrupt_observation(observe(w, cfg, 0), env.noise, channel, noise_rng);
    Command cmd;
    double dt = -1.0;
    try {
      const double measured = timed([&] { cmd = agent.act(obs); });
      if (env.timing) dt = measured;
    } catch (const std::exception& e) {
      res.agent_failed = true;
      res.error = e.what();
      break;
    }
    MatchStep ms = step_match(w, {&cmd, nullptr}, cfg, world_rng);
    w = std::move(ms.world);
    const ArmTickLog tl = detail::tick_log(obs, cmd, ms.setpoints[0], w.arms[0].q, dt);
    ledger.add_step(tick_violations(tl, cfg.robot, cs), dt);
    if (dt >= 0.0) {
      t_sum += dt;
      res.compute.max = std::max(res.compute.max, dt);
      ++res.compute.count;
    }
    res.events.insert(res.events.end(), ms.events.begin(), ms.events.end());
    trace.puck.push_back(w.puck);
    ++res.steps;
    if (log) {
      ReplayRecord r;
      r.episode = episode_index;
      r.step = log->empty() ? 0 : log->back().step + 1;
      r.time_ms = w.time_ms;
      r.puck = w.puck;
      r.arms[0] = tl;
      r.events = ms.events;
      log->push_back(std::move(r));
    }
    if (w.puck_parked) break;
  }
  if (res.agent_failed) {
    ledger.forfeit_episode();
    res.penalty = ledger.episodes().back();
    if (log) {
      ReplayRecord r;
      r.episode = episode_index;
      r.step = log->empty() ? 0 : log->back().step + 1;
      r.time_ms = w.time_ms;
      r.puck = w.puck;
      r.arms[0].active = true;
      r.arms[0].failed = true;
      r.arms[0].q = r.arms[0].q_des = r.arms[0].sp_q_min = r.arms[0].sp_q_max = w.arms[0].q;
      log->push_back(std::move(r));
    }
  } else {
    res.penalty = ledger.end_episode();
    trace.events = res.events;
    res.success = judge_task(task, trace, env.success, cfg.geom);
  }
  if (res.compute.count > 0) res.compute.avg = t_sum / res.compute.count;
  res.final_world_hash = hash_world(w);
  return res;
}

// ---------------------------------------------------------------- runners

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

inline AgentFactory agent_factory(const std::string& name, const AgentContext& ctx = {}) {
  make_agent(name, ctx);  // fail early on unknown names
  return [name, ctx] { return make_agent(name, ctx); };
}

struct RunOptions {
  int threads = 1;
  // Collects replay records when set.
  bool record = false;
};

struct TaskStats {
  Task task = Task::kHit;
  int episodes = 0;
  int successes = 0;
  int failures = 0;
  double ds = 0.0;
  double success_rate() const {
    return episodes > 0 ? static_cast<double>(successes) / episodes : 0.0;
  }
};

struct QualifyingResult {
  std::string agent;
  int n = 0;
  std::vector<TaskStats> tasks;
  std::vector<EpisodeResult> episodes;  // task-major order
  QualifyingRow row;
  DeployabilityThresholds thresholds;
  // One replay per task when recording.
  std::vector<ReplayFile> replays;
};

inline QualifyingResult run_qualifying(const AgentFactory& factory, int n,
                                       const EnvConfig& env,
                                       const RunOptions& opt = {},
                                       std::span<const Task> tasks = kAllTasks,
                                       const std::string& agent_name = "agent") {
  if (n < 1) throw ConfigError("qualifying: episodes per task must be >= 1");
  env.validate();
  const int nt = static_cast<int>(tasks.size());
  std::vector<EpisodeResult> results(static_cast<std::size_t>(nt) * n);
  std::vector<std::vector<ReplayRecord>> logs(opt.record ? results.size() : 0);
  parallel_for(static_cast<int>(results.size()), opt.threads, [&](int i) {
    const Task t = tasks[i / n];
    const int e = i % n;
    std::unique_ptr<Agent> agent = factory();
    results[i] = run_episode(t, *agent, env,
                             derive_seed(env.seed, 1000 + static_cast<int>(t), e),
                             opt.record ? &logs[i] : nullptr, e);
  });

  QualifyingResult q;
  q.agent = agent_name;
  q.n = n;
  q.episodes = std::move(results);
  q.row.name = agent_name;
  q.thresholds = deployability_thresholds(Stage::kQualifying, n);
  for (int ti = 0; ti < nt; ++ti) {
    TaskStats s;
    s.task = tasks[ti];
    for (int e = 0; e < n; ++e) {
      const EpisodeResult& r = q.episodes[ti * n + e];
      ++s.episodes;
      s.successes += r.success;
      s.failures += r.agent_failed;
      s.ds += r.penalty.total();
    }
    const int idx = static_cast<int>(s.task);
    q.row.success[idx] = s.success_rate();
    q.row.task_penalty[idx] = s.ds;
    q.row.penalty = std::max(q.row.penalty, s.ds);
    q.tasks.push_back(s);
    if (opt.record) {
      ReplayFile f;
      f.header.kind = "qualifying";
      f.header.agents = {agent_name};
      f.header.config = to_json(env);
      f.header.config_hash = config_hash(f.header.config);
      f.header.penalty_episodes = n;
      int step = 0;
      for (int e = 0; e < n; ++e)
        for (ReplayRecord r : logs[ti * n + e]) {
          r.step = step++;
          f.records.push_back(std::move(r));
        }
      q.replays.push_back(std::move(f));
    }
  }
  q.row = qualifying_rank({q.row}, q.thresholds).front();
  return q;
}

// Deployability scores per side recomputed from a replay alone. Episodes
// are the record groups; a forfeiting side is filled up to the header's
// episode count.
inline std::array<double, 2> replay_penalties(const ReplayFile& f,
                                              const RobotSpec& spec = iiwa14_spec()) {
  const EnvConfig env = env_config_from_json(f.header.config);
  const ConstraintSet cs = ConstraintSet::from(spec, env.geom);
  std::array<double, 2> ds = {0.0, 0.0};
  for (int side = 0; side < 2; ++side) {
    PenaltyLedger ledger;
    int episodes = 0;
    bool failed = false, any = false, open = false;
    int current = -1;
    for (const ReplayRecord& r : f.records) {
      const ArmTickLog& a = r.arms[side];
      if (!a.active) continue;
      any = true;
      if (r.episode != current) {
        if (open) {
          ledger.end_episode();
          ++episodes;
        }
        current = r.episode;
        open = !failed;
      }
      if (failed) continue;
      if (a.failed) {
        failed = true;
        open = false;
        ledger.forfeit_episode();
        ++episodes;
        if (f.header.kind == "qualifying") failed = false;
        continue;
      }
      ledger.add_step(tick_violations(a, spec, cs), a.compute_time);
    }
    if (open) {
      ledger.end_episode();
      ++episodes;
    }
    if (!any) continue;
    if (f.header.kind == "match" && failed)
      for (; episodes < f.header.penalty_episodes; ++episodes) ledger.forfeit_episode();
    ds[side] = ledger.ds();
  }
  return ds;
}

// --------------------------------------------------------------- matches

inline int penalty_episode_count(int game_steps, int episode_steps = 500) {
  if (game_steps < 1 || episode_steps < 1)
    throw ConfigError("penalty episodes: step counts must be >= 1");
  return (game_steps + episode_steps - 1) / episode_steps;
}

struct MatchResult {
  int a = 0, b = 0;
  std::array<std::string, 2> names;
  MatchScore score;
  std::array<int, 2> penalty_episodes = {0, 0};
  std::array<bool, 2> forfeited = {false, false};
  std::array<std::string, 2> error;
  int steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t final_world_hash = 0;
  std::vector<Event> events;
};

// A full game between two agents. An agent that throws forfeits the rest
// of the game: its current and remaining penalty episodes are charged at
// the maximum rate and play stops.
inline MatchResult run_match(Agent& a0, Agent& a1, const EnvConfig& env,
                             std::uint64_t seed, int game_steps,
                             std::vector<ReplayRecord>* log = nullptr) {
  env.validate();
  Rng model_rng(stream_seed(seed, Stream::kModel));
  Rng init_rng(stream_seed(seed, Stream::kInit));
  Rng world_rng(stream_seed(seed, Stream::kWorld));
  std::array<Rng, 2> noise_rng = {Rng(stream_seed(seed, Stream::kNoise, 0)),
                                  Rng(stream_seed(seed, Stream::kNoise, 1))};
  WorldConfig cfg = make_world_config(env, 2, model_rng);
  cfg.faults_enabled = true;
  cfg.reset_after_goal = true;
  const ConstraintSet cs = ConstraintSet::from(cfg.robot, cfg.geom);
  WorldState w = make_world(cfg, serve_position(init_rng.bernoulli(0.5) ? 1 : 0,
                                                cfg.geom, init_rng));
  std::array<Agent*, 2> agents = {&a0, &a1};
  std::array<PenaltyLedger, 2> ledgers;
  std::array<ObservationChannel, 2> channels;
  const int total_eps = penalty_episode_count(game_steps, env.episode_steps);

  MatchResult m;
  m.seed = seed;
  std::array<int, 2> goals = {0, 0};
  const auto fail = [&](int side, const std::exception& e) {
    m.forfeited[side] = true;
    m.error[side] = e.what();
  };
  for (int s = 0; s < 2; ++s) {
    try {
      agents[s]->set_task(std::nullopt);
      agents[s]->reset(stream_seed(seed, Stream::kAgent, s));
    } catch (const std::exception& e) {
      fail(s, e);
    }
  }
  int k = 0;
  for (; k < game_steps && !m.forfeited[0] && !m.forfeited[1]; ++k) {
    std::array<Observation, 2> obs;
    std::array<Command, 2> cmd;
    std::array<double, 2> dt = {-1.0, -1.0};
    for (int s = 0; s < 2; ++s) {
      obs[s] = corrupt_observation(observe(w, cfg, s), env.noise, channels[s],
                                   noise_rng[s]);
      try {
        agents[s]->set_score(goals[s], goals[1 - s]);
        const double measured = timed([&] { cmd[s] = agents[s]->act(obs[s]); });
        if (env.timing) dt[s] = measured;
      } catch (const std::exception& e) {
        fail(s, e);
      }
    }
    if (m.forfeited[0] || m.forfeited[1]) break;
    MatchStep ms = step_match(w, {&cmd[0], &cmd[1]}, cfg, world_rng);
    w = std::move(ms.world);
    ReplayRecord r;
    for (int s = 0; s < 2; ++s) {
      r.arms[s] = detail::tick_log(obs[s], cmd[s], ms.setpoints[s], w.arms[s].q, dt[s]);
      ledgers[s].add_step(tick_violations(r.arms[s], cfg.robot, cs), dt[s]);
    }
    for (const Event& e : ms.events)
      if (e.type == EventType::kGoal) ++goals[1 - e.side];
    m.events.insert(m.events.end(), ms.events.begin(), ms.events.end());
    if (log) {
      r.episode = k / env.episode_steps;
      r.step = k;
      r.time_ms = w.time_ms;
      r.puck = w.puck;
      r.events = ms.events;
      log->push_back(std::move(r));
    }
    if ((k + 1) % env.episode_steps == 0)
      for (int s = 0; s < 2; ++s) ledgers[s].end_episode();
  }
  m.steps = k;
  if (m.forfeited[0] || m.forfeited[1]) {
    for (int s = 0; s < 2; ++s) {
      if (m.forfeited[s]) {
        while (static_cast<int>(ledgers[s].episodes().size()) < total_eps)
          ledgers[s].forfeit_episode();
      } else if (k % env.episode_steps != 0) {
        ledgers[s].end_episode();
      }
    }
    if (log) {
      ReplayRecord r;
      r.episode = k / env.episode_steps;
      r.step = k;
      r.time_ms = w.time_ms;
      r.puck = w.puck;
      for (int s = 0; s < 2; ++s) {
        // Only the forfeiting side gets a marker entry.
        r.arms[s].active = m.forfeited[s];
        r.arms[s].failed = m.forfeited[s];
        r.arms[s].q = r.arms[s].q_des = r.arms[s].sp_q_min = r.arms[s].sp_q_max =
            w.arms[s].q;
        r.arms[s].compute_time = -1.0;
      }
      log->push_back(std::move(r));
    }
  } else if (game_steps % env.episode_steps != 0) {
    for (int s = 0; s < 2; ++s) ledgers[s].end_episode();
  }
  std::array<double, 2> pen;
  for (int s = 0; s < 2; ++s) {
    pen[s] = ledgers[s].ds();
    m.penalty_episodes[s] = static_cast<int>(ledgers[s].episodes().size());
  }
  m.score = score_match(m.events, pen, {}, {},
                        deployability_thresholds(Stage::kTournament, total_eps));
  m.final_world_hash = hash_world(w);
  return m;
}

struct TournamentResult {
  std::vector<std::string> names;
  int game_steps = 0;
  std::vector<MatchResult> matches;
  std::vector<StandingRow> standings;
  std::vector<ReplayFile> replays;
};

// Round robin: every pair plays once, lower index on side 0.
inline TournamentResult run_tournament(const std::vector<std::string>& names,
                                       const std::vector<AgentFactory>& factories,
                                       const EnvConfig& env,
                                       const RunOptions& opt = {},
                                       std::optional<int> game_steps = std::nullopt) {
  if (names.size() != factories.size())
    throw ConfigError("tournament: one name per agent required");
  if (names.size() < 2) throw ConfigError("tournament: at least 2 agents required");
  env.validate();
  TournamentResult t;
  t.names = names;
  t.game_steps = game_steps.value_or(env.game_steps);
  if (t.game_steps < 1) throw ConfigError("tournament: game_steps must be >= 1");
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(names.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  t.matches.resize(pairs.size());
  std::vector<std::vector<ReplayRecord>> logs(opt.record ? pairs.size() : 0);
  parallel_for(static_cast<int>(pairs.size()), opt.threads, [&](int id) {
    const auto [i, j] = pairs[id];
    std::unique_ptr<Agent> a = factories[i](), b = factories[j]();
    MatchResult m = run_match(*a, *b, env, derive_seed(env.seed, 2000, id),
                              t.game_steps, opt.record ? &logs[id] : nullptr);
    m.a = i;
    m.b = j;
    m.names = {names[i], names[j]};
    t.matches[id] = std::move(m);
  });
  std::vector<MatchRecord> recs;
  for (const MatchResult& m : t.matches) recs.push_back({m.a, m.b, m.score});
  t.standings = standings(names, recs);
  if (opt.record) {
    for (std::size_t id = 0; id < pairs.size(); ++id) {
      ReplayFile f;
      f.header.kind = "match";
      f.header.agents = {names[pairs[id].first], names[pairs[id].second]};
      f.header.config = to_json(env);
      f.header.config_hash = config_hash(f.header.config);
      f.header.penalty_episodes = penalty_episode_count(t.game_steps, env.episode_steps);
      f.records = std::move(logs[id]);
      t.replays.push_back(std::move(f));
    }
  }
  return t;
}

// ---------------------------------------------------------------- ablation

struct AblationResult {
  std::vector<Task> tasks;
  // "ideal", one column per factor, then "evaluation" (all factors).
  std::vector<std::string> columns;
  std::vector<std::vector<double>> success;  // [task][column]
  std::vector<std::vector<std::string>> changed_fields;  // per column
};

inline AblationResult run_ablation(const AgentFactory& factory,
                                   std::span<const Task> tasks,
                                   std::span<const Factor> factors, int n,
                                   const EnvConfig& base, const RunOptions& opt = {}) {
  if (n < 1) throw ConfigError("ablation: episodes must be >= 1");
  const EnvConfig ideal = base.with_profile(Profile::kIdeal);
  std::vector<EnvConfig> envs = {ideal};
  AblationResult res;
  res.tasks.assign(tasks.begin(), tasks.end());
  res.columns.push_back("ideal");
  for (Factor f : factors) {
    EnvConfig e = base.with_profile(Profile::kAblation, f);
    check_single_factor_diff(ideal, e, f);
    envs.push_back(e);
    res.columns.push_back(std::string(to_string(f)));
  }
  envs.push_back(base.with_profile(Profile::kEvaluation));
  res.columns.push_back("evaluation");
  res.success.assign(tasks.size(), std::vector<double>(envs.size(), 0.0));
  for (std::size_t c = 0; c < envs.size(); ++c) {
    res.changed_fields.push_back(config_diff(ideal, envs[c]));
    const QualifyingResult q = run_qualifying(factory, n, envs[c], opt, tasks);
    for (std::size_t t = 0; t < tasks.size(); ++t)
      res.success[t][c] = q.tasks[t].success_rate();
  }
  return res;
}

}  // namespace ahb

#endif  // AHB_HARNESS_HPP_
