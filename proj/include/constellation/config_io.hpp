#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "constellation/errors.hpp"
#include "constellation/harness.hpp"

namespace constellation {

// IO failures are distinct from config errors so the CLI can map them to a
// different exit status.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

namespace detail {

template <typename T>
T require_field(const nlohmann::json& j, const std::string& key, const std::string& scope) {
  if (!j.contains(key)) throw ConfigError(scope + ": missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(scope + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
void optional_field(const nlohmann::json& j, const std::string& key, const std::string& scope,
                    T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(scope + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("env config: expected a JSON object");
  const std::string scope = "env config";
  EnvConfig c;
  c.num_sats = detail::require_field<int>(j, "num_sats", scope);
  c.rounds_per_episode = detail::require_field<int>(j, "rounds_per_episode", scope);
  c.base_failure_prob = detail::require_field<double>(j, "base_failure_prob", scope);
  const auto range = detail::require_field<std::vector<double>>(j, "initial_load_range", scope);
  if (range.size() != 2) throw ConfigError(scope + ": 'initial_load_range' must be [min, max]");
  c.initial_load_min = range[0];
  c.initial_load_max = range[1];
  c.capacity = detail::require_field<double>(j, "capacity", scope);
  c.initial_energy = detail::require_field<double>(j, "initial_energy", scope);
  c.chunk_size = detail::require_field<double>(j, "chunk_size", scope);

  detail::optional_field(j, "planes", scope, c.planes);
  detail::optional_field(j, "inclination_rad", scope, c.inclination_rad);
  detail::optional_field(j, "radius_km", scope, c.radius_km);
  detail::optional_field(j, "failure_escalation_start", scope, c.failure_escalation_start);
  detail::optional_field(j, "failure_escalation_rate", scope, c.failure_escalation_rate);
  detail::optional_field(j, "failure_prob_cap", scope, c.failure_prob_cap);
  detail::optional_field(j, "t_max_s", scope, c.t_max_s);
  detail::optional_field(j, "service_rate", scope, c.service_rate);
  detail::optional_field(j, "energy_cost_per_unit", scope, c.energy_cost_per_unit);
  detail::optional_field(j, "reconfig_energy_cost", scope, c.reconfig_energy_cost);
  detail::optional_field(j, "invalid_penalty", scope, c.invalid_penalty);
  detail::optional_field(j, "round_duration_s", scope, c.round_duration_s);
  detail::optional_field(j, "seed", scope, c.seed);
  c.validate();
  return c;
}

// Agent list entries are either a bare name or an object with overrides.
inline AgentSetup agent_setup_from_json(const nlohmann::json& j) {
  AgentSetup setup;
  if (j.is_string()) {
    setup.kind = agent_kind_from_name(j.get<std::string>());
    setup.config = AgentConfig::defaults_for(setup.kind);
    return setup;
  }
  if (!j.is_object()) throw ConfigError("agents: entries must be names or objects");
  const std::string scope = "agent config";
  const std::string name = detail::require_field<std::string>(j, "name", scope);
  setup.kind = agent_kind_from_name(name);
  AgentConfig& c = setup.config = AgentConfig::defaults_for(setup.kind);
  detail::optional_field(j, "learning_rate", scope, c.learning_rate);
  detail::optional_field(j, "gamma", scope, c.gamma);
  detail::optional_field(j, "epsilon", scope, c.epsilon);
  detail::optional_field(j, "epsilon_start", scope, c.epsilon_start);
  detail::optional_field(j, "epsilon_fraction", scope, c.epsilon_fraction);
  detail::optional_field(j, "batch_size", scope, c.batch_size);
  detail::optional_field(j, "replay_capacity", scope, c.replay_capacity);
  detail::optional_field(j, "target_sync_every", scope, c.target_sync_every);
  detail::optional_field(j, "entropy_coef", scope, c.entropy_coef);
  detail::optional_field(j, "grad_clip_norm", scope, c.grad_clip_norm);
  detail::optional_field(j, "update_frequency", scope, c.update_frequency);
  detail::optional_field(j, "ppo_clip", scope, c.ppo_clip);
  detail::optional_field(j, "gae_lambda", scope, c.gae_lambda);
  detail::optional_field(j, "value_coef", scope, c.value_coef);
  detail::optional_field(j, "hidden", scope, c.hidden);
  return setup;
}

inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  const std::string scope = "experiment config";
  ExperimentSpec spec;
  detail::optional_field(j, "experiment_id", scope, spec.experiment_id);
  if (!j.contains("env")) throw ConfigError(scope + ": missing required field 'env'");
  spec.env = env_config_from_json(j.at("env"));
  const auto agents = detail::require_field<nlohmann::json>(j, "agents", scope);
  if (!agents.is_array() || agents.empty())
    throw ConfigError(scope + ": 'agents' must be a non-empty array");
  for (const auto& a : agents) spec.agents.push_back(agent_setup_from_json(a));
  spec.train_episodes = detail::require_field<int>(j, "train_episodes", scope);
  spec.eval_episodes = detail::require_field<int>(j, "eval_episodes", scope);
  spec.seeds = detail::require_field<std::vector<std::uint64_t>>(j, "seeds", scope);
  spec.validate();
  return spec;
}

}  // namespace constellation
