#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "constellation/agents.hpp"
#include "constellation/env.hpp"
#include "constellation/metrics.hpp"
#include "constellation/rng.hpp"

namespace constellation {

// Agent entry in an experiment: which algorithm, with which hyperparameters.
struct AgentSetup {
  AgentKind kind = AgentKind::LoadBalancing;
  AgentConfig config;
};

struct ExperimentSpec {
  std::string experiment_id = "experiment";
  EnvConfig env;
  std::vector<AgentSetup> agents;
  int train_episodes = 200;
  int eval_episodes = 50;
  std::vector<std::uint64_t> seeds;

  void validate() const {
    env.validate();
    if (agents.empty()) throw ConfigError("experiment needs at least one agent");
    if (train_episodes < 0) throw ConfigError("train_episodes must be >= 0");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  }
};

// Independent sub-streams of one experiment seed.
inline std::uint64_t train_env_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
inline std::uint64_t agent_seed(std::uint64_t seed) { return derive_seed(seed, 2); }
inline std::uint64_t eval_env_seed(std::uint64_t seed) { return derive_seed(seed, 3); }

// Run one episode to completion. When `learn` is set the agent sees its own
// transitions and gets the end-of-episode hook. Rounds where the agent has no
// valid action fall back to a fixed (rejected) transfer and are not fed back.
inline EpisodeMetrics run_episode(ConstellationEnv& env, Agent& agent, bool learn,
                                  int episode_index = 0) {
  EpisodeMetrics m;
  m.episode_index = episode_index;
  Observation obs = env.reset();
  m.initial_tasks = env.initial_tasks();
  const int num_sats = env.config().num_sats;
  for (;;) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::optional<Action> choice = agent.select(obs);
    env.note_action_latency(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    const int action_index = choice ? choice->encode(num_sats) : 0;
    StepOutcome out = env.step(action_index);

    m.reward_sum += out.reward;
    m.failures += static_cast<int>(out.info.failed_this_step.size());
    for (double t : out.info.response_times_s) m.response_times_s.push_back(t);
    for (double t : out.info.response_times_sim_s) {
      m.response_times_sim_s.push_back(t);
      if (t > env.config().t_max_s) m.tmax_violations += 1;
    }
    {
      std::vector<double> loads, caps;
      for (const auto& s : env.satellites()) {
        loads.push_back(s.task_load);
        caps.push_back(s.capacity);
      }
      if (!capacity_feasible(loads, caps)) m.capacity_violations += 1;
    }
    if (learn && choice)
      agent.observe({std::move(obs), action_index, out.reward, out.observation, out.done});
    obs = std::move(out.observation);
    if (out.done) break;
  }
  if (learn) agent.end_episode();
  m.remaining_tasks = std::min(env.remaining_tasks(), m.initial_tasks);
  m.tcr_percent = task_completion_rate(m.initial_tasks, m.remaining_tasks);
  m.art_s = maybe_average_response_time(m.response_times_sim_s);
  return m;
}

struct TrainOutput {
  std::unique_ptr<Agent> agent;
  std::vector<EpisodeMetrics> curve;
};

// Train one agent for the experiment's episode budget on a dedicated
// environment stream derived from `seed`.
inline TrainOutput train_agent(const ExperimentSpec& spec, const AgentSetup& setup,
                               std::uint64_t seed) {
  EnvConfig env_cfg = spec.env;
  env_cfg.seed = train_env_seed(seed);
  ConstellationEnv env(env_cfg);
  TrainOutput out;
  out.agent = make_agent(setup.kind, env_cfg.num_sats, setup.config, agent_seed(seed));
  out.agent->set_training_horizon(static_cast<long>(spec.train_episodes) *
                                  spec.env.rounds_per_episode);
  out.curve.reserve(spec.train_episodes);
  for (int ep = 0; ep < spec.train_episodes; ++ep)
    out.curve.push_back(run_episode(env, *out.agent, true, ep));
  return out;
}

// Frozen-policy evaluation on a fresh environment stream.
inline std::vector<EpisodeMetrics> evaluate_agent(Agent& agent, const EnvConfig& env_cfg_in,
                                                  int episodes, std::uint64_t env_seed) {
  EnvConfig env_cfg = env_cfg_in;
  env_cfg.seed = env_seed;
  ConstellationEnv env(env_cfg);
  agent.set_eval(true);
  std::vector<EpisodeMetrics> result;
  result.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) result.push_back(run_episode(env, agent, false, ep));
  agent.set_eval(false);
  return result;
}

inline double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

// Median with the even-count convention of averaging the middle pair.
inline double median_of(std::vector<double> xs) {
  if (xs.empty()) throw UndefinedMetricError("median_of: empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// One (agent, seed) experiment cell.
struct CellResult {
  AgentKind kind = AgentKind::LoadBalancing;
  std::string agent_name;
  std::uint64_t seed = 0;
  std::vector<EpisodeMetrics> train_curve;
  std::vector<EpisodeMetrics> eval_episodes;
  double eval_mean_reward = 0.0;
  double eval_mean_tcr = 0.0;
  std::optional<double> eval_mean_art;  // over eval episodes that saw failures
  long eval_capacity_violations = 0;
  long eval_tmax_violations = 0;
};

inline void summarize_cell(CellResult& cell) {
  std::vector<double> rewards, tcrs, arts;
  for (const auto& ep : cell.eval_episodes) {
    rewards.push_back(ep.reward_sum);
    tcrs.push_back(ep.tcr_percent);
    if (ep.art_s) arts.push_back(*ep.art_s);
    cell.eval_capacity_violations += ep.capacity_violations;
    cell.eval_tmax_violations += ep.tmax_violations;
  }
  cell.eval_mean_reward = mean_of(rewards);
  cell.eval_mean_tcr = mean_of(tcrs);
  if (!arts.empty()) cell.eval_mean_art = mean_of(arts);
}

// Cross-seed medians for one agent.
struct AgentSummary {
  AgentKind kind = AgentKind::LoadBalancing;
  std::string agent_name;
  double median_reward = 0.0;
  double median_tcr = 0.0;
  std::optional<double> median_art;
  long capacity_violations = 0;
  long tmax_violations = 0;
};

struct ComparisonReport {
  std::string experiment_id;
  std::vector<CellResult> cells;       // agent-major, seed-minor
  std::vector<AgentSummary> summaries;  // experiment agent order
};

// Full grid: train and evaluate every configured agent on every seed, then
// reduce to cross-seed medians. Fully deterministic for a fixed spec.
inline ComparisonReport run_comparison(const ExperimentSpec& spec) {
  spec.validate();
  ComparisonReport report;
  report.experiment_id = spec.experiment_id;
  for (const auto& setup : spec.agents) {
    AgentSummary summary;
    summary.kind = setup.kind;
    summary.agent_name = agent_kind_name(setup.kind);
    std::vector<double> rewards, tcrs, arts;
    for (std::uint64_t seed : spec.seeds) {
      CellResult cell;
      cell.kind = setup.kind;
      cell.agent_name = summary.agent_name;
      cell.seed = seed;
      TrainOutput trained = train_agent(spec, setup, seed);
      cell.train_curve = std::move(trained.curve);
      cell.eval_episodes =
          evaluate_agent(*trained.agent, spec.env, spec.eval_episodes, eval_env_seed(seed));
      summarize_cell(cell);
      rewards.push_back(cell.eval_mean_reward);
      tcrs.push_back(cell.eval_mean_tcr);
      if (cell.eval_mean_art) arts.push_back(*cell.eval_mean_art);
      summary.capacity_violations += cell.eval_capacity_violations;
      summary.tmax_violations += cell.eval_tmax_violations;
      report.cells.push_back(std::move(cell));
    }
    summary.median_reward = median_of(rewards);
    summary.median_tcr = median_of(tcrs);
    if (!arts.empty()) summary.median_art = median_of(arts);
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

}  // namespace constellation
