// Release gate: one verdict line per acceptance criterion, nonzero exit on
// any failure. Tolerances are pinned here, next to the checks they guard.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "constellation/agents.hpp"
#include "constellation/csv.hpp"
#include "constellation/env.hpp"
#include "constellation/harness.hpp"
#include "constellation/metrics.hpp"
#include "constellation/nn.hpp"
#include "constellation/rng.hpp"

using namespace constellation;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;  // shown on failure or as context
};

// --- [1] closed-form performance metrics ---

Verdict check_metric_formulas() {
  Verdict v;
  const double tcr = task_completion_rate(200.0, 104.0);
  if (std::abs(tcr - 48.0) > 1e-12) {
    v.detail = "tcr(200,104) = " + std::to_string(tcr);
    return v;
  }
  const double art = average_response_time({0.9, 0.914});
  if (std::abs(art - 0.907) > 1e-12) {
    v.detail = "art([0.9,0.914]) = " + std::to_string(art);
    return v;
  }
  if (std::abs(task_completion_rate(100.0, 100.0)) > 1e-12) {
    v.detail = "tcr(100,100) should be 0";
    return v;
  }
  bool threw = false;
  try {
    average_response_time({});
  } catch (const UndefinedMetricError&) {
    threw = true;
  }
  if (!threw) {
    v.detail = "empty art should be undefined";
    return v;
  }
  v.pass = true;
  return v;
}

// --- [2] redistribution conserves tasks ---

Verdict check_redistribution_conservation() {
  Verdict v;
  Rng rng(0xACCE55);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform_index(10));
    std::vector<SatelliteState> sats(n);
    for (int i = 0; i < n; ++i) {
      sats[i].id = i;
      sats[i].capacity = rng.uniform(50.0, 150.0);
      sats[i].task_load = rng.uniform(0.0, sats[i].capacity);
      sats[i].status = rng.uniform() < 0.7 ? SatStatus::Operational : SatStatus::Failed;
    }
    const int failed_id = static_cast<int>(rng.uniform_index(n));
    sats[failed_id].status = SatStatus::Failed;
    sats[failed_id].task_load = rng.uniform(0.0, 200.0);

    double before = 0.0;
    for (const auto& s : sats) before += s.task_load;
    const auto outcome = redistribute_tasks(sats, failed_id);
    double after = 0.0;
    for (const auto& s : sats) after += s.task_load;

    if (std::abs(after + outcome.dropped - before) > 1e-9) {
      v.detail = "trial " + std::to_string(trial) + ": leaked " +
                 std::to_string(before - after - outcome.dropped);
      return v;
    }
    for (const auto& s : sats) {
      if (s.task_load > s.capacity + 1e-9) {
        v.detail = "trial " + std::to_string(trial) + ": overfilled satellite";
        return v;
      }
    }
    if (outcome.dropped > 1e-9) {
      // Tasks may only be lost once every survivor is full.
      for (const auto& s : sats) {
        if (is_operational(s) && s.capacity - s.task_load > 1e-6) {
          v.detail = "trial " + std::to_string(trial) + ": dropped despite headroom";
          return v;
        }
      }
    }
  }
  v.pass = true;
  v.detail = "10000 random fleets";
  return v;
}

// --- [3] network gradients match finite differences ---

Verdict check_gradient_agreement() {
  Verdict v;
  Rng rng(0x6E4D);
  int checked = 0;
  for (int net = 0; net < 100; ++net) {
    std::vector<int> sizes;
    sizes.push_back(3 + static_cast<int>(rng.uniform_index(6)));   // input 3..8
    const int hidden_layers = 1 + static_cast<int>(rng.uniform_index(2));
    for (int h = 0; h < hidden_layers; ++h)
      sizes.push_back(4 + static_cast<int>(rng.uniform_index(13)));
    sizes.push_back(2 + static_cast<int>(rng.uniform_index(7)));   // output 2..8
    auto params = MlpParameters::he_uniform(sizes, rng);
    for (auto& layer : params.weights)
      for (auto& w : layer) w = rng.uniform(-0.5, 0.5);
    for (auto& layer : params.biases)
      for (auto& b : layer) b = rng.uniform(-0.5, 0.5);

    // Keep hidden pre-activations away from the relu kink, where central
    // differences stop being a derivative estimate.
    std::vector<double> input(params.input_size());
    bool clear = false;
    while (!clear) {
      for (auto& x : input) x = rng.uniform(-1.0, 1.0);
      ForwardTrace probe;
      forward(params, input, &probe);
      clear = true;
      for (std::size_t l = 0; clear && l + 1 < params.layer_count(); ++l)
        for (double z : probe.pre_activations[l])
          if (std::abs(z) < 1e-3) {
            clear = false;
            break;
          }
    }
    std::vector<double> coeff(params.output_size());
    for (auto& c : coeff) c = rng.uniform(-1.0, 1.0);

    ForwardTrace trace;
    forward(params, input, &trace);
    MlpGradients analytic = MlpGradients::zeros_like(params);
    backward_into(params, trace, coeff, analytic);

    auto loss = [&] {
      const auto out = forward(params, input);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) acc += coeff[i] * out[i];
      return acc;
    };
    auto agree = [&](double* slot, double grad) {
      const double saved = *slot;
      *slot = saved + 1e-5;
      const double up = loss();
      *slot = saved - 1e-5;
      const double down = loss();
      *slot = saved;
      const double fd = (up - down) / 2e-5;
      const double denom = std::max({std::abs(fd), std::abs(grad), 1e-6});
      checked += 1;
      return std::abs(fd - grad) / denom < 1e-4;
    };
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
      const std::size_t wstride = std::max<std::size_t>(1, params.weights[l].size() / 10);
      for (std::size_t i = 0; i < params.weights[l].size(); i += wstride) {
        if (!agree(&params.weights[l][i], analytic.weights[l][i])) {
          v.detail = "net " + std::to_string(net) + " layer " + std::to_string(l) +
                     " weight " + std::to_string(i);
          return v;
        }
      }
      const std::size_t bstride = std::max<std::size_t>(1, params.biases[l].size() / 3);
      for (std::size_t i = 0; i < params.biases[l].size(); i += bstride) {
        if (!agree(&params.biases[l][i], analytic.biases[l][i])) {
          v.detail = "net " + std::to_string(net) + " layer " + std::to_string(l) + " bias " +
                     std::to_string(i);
          return v;
        }
      }
    }
  }
  v.pass = true;
  v.detail = "100 networks, " + std::to_string(checked) + " partials";
  return v;
}

// --- [4] tabular values converge on a known problem ---
//
// Two states, two actions, deterministic dynamics:
//   s0,a0 -> reward 1, stay in s0      s0,a1 -> reward 0, go to s1
//   s1,a0 -> reward 0, go to s0        s1,a1 -> reward 2, stay in s1
// With gamma = 0.99 the optimal values are
//   Q*(s1,a1) = 2/(1-0.99)            = 200
//   Q*(s0,a1) = 0.99 * 200            = 198
//   Q*(s0,a0) = 1 + 0.99 * 198       = 197.02
//   Q*(s1,a0) = 0.99 * 198            = 196.02

Verdict check_tabular_convergence() {
  Verdict v;
  QTable q(2);
  Rng rng(4242);
  int state = 0;
  for (long step = 0; step < 100000; ++step) {
    const int action = static_cast<int>(rng.uniform_index(2));
    double reward = 0.0;
    int next = state;
    if (state == 0 && action == 0) {
      reward = 1.0;
      next = 0;
    } else if (state == 0 && action == 1) {
      next = 1;
    } else if (state == 1 && action == 0) {
      next = 0;
    } else {
      reward = 2.0;
      next = 1;
    }
    q_update(q, state, action, reward, next, false, 0.1, 0.99);
    state = next;
  }
  const double expected[2][2] = {{197.02, 198.0}, {196.02, 200.0}};
  double max_err = 0.0;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a)
      max_err = std::max(max_err, std::abs(q.lookup(s)[a] - expected[s][a]));
  char buf[64];
  std::snprintf(buf, sizeof buf, "max |Q - Q*| = %.6f", max_err);
  v.detail = buf;
  v.pass = max_err <= 0.01 && q.lookup(0)[1] > q.lookup(0)[0] && q.lookup(1)[1] > q.lookup(1)[0];
  return v;
}

// --- [5][6] learned policies against the heuristic ---
//
// Deliberately energy-tight fleet: a policy that always moves full chunks
// drains its batteries and loses the constellation mid-episode, while one
// that meters transfers survives. Sized to finish in minutes on one core.

ExperimentSpec desk_spec() {
  ExperimentSpec spec;
  spec.experiment_id = "desk_compare";
  spec.env.num_sats = 6;
  spec.env.planes = 2;
  spec.env.rounds_per_episode = 100;
  spec.env.base_failure_prob = 0.002;
  spec.env.failure_escalation_start = 100;
  spec.env.failure_escalation_rate = 0.0001;
  spec.env.failure_prob_cap = 0.05;
  spec.env.initial_load_min = 60.0;
  spec.env.initial_load_max = 100.0;
  spec.env.capacity = 100.0;
  spec.env.initial_energy = 6.0;
  spec.env.chunk_size = 10.0;
  spec.env.service_rate = 1.0;
  spec.env.energy_cost_per_unit = 0.05;
  spec.env.reconfig_energy_cost = 0.5;
  spec.env.t_max_s = 1.0;
  spec.train_episodes = 400;
  spec.eval_episodes = 50;
  spec.seeds = {101, 202, 303, 404, 505};

  for (AgentKind kind : {AgentKind::LoadBalancing, AgentKind::QLearning,
                         AgentKind::PolicyGradient, AgentKind::Dqn, AgentKind::Ppo}) {
    AgentSetup setup{kind, AgentConfig::defaults_for(kind)};
    setup.config.hidden = {32, 32};
    if (kind == AgentKind::Dqn) {
      // Value learning needs a long gamma horizon here (the cost of draining a
      // battery lands dozens of rounds after the transfer that paid it), a
      // replay buffer big enough to never evict those failure trajectories,
      // and a residual exploration floor so stale optimistic Q-values keep
      // getting revisited instead of quietly steering the greedy policy back
      // into the drain-everything trap.
      setup.config.learning_rate = 1e-4;
      setup.config.gamma = 0.999;
      setup.config.target_sync_every = 400;
      setup.config.epsilon_fraction = 0.2;
      setup.config.epsilon = 0.2;
      setup.config.replay_capacity = 40000;
    }
    spec.agents.push_back(setup);
  }
  return spec;
}

std::map<std::string, AgentSummary> summaries_by_name(const ComparisonReport& report) {
  std::map<std::string, AgentSummary> by_name;
  for (const auto& s : report.summaries) by_name[s.agent_name] = s;
  return by_name;
}

std::string reward_digest(const std::map<std::string, AgentSummary>& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "LB %.2f QL %.2f PG %.2f DQN %.2f PPO %.2f",
                s.at("load_balancing").median_reward, s.at("q_learning").median_reward,
                s.at("policy_gradient").median_reward, s.at("dqn").median_reward,
                s.at("ppo").median_reward);
  return buf;
}

std::string tcr_digest(const std::map<std::string, AgentSummary>& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "LB %.1f QL %.1f PG %.1f DQN %.1f PPO %.1f",
                s.at("load_balancing").median_tcr, s.at("q_learning").median_tcr,
                s.at("policy_gradient").median_tcr, s.at("dqn").median_tcr,
                s.at("ppo").median_tcr);
  return buf;
}

Verdict check_reward_ordering(const std::map<std::string, AgentSummary>& s) {
  Verdict v;
  const double lb = s.at("load_balancing").median_reward;
  const double ql = s.at("q_learning").median_reward;
  const double dqn = s.at("dqn").median_reward;
  const double ppo = s.at("ppo").median_reward;
  const double floor = lb + 0.2 * std::abs(lb);  // at least 20% above the heuristic
  v.pass = dqn > lb && ppo > lb && dqn > ql && ppo > ql && dqn >= floor && ppo >= floor;
  v.detail = reward_digest(s);
  return v;
}

Verdict check_completion_ordering(const std::map<std::string, AgentSummary>& s) {
  Verdict v;
  const double lb = s.at("load_balancing").median_tcr;
  v.pass = s.at("ppo").median_tcr >= lb + 10.0;
  for (const char* name : {"q_learning", "policy_gradient", "dqn", "ppo"})
    v.pass = v.pass && s.at(name).median_tcr >= lb - 2.0;
  v.detail = tcr_digest(s);
  return v;
}

// --- [7] response-time accounting is reproducible ---

Verdict check_response_time_accounting() {
  Verdict v;
  EnvConfig cfg;
  cfg.num_sats = 6;
  cfg.planes = 2;
  cfg.rounds_per_episode = 40;
  cfg.base_failure_prob = 0.2;
  cfg.failure_escalation_start = 1000;
  cfg.seed = 9001;

  ConstellationEnv env(cfg);
  LoadBalancingAgent agent(cfg.num_sats);
  const EpisodeMetrics m = run_episode(env, agent, false);
  if (m.response_times_sim_s.empty()) {
    v.detail = "no failures observed under p=0.2";
    return v;
  }
  // Mean recomputed in extended precision.
  long double acc = 0.0L;
  int tmax = 0;
  for (double t : m.response_times_sim_s) {
    if (!(t > 0.0)) {
      v.detail = "non-positive response time";
      return v;
    }
    acc += t;
    if (t > cfg.t_max_s) tmax += 1;
  }
  const double mean = static_cast<double>(acc / m.response_times_sim_s.size());
  if (!m.art_s || std::abs(*m.art_s - mean) > 1e-12) {
    v.detail = "mean mismatch";
    return v;
  }
  if (m.tmax_violations != tmax) {
    v.detail = "deadline violation count mismatch";
    return v;
  }
  if (m.response_times_s.size() != m.response_times_sim_s.size()) {
    v.detail = "wall/model sample count mismatch";
    return v;
  }
  // The model-derived samples replay bit for bit; wall-clock ones need not.
  ConstellationEnv env2(cfg);
  LoadBalancingAgent agent2(cfg.num_sats);
  const EpisodeMetrics m2 = run_episode(env2, agent2, false);
  if (m2.response_times_sim_s != m.response_times_sim_s) {
    v.detail = "replay produced different samples";
    return v;
  }
  v.pass = true;
  v.detail = std::to_string(m.response_times_sim_s.size()) + " samples";
  return v;
}

// --- [8] command-line comparison is byte-stable ---

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Verdict check_cli_determinism() {
  Verdict v;
  namespace fs = std::filesystem;
  std::string dir_templ = (fs::temp_directory_path() / "acceptance_XXXXXX").string();
  char* dir_c = ::mkdtemp(dir_templ.data());
  if (!dir_c) {
    v.detail = "mkdtemp failed";
    return v;
  }
  const std::string dir(dir_c);

  const nlohmann::json config = {
      {"experiment_id", "stability"},
      {"env",
       {{"num_sats", 4},
        {"planes", 2},
        {"rounds_per_episode", 8},
        {"base_failure_prob", 0.05},
        {"initial_load_range", {20.0, 60.0}},
        {"capacity", 100.0},
        {"initial_energy", 100.0},
        {"chunk_size", 10.0},
        {"seed", 17}}},
      {"agents", {"load_balancing", "q_learning"}},
      {"train_episodes", 2},
      {"eval_episodes", 2},
      {"seeds", {5}},
  };
  std::ofstream(dir + "/config.json") << config.dump(2) << "\n";

  for (const char* out : {"a", "b"}) {
    const std::string cmd = std::string(CLI_BINARY_PATH) + " compare --config " + dir +
                            "/config.json --out " + dir + "/" + out + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) {
      v.detail = std::string("compare run '") + out + "' failed";
      return v;
    }
  }
  for (const char* name : {"results.csv", "summary.csv", "avg_reward.svg", "tcr.svg", "art.svg"}) {
    const std::string a = slurp(dir + "/a/" + name);
    const std::string b = slurp(dir + "/b/" + name);
    if (a.empty() || a != b) {
      v.detail = std::string(name) + " differs between runs";
      return v;
    }
  }
  fs::remove_all(dir);
  v.pass = true;
  v.detail = "5 artifacts byte-identical";
  return v;
}

// --- [9] failure pressure escalates on schedule ---

Verdict check_failure_schedule() {
  Verdict v;
  EnvConfig cfg;
  cfg.num_sats = 4;
  cfg.planes = 2;
  cfg.rounds_per_episode = 5;
  cfg.base_failure_prob = 0.01;
  cfg.failure_escalation_start = 100;
  cfg.failure_escalation_rate = 0.0005;
  cfg.failure_prob_cap = 0.2;

  ConstellationEnv env(cfg);
  double prev = 0.0;
  for (int episode = 1; episode <= 1000; ++episode) {
    env.reset();
    const double p = env.effective_failure_prob();
    if (episode <= cfg.failure_escalation_start && p != cfg.base_failure_prob) {
      v.detail = "episode " + std::to_string(episode) + ": expected the base probability";
      return v;
    }
    if (p + 1e-15 < prev) {
      v.detail = "episode " + std::to_string(episode) + ": probability decreased";
      return v;
    }
    if (p > cfg.failure_prob_cap + 1e-15) {
      v.detail = "episode " + std::to_string(episode) + ": cap exceeded";
      return v;
    }
    prev = p;
  }
  if (prev != cfg.failure_prob_cap) {
    v.detail = "cap never reached";
    return v;
  }
  v.pass = true;
  v.detail = "1000 episodes";
  return v;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Verdict verdict;
  };
  std::vector<Entry> entries;
  entries.push_back({"closed-form performance metrics", check_metric_formulas()});
  entries.push_back({"redistribution conserves tasks", check_redistribution_conservation()});
  entries.push_back({"network gradients match finite differences", check_gradient_agreement()});
  entries.push_back({"tabular values converge on a known problem", check_tabular_convergence()});

  const ComparisonReport report = run_comparison(desk_spec());
  const auto by_name = summaries_by_name(report);
  entries.push_back({"learned policies beat the heuristic on reward",
                     check_reward_ordering(by_name)});
  entries.push_back({"learned policies beat the heuristic on completion",
                     check_completion_ordering(by_name)});

  entries.push_back({"response-time accounting is reproducible",
                     check_response_time_accounting()});
  entries.push_back({"command-line comparison is byte-stable", check_cli_determinism()});
  entries.push_back({"failure pressure escalates on schedule", check_failure_schedule()});

  int passed = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    passed += e.verdict.pass ? 1 : 0;
    std::printf("[%zu/%zu] %s ... %s%s%s\n", i + 1, entries.size(), e.name,
                e.verdict.pass ? "PASS" : "FAIL", e.verdict.detail.empty() ? "" : " | ",
                e.verdict.detail.c_str());
  }
  std::printf("ACCEPTANCE: %d/%zu PASS\n", passed, entries.size());
  return passed == static_cast<int>(entries.size()) ? 0 : 1;
}
