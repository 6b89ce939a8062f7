#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "constellation/csv.hpp"
#include "constellation/harness.hpp"
#include "constellation/svg.hpp"

using namespace constellation;

namespace {

EnvConfig harness_config() {
  EnvConfig cfg;
  cfg.num_sats = 4;
  cfg.planes = 2;
  cfg.rounds_per_episode = 20;
  cfg.base_failure_prob = 0.05;
  cfg.failure_escalation_start = 1000;
  cfg.initial_load_min = 20.0;
  cfg.initial_load_max = 60.0;
  cfg.capacity = 100.0;
  cfg.initial_energy = 100.0;
  cfg.chunk_size = 10.0;
  cfg.service_rate = 2.0;
  cfg.seed = 77;
  return cfg;
}

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.experiment_id = "grid";
  spec.env = harness_config();
  spec.env.rounds_per_episode = 10;
  spec.train_episodes = 3;
  spec.eval_episodes = 4;
  spec.seeds = {11, 22, 33};
  spec.agents.push_back({AgentKind::LoadBalancing, AgentConfig::defaults_for(AgentKind::LoadBalancing)});
  AgentSetup ql{AgentKind::QLearning, AgentConfig::defaults_for(AgentKind::QLearning)};
  spec.agents.push_back(ql);
  return spec;
}

std::vector<double> episode_rewards(const std::vector<EpisodeMetrics>& eps) {
  std::vector<double> out;
  for (const auto& ep : eps) out.push_back(ep.reward_sum);
  return out;
}

}  // namespace

TEST_CASE("episode accounting mirrors a hand-driven environment") {
  const EnvConfig cfg = harness_config();
  ConstellationEnv env(cfg);
  LoadBalancingAgent agent(cfg.num_sats);
  const EpisodeMetrics m = run_episode(env, agent, false, 3);
  CHECK(m.episode_index == 3);

  // Re-drive a twin environment with the same policy by hand.
  ConstellationEnv twin(cfg);
  LoadBalancingAgent twin_agent(cfg.num_sats);
  Observation obs = twin.reset();
  double reward_sum = 0.0;
  int failures = 0;
  std::vector<double> sim_times;
  for (;;) {
    const auto choice = twin_agent.select(obs);
    const int idx = choice ? choice->encode(cfg.num_sats) : 0;
    const StepOutcome out = twin.step(idx);
    reward_sum += out.reward;
    failures += static_cast<int>(out.info.failed_this_step.size());
    for (double t : out.info.response_times_sim_s) sim_times.push_back(t);
    obs = out.observation;
    if (out.done) break;
  }
  CHECK(m.reward_sum == reward_sum);
  CHECK(m.failures == failures);
  CHECK(m.initial_tasks == twin.initial_tasks());
  CHECK(m.response_times_sim_s == sim_times);
  CHECK(m.tcr_percent ==
        task_completion_rate(twin.initial_tasks(),
                             std::min(twin.remaining_tasks(), twin.initial_tasks())));
  if (!sim_times.empty()) {
    REQUIRE(m.art_s.has_value());
    CHECK(*m.art_s == average_response_time(sim_times));
  } else {
    CHECK_FALSE(m.art_s.has_value());
  }
}

TEST_CASE("training runs are reproducible per seed") {
  ExperimentSpec spec;
  spec.env = harness_config();
  spec.env.base_failure_prob = 0.03;
  spec.train_episodes = 6;
  spec.eval_episodes = 1;
  spec.seeds = {7};

  SECTION("tabular agent") {
    AgentSetup setup{AgentKind::QLearning, AgentConfig::defaults_for(AgentKind::QLearning)};
    spec.agents = {setup};
    const TrainOutput a = train_agent(spec, setup, 7);
    const TrainOutput b = train_agent(spec, setup, 7);
    CHECK(a.agent->parameter_hash() == b.agent->parameter_hash());
    REQUIRE(a.curve.size() == 6);
    CHECK(episode_rewards(a.curve) == episode_rewards(b.curve));
  }
  SECTION("network agent") {
    AgentSetup setup{AgentKind::Dqn, AgentConfig::defaults_for(AgentKind::Dqn)};
    setup.config.hidden = {8};
    setup.config.batch_size = 8;
    spec.agents = {setup};
    const TrainOutput a = train_agent(spec, setup, 7);
    const TrainOutput b = train_agent(spec, setup, 7);
    CHECK(a.agent->parameter_hash() == b.agent->parameter_hash());
    CHECK(episode_rewards(a.curve) == episode_rewards(b.curve));
    const TrainOutput c = train_agent(spec, setup, 8);
    CHECK(a.agent->parameter_hash() != c.agent->parameter_hash());
  }
}

TEST_CASE("the heuristic ignores hyperparameters") {
  ExperimentSpec spec;
  spec.env = harness_config();
  spec.train_episodes = 4;
  spec.eval_episodes = 1;
  spec.seeds = {5};
  AgentSetup slow{AgentKind::LoadBalancing, AgentConfig::defaults_for(AgentKind::LoadBalancing)};
  AgentSetup fast = slow;
  fast.config.learning_rate = 0.9;
  spec.agents = {slow, fast};
  const TrainOutput a = train_agent(spec, slow, 5);
  const TrainOutput b = train_agent(spec, fast, 5);
  CHECK(episode_rewards(a.curve) == episode_rewards(b.curve));
  CHECK(a.agent->parameter_hash() == b.agent->parameter_hash());
}

TEST_CASE("evaluation replays its own seed stream without touching the agent") {
  const EnvConfig cfg = harness_config();
  auto agent = make_agent(AgentKind::Dqn, cfg.num_sats, AgentConfig::defaults_for(AgentKind::Dqn), 4);
  const auto hash_before = agent->parameter_hash();
  const auto r1 = episode_rewards(evaluate_agent(*agent, cfg, 3, 555));
  const auto r2 = episode_rewards(evaluate_agent(*agent, cfg, 3, 555));
  const auto r3 = episode_rewards(evaluate_agent(*agent, cfg, 3, 556));
  CHECK(r1 == r2);
  CHECK(r1 != r3);
  CHECK(agent->parameter_hash() == hash_before);
  CHECK_FALSE(agent->eval_mode());
}

TEST_CASE("comparison grids reduce to medians the slow way") {
  const ExperimentSpec spec = small_spec();
  const ComparisonReport report = run_comparison(spec);
  CHECK(report.experiment_id == "grid");
  REQUIRE(report.cells.size() == 6);
  REQUIRE(report.summaries.size() == 2);

  // Agent-major, seed-minor ordering.
  for (int a = 0; a < 2; ++a) {
    for (int s = 0; s < 3; ++s) {
      const CellResult& cell = report.cells[a * 3 + s];
      CHECK(cell.kind == spec.agents[a].kind);
      CHECK(cell.seed == spec.seeds[s]);
      REQUIRE(cell.train_curve.size() == 3);
      REQUIRE(cell.eval_episodes.size() == 4);

      // Cell means recompute from their own episodes.
      double reward = 0.0, tcr = 0.0;
      long cap_v = 0, tmax_v = 0;
      for (const auto& ep : cell.eval_episodes) {
        reward += ep.reward_sum;
        tcr += ep.tcr_percent;
        cap_v += ep.capacity_violations;
        tmax_v += ep.tmax_violations;
      }
      CHECK_THAT(cell.eval_mean_reward, Catch::Matchers::WithinAbs(reward / 4.0, 1e-12));
      CHECK_THAT(cell.eval_mean_tcr, Catch::Matchers::WithinAbs(tcr / 4.0, 1e-12));
      CHECK(cell.eval_capacity_violations == cap_v);
      CHECK(cell.eval_tmax_violations == tmax_v);
    }
  }

  // Summaries are medians of per-seed cell means.
  for (int a = 0; a < 2; ++a) {
    std::vector<double> rewards, tcrs;
    for (int s = 0; s < 3; ++s) {
      rewards.push_back(report.cells[a * 3 + s].eval_mean_reward);
      tcrs.push_back(report.cells[a * 3 + s].eval_mean_tcr);
    }
    CHECK(report.summaries[a].median_reward == median_of(rewards));
    CHECK(report.summaries[a].median_tcr == median_of(tcrs));
    CHECK(report.summaries[a].agent_name == agent_kind_name(spec.agents[a].kind));
  }

  SECTION("a rerun is bitwise identical") {
    const ComparisonReport again = run_comparison(spec);
    CHECK(results_csv(report) == results_csv(again));
    CHECK(summary_csv(report) == summary_csv(again));
  }
  SECTION("invalid specs are rejected up front") {
    ExperimentSpec bad = spec;
    bad.seeds.clear();
    CHECK_THROWS_AS(run_comparison(bad), ConfigError);
    bad = spec;
    bad.agents.clear();
    CHECK_THROWS_AS(run_comparison(bad), ConfigError);
    bad = spec;
    bad.eval_episodes = 0;
    CHECK_THROWS_AS(run_comparison(bad), ConfigError);
  }
}

TEST_CASE("csv emitters produce the frozen schema") {
  const ExperimentSpec spec = small_spec();
  const ComparisonReport report = run_comparison(spec);

  const std::string results = results_csv(report);
  const auto rows = parse_csv(results);
  REQUIRE(rows.size() == 1 + 6 * 4);
  REQUIRE(rows[0] ==
          std::vector<std::string>{"experiment_id", "agent", "seed", "episode", "reward_sum",
                                   "tcr_percent", "art_seconds", "failures",
                                   "capacity_violations", "tmax_violations"});
  // Numeric round trip through the printed text.
  std::size_t row_idx = 1;
  for (const auto& cell : report.cells) {
    for (const auto& ep : cell.eval_episodes) {
      const auto& row = rows[row_idx++];
      REQUIRE(row.size() == 10);
      CHECK(row[0] == "grid");
      CHECK(row[1] == cell.agent_name);
      CHECK(std::stoull(row[2]) == cell.seed);
      CHECK(std::stoi(row[3]) == ep.episode_index);
      CHECK_THAT(std::stod(row[4]), Catch::Matchers::WithinRel(ep.reward_sum, 1e-8));
      CHECK_THAT(std::stod(row[5]), Catch::Matchers::WithinRel(ep.tcr_percent, 1e-8));
      if (ep.art_s) {
        CHECK_THAT(std::stod(row[6]), Catch::Matchers::WithinRel(*ep.art_s, 1e-8));
      } else {
        CHECK(row[6].empty());
      }
      CHECK(std::stoi(row[7]) == ep.failures);
    }
  }

  const auto summary_rows = parse_csv(summary_csv(report));
  REQUIRE(summary_rows.size() == 3);
  REQUIRE(summary_rows[0] ==
          std::vector<std::string>{"experiment_id", "agent", "median_reward", "median_tcr",
                                   "median_art_seconds", "capacity_violations",
                                   "tmax_violations"});
  CHECK(summary_rows[1][1] == "load_balancing");
  CHECK(summary_rows[2][1] == "q_learning");

  const auto curve_rows =
      parse_csv(train_curve_csv("grid", "q_learning", 11, report.cells[3].train_curve));
  REQUIRE(curve_rows.size() == 1 + 3);
  CHECK(curve_rows[1][3] == "0");
  CHECK(curve_rows[3][3] == "2");
}

TEST_CASE("failure-free runs leave the response-time column empty") {
  ExperimentSpec spec = small_spec();
  spec.env.base_failure_prob = 0.0;
  spec.env.failure_escalation_start = 1000000;
  spec.agents = {{AgentKind::LoadBalancing, AgentConfig::defaults_for(AgentKind::LoadBalancing)}};
  spec.seeds = {11};
  const ComparisonReport report = run_comparison(spec);
  for (const auto& cell : report.cells)
    for (const auto& ep : cell.eval_episodes) {
      CHECK(ep.failures == 0);
      CHECK_FALSE(ep.art_s.has_value());
    }
  CHECK_FALSE(report.summaries[0].median_art.has_value());
  const auto rows = parse_csv(results_csv(report));
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][6].empty());
  const auto summary_rows = parse_csv(summary_csv(report));
  CHECK(summary_rows[1][4].empty());
}

TEST_CASE("csv quoting survives round trips") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  const auto rows = parse_csv("x,\"a,b\",\"say \"\"hi\"\"\"\n1,2,3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"x", "a,b", "say \"hi\""});
  CHECK(rows[1] == std::vector<std::string>{"1", "2", "3"});
}

TEST_CASE("bar charts are deterministic text") {
  const std::vector<std::string> labels{"LoadBalancing", "QLearning", "DQN"};
  const std::vector<std::optional<double>> values{1.25, std::nullopt, -0.5};
  const std::string svg = svg_bar_chart("Average evaluation reward", "reward", labels, values);
  CHECK(svg == svg_bar_chart("Average evaluation reward", "reward", labels, values));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("Average evaluation reward") != std::string::npos);
  for (const auto& label : labels) CHECK(svg.find(label) != std::string::npos);
  CHECK(svg.find("n/a") != std::string::npos);       // absent value placeholder
  CHECK(svg.find("nan") == std::string::npos);
  SECTION("mismatched labels and values are rejected") {
    CHECK_THROWS_AS(svg_bar_chart("t", "y", labels, {1.0}), std::invalid_argument);
  }
}
