// Command-line front end: train one agent, compare the full agent roster, or
// replay a saved checkpoint round by round.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "constellation/config_io.hpp"
#include "constellation/csv.hpp"
#include "constellation/log.hpp"
#include "constellation/svg.hpp"

namespace {

using namespace constellation;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
  // create_directories reports success on an existing path; probe writability.
  const auto probe = std::filesystem::path(out_dir) / ".write_probe";
  try {
    write_text_file(probe.string(), "ok");
  } catch (const IoError&) {
    throw IoError("output directory '" + out_dir + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

ExperimentSpec load_experiment(const std::string& config_path) {
  return experiment_spec_from_json(parse_json_file(config_path));
}

// The agent a `train` run should use: the --agent override, the sole
// configured agent, or an error when the choice is ambiguous.
AgentSetup pick_train_agent(const ExperimentSpec& spec, const std::string& agent_override) {
  if (!agent_override.empty()) {
    const AgentKind kind = agent_kind_from_name(agent_override);
    for (const auto& setup : spec.agents)
      if (setup.kind == kind) return setup;
    AgentSetup setup;
    setup.kind = kind;
    setup.config = AgentConfig::defaults_for(kind);
    return setup;
  }
  if (spec.agents.size() == 1) return spec.agents.front();
  throw ConfigError("config lists multiple agents; pick one with --agent");
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override, const std::string& agent_override) {
  ExperimentSpec spec = load_experiment(config_path);
  const AgentSetup setup = pick_train_agent(spec, agent_override);
  const std::uint64_t seed = seed_override.value_or(spec.seeds.front());
  ensure_out_dir(out_dir);

  const std::string agent_name = agent_kind_name(setup.kind);
  log_info("training " + agent_name + " for " + std::to_string(spec.train_episodes) +
           " episodes (seed " + std::to_string(seed) + ")");
  TrainOutput trained = train_agent(spec, setup, seed);
  for (const auto& ep : trained.curve)
    log_debug("episode " + std::to_string(ep.episode_index) + " reward " +
              csv_double(ep.reward_sum) + " tcr " + csv_double(ep.tcr_percent));

  const auto out = std::filesystem::path(out_dir);
  write_text_file((out / ("checkpoint_" + agent_name + ".json")).string(),
                  trained.agent->checkpoint().dump(2) + "\n");
  write_text_file((out / "train_curve.csv").string(),
                  train_curve_csv(spec.experiment_id, agent_name, seed, trained.curve));
  log_info("wrote checkpoint_" + agent_name + ".json and train_curve.csv to " + out_dir);
  return kExitOk;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override) {
  ExperimentSpec spec = load_experiment(config_path);
  if (seed_override) spec.seeds = {*seed_override};
  ensure_out_dir(out_dir);

  log_info("comparing " + std::to_string(spec.agents.size()) + " agents over " +
           std::to_string(spec.seeds.size()) + " seeds");
  const ComparisonReport report = run_comparison(spec);

  std::vector<std::string> labels;
  std::vector<std::optional<double>> rewards, tcrs, arts;
  for (const auto& s : report.summaries) {
    labels.push_back(agent_kind_label(s.kind));
    rewards.push_back(s.median_reward);
    tcrs.push_back(s.median_tcr);
    arts.push_back(s.median_art);
    log_info(s.agent_name + ": median reward " + csv_double(s.median_reward) + ", median TCR " +
             csv_double(s.median_tcr) + "%" +
             (s.median_art ? ", median ART " + csv_double(*s.median_art) + "s" : ""));
  }

  const auto out = std::filesystem::path(out_dir);
  write_text_file((out / "results.csv").string(), results_csv(report));
  write_text_file((out / "summary.csv").string(), summary_csv(report));
  write_text_file((out / "avg_reward.svg").string(),
                  svg_bar_chart("Average evaluation reward", "reward", labels, rewards));
  write_text_file((out / "tcr.svg").string(),
                  svg_bar_chart("Task completion rate", "TCR (%)", labels, tcrs));
  write_text_file((out / "art.svg").string(),
                  svg_bar_chart("Average response time", "ART (s)", labels, arts));
  log_info("wrote results.csv, summary.csv, avg_reward.svg, tcr.svg, art.svg to " + out_dir);
  return kExitOk;
}

int cmd_replay(const std::string& config_path, const std::string& checkpoint_path,
               std::optional<std::uint64_t> seed_override, const std::string& out_dir) {
  const nlohmann::json config_json = parse_json_file(config_path);
  EnvConfig env_cfg = config_json.contains("env") ? env_config_from_json(config_json.at("env"))
                                                  : env_config_from_json(config_json);
  if (seed_override) env_cfg.seed = *seed_override;

  const nlohmann::json ckpt = parse_json_file(checkpoint_path);
  if (!ckpt.is_object() || !ckpt.contains("agent"))
    throw ConfigError("checkpoint: missing 'agent' field");
  const AgentKind kind = agent_kind_from_name(ckpt.at("agent").get<std::string>());
  auto agent = make_agent(kind, env_cfg.num_sats, AgentConfig::defaults_for(kind), 0);
  agent->restore(ckpt);
  agent->set_eval(true);

  ConstellationEnv env(env_cfg);
  Observation obs = env.reset();
  double cumulative = 0.0;
  int failures = 0;
  std::ostringstream log_rows;
  log_rows << "round,from,to,reward,cumulative_reward,failures\n";
  for (;;) {
    const auto choice = agent->select(obs);
    const int action_index = choice ? choice->encode(env_cfg.num_sats) : 0;
    const Action action = Action::decode(action_index, env_cfg.num_sats);
    const StepOutcome out = env.step(action_index);
    cumulative += out.reward;
    failures += static_cast<int>(out.info.failed_this_step.size());
    std::cout << "round " << env.round() << ": transfer " << action.from_sat << " -> "
              << action.to_sat << ", reward " << csv_double(out.reward) << ", cumulative "
              << csv_double(cumulative) << ", failures " << failures << "\n";
    log_rows << env.round() << ',' << action.from_sat << ',' << action.to_sat << ','
             << csv_double(out.reward) << ',' << csv_double(cumulative) << ',' << failures << '\n';
    obs = out.observation;
    if (out.done) break;
  }
  const double remaining = std::min(env.remaining_tasks(), env.initial_tasks());
  const double tcr = task_completion_rate(env.initial_tasks(), remaining);
  std::cout << "episode complete: reward " << csv_double(cumulative) << ", TCR "
            << csv_double(tcr) << "%, failures " << failures << "\n";
  if (!out_dir.empty()) {
    ensure_out_dir(out_dir);
    write_text_file((std::filesystem::path(out_dir) / "replay.csv").string(), log_rows.str());
    log_info("wrote replay.csv to " + out_dir);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Satellite constellation retasking testbed"};
  app.require_subcommand(1);

  std::string config_path, out_dir, agent_name, checkpoint_path;
  std::optional<std::uint64_t> seed;

  CLI::App* train = app.add_subcommand("train", "Train one agent and save its checkpoint");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--seed", seed, "override the experiment seed");
  train->add_option("--agent", agent_name, "agent to train (when the config lists several)");

  CLI::App* compare = app.add_subcommand("compare", "Train and evaluate every configured agent");
  compare->add_option("--config", config_path, "experiment config JSON")->required();
  compare->add_option("--out", out_dir, "output directory")->required();
  compare->add_option("--seed", seed, "run only this experiment seed");

  CLI::App* replay = app.add_subcommand("replay", "Replay a checkpoint round by round");
  replay->add_option("--config", config_path, "experiment or env config JSON")->required();
  replay->add_option("--checkpoint", checkpoint_path, "agent checkpoint JSON")->required();
  replay->add_option("--seed", seed, "override the environment seed");
  replay->add_option("--out", out_dir, "optional directory for the replay log");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, out_dir, seed, agent_name);
    if (compare->parsed()) return cmd_compare(config_path, out_dir, seed);
    if (replay->parsed()) return cmd_replay(config_path, checkpoint_path, seed, out_dir);
  } catch (const constellation::IoError& e) {
    constellation::log_error(e.what());
    return kExitIo;
  } catch (const constellation::ConfigError& e) {
    constellation::log_error(e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    constellation::log_error(e.what());
    return 1;
  }
  return kExitOk;
}
