#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "constellation/env.hpp"
#include "constellation/nn.hpp"
#include "constellation/rng.hpp"

namespace constellation {

// One agent-environment interaction.
struct Transition {
  Observation state;
  int action_index = 0;
  double reward = 0.0;
  Observation next_state;
  bool done = false;
};

inline std::vector<double> obs_loads(const Observation& obs, int num_sats) {
  if (static_cast<int>(obs.size()) != observation_size(num_sats))
    throw std::invalid_argument("obs_loads: observation length mismatch");
  std::vector<double> loads(num_sats);
  for (int i = 0; i < num_sats; ++i) loads[i] = obs[3 * i];
  return loads;
}

inline std::vector<std::uint8_t> obs_operational(const Observation& obs, int num_sats) {
  if (static_cast<int>(obs.size()) != observation_size(num_sats))
    throw std::invalid_argument("obs_operational: observation length mismatch");
  std::vector<std::uint8_t> op(num_sats);
  for (int i = 0; i < num_sats; ++i) op[i] = obs[3 * i + 2] > 0.5 ? 1 : 0;
  return op;
}

// Heaviest-to-lightest pairing over operational satellites; ties break toward
// the lower id. Returns nothing when fewer than two satellites are available.
inline std::optional<Action> load_balancing_select(const std::vector<double>& loads,
                                                   const std::vector<std::uint8_t>& operational) {
  if (loads.size() != operational.size())
    throw std::invalid_argument("load_balancing_select: length mismatch");
  int from = -1, to = -1;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (!operational[i]) continue;
    if (from < 0 || loads[i] > loads[from]) from = static_cast<int>(i);
  }
  if (from < 0) return std::nullopt;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (!operational[i] || static_cast<int>(i) == from) continue;
    if (to < 0 || loads[i] < loads[to]) to = static_cast<int>(i);
  }
  if (to < 0) return std::nullopt;
  return Action{from, to};
}

// Coarse state id for tabular learning: (heaviest operational satellite) *
// num_sats + (lightest other operational satellite), ties toward lower ids.
inline int discretize_state(const std::vector<double>& loads,
                            const std::vector<std::uint8_t>& operational) {
  const int n = static_cast<int>(loads.size());
  const auto pair = load_balancing_select(loads, operational);
  if (!pair) {
    for (int i = 0; i < n; ++i)
      if (operational[i]) return i * n + i;  // degenerate one-survivor state
    return 0;
  }
  return pair->from_sat * n + pair->to_sat;
}

// Probabilities over actions restricted to a validity mask.
struct MaskedDistribution {
  std::vector<double> probs;  // zero at masked-out entries
  double entropy = 0.0;
};

inline MaskedDistribution masked_softmax(const std::vector<double>& logits,
                                         const std::vector<std::uint8_t>& mask) {
  if (logits.size() != mask.size())
    throw std::invalid_argument("masked_softmax: logits/mask length mismatch");
  double max_logit = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    if (!any || logits[i] > max_logit) max_logit = logits[i];
    any = true;
  }
  if (!any) throw std::invalid_argument("masked_softmax: no valid entries");
  MaskedDistribution d;
  d.probs.assign(logits.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    d.probs[i] = std::exp(logits[i] - max_logit);
    sum += d.probs[i];
  }
  for (double& p : d.probs) p /= sum;
  for (double p : d.probs)
    if (p > 0.0) d.entropy -= p * std::log(p);
  return d;
}

// Highest value among valid entries, ties toward the lowest index.
inline int masked_argmax(const std::vector<double>& values,
                         const std::vector<std::uint8_t>& mask) {
  if (values.size() != mask.size())
    throw std::invalid_argument("masked_argmax: values/mask length mismatch");
  int best = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i]) continue;
    if (best < 0 || values[i] > values[best]) best = static_cast<int>(i);
  }
  if (best < 0) throw std::invalid_argument("masked_argmax: no valid entries");
  return best;
}

// Sample an index from a (masked) categorical distribution. One uniform draw.
inline int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cum += probs[i];
    if (u < cum) return last_positive;
  }
  if (last_positive < 0) throw std::invalid_argument("sample_categorical: no mass");
  return last_positive;  // floating-point residue
}

// Epsilon-greedy over valid entries. Always consumes one uniform draw for the
// explore/exploit decision; exploration draws a second for the uniform pick.
inline int epsilon_greedy_select(const std::vector<double>& values, double epsilon,
                                 const std::vector<std::uint8_t>& mask, Rng& rng) {
  if (values.size() != mask.size())
    throw std::invalid_argument("epsilon_greedy_select: values/mask length mismatch");
  std::size_t valid_count = 0;
  for (auto m : mask) valid_count += m ? 1 : 0;
  if (valid_count == 0) throw std::invalid_argument("epsilon_greedy_select: no valid actions");
  if (rng.uniform() < epsilon) {
    std::uint64_t k = rng.uniform_index(valid_count);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      if (k == 0) return static_cast<int>(i);
      --k;
    }
  }
  return masked_argmax(values, mask);
}

// G_t = r_t + gamma * G_{t+1}.
inline std::vector<double> compute_discounted_returns(const std::vector<double>& rewards,
                                                      double gamma) {
  std::vector<double> returns(rewards.size());
  double g = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    g = rewards[i] + gamma * g;
    returns[i] = g;
  }
  return returns;
}

// Shift/scale to zero mean, unit variance (population), with a sigma floor so
// constant inputs map to zero.
inline void normalize_in_place(std::vector<double>& xs, double sigma_floor = 1e-8) {
  if (xs.empty()) return;
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  const double denom = std::sqrt(var) + sigma_floor;
  for (double& x : xs) x = (x - mean) / denom;
}

// --- tabular Q ---

// Sparse state -> action-value row table. Unseen states read as all-zero.
class QTable {
 public:
  explicit QTable(int num_actions) : num_actions_(num_actions) {
    if (num_actions < 1) throw std::invalid_argument("QTable: num_actions must be >= 1");
  }

  std::vector<double> lookup(int state) const {
    auto it = table_.find(state);
    if (it == table_.end()) return std::vector<double>(num_actions_, 0.0);
    return it->second;
  }

  std::vector<double>& row(int state) {
    auto it = table_.find(state);
    if (it == table_.end())
      it = table_.emplace(state, std::vector<double>(num_actions_, 0.0)).first;
    return it->second;
  }

  std::size_t states_seen() const { return table_.size(); }
  int num_actions() const { return num_actions_; }

  // States serialize in ascending order (std::map iteration).
  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [state, values] : table_)
      rows.push_back({{"state", state}, {"values", values}});
    return {{"num_actions", num_actions_}, {"rows", rows}};
  }

  static QTable from_json(const nlohmann::json& j) {
    QTable q(j.at("num_actions").get<int>());
    for (const auto& row : j.at("rows")) {
      auto values = row.at("values").get<std::vector<double>>();
      if (static_cast<int>(values.size()) != q.num_actions_)
        throw ConfigError("QTable::from_json: row width mismatch");
      q.table_[row.at("state").get<int>()] = std::move(values);
    }
    return q;
  }

 private:
  int num_actions_;
  std::map<int, std::vector<double>> table_;
};

// One tabular Bellman update; terminal transitions bootstrap nothing.
inline void q_update(QTable& q, int state, int action, double reward, int next_state, bool done,
                     double alpha, double gamma) {
  auto& row = q.row(state);
  if (action < 0 || action >= static_cast<int>(row.size()))
    throw std::out_of_range("q_update: action outside table row");
  double best_next = 0.0;
  if (!done) {
    const auto next = q.lookup(next_state);
    best_next = *std::max_element(next.begin(), next.end());
  }
  row[action] += alpha * (reward + gamma * best_next - row[action]);
}

// --- replay buffer ---

// Fixed-capacity ring; oldest transitions are evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
    storage_.reserve(capacity);
  }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return storage_.at(i); }

  // Uniform with replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    if (storage_.empty()) throw std::invalid_argument("ReplayBuffer: sampling from empty buffer");
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.uniform_index(storage_.size());
    return idx;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t next_ = 0;
};

// --- agent configuration ---

enum class AgentKind { LoadBalancing, QLearning, PolicyGradient, Dqn, Ppo };

inline std::string agent_kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::LoadBalancing: return "load_balancing";
    case AgentKind::QLearning: return "q_learning";
    case AgentKind::PolicyGradient: return "policy_gradient";
    case AgentKind::Dqn: return "dqn";
    case AgentKind::Ppo: return "ppo";
  }
  throw std::logic_error("agent_kind_name: unknown kind");
}

// Display label used in report charts.
inline std::string agent_kind_label(AgentKind k) {
  switch (k) {
    case AgentKind::LoadBalancing: return "LoadBalancing";
    case AgentKind::QLearning: return "QLearning";
    case AgentKind::PolicyGradient: return "PolicyGradient";
    case AgentKind::Dqn: return "DQN";
    case AgentKind::Ppo: return "PPO";
  }
  throw std::logic_error("agent_kind_label: unknown kind");
}

inline AgentKind agent_kind_from_name(const std::string& name) {
  if (name == "load_balancing") return AgentKind::LoadBalancing;
  if (name == "q_learning") return AgentKind::QLearning;
  if (name == "policy_gradient") return AgentKind::PolicyGradient;
  if (name == "dqn") return AgentKind::Dqn;
  if (name == "ppo") return AgentKind::Ppo;
  throw ConfigError("unknown agent name '" + name + "'");
}

struct AgentConfig {
  double learning_rate = 0.0;
  double gamma = 0.99;
  double epsilon = 0.1;           // Q-learning exploration / DQN final epsilon
  double epsilon_start = 1.0;     // DQN anneal start
  double epsilon_fraction = 0.2;  // fraction of planned env steps to anneal over
  int batch_size = 0;
  int replay_capacity = 10000;
  int target_sync_every = 1000;   // gradient steps between target refreshes
  double entropy_coef = 0.01;
  double grad_clip_norm = 0.5;
  int update_frequency = 1;       // PPO optimization epochs per rollout
  double ppo_clip = 0.2;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  std::vector<int> hidden = {32, 32};

  static AgentConfig defaults_for(AgentKind k) {
    AgentConfig c;
    switch (k) {
      case AgentKind::LoadBalancing:
        break;
      case AgentKind::QLearning:
        c.learning_rate = 0.1;
        c.epsilon = 0.1;
        break;
      case AgentKind::PolicyGradient:
        c.learning_rate = 0.001;
        c.batch_size = 32;
        c.update_frequency = 1;
        break;
      case AgentKind::Dqn:
        c.learning_rate = 0.0001;
        c.epsilon = 0.1;
        c.batch_size = 64;
        break;
      case AgentKind::Ppo:
        c.learning_rate = 0.0003;
        c.batch_size = 64;
        c.update_frequency = 4;
        break;
    }
    return c;
  }
};

// --- policy-gradient math shared by REINFORCE and PPO ---

// d(-entropy_coef * H)/d(logits), added in place.
inline void add_entropy_loss_grad(const MaskedDistribution& dist, double entropy_coef,
                                  std::vector<double>& dlogits) {
  for (std::size_t j = 0; j < dist.probs.size(); ++j) {
    const double p = dist.probs[j];
    if (p > 0.0) dlogits[j] += entropy_coef * p * (std::log(p) + dist.entropy);
  }
}

// Scalar REINFORCE objective for one episode: mean over steps of
// -log pi(a_t) * G_t - entropy_coef * H(pi(. | s_t)).
inline double reinforce_episode_loss(const MlpParameters& policy,
                                     const std::vector<Observation>& states,
                                     const std::vector<int>& actions,
                                     const std::vector<double>& weights, double entropy_coef,
                                     int num_sats) {
  if (states.size() != actions.size() || states.size() != weights.size())
    throw std::invalid_argument("reinforce_episode_loss: ragged inputs");
  double loss = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto logits = forward(policy, states[t]);
    const auto dist = masked_softmax(logits, valid_action_mask(states[t], num_sats));
    loss += -std::log(dist.probs[actions[t]]) * weights[t] - entropy_coef * dist.entropy;
  }
  return loss / static_cast<double>(states.size());
}

// Analytic gradients of reinforce_episode_loss.
inline MlpGradients reinforce_episode_gradients(const MlpParameters& policy,
                                                const std::vector<Observation>& states,
                                                const std::vector<int>& actions,
                                                const std::vector<double>& weights,
                                                double entropy_coef, int num_sats) {
  MlpGradients g = MlpGradients::zeros_like(policy);
  const double inv_t = 1.0 / static_cast<double>(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    ForwardTrace trace;
    const auto logits = forward(policy, states[t], &trace);
    const auto dist = masked_softmax(logits, valid_action_mask(states[t], num_sats));
    std::vector<double> dlogits(logits.size(), 0.0);
    for (std::size_t j = 0; j < dlogits.size(); ++j)
      if (dist.probs[j] > 0.0) dlogits[j] = weights[t] * dist.probs[j];
    dlogits[actions[t]] -= weights[t];
    add_entropy_loss_grad(dist, entropy_coef, dlogits);
    for (double& v : dlogits) v *= inv_t;
    backward_into(policy, trace, dlogits, g);
  }
  return g;
}

// Whole-episode REINFORCE step: normalized discounted returns, entropy bonus,
// global gradient clip, one Adam update.
inline void reinforce_update(MlpParameters& policy, AdamState& opt,
                             const std::vector<Transition>& episode, const AgentConfig& cfg,
                             int num_sats) {
  if (episode.empty()) return;
  std::vector<Observation> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  states.reserve(episode.size());
  for (const auto& t : episode) {
    states.push_back(t.state);
    actions.push_back(t.action_index);
    rewards.push_back(t.reward);
  }
  auto returns = compute_discounted_returns(rewards, cfg.gamma);
  normalize_in_place(returns);
  MlpGradients g =
      reinforce_episode_gradients(policy, states, actions, returns, cfg.entropy_coef, num_sats);
  clip_gradient_norm(g, cfg.grad_clip_norm);
  adam_step(policy, g, opt, cfg.learning_rate);
}

// One-step TD target under a (target) network: r + gamma * max over valid
// next actions, zero bootstrap on terminal transitions or when the next state
// offers no valid action.
inline double dqn_td_target(const MlpParameters& target_net, const Transition& t, double gamma,
                            int num_sats) {
  if (t.done) return t.reward;
  const auto mask = valid_action_mask(t.next_state, num_sats);
  if (std::count(mask.begin(), mask.end(), 1) == 0) return t.reward;
  const auto next_q = forward(target_net, t.next_state);
  return t.reward + gamma * next_q[masked_argmax(next_q, mask)];
}

// Scalar DQN objective: mean squared TD error of the chosen actions.
inline double dqn_batch_loss(const MlpParameters& qnet, const std::vector<Observation>& states,
                             const std::vector<int>& actions,
                             const std::vector<double>& targets) {
  if (states.size() != actions.size() || states.size() != targets.size())
    throw std::invalid_argument("dqn_batch_loss: ragged inputs");
  double loss = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double q = forward(qnet, states[i])[actions[i]];
    loss += (q - targets[i]) * (q - targets[i]);
  }
  return loss / static_cast<double>(states.size());
}

// Analytic gradients of dqn_batch_loss.
inline MlpGradients dqn_batch_gradients(const MlpParameters& qnet,
                                        const std::vector<Observation>& states,
                                        const std::vector<int>& actions,
                                        const std::vector<double>& targets) {
  MlpGradients g = MlpGradients::zeros_like(qnet);
  const double inv_n = 1.0 / static_cast<double>(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    ForwardTrace trace;
    const auto q = forward(qnet, states[i], &trace);
    std::vector<double> dout(q.size(), 0.0);
    dout[actions[i]] = 2.0 * (q[actions[i]] - targets[i]) * inv_n;
    backward_into(qnet, trace, dout, g);
  }
  return g;
}

// Generalized advantage estimation over one trajectory. `values[t]` is the
// critic's estimate for state t; `bootstrap` stands in for the value after the
// last step (ignored when that step terminated).
inline std::vector<double> compute_gae(const std::vector<double>& rewards,
                                       const std::vector<double>& values,
                                       const std::vector<std::uint8_t>& dones, double bootstrap,
                                       double gamma, double lambda) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw std::invalid_argument("compute_gae: ragged inputs");
  const std::size_t n = rewards.size();
  std::vector<double> advantages(n, 0.0);
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = dones[i] ? 0.0 : (i + 1 < n ? values[i + 1] : bootstrap);
    const double delta = rewards[i] + gamma * next_value - values[i];
    gae = delta + gamma * lambda * (dones[i] ? 0.0 : gae);
    advantages[i] = gae;
  }
  return advantages;
}

// One PPO sample's contribution to the clipped-surrogate objective (policy
// part): -min(ratio * adv, clip(ratio) * adv) - entropy_coef * H.
inline double ppo_policy_sample_loss(const MlpParameters& policy, const Observation& state,
                                     int action, double logp_old, double advantage,
                                     double clip_ratio, double entropy_coef, int num_sats) {
  const auto dist = masked_softmax(forward(policy, state), valid_action_mask(state, num_sats));
  const double ratio = std::exp(std::log(dist.probs[action]) - logp_old);
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantage;
  return -std::min(unclipped, clipped) - entropy_coef * dist.entropy;
}

// Analytic d(ppo_policy_sample_loss)/d(logits); also reports the ratio.
inline std::vector<double> ppo_policy_sample_dlogits(const MaskedDistribution& dist, int action,
                                                     double logp_old, double advantage,
                                                     double clip_ratio, double entropy_coef,
                                                     double* ratio_out = nullptr) {
  const double ratio = std::exp(std::log(dist.probs[action]) - logp_old);
  if (ratio_out) *ratio_out = ratio;
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * advantage;
  std::vector<double> dlogits(dist.probs.size(), 0.0);
  // The clipped branch is flat in the saturated region; only the unclipped
  // branch (active when it is the minimum) contributes surrogate gradient.
  if (unclipped <= clipped) {
    for (std::size_t j = 0; j < dlogits.size(); ++j)
      if (dist.probs[j] > 0.0) dlogits[j] = advantage * ratio * dist.probs[j];
    dlogits[action] -= advantage * ratio;
  }
  add_entropy_loss_grad(dist, entropy_coef, dlogits);
  return dlogits;
}

// --- agents ---

inline constexpr const char* kAgentCheckpointFormat = "agent-checkpoint-v1";

class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;

  // Pick a transfer, or nothing when no valid action exists.
  virtual std::optional<Action> select(const Observation& obs) = 0;

  // Per-step learning hook; called only for transitions this agent chose.
  virtual void observe(const Transition&) {}

  // Episodic learning hook.
  virtual void end_episode() {}

  // Evaluation mode: greedy/mode action selection, no learning.
  void set_eval(bool on) { eval_ = on; }
  bool eval_mode() const { return eval_; }

  // Planned total environment steps for schedules that anneal over training.
  virtual void set_training_horizon(long) {}

  virtual nlohmann::json checkpoint() const = 0;
  virtual void restore(const nlohmann::json&) = 0;

  std::uint64_t parameter_hash() const { return std::hash<std::string>{}(checkpoint().dump()); }

 protected:
  bool eval_ = false;

  nlohmann::json checkpoint_envelope(const std::string& agent_name, int num_sats,
                                     nlohmann::json payload) const {
    return {{"format", kAgentCheckpointFormat},
            {"agent", agent_name},
            {"num_sats", num_sats},
            {"payload", std::move(payload)}};
  }

  static nlohmann::json open_envelope(const nlohmann::json& j, const std::string& agent_name,
                                      int num_sats) {
    if (!j.is_object() || j.value("format", "") != kAgentCheckpointFormat)
      throw ConfigError("checkpoint: missing or unsupported format");
    if (j.value("agent", "") != agent_name)
      throw ConfigError("checkpoint: agent type mismatch (expected '" + agent_name + "', got '" +
                        j.value("agent", "") + "')");
    if (j.value("num_sats", -1) != num_sats)
      throw ConfigError("checkpoint: num_sats mismatch (expected " + std::to_string(num_sats) +
                        ", got " + std::to_string(j.value("num_sats", -1)) + ")");
    return j.at("payload");
  }
};

// Deterministic heaviest-to-lightest heuristic; learns nothing.
class LoadBalancingAgent : public Agent {
 public:
  explicit LoadBalancingAgent(int num_sats) : num_sats_(num_sats) {}

  std::string name() const override { return agent_kind_name(AgentKind::LoadBalancing); }

  std::optional<Action> select(const Observation& obs) override {
    return load_balancing_select(obs_loads(obs, num_sats_), obs_operational(obs, num_sats_));
  }

  nlohmann::json checkpoint() const override {
    return checkpoint_envelope(name(), num_sats_, nlohmann::json::object());
  }

  void restore(const nlohmann::json& j) override { open_envelope(j, name(), num_sats_); }

 private:
  int num_sats_;
};

// Tabular Q-learning over the coarse heaviest/lightest state id.
class QLearningAgent : public Agent {
 public:
  QLearningAgent(int num_sats, const AgentConfig& cfg, std::uint64_t seed)
      : num_sats_(num_sats), cfg_(cfg), rng_(seed), table_(action_space_size(num_sats)) {}

  std::string name() const override { return agent_kind_name(AgentKind::QLearning); }

  std::optional<Action> select(const Observation& obs) override {
    const auto mask = valid_action_mask(obs, num_sats_);
    if (std::count(mask.begin(), mask.end(), 1) == 0) return std::nullopt;
    const int state = discretize_state(obs_loads(obs, num_sats_), obs_operational(obs, num_sats_));
    const auto values = table_.lookup(state);
    const double eps = eval_ ? 0.0 : cfg_.epsilon;
    return Action::decode(epsilon_greedy_select(values, eps, mask, rng_), num_sats_);
  }

  void observe(const Transition& t) override {
    if (eval_) return;
    const int s = discretize_state(obs_loads(t.state, num_sats_), obs_operational(t.state, num_sats_));
    const int s_next = discretize_state(obs_loads(t.next_state, num_sats_),
                                        obs_operational(t.next_state, num_sats_));
    q_update(table_, s, t.action_index, t.reward, s_next, t.done, cfg_.learning_rate, cfg_.gamma);
  }

  nlohmann::json checkpoint() const override {
    return checkpoint_envelope(name(), num_sats_, {{"q_table", table_.to_json()}});
  }

  void restore(const nlohmann::json& j) override {
    auto payload = open_envelope(j, name(), num_sats_);
    QTable loaded = QTable::from_json(payload.at("q_table"));
    if (loaded.num_actions() != action_space_size(num_sats_))
      throw ConfigError("checkpoint: q_table action count mismatch");
    table_ = std::move(loaded);
  }

  const QTable& table() const { return table_; }

 private:
  int num_sats_;
  AgentConfig cfg_;
  Rng rng_;
  QTable table_;
};

// REINFORCE with normalized returns and an entropy bonus; one update per episode.
class ReinforceAgent : public Agent {
 public:
  ReinforceAgent(int num_sats, const AgentConfig& cfg, std::uint64_t seed)
      : num_sats_(num_sats), cfg_(cfg), rng_(seed) {
    std::vector<int> sizes{observation_size(num_sats)};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(action_space_size(num_sats));
    policy_ = MlpParameters::he_uniform(sizes, rng_);
    opt_ = AdamState::zeros_like(policy_);
  }

  std::string name() const override { return agent_kind_name(AgentKind::PolicyGradient); }

  std::optional<Action> select(const Observation& obs) override {
    const auto mask = valid_action_mask(obs, num_sats_);
    if (std::count(mask.begin(), mask.end(), 1) == 0) return std::nullopt;
    const auto dist = masked_softmax(forward(policy_, obs), mask);
    const int idx = eval_ ? masked_argmax(dist.probs, mask) : sample_categorical(dist.probs, rng_);
    return Action::decode(idx, num_sats_);
  }

  void observe(const Transition& t) override {
    if (eval_) return;
    episode_.push_back(t);
  }

  void end_episode() override {
    if (eval_ || episode_.empty()) return;
    reinforce_update(policy_, opt_, episode_, cfg_, num_sats_);
    episode_.clear();
  }

  nlohmann::json checkpoint() const override {
    return checkpoint_envelope(name(), num_sats_, {{"policy", mlp_to_json(policy_)}});
  }

  void restore(const nlohmann::json& j) override {
    auto payload = open_envelope(j, name(), num_sats_);
    MlpParameters loaded = mlp_from_json(payload.at("policy"));
    if (loaded.input_size() != observation_size(num_sats_) ||
        loaded.output_size() != action_space_size(num_sats_))
      throw ConfigError("checkpoint: policy shape mismatch");
    policy_ = std::move(loaded);
    opt_ = AdamState::zeros_like(policy_);
    episode_.clear();
  }

  const MlpParameters& policy() const { return policy_; }

 private:
  int num_sats_;
  AgentConfig cfg_;
  Rng rng_;
  MlpParameters policy_;
  AdamState opt_;
  std::vector<Transition> episode_;
};

// DQN: replay buffer, target network, annealed epsilon-greedy behavior.
class DqnAgent : public Agent {
 public:
  DqnAgent(int num_sats, const AgentConfig& cfg, std::uint64_t seed)
      : num_sats_(num_sats), cfg_(cfg), rng_(seed), buffer_(cfg.replay_capacity) {
    std::vector<int> sizes{observation_size(num_sats)};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(action_space_size(num_sats));
    q_ = MlpParameters::he_uniform(sizes, rng_);
    target_ = q_;
    opt_ = AdamState::zeros_like(q_);
  }

  std::string name() const override { return agent_kind_name(AgentKind::Dqn); }

  void set_training_horizon(long env_steps) override { horizon_ = env_steps; }

  // Linear anneal from epsilon_start to the final epsilon over the first
  // epsilon_fraction of the planned training steps.
  double current_epsilon() const {
    if (horizon_ <= 0) return cfg_.epsilon;
    const double anneal = std::max(1.0, cfg_.epsilon_fraction * static_cast<double>(horizon_));
    const double f = std::min(1.0, static_cast<double>(env_steps_) / anneal);
    return cfg_.epsilon_start + f * (cfg_.epsilon - cfg_.epsilon_start);
  }

  std::optional<Action> select(const Observation& obs) override {
    const auto mask = valid_action_mask(obs, num_sats_);
    if (std::count(mask.begin(), mask.end(), 1) == 0) return std::nullopt;
    const auto values = forward(q_, obs);
    const double eps = eval_ ? 0.0 : current_epsilon();
    return Action::decode(epsilon_greedy_select(values, eps, mask, rng_), num_sats_);
  }

  void observe(const Transition& t) override {
    if (eval_) return;
    env_steps_ += 1;
    buffer_.push(t);
    if (buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) train_batch();
  }

  nlohmann::json checkpoint() const override {
    return checkpoint_envelope(name(), num_sats_, {{"q_network", mlp_to_json(q_)}});
  }

  void restore(const nlohmann::json& j) override {
    auto payload = open_envelope(j, name(), num_sats_);
    MlpParameters loaded = mlp_from_json(payload.at("q_network"));
    if (loaded.input_size() != observation_size(num_sats_) ||
        loaded.output_size() != action_space_size(num_sats_))
      throw ConfigError("checkpoint: q_network shape mismatch");
    q_ = loaded;
    target_ = std::move(loaded);
    opt_ = AdamState::zeros_like(q_);
  }

  const MlpParameters& q_network() const { return q_; }
  const MlpParameters& target_network() const { return target_; }
  long gradient_steps() const { return grad_steps_; }

 private:
  void train_batch() {
    const auto idx = buffer_.sample_indices(cfg_.batch_size, rng_);
    std::vector<Observation> states;
    std::vector<int> actions;
    std::vector<double> targets;
    states.reserve(idx.size());
    for (std::size_t i : idx) {
      const Transition& t = buffer_.at(i);
      states.push_back(t.state);
      actions.push_back(t.action_index);
      targets.push_back(dqn_td_target(target_, t, cfg_.gamma, num_sats_));
    }
    MlpGradients g = dqn_batch_gradients(q_, states, actions, targets);
    adam_step(q_, g, opt_, cfg_.learning_rate);
    grad_steps_ += 1;
    if (grad_steps_ % cfg_.target_sync_every == 0) target_ = q_;
  }

  int num_sats_;
  AgentConfig cfg_;
  Rng rng_;
  ReplayBuffer buffer_;
  MlpParameters q_;
  MlpParameters target_;
  AdamState opt_;
  long env_steps_ = 0;
  long grad_steps_ = 0;
  long horizon_ = 0;
};

// PPO with GAE advantages, clipped surrogate, separate value network.
class PpoAgent : public Agent {
 public:
  PpoAgent(int num_sats, const AgentConfig& cfg, std::uint64_t seed)
      : num_sats_(num_sats), cfg_(cfg), rng_(seed) {
    std::vector<int> sizes{observation_size(num_sats)};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(action_space_size(num_sats));
    policy_ = MlpParameters::he_uniform(sizes, rng_);
    std::vector<int> vsizes{observation_size(num_sats)};
    vsizes.insert(vsizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    vsizes.push_back(1);
    value_ = MlpParameters::he_uniform(vsizes, rng_);
    popt_ = AdamState::zeros_like(policy_);
    vopt_ = AdamState::zeros_like(value_);
  }

  std::string name() const override { return agent_kind_name(AgentKind::Ppo); }

  std::optional<Action> select(const Observation& obs) override {
    const auto mask = valid_action_mask(obs, num_sats_);
    if (std::count(mask.begin(), mask.end(), 1) == 0) {
      pending_valid_ = false;
      return std::nullopt;
    }
    const auto dist = masked_softmax(forward(policy_, obs), mask);
    const int idx = eval_ ? masked_argmax(dist.probs, mask) : sample_categorical(dist.probs, rng_);
    if (!eval_) {
      pending_valid_ = true;
      pending_action_ = idx;
      pending_logp_ = std::log(dist.probs[idx]);
      pending_value_ = forward(value_, obs)[0];
    }
    return Action::decode(idx, num_sats_);
  }

  void observe(const Transition& t) override {
    if (eval_) return;
    if (!pending_valid_ || t.action_index != pending_action_) return;
    rollout_.push_back({t, pending_logp_, pending_value_});
    pending_valid_ = false;
  }

  void end_episode() override {
    if (eval_ || rollout_.empty()) return;
    update();
    rollout_.clear();
  }

  nlohmann::json checkpoint() const override {
    return checkpoint_envelope(
        name(), num_sats_,
        {{"policy", mlp_to_json(policy_)}, {"value", mlp_to_json(value_)}});
  }

  void restore(const nlohmann::json& j) override {
    auto payload = open_envelope(j, name(), num_sats_);
    MlpParameters pol = mlp_from_json(payload.at("policy"));
    MlpParameters val = mlp_from_json(payload.at("value"));
    if (pol.input_size() != observation_size(num_sats_) ||
        pol.output_size() != action_space_size(num_sats_) ||
        val.input_size() != observation_size(num_sats_) || val.output_size() != 1)
      throw ConfigError("checkpoint: network shape mismatch");
    policy_ = std::move(pol);
    value_ = std::move(val);
    popt_ = AdamState::zeros_like(policy_);
    vopt_ = AdamState::zeros_like(value_);
    rollout_.clear();
    pending_valid_ = false;
  }

  const MlpParameters& policy() const { return policy_; }
  const MlpParameters& value_network() const { return value_; }

  // Largest |ratio - 1| seen in the first minibatch of the latest update.
  // Freshly collected rollouts must open with ratios of exactly 1.
  double last_first_minibatch_ratio_dev() const { return first_minibatch_ratio_dev_; }

 private:
  struct RolloutEntry {
    Transition t;
    double logp;
    double value;
  };

  void update() {
    const std::size_t n = rollout_.size();
    std::vector<double> values(n), rewards(n), targets(n);
    std::vector<std::uint8_t> dones(n);
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = rollout_[i].value;
      rewards[i] = rollout_[i].t.reward;
      dones[i] = rollout_[i].t.done ? 1 : 0;
    }
    double bootstrap = 0.0;
    if (!rollout_.back().t.done) bootstrap = forward(value_, rollout_.back().t.next_state)[0];
    std::vector<double> advantages =
        compute_gae(rewards, values, dones, bootstrap, cfg_.gamma, cfg_.gae_lambda);
    for (std::size_t i = 0; i < n; ++i) targets[i] = advantages[i] + values[i];
    normalize_in_place(advantages);

    first_minibatch_ratio_dev_ = 0.0;
    bool first_minibatch = true;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const std::size_t batch = std::max(1, cfg_.batch_size);
    for (int epoch = 0; epoch < std::max(1, cfg_.update_frequency); ++epoch) {
      // Fisher-Yates shuffle with the agent's own stream.
      for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = rng_.uniform_index(i + 1);
        std::swap(order[i], order[j]);
      }
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t stop = std::min(n, start + batch);
        MlpGradients gp = MlpGradients::zeros_like(policy_);
        MlpGradients gv = MlpGradients::zeros_like(value_);
        const double inv_b = 1.0 / static_cast<double>(stop - start);
        for (std::size_t k = start; k < stop; ++k) {
          const RolloutEntry& e = rollout_[order[k]];
          ForwardTrace trace;
          const auto logits = forward(policy_, e.t.state, &trace);
          const auto dist = masked_softmax(logits, valid_action_mask(e.t.state, num_sats_));
          double ratio = 1.0;
          auto dlogits = ppo_policy_sample_dlogits(dist, e.t.action_index, e.logp,
                                                   advantages[order[k]], cfg_.ppo_clip,
                                                   cfg_.entropy_coef, &ratio);
          if (first_minibatch)
            first_minibatch_ratio_dev_ =
                std::max(first_minibatch_ratio_dev_, std::abs(ratio - 1.0));
          for (double& v : dlogits) v *= inv_b;
          backward_into(policy_, trace, dlogits, gp);

          ForwardTrace vtrace;
          const double v = forward(value_, e.t.state, &vtrace)[0];
          backward_into(value_, vtrace,
                        {cfg_.value_coef * 2.0 * (v - targets[order[k]]) * inv_b}, gv);
        }
        first_minibatch = false;
        clip_gradient_norm(gp, cfg_.grad_clip_norm);
        clip_gradient_norm(gv, cfg_.grad_clip_norm);
        adam_step(policy_, gp, popt_, cfg_.learning_rate);
        adam_step(value_, gv, vopt_, cfg_.learning_rate);
      }
    }
  }

  int num_sats_;
  AgentConfig cfg_;
  Rng rng_;
  MlpParameters policy_, value_;
  AdamState popt_, vopt_;
  std::vector<RolloutEntry> rollout_;
  bool pending_valid_ = false;
  int pending_action_ = -1;
  double pending_logp_ = 0.0;
  double pending_value_ = 0.0;
  double first_minibatch_ratio_dev_ = 0.0;
};

inline std::unique_ptr<Agent> make_agent(AgentKind kind, int num_sats, const AgentConfig& cfg,
                                         std::uint64_t seed) {
  switch (kind) {
    case AgentKind::LoadBalancing: return std::make_unique<LoadBalancingAgent>(num_sats);
    case AgentKind::QLearning: return std::make_unique<QLearningAgent>(num_sats, cfg, seed);
    case AgentKind::PolicyGradient: return std::make_unique<ReinforceAgent>(num_sats, cfg, seed);
    case AgentKind::Dqn: return std::make_unique<DqnAgent>(num_sats, cfg, seed);
    case AgentKind::Ppo: return std::make_unique<PpoAgent>(num_sats, cfg, seed);
  }
  throw std::logic_error("make_agent: unknown kind");
}

}  // namespace constellation
