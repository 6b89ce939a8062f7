#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "constellation/errors.hpp"
#include "constellation/metrics.hpp"
#include "constellation/orbital.hpp"
#include "constellation/rng.hpp"
#include "constellation/satellite.hpp"

namespace constellation {

// Modeled response-time cost factors (seconds). Fixed so replays are exact.
inline constexpr double kRetaskSecondsPerTaskUnit = 0.01;
inline constexpr double kReconfigSecondsPerSatellite = 0.02;

struct EnvConfig {
  int num_sats = 24;
  int planes = 6;
  double inclination_rad = 0.959931088596881;  // 55 degrees
  double radius_km = 26560.0;
  int rounds_per_episode = 100;
  double base_failure_prob = 0.01;
  long failure_escalation_start = 100;   // episodes before escalation kicks in
  double failure_escalation_rate = 0.0005;
  double failure_prob_cap = 0.2;
  double initial_load_min = 20.0;
  double initial_load_max = 60.0;
  double capacity = 100.0;
  double initial_energy = 100.0;
  double chunk_size = 10.0;
  double t_max_s = 1.0;                  // response-time deadline
  double service_rate = 2.0;             // task units each operational sat completes per round
  double energy_cost_per_unit = 0.05;    // per task unit moved, charged to both endpoints
  double reconfig_energy_cost = 1.0;     // charged to each re-spaced satellite
  double invalid_penalty = -1.0;
  double round_duration_s = 1.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (num_sats < 2) throw ConfigError("num_sats must be >= 2");
    if (planes < 1) throw ConfigError("planes must be >= 1");
    if (num_sats % planes != 0) throw ConfigError("num_sats must be divisible by planes");
    if (radius_km <= kEarthRadiusKm) throw ConfigError("radius_km must exceed Earth radius");
    if (rounds_per_episode < 1) throw ConfigError("rounds_per_episode must be >= 1");
    if (base_failure_prob < 0.0 || base_failure_prob > 1.0)
      throw ConfigError("base_failure_prob must be in [0, 1]");
    if (failure_escalation_start < 0) throw ConfigError("failure_escalation_start must be >= 0");
    if (failure_escalation_rate < 0.0) throw ConfigError("failure_escalation_rate must be >= 0");
    if (failure_prob_cap < base_failure_prob || failure_prob_cap > 1.0)
      throw ConfigError("failure_prob_cap must be in [base_failure_prob, 1]");
    if (initial_load_min < 0.0 || initial_load_max < initial_load_min)
      throw ConfigError("initial load range must satisfy 0 <= min <= max");
    if (capacity <= 0.0) throw ConfigError("capacity must be > 0");
    if (initial_load_max > capacity) throw ConfigError("initial load range must fit capacity");
    if (initial_energy <= 0.0) throw ConfigError("initial_energy must be > 0");
    if (chunk_size <= 0.0) throw ConfigError("chunk_size must be > 0");
    if (t_max_s <= 0.0) throw ConfigError("t_max_s must be > 0");
    if (service_rate < 0.0) throw ConfigError("service_rate must be >= 0");
    if (energy_cost_per_unit < 0.0) throw ConfigError("energy_cost_per_unit must be >= 0");
    if (reconfig_energy_cost < 0.0) throw ConfigError("reconfig_energy_cost must be >= 0");
    if (round_duration_s <= 0.0) throw ConfigError("round_duration_s must be > 0");
  }
};

// Directed task transfer between two distinct satellites.
struct Action {
  int from_sat = 0;
  int to_sat = 0;

  // Dense index in [0, n*(n-1)): each source owns n-1 consecutive codes.
  int encode(int num_sats) const {
    if (from_sat < 0 || from_sat >= num_sats || to_sat < 0 || to_sat >= num_sats ||
        from_sat == to_sat)
      throw std::out_of_range("Action::encode: invalid satellite pair");
    return from_sat * (num_sats - 1) + (to_sat < from_sat ? to_sat : to_sat - 1);
  }

  static Action decode(int index, int num_sats) {
    if (num_sats < 2 || index < 0 || index >= num_sats * (num_sats - 1))
      throw std::out_of_range("Action::decode: index outside action space");
    const int from = index / (num_sats - 1);
    const int offset = index % (num_sats - 1);
    return {from, offset < from ? offset : offset + 1};
  }
};

inline int action_space_size(int num_sats) { return num_sats * (num_sats - 1); }

// Flat observation: per satellite [load/capacity, energy/initial_energy,
// 1 if operational else 0], then round/rounds_per_episode. All in [0, 1].
using Observation = std::vector<double>;

inline int observation_size(int num_sats) { return 3 * num_sats + 1; }

// Valid actions are pairs of distinct operational satellites, read off the
// status entries of an observation.
inline std::vector<std::uint8_t> valid_action_mask(const Observation& obs, int num_sats) {
  if (static_cast<int>(obs.size()) != observation_size(num_sats))
    throw std::invalid_argument("valid_action_mask: observation length mismatch");
  std::vector<std::uint8_t> operational(num_sats);
  for (int i = 0; i < num_sats; ++i) operational[i] = obs[3 * i + 2] > 0.5 ? 1 : 0;
  std::vector<std::uint8_t> mask(action_space_size(num_sats), 0);
  for (int from = 0; from < num_sats; ++from) {
    if (!operational[from]) continue;
    for (int to = 0; to < num_sats; ++to) {
      if (to == from || !operational[to]) continue;
      mask[Action{from, to}.encode(num_sats)] = 1;
    }
  }
  return mask;
}

struct StepInfo {
  std::vector<int> failed_this_step;             // satellite ids, ascending
  std::vector<double> response_times_s;          // wall-clock per failure handled
  std::vector<double> response_times_sim_s;      // modeled per failure handled
  double transferred = 0.0;                      // task units actually moved
  double completed = 0.0;                        // task units absorbed this round
  double dropped = 0.0;                          // task units lost in redistribution
  bool invalid_action = false;
};

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Per-satellite failure probability for a given training episode. Flat at
// base_p until `start` episodes have elapsed, then climbs linearly at `rate`
// per episode, saturating at p_cap.
inline double failure_probability_schedule(double base_p, long episode, long start, double rate,
                                           double p_cap) {
  if (episode < start) return base_p;
  return std::min(base_p + rate * static_cast<double>(episode - start), p_cap);
}

// Fresh fleet on canonical geometry. Draw order per satellite id: task load,
// then reliability; link bandwidths afterwards (ordered pairs, row-major).
inline std::vector<SatelliteState> initialize_satellites(const EnvConfig& cfg, Rng& rng) {
  const auto slots =
      build_constellation_geometry(cfg.num_sats, cfg.planes, cfg.inclination_rad, cfg.radius_km);
  std::vector<SatelliteState> sats(cfg.num_sats);
  for (int i = 0; i < cfg.num_sats; ++i) {
    SatelliteState& s = sats[i];
    s.id = i;
    s.slot = slots[i];
    auto [pos, vel] = slot_to_cartesian(s.slot, 0.0);
    s.position = pos;
    s.velocity = vel;
    s.status = SatStatus::Operational;
    s.energy = cfg.initial_energy;
    s.task_load = rng.uniform(cfg.initial_load_min, cfg.initial_load_max);
    s.capacity = cfg.capacity;
    s.reliability = rng.uniform(0.9, 1.0);
    s.frequency = static_cast<FrequencyBand>(i % 3);
    s.modulation = static_cast<Modulation>(i % 2);
  }
  for (int i = 0; i < cfg.num_sats; ++i) {
    sats[i].bandwidth_mbps.resize(cfg.num_sats);
    for (int j = 0; j < cfg.num_sats; ++j)
      sats[i].bandwidth_mbps[j] = (i == j) ? 0.0 : rng.uniform(50.0, 100.0);
  }
  return sats;
}

struct RedistributionOutcome {
  double received = 0.0;  // task units absorbed by surviving satellites
  double dropped = 0.0;   // task units lost for lack of headroom / survivors
};

// Spread a failed satellite's queue across operational survivors.
// Pass 1 gives each survivor an equal share capped by its headroom; pass 2
// splits the undelivered residue proportionally to remaining headroom.
// Anything beyond total headroom is dropped. Never overfills a capacity.
inline RedistributionOutcome redistribute_tasks(std::vector<SatelliteState>& sats, int failed_id) {
  if (failed_id < 0 || failed_id >= static_cast<int>(sats.size()))
    throw std::invalid_argument("redistribute_tasks: failed_id out of range");
  SatelliteState& failed = sats[failed_id];
  if (failed.status != SatStatus::Failed)
    throw std::invalid_argument("redistribute_tasks: satellite is not failed");

  const double total = failed.task_load;
  failed.task_load = 0.0;

  std::vector<int> survivors;
  for (const auto& s : sats)
    if (is_operational(s)) survivors.push_back(s.id);
  if (survivors.empty()) return {0.0, total};
  if (total <= 0.0) return {0.0, 0.0};

  double received = 0.0;
  const double share = total / static_cast<double>(survivors.size());
  for (int id : survivors) {
    SatelliteState& s = sats[id];
    const double grant = std::min(share, s.capacity - s.task_load);
    if (grant > 0.0) {
      s.task_load = std::min(s.capacity, s.task_load + grant);
      received += grant;
    }
  }

  double residue = total - received;
  if (residue > 0.0) {
    double headroom_sum = 0.0;
    for (int id : survivors) headroom_sum += std::max(0.0, sats[id].capacity - sats[id].task_load);
    if (headroom_sum > 0.0) {
      const double fill_frac = std::min(1.0, residue / headroom_sum);
      for (int id : survivors) {
        SatelliteState& s = sats[id];
        const double grant = std::max(0.0, s.capacity - s.task_load) * fill_frac;
        if (grant > 0.0) {
          s.task_load = std::min(s.capacity, s.task_load + grant);
          received += grant;
        }
      }
    }
  }
  return {received, std::max(0.0, total - received)};
}

// Re-space the failed satellite's plane: its operational plane-mates move to
// even phase spacing starting from the lowest surviving phase, at the plane's
// current rotation angle. Each moved satellite pays `energy_cost`. Other
// planes are untouched. Returns how many satellites moved.
inline int reconfigure_plane(std::vector<SatelliteState>& sats, int failed_id, double energy_cost,
                             double true_anomaly_offset_rad) {
  if (failed_id < 0 || failed_id >= static_cast<int>(sats.size()))
    throw std::invalid_argument("reconfigure_plane: failed_id out of range");
  const int plane = sats[failed_id].slot.plane_index;

  std::vector<int> members;
  for (const auto& s : sats)
    if (s.slot.plane_index == plane && is_operational(s)) members.push_back(s.id);
  if (members.empty()) return 0;

  std::sort(members.begin(), members.end(), [&](int a, int b) {
    if (sats[a].slot.phase_angle_rad != sats[b].slot.phase_angle_rad)
      return sats[a].slot.phase_angle_rad < sats[b].slot.phase_angle_rad;
    return a < b;
  });

  const double anchor = sats[members.front()].slot.phase_angle_rad;
  const double spacing = 2.0 * std::numbers::pi / static_cast<double>(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    SatelliteState& s = sats[members[k]];
    s.slot.phase_angle_rad = wrap_two_pi(anchor + spacing * static_cast<double>(k));
    auto [pos, vel] = slot_to_cartesian(s.slot, true_anomaly_offset_rad);
    s.position = pos;
    s.velocity = vel;
    s.energy = std::max(0.0, s.energy - energy_cost);
  }
  return static_cast<int>(members.size());
}

// Reward for one round: throughput minus latency and congestion penalties.
inline double compute_reward(double transferred, double chunk_size, double delay_s,
                             double max_delay_s, double to_load_after, double capacity) {
  double r = transferred / chunk_size;
  if (max_delay_s > 0.0) r -= 0.1 * (delay_s / max_delay_s);
  if (to_load_after > 0.9 * capacity) r -= 0.5;
  return r;
}

// Modeled failure handling latency: light-time to the farthest surviving
// satellite, plus retasking time for the redistributed queue, plus
// reconfiguration time for each moved satellite.
inline double simulated_response_time_s(double detection_delay_s, double redistributed_load,
                                        int respaced_count) {
  return detection_delay_s + redistributed_load * kRetaskSecondsPerTaskUnit +
         static_cast<double>(respaced_count) * kReconfigSecondsPerSatellite;
}

// Round-based constellation task-offloading environment.
//
// Each round the agent proposes one directed transfer. The environment then
// advances the orbit, executes the transfer, lets every operational satellite
// absorb work, samples stochastic failures, and heals each failure by
// redistributing its queue and re-spacing its plane. Episodes run a fixed
// number of rounds or until fewer than one satellite is operational.
class ConstellationEnv {
 public:
  explicit ConstellationEnv(const EnvConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    sats_ = initialize_satellites(cfg_, rng_);
    mean_motion_ = mean_motion_rad_per_s(cfg_.radius_km);
    effective_failure_prob_ = cfg_.base_failure_prob;
    initial_tasks_ = total_load();
    max_delay_s_ = compute_max_delay();
  }

  // Start a new episode: every satellite (failed ones included) is restored to
  // its original slot with fresh energy and a newly drawn task load. The
  // failure probability follows the per-episode escalation schedule.
  Observation reset() {
    // Drain queues stranded on failed satellites before the fleet is rebuilt,
    // so end-of-episode accounting in progress observes a consistent total.
    for (auto& s : sats_)
      if (!is_operational(s) && s.task_load > 0.0) redistribute_tasks(sats_, s.id);

    const auto slots =
        build_constellation_geometry(cfg_.num_sats, cfg_.planes, cfg_.inclination_rad, cfg_.radius_km);
    for (int i = 0; i < cfg_.num_sats; ++i) {
      SatelliteState& s = sats_[i];
      s.slot = slots[i];
      auto [pos, vel] = slot_to_cartesian(s.slot, 0.0);
      s.position = pos;
      s.velocity = vel;
      s.status = SatStatus::Operational;
      s.energy = cfg_.initial_energy;
      s.task_load = rng_.uniform(cfg_.initial_load_min, cfg_.initial_load_max);
    }

    episodes_started_ += 1;
    effective_failure_prob_ =
        failure_probability_schedule(cfg_.base_failure_prob, episodes_started_,
                                     cfg_.failure_escalation_start, cfg_.failure_escalation_rate,
                                     cfg_.failure_prob_cap);
    round_ = 0;
    sim_time_s_ = 0.0;
    initial_tasks_ = total_load();
    completed_tasks_ = 0.0;
    dropped_tasks_ = 0.0;
    pending_action_latency_s_ = 0.0;
    max_delay_s_ = compute_max_delay();
    return observation();
  }

  StepOutcome step(int action_index) {
    return step(Action::decode(action_index, cfg_.num_sats));
  }

  StepOutcome step(const Action& action) {
    if (action.from_sat < 0 || action.from_sat >= cfg_.num_sats || action.to_sat < 0 ||
        action.to_sat >= cfg_.num_sats || action.from_sat == action.to_sat)
      throw std::out_of_range("ConstellationEnv::step: malformed action");

    StepOutcome out;
    SatelliteState& from = sats_[action.from_sat];
    SatelliteState& to = sats_[action.to_sat];

    // A transfer naming a failed endpoint is rejected outright: fixed penalty,
    // no physics, no failure draws. The round still counts.
    if (!is_operational(from) || !is_operational(to)) {
      out.info.invalid_action = true;
      out.reward = cfg_.invalid_penalty;
      round_ += 1;
      out.done = round_ >= cfg_.rounds_per_episode || operational_count() == 0;
      out.observation = observation();
      return out;
    }

    // Orbit advance (force-free Euler step over one round).
    for (auto& s : sats_) {
      auto [pos, vel] = propagate(s.position, s.velocity, Vec3{}, cfg_.round_duration_s);
      s.position = pos;
      s.velocity = vel;
    }
    sim_time_s_ += cfg_.round_duration_s;

    // Transfer, capped by the source queue and destination headroom.
    const double delay_s = propagation_delay_s(euclidean_distance(from.position, to.position));
    const double transferred =
        std::min({cfg_.chunk_size, from.task_load, to.capacity - to.task_load});
    from.task_load -= transferred;
    to.task_load = std::min(to.capacity, to.task_load + transferred);
    const double to_load_after = to.task_load;
    const double energy_cost = cfg_.energy_cost_per_unit * transferred;
    from.energy = std::max(0.0, from.energy - energy_cost);
    to.energy = std::max(0.0, to.energy - energy_cost);
    out.info.transferred = transferred;

    // Service: each operational satellite completes up to service_rate units.
    for (auto& s : sats_) {
      if (!is_operational(s)) continue;
      const double done_units = std::min(s.task_load, cfg_.service_rate);
      s.task_load -= done_units;
      out.info.completed += done_units;
    }
    completed_tasks_ += out.info.completed;

    // Failure draws, one per operational satellite in id order. Reliability
    // shades the episode probability; exhausted batteries fail outright.
    std::vector<int> casualties;
    for (auto& s : sats_) {
      if (!is_operational(s)) continue;
      const double u = rng_.uniform();
      const double p = std::clamp(
          effective_failure_prob_ * (2.0 - s.reliability) * 0.5, 0.0, 1.0);
      if (s.energy <= 0.0 || u < p) casualties.push_back(s.id);
    }
    for (int id : casualties) sats_[id].status = SatStatus::Failed;

    for (int id : casualties) {
      const auto wall_start = std::chrono::steady_clock::now();
      const double queue = sats_[id].task_load;

      double detection_delay_s = max_delay_s_;
      bool any_survivor = false;
      for (const auto& s : sats_) {
        if (!is_operational(s)) continue;
        const double d = propagation_delay_s(euclidean_distance(sats_[id].position, s.position));
        if (!any_survivor || d > detection_delay_s) detection_delay_s = d;
        any_survivor = true;
      }
      if (!any_survivor) detection_delay_s = max_delay_s_;

      const auto redis = redistribute_tasks(sats_, id);
      dropped_tasks_ += redis.dropped;
      out.info.dropped += redis.dropped;
      const int respaced =
          reconfigure_plane(sats_, id, cfg_.reconfig_energy_cost, mean_motion_ * sim_time_s_);

      const double wall_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count() +
          pending_action_latency_s_;
      out.info.failed_this_step.push_back(id);
      out.info.response_times_s.push_back(wall_s);
      out.info.response_times_sim_s.push_back(
          simulated_response_time_s(detection_delay_s, queue, respaced));
    }
    pending_action_latency_s_ = 0.0;

    out.reward = compute_reward(transferred, cfg_.chunk_size, delay_s, max_delay_s_, to_load_after,
                                cfg_.capacity);
    round_ += 1;
    out.done = round_ >= cfg_.rounds_per_episode || operational_count() == 0;
    out.observation = observation();
    return out;
  }

  Observation observation() const {
    Observation obs;
    obs.reserve(observation_size(cfg_.num_sats));
    for (const auto& s : sats_) {
      obs.push_back(s.task_load / s.capacity);
      obs.push_back(s.energy / cfg_.initial_energy);
      obs.push_back(is_operational(s) ? 1.0 : 0.0);
    }
    obs.push_back(static_cast<double>(round_) / static_cast<double>(cfg_.rounds_per_episode));
    return obs;
  }

  // Agent decision latency to fold into the next failure's wall-clock
  // response time.
  void note_action_latency(double seconds) { pending_action_latency_s_ = seconds; }

  int operational_count() const {
    int n = 0;
    for (const auto& s : sats_)
      if (is_operational(s)) ++n;
    return n;
  }

  double total_load() const {
    double sum = 0.0;
    for (const auto& s : sats_) sum += s.task_load;
    return sum;
  }

  // Unfinished work: still queued anywhere plus everything dropped.
  double remaining_tasks() const { return total_load() + dropped_tasks_; }

  const EnvConfig& config() const { return cfg_; }
  const std::vector<SatelliteState>& satellites() const { return sats_; }
  std::vector<SatelliteState>& satellites_mut() { return sats_; }
  int round() const { return round_; }
  long episodes_started() const { return episodes_started_; }
  double effective_failure_prob() const { return effective_failure_prob_; }
  double max_delay_s() const { return max_delay_s_; }
  double initial_tasks() const { return initial_tasks_; }
  double completed_tasks() const { return completed_tasks_; }
  double dropped_tasks() const { return dropped_tasks_; }
  double sim_time_s() const { return sim_time_s_; }

 private:
  double compute_max_delay() const {
    double max_d = 0.0;
    for (std::size_t i = 0; i < sats_.size(); ++i)
      for (std::size_t j = i + 1; j < sats_.size(); ++j)
        max_d = std::max(max_d, euclidean_distance(sats_[i].position, sats_[j].position));
    return propagation_delay_s(max_d);
  }

  EnvConfig cfg_;
  Rng rng_;
  std::vector<SatelliteState> sats_;
  double mean_motion_ = 0.0;
  long episodes_started_ = 0;
  double effective_failure_prob_ = 0.0;
  int round_ = 0;
  double sim_time_s_ = 0.0;
  double initial_tasks_ = 0.0;
  double completed_tasks_ = 0.0;
  double dropped_tasks_ = 0.0;
  double max_delay_s_ = 0.0;
  double pending_action_latency_s_ = 0.0;
};

}  // namespace constellation
