#pragma once

#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "constellation/errors.hpp"

namespace constellation {

// Percentage of initially queued tasks that were completed by episode end.
// `remaining` counts unfinished work: still-queued plus dropped tasks.
inline double task_completion_rate(double initial_tasks, double remaining_tasks) {
  if (initial_tasks <= 0.0)
    throw UndefinedMetricError("task_completion_rate: initial_tasks must be > 0");
  if (remaining_tasks < 0.0 || remaining_tasks > initial_tasks)
    throw std::invalid_argument("task_completion_rate: remaining_tasks outside [0, initial]");
  return (initial_tasks - remaining_tasks) / initial_tasks * 100.0;
}

// Mean of the per-failure response times, seconds.
inline double average_response_time(const std::vector<double>& response_times_s) {
  if (response_times_s.empty())
    throw UndefinedMetricError("average_response_time: no failure events recorded");
  const double sum = std::accumulate(response_times_s.begin(), response_times_s.end(), 0.0);
  return sum / static_cast<double>(response_times_s.size());
}

// ART as an optional: absent when no failures occurred.
inline std::optional<double> maybe_average_response_time(
    const std::vector<double>& response_times_s) {
  if (response_times_s.empty()) return std::nullopt;
  return average_response_time(response_times_s);
}

// True iff every load is within its capacity.
inline bool capacity_feasible(const std::vector<double>& loads,
                              const std::vector<double>& capacities) {
  if (loads.size() != capacities.size())
    throw std::invalid_argument("capacity_feasible: loads/capacities length mismatch");
  for (std::size_t i = 0; i < loads.size(); ++i)
    if (loads[i] > capacities[i]) return false;
  return true;
}

// True iff every response time is within the deadline.
inline bool response_time_feasible(const std::vector<double>& response_times_s, double t_max_s) {
  for (double t : response_times_s)
    if (t > t_max_s) return false;
  return true;
}

// Everything measured over one episode.
struct EpisodeMetrics {
  int episode_index = 0;
  double reward_sum = 0.0;
  double initial_tasks = 0.0;
  double remaining_tasks = 0.0;          // still queued + dropped at episode end
  double tcr_percent = 0.0;
  std::vector<double> response_times_s;      // wall-clock handling latency per failure
  std::vector<double> response_times_sim_s;  // modeled handling latency per failure
  std::optional<double> art_s;               // mean of response_times_sim_s, absent if no failures
  int failures = 0;
  int capacity_violations = 0;   // steps where some operational load exceeded capacity
  int tmax_violations = 0;       // modeled response times above the deadline
};

}  // namespace constellation
