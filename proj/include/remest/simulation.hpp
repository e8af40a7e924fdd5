#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "remest/channel.hpp"
#include "remest/lti.hpp"

namespace remest {

enum class SensorMode { kSmart, kConventional };

const char* to_string(SensorMode mode);
/// "smart" or "conventional"; throws std::invalid_argument otherwise.
SensorMode parse_sensor_mode(const std::string& name);

struct SimulationConfig {
  std::size_t horizon = 100000;
  std::vector<std::uint64_t> seeds{1};
  /// Zero-based initial channel state; drawn from the stationary
  /// distribution when empty.
  std::optional<std::size_t> initial_state;
  SensorMode mode = SensorMode::kSmart;
  bool record_trajectory = false;

  bool operator==(const SimulationConfig&) const = default;
};

struct TrajectoryPoint {
  std::size_t t = 0;
  std::size_t channel_state = 0;
  bool gamma = false;
  std::size_t delta = 0;
  double trace = 0.0;
};

/// One seeded run. Steps are t = 1..horizon; the remote estimate at t uses
/// what arrived up to t - 1, and the remote side starts with the sensor's
/// estimate (delta_1 = 0, everything at the steady-state covariance).
struct RunResult {
  std::uint64_t seed = 0;
  SensorMode mode = SensorMode::kSmart;
  std::size_t horizon = 0;
  /// Steps actually simulated; less than horizon only when saturated.
  std::size_t steps = 0;
  /// Tr(P_t) passed 1e250 and the run stopped.
  bool saturated = false;
  /// Time average of Tr(P_t); +inf when saturated.
  double empirical_J = 0.0;
  /// Time average of the realised squared error |x̂_t - x_t|².
  double empirical_J_sq_err = 0.0;
  /// delta_histogram[k] = number of steps with delta_t = k; sums to steps.
  std::vector<std::uint64_t> delta_histogram;
  /// Channel state at the start of each counted cycle.
  std::vector<std::uint64_t> post_success_counts;
  /// cycle_length_histogram[T] = completed cycles of length T (index 0 unused).
  std::vector<std::uint64_t> cycle_length_histogram;
  std::uint64_t cycles = 0;
  /// Steps up to and including the first successful delivery (all steps if
  /// none arrived).
  std::size_t prefix_length = 0;
  double prefix_cost = 0.0;
  /// The cycle still open at the end of the run.
  std::size_t trailing_length = 0;
  double trailing_cost = 0.0;
  /// Sum of Tr(P_t) over completed cycles.
  double cycle_cost_accumulated = 0.0;
  /// Sum of g(T_k) over completed cycles (smart mode only, 0 otherwise).
  double cycle_cost_formula = 0.0;
  std::vector<TrajectoryPoint> trajectory;
};

/// Smart sensor: local steady-state Kalman filter, estimates sent over the
/// channel, remote side predicts through losses. One result per seed, in
/// seed order.
std::vector<RunResult> simulate_smart(const LtiSystem& sys, const SteadyStateFilter& filter,
                                      const MarkovChannel& channel, const SimulationConfig& config);

/// Conventional sensor: raw measurements sent, remote side runs a Kalman
/// filter with intermittent observations. Seeds yield the same channel and
/// noise realisations as simulate_smart. `filter` supplies the initial
/// covariance.
std::vector<RunResult> simulate_conventional(const LtiSystem& sys, const SteadyStateFilter& filter,
                                             const MarkovChannel& channel,
                                             const SimulationConfig& config);

std::vector<RunResult> simulate(const LtiSystem& sys, const SteadyStateFilter& filter,
                                const MarkovChannel& channel, const SimulationConfig& config);

struct EnsembleSummary {
  std::size_t runs = 0;
  std::size_t saturated_runs = 0;
  /// Statistics over the non-saturated runs.
  double mean_J = 0.0;
  double standard_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double mean_J_sq_err = 0.0;
  std::uint64_t total_cycles = 0;
  /// Total variation between pooled post-success frequencies and beta.
  double tv_post_success = 0.0;
  /// Total variation between the pooled cycle-length histogram and the
  /// model pmf over lengths 1..kPmfTruncation plus one tail bucket.
  double tv_cycle_length = 0.0;
  /// Model probability of a cycle longer than kPmfTruncation.
  double pmf_tail = 0.0;

  static constexpr std::size_t kPmfTruncation = 50;
};

/// Needs at least two runs; throws std::domain_error when every run
/// saturated. The cycle statistics are left at zero when no cycle model
/// exists (every d_i = 1).
EnsembleSummary ensemble(const std::vector<RunResult>& results, const MarkovChannel& channel);

/// `t,channel_state,gamma,delta,trace_Pt`, states one-based.
std::string trajectory_csv(const RunResult& run);

}  // namespace remest
