#include "remest/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "remest/cycle.hpp"
#include "remest/parallel.hpp"
#include "remest/rng.hpp"

namespace remest {
namespace {

// Draws F z with z standard normal, so the sample has covariance F Fᵀ.
class GaussianSource {
 public:
  GaussianSource(const Matrix& covariance, Rng rng)
      : factor_(psd_factor(covariance)), rng_(rng), z_(factor_.cols()) {}

  Vector draw() {
    for (double& x : z_) x = rng_.normal();
    if (z_.empty()) return Vector(factor_.rows(), 0.0);
    return multiply(factor_, z_);
  }

 private:
  Matrix factor_;
  Rng rng_;
  Vector z_;
};

Vector add(const Vector& a, const Vector& b) {
  Vector out(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double squared_norm(const Vector& v) { return dot(v, v); }

void bump(std::vector<std::uint64_t>& histogram, std::size_t index) {
  if (histogram.size() <= index) histogram.resize(index + 1, 0);
  ++histogram[index];
}

// Channel sequence, cycle segmentation and averages shared by both sensors.
class RunRecorder {
 public:
  RunRecorder(const MarkovChannel& channel, const SimulationConfig& config, std::uint64_t seed,
              SensorMode mode)
      : channel_(channel), record_(config.record_trajectory), rng_(seed, Stream::kChannel) {
    out_.seed = seed;
    out_.mode = mode;
    out_.horizon = config.horizon;
    out_.post_success_counts.assign(channel.states(), 0);
    out_.cycle_length_histogram.assign(1, 0);
  }

  std::size_t state() const { return state_; }
  void set_state(std::size_t s) { state_ = s; }

  // Records step t with remote error trace `trace` and squared error `sq`,
  // then draws gamma_t and the next channel state. Returns gamma_t.
  bool step(std::size_t t, std::size_t delta, double trace, double sq) {
    out_.steps = t;
    sum_trace_ += trace;
    sum_sq_ += sq;
    bump(out_.delta_histogram, delta);
    if (in_cycle_) {
      ++cycle_length_;
      cycle_cost_ += trace;
    } else {
      out_.prefix_cost += trace;
    }
    const std::size_t s = state_;
    const ChannelStep next = sample_step(channel_, state_, rng_);
    state_ = next.next_state;
    const bool gamma = !next.dropped;
    if (record_) out_.trajectory.push_back({t, s, gamma, delta, trace});
    if (gamma) {
      if (in_cycle_) {
        bump(out_.cycle_length_histogram, cycle_length_);
        ++out_.cycles;
        out_.cycle_cost_accumulated += cycle_cost_;
        if (cycle_cost_of_) out_.cycle_cost_formula += cycle_cost_of_(cycle_length_);
      } else {
        out_.prefix_length = t;
      }
      in_cycle_ = t < out_.horizon;
      cycle_length_ = 0;
      cycle_cost_ = 0.0;
      if (in_cycle_) ++out_.post_success_counts[state_];
    }
    return gamma;
  }

  void set_cycle_cost(std::function<double(std::size_t)> fn) { cycle_cost_of_ = std::move(fn); }

  RunResult finish(bool saturated) {
    out_.saturated = saturated;
    if (out_.cycles == 0 && !in_cycle_ && out_.prefix_length == 0) out_.prefix_length = out_.steps;
    if (in_cycle_) {
      out_.trailing_length = cycle_length_;
      out_.trailing_cost = cycle_cost_;
    }
    const double n = static_cast<double>(std::max<std::size_t>(out_.steps, 1));
    out_.empirical_J = saturated ? std::numeric_limits<double>::infinity() : sum_trace_ / n;
    out_.empirical_J_sq_err = saturated ? std::numeric_limits<double>::infinity() : sum_sq_ / n;
    return std::move(out_);
  }

 private:
  const MarkovChannel& channel_;
  bool record_;
  Rng rng_;
  RunResult out_;
  std::size_t state_ = 0;
  bool in_cycle_ = false;
  std::size_t cycle_length_ = 0;
  double cycle_cost_ = 0.0;
  double sum_trace_ = 0.0;
  double sum_sq_ = 0.0;
  std::function<double(std::size_t)> cycle_cost_of_;
};

std::size_t initial_channel_state(const SimulationConfig& config, const Vector& stationary, Rng& rng) {
  if (config.initial_state) return *config.initial_state;
  return sample_index(stationary, rng.uniform());
}

void check_inputs(const LtiSystem& sys, const SteadyStateFilter& filter, const MarkovChannel& channel,
                  const SimulationConfig& config) {
  if (config.horizon < 1) throw std::invalid_argument("simulation horizon must be at least 1");
  if (config.seeds.empty()) throw std::invalid_argument("simulation needs at least one seed");
  require_valid(channel, false);
  if (config.initial_state && *config.initial_state >= channel.states())
    throw std::invalid_argument("initial channel state out of range");
  const std::size_t n = sys.state_dim();
  if (filter.covariance.rows() != n || filter.covariance.cols() != n)
    throw std::invalid_argument("filter covariance does not match the state dimension");
}

RunResult run_smart(const LtiSystem& sys, const SteadyStateFilter& filter, const MarkovChannel& channel,
                    const SimulationConfig& config, const Vector& stationary, std::uint64_t seed) {
  const std::size_t n = sys.state_dim();
  GaussianSource process(sys.W, Rng(seed, Stream::kProcessNoise));
  GaussianSource measurement(sys.V, Rng(seed, Stream::kMeasurementNoise));
  Rng init(seed, Stream::kInitialState);
  ErrorTraceSequence traces(sys, filter.covariance);
  const Matrix closed = Matrix::identity(n) - filter.gain * sys.C;

  RunRecorder rec(channel, config, seed, SensorMode::kSmart);
  rec.set_state(initial_channel_state(config, stationary, init));
  rec.set_cycle_cost([&traces](std::size_t len) { return traces.cumulative(len); });
  GaussianSource initial(filter.covariance, init);

  // Errors are x - x̂, so the unstable plant itself is never simulated.
  Vector sensor_error = initial.draw();
  Vector remote_error(n, 0.0);
  bool delivered = true;  // the remote side starts with the sensor estimate
  std::size_t delta = 0;
  for (std::size_t t = 1; t <= config.horizon; ++t) {
    const Vector w = process.draw();
    const Vector v = measurement.draw();
    const Vector prior = add(multiply(sys.A, sensor_error), w);
    if (delivered) {
      remote_error = prior;
      delta = 0;
    } else {
      remote_error = add(multiply(sys.A, remote_error), w);
      ++delta;
    }
    const double trace = traces.trace(delta + 1);
    if (trace > ErrorTraceSequence::kSaturationThreshold) return rec.finish(true);
    Vector kv = multiply(filter.gain, v);
    sensor_error = multiply(closed, prior);
    for (std::size_t i = 0; i < n; ++i) sensor_error[i] -= kv[i];
    delivered = rec.step(t, delta, trace, squared_norm(remote_error));
  }
  return rec.finish(false);
}

RunResult run_conventional(const LtiSystem& sys, const SteadyStateFilter& filter,
                           const MarkovChannel& channel, const SimulationConfig& config,
                           const Vector& stationary, std::uint64_t seed) {
  const std::size_t n = sys.state_dim();
  GaussianSource process(sys.W, Rng(seed, Stream::kProcessNoise));
  GaussianSource measurement(sys.V, Rng(seed, Stream::kMeasurementNoise));
  Rng init(seed, Stream::kInitialState);

  RunRecorder rec(channel, config, seed, SensorMode::kConventional);
  rec.set_state(initial_channel_state(config, stationary, init));
  GaussianSource initial(filter.covariance, init);

  // Remote filter error r - x and covariance after the (gated) update; the
  // reported estimate at t is the one-step prediction A r_{t-1}.
  Vector filter_error = initial.draw();
  for (double& x : filter_error) x = -x;
  Matrix covariance = filter.covariance;
  std::size_t delta = 0;
  bool delivered = true;
  for (std::size_t t = 1; t <= config.horizon; ++t) {
    const Vector w = process.draw();
    const Vector v = measurement.draw();
    delta = delivered ? 0 : delta + 1;
    Vector remote_error = multiply(sys.A, filter_error);
    for (std::size_t i = 0; i < n; ++i) remote_error[i] -= w[i];
    const double trace = holding_map(sys, covariance).trace();
    if (!(trace <= ErrorTraceSequence::kSaturationThreshold)) return rec.finish(true);
    delivered = rec.step(t, delta, trace, squared_norm(remote_error));
    // The measurement y_t - C x_t seen in error coordinates, shifted so the
    // prediction step can use A (r - x_{t-1}).
    Vector y = add(v, multiply(sys.C, w));
    GatedEstimate next = gated_kalman_step(sys, filter_error, covariance, y, delivered);
    for (std::size_t i = 0; i < n; ++i) next.state[i] -= w[i];
    filter_error = std::move(next.state);
    covariance = std::move(next.covariance);
  }
  return rec.finish(false);
}

template <class RunFn>
std::vector<RunResult> run_all(const MarkovChannel& channel, const SimulationConfig& config, RunFn run) {
  const Vector stationary = config.initial_state ? Vector{} : stationary_distribution(channel);
  std::vector<RunResult> results(config.seeds.size());
  parallel_for(config.seeds.size(), worker_count(), [&](std::size_t k, unsigned) {
    results[k] = run(stationary, config.seeds[k]);
  });
  return results;
}

double student_quantile(std::size_t dof) {
  return boost::math::quantile(boost::math::students_t(static_cast<double>(dof)), 0.975);
}

}  // namespace

const char* to_string(SensorMode mode) { return mode == SensorMode::kSmart ? "smart" : "conventional"; }

SensorMode parse_sensor_mode(const std::string& name) {
  if (name == "smart") return SensorMode::kSmart;
  if (name == "conventional") return SensorMode::kConventional;
  throw std::invalid_argument("unknown sensor mode '" + name + "' (expected smart or conventional)");
}

std::vector<RunResult> simulate_smart(const LtiSystem& sys, const SteadyStateFilter& filter,
                                      const MarkovChannel& channel, const SimulationConfig& config) {
  check_inputs(sys, filter, channel, config);
  return run_all(channel, config, [&](const Vector& stationary, std::uint64_t seed) {
    return run_smart(sys, filter, channel, config, stationary, seed);
  });
}

std::vector<RunResult> simulate_conventional(const LtiSystem& sys, const SteadyStateFilter& filter,
                                             const MarkovChannel& channel,
                                             const SimulationConfig& config) {
  check_inputs(sys, filter, channel, config);
  return run_all(channel, config, [&](const Vector& stationary, std::uint64_t seed) {
    return run_conventional(sys, filter, channel, config, stationary, seed);
  });
}

std::vector<RunResult> simulate(const LtiSystem& sys, const SteadyStateFilter& filter,
                                const MarkovChannel& channel, const SimulationConfig& config) {
  return config.mode == SensorMode::kSmart ? simulate_smart(sys, filter, channel, config)
                                           : simulate_conventional(sys, filter, channel, config);
}

EnsembleSummary ensemble(const std::vector<RunResult>& results, const MarkovChannel& channel) {
  if (results.size() < 2) throw std::invalid_argument("ensemble needs at least two runs");
  EnsembleSummary s;
  s.runs = results.size();
  std::vector<double> values;
  double sq = 0.0;
  for (const RunResult& r : results) {
    if (r.saturated) {
      ++s.saturated_runs;
      continue;
    }
    values.push_back(r.empirical_J);
    sq += r.empirical_J_sq_err;
  }
  if (values.empty()) throw std::domain_error("every simulated run saturated");
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean_J += v;
  s.mean_J /= n;
  s.mean_J_sq_err = sq / n;
  if (values.size() >= 2) {
    double var = 0.0;
    for (double v : values) var += (v - s.mean_J) * (v - s.mean_J);
    var /= n - 1.0;
    s.standard_error = std::sqrt(var / n);
    const double half = student_quantile(values.size() - 1) * s.standard_error;
    s.ci_low = s.mean_J - half;
    s.ci_high = s.mean_J + half;
  } else {
    s.ci_low = s.ci_high = s.mean_J;
  }

  const bool has_cycles =
      std::any_of(channel.dropout.begin(), channel.dropout.end(), [](double d) { return d < 1.0; });
  if (!has_cycles) return s;
  const CycleModel model = cycle_model(channel);
  const std::size_t m = channel.states();
  std::vector<double> post(m, 0.0);
  std::vector<double> lengths(EnsembleSummary::kPmfTruncation + 2, 0.0);
  for (const RunResult& r : results) {
    s.total_cycles += r.cycles;
    for (std::size_t j = 0; j < m && j < r.post_success_counts.size(); ++j)
      post[j] += static_cast<double>(r.post_success_counts[j]);
    for (std::size_t len = 1; len < r.cycle_length_histogram.size(); ++len)
      lengths[std::min(len, EnsembleSummary::kPmfTruncation + 1)] +=
          static_cast<double>(r.cycle_length_histogram[len]);
  }
  const double total_post = std::accumulate(post.begin(), post.end(), 0.0);
  const double total_len = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  if (total_post > 0.0) {
    for (std::size_t j = 0; j < m; ++j) s.tv_post_success += std::abs(post[j] / total_post - model.beta_padded[j]);
    s.tv_post_success *= 0.5;
  }
  const Vector pmf = cycle_length_distribution(channel, model.beta_padded, EnsembleSummary::kPmfTruncation);
  s.pmf_tail = std::max(0.0, 1.0 - std::accumulate(pmf.begin(), pmf.end(), 0.0));
  if (total_len > 0.0) {
    for (std::size_t len = 1; len <= EnsembleSummary::kPmfTruncation; ++len)
      s.tv_cycle_length += std::abs(lengths[len] / total_len - pmf[len - 1]);
    s.tv_cycle_length += std::abs(lengths.back() / total_len - s.pmf_tail);
    s.tv_cycle_length *= 0.5;
  }
  return s;
}

std::string trajectory_csv(const RunResult& run) {
  std::ostringstream os;
  os << "t,channel_state,gamma,delta,trace_Pt\n";
  char buf[32];
  for (const TrajectoryPoint& p : run.trajectory) {
    std::snprintf(buf, sizeof buf, "%.6g", p.trace);
    os << p.t << ',' << p.channel_state + 1 << ',' << (p.gamma ? 1 : 0) << ',' << p.delta << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace remest
