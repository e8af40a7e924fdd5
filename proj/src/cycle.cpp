#include "remest/cycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace remest {
namespace {

bool all_lost(const MarkovChannel& channel) {
  return std::all_of(channel.dropout.begin(), channel.dropout.end(), [](double d) { return d == 1.0; });
}

Vector success_probabilities(const MarkovChannel& channel) {
  Vector keep(channel.dropout.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = 1.0 - channel.dropout[i];
  return keep;
}

// Every state loses every packet, so the remote side only ever predicts and
// the error trace settles at lim c(i) (finite when rho(A) < 1).
MseResult open_loop_limit(const StabilityReport& report, ErrorTraceSequence& traces, double tol) {
  MseResult out;
  out.bounded = true;
  const double ratio = report.rho_a * report.rho_a + kTailGuard;
  double previous = traces.trace(1);
  for (std::size_t i = 2; i <= kMaxSeriesTerms; ++i) {
    const double c = traces.trace(i);
    const double tail = ratio < 1.0 ? std::abs(c - previous) * ratio / (1.0 - ratio)
                                    : std::numeric_limits<double>::infinity();
    out.value = c;
    out.terms = i;
    out.tail_bound = c > 0.0 ? tail / c : 0.0;
    if (tail <= tol * c) return out;
    previous = c;
  }
  out.uncertain = true;
  return out;
}

}  // namespace

CycleModel cycle_model(const MarkovChannel& channel) {
  const ChannelValidation v = validate(channel);
  if (!v.well_formed() || !v.irreducible) {
    throw std::invalid_argument("cycle_model: " + (v.issues.empty() ? std::string("invalid channel") : v.issues.front()));
  }
  if (all_lost(channel)) throw std::domain_error("cycle_model: every state drops all packets, no cycle ends");

  const std::size_t m = channel.states();
  CycleModel out;
  out.post_success = post_success_set(channel);
  out.transition = solve_linear(Matrix::identity(m) - channel.drop_transition(), channel.success_transition());
  out.restricted = out.transition.submatrix(out.post_success.indices, out.post_success.indices);
  const std::size_t mp = out.post_success.size();
  out.beta = null_vector((Matrix::identity(mp) - out.restricted).transpose());
  for (double& b : out.beta) b = std::max(b, 0.0);
  const double s = norm1(out.beta);
  for (double& b : out.beta) b /= s;
  out.beta_padded.assign(m, 0.0);
  for (std::size_t k = 0; k < mp; ++k) out.beta_padded[out.post_success.indices[k]] = out.beta[k];
  return out;
}

double cycle_length_pmf(const MarkovChannel& channel, std::size_t start_state, std::size_t i) {
  if (i == 0) throw std::invalid_argument("cycle length must be at least 1");
  if (start_state >= channel.states()) throw std::invalid_argument("start state out of range");
  if (!post_success_set(channel).contains(start_state))
    throw std::invalid_argument("start state " + std::to_string(start_state) + " is not a post-success state");
  Vector start(channel.states(), 0.0);
  start[start_state] = 1.0;
  return cycle_length_distribution(channel, start, i).back();
}

Vector cycle_length_distribution(const MarkovChannel& channel, std::span<const double> start,
                                 std::size_t max_length) {
  if (start.size() != channel.states()) throw std::invalid_argument("start distribution length mismatch");
  const Matrix dm = channel.drop_transition();
  const Vector keep = success_probabilities(channel);
  Vector u(start.begin(), start.end());
  Vector out(max_length);
  for (std::size_t i = 0; i < max_length; ++i) {
    out[i] = dot(u, keep);
    u = left_multiply(u, dm);
  }
  return out;
}

StabilityReport stability_margin(double rho_a, double sigma_a, const MarkovChannel& channel, double tol) {
  require_valid(channel, false);
  StabilityReport r;
  r.rho_a = rho_a;
  r.sigma_a = sigma_a;
  r.rho_dm = perron_root(channel.drop_transition(), tol).value;
  r.margin = rho_a * rho_a * r.rho_dm;
  r.stable = r.margin < 1.0;
  for (double row : multiply(channel.transition, channel.dropout)) r.max_expected_drop = std::max(r.max_expected_drop, row);
  r.margin_sufficient = sigma_a * sigma_a * r.max_expected_drop;
  r.stable_sufficient = r.margin_sufficient < 1.0;
  return r;
}

StabilityReport stability_margin(const Matrix& a, const MarkovChannel& channel, double tol) {
  return stability_margin(spectral_radius(a, tol).value, largest_singular_value(a, tol).value, channel, tol);
}

MseResult analytic_mse(const StabilityReport& report, ErrorTraceSequence& traces,
                       const MarkovChannel& channel, double tol) {
  if (!report.stable) return MseResult{};
  if (all_lost(channel)) return open_loop_limit(report, traces, tol);

  const CycleModel model = cycle_model(channel);
  const Matrix dm = channel.drop_transition();
  const Vector keep = success_probabilities(channel);
  const std::size_t window = std::max<std::size_t>(1, channel.states());
  const std::size_t min_terms = std::max<std::size_t>(8, 2 * window);

  // Asymptotic per-step ratio of the cost terms g(i) P(T = i); g grows at
  // least linearly, hence the max with 1.
  const double ratio = std::max(report.rho_a * report.rho_a, 1.0) * report.rho_dm + kTailGuard;
  const double window_ratio = ratio < 1.0 ? std::pow(ratio, static_cast<double>(window)) : 0.0;

  MseResult out;
  out.bounded = true;
  out.uncertain = ratio >= 1.0;
  Vector u = model.beta_padded;
  double sum_t = 0.0, sum_c = 0.0;
  double win_t = 0.0, win_c = 0.0;
  double prev_t = -1.0, prev_c = -1.0;
  bool certified = false;
  std::size_t i = 1;
  for (; i <= kMaxSeriesTerms; ++i) {
    const double p = dot(u, keep);
    if (p > 0.0) {
      const double term_t = static_cast<double>(i) * p;
      const double term_c = std::exp(traces.log_cumulative(i) + std::log(p));
      sum_t += term_t;
      sum_c += term_c;
      win_t += term_t;
      win_c += term_c;
    }
    u = left_multiply(u, dm);
    if (std::all_of(u.begin(), u.end(), [](double x) { return x == 0.0; })) {
      certified = true;  // series terminated exactly
      out.tail_bound = 0.0;
      break;
    }
    if (i % window != 0) continue;
    if (i >= min_terms && prev_c >= 0.0) {
      const double r_t = std::max(prev_t > 0.0 ? win_t / prev_t : 0.0, window_ratio);
      const double r_c = std::max(prev_c > 0.0 ? win_c / prev_c : 0.0, window_ratio);
      if (r_t < 1.0 && r_c < 1.0) {
        const double tail_t = win_t * r_t / (1.0 - r_t);
        const double tail_c = win_c * r_c / (1.0 - r_c);
        out.tail_bound = tail_t / sum_t + tail_c / sum_c;
        if (tail_t <= tol * sum_t && tail_c <= tol * sum_c) {
          certified = true;
          break;
        }
      }
    }
    prev_t = win_t;
    prev_c = win_c;
    win_t = win_c = 0.0;
  }
  out.terms = std::min(i, kMaxSeriesTerms);
  if (!certified || !std::isfinite(sum_c)) out.uncertain = true;
  out.expected_length = sum_t;
  out.expected_cost = sum_c;
  out.value = sum_c / sum_t;
  return out;
}

MseResult analytic_mse(const LtiSystem& sys, const SteadyStateFilter& filter,
                       const MarkovChannel& channel, double tol) {
  const StabilityReport report = stability_margin(sys.A, channel, tol);
  ErrorTraceSequence traces(sys, filter.covariance);
  return analytic_mse(report, traces, channel, tol);
}

}  // namespace remest
