#include "remest/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "remest/linalg.hpp"

namespace remest {
namespace {

using Pattern = std::vector<std::vector<bool>>;

Pattern pattern_product(const Pattern& a, const Pattern& b) {
  const std::size_t n = a.size();
  Pattern out(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (a[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (b[k][j]) out[i][j] = true;
  return out;
}

Pattern pattern_power(Pattern base, std::size_t k) {
  const std::size_t n = base.size();
  Pattern result(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) result[i][i] = true;
  while (k > 0) {
    if (k & 1u) result = pattern_product(result, base);
    k >>= 1u;
    if (k > 0) base = pattern_product(base, base);
  }
  return result;
}

bool all_set(const Pattern& p) {
  return std::all_of(p.begin(), p.end(),
                     [](const auto& row) { return std::all_of(row.begin(), row.end(), [](bool b) { return b; }); });
}

std::string entry(const char* name, std::size_t i, std::size_t j) {
  return std::string(name) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

}  // namespace

Matrix MarkovChannel::drop_transition() const { return drop_matrix() * transition; }

Matrix MarkovChannel::success_transition() const {
  Vector keep(dropout.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = 1.0 - dropout[i];
  return Matrix::diagonal(keep) * transition;
}

ChannelValidation validate(const MarkovChannel& channel) {
  const std::size_t m = channel.transition.rows();
  if (m == 0 || !channel.transition.is_square())
    throw std::invalid_argument("transition matrix must be nonempty and square");
  if (channel.dropout.size() != m)
    throw std::invalid_argument("dropout vector has " + std::to_string(channel.dropout.size()) +
                                " entries, expected " + std::to_string(m));
  if (channel.gains && channel.gains->size() != m)
    throw std::invalid_argument("gain vector length does not match the state count");

  ChannelValidation out;
  out.probabilities_in_range = true;
  out.row_stochastic = true;
  out.dropout_in_range = true;
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double p = channel.transition(i, j);
      sum += p;
      if (!(p >= 0.0 && p <= 1.0)) {
        out.probabilities_in_range = false;
        out.issues.push_back(entry("transition", i, j) + " = " + std::to_string(p) + " is outside [0, 1]");
      }
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      out.row_stochastic = false;
      out.issues.push_back("transition row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
    const double d = channel.dropout[i];
    if (!(d >= 0.0 && d <= 1.0)) {
      out.dropout_in_range = false;
      out.issues.push_back("dropout[" + std::to_string(i) + "] = " + std::to_string(d) + " is outside [0, 1]");
    }
  }

  Pattern positive(m, std::vector<bool>(m, false));
  Pattern lazy(m, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      positive[i][j] = channel.transition(i, j) > 0.0;
      lazy[i][j] = positive[i][j] || i == j;
    }
  out.irreducible = all_set(pattern_power(lazy, m - 1));
  // Wielandt: a primitive m x m matrix has M^k > 0 for k = (m-1)^2 + 1.
  out.ergodic = out.irreducible && all_set(pattern_power(positive, (m - 1) * (m - 1) + 1));
  if (!out.irreducible) out.issues.push_back("transition matrix is reducible");
  else if (!out.ergodic) out.issues.push_back("transition matrix is periodic (not ergodic)");
  return out;
}

void require_valid(const MarkovChannel& channel, bool require_ergodic) {
  const ChannelValidation v = validate(channel);
  if (!v.well_formed() || (require_ergodic && !v.ergodic)) {
    throw std::invalid_argument("invalid channel: " + (v.issues.empty() ? std::string("unknown") : v.issues.front()));
  }
}

Vector stationary_distribution(const MarkovChannel& channel) {
  const ChannelValidation v = validate(channel);
  if (!v.well_formed() || !v.irreducible)
    throw std::invalid_argument("stationary distribution needs an irreducible channel: " +
                                (v.issues.empty() ? std::string("unknown") : v.issues.front()));
  const std::size_t m = channel.states();
  Vector pi = null_vector(Matrix::identity(m) - channel.transition.transpose());
  for (double& p : pi) p = std::max(p, 0.0);
  const double s = norm1(pi);
  for (double& p : pi) p /= s;
  return pi;
}

bool PostSuccessSet::contains(std::size_t j) const {
  return std::binary_search(indices.begin(), indices.end(), j);
}

PostSuccessSet post_success_set(const MarkovChannel& channel) {
  const std::size_t m = channel.states();
  if (channel.dropout.size() != m) throw std::invalid_argument("dropout vector length mismatch");
  PostSuccessSet out;
  for (std::size_t j = 0; j < m; ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) best = std::max(best, (1.0 - channel.dropout[i]) * channel.transition(i, j));
    if (best > 0.0) out.indices.push_back(j);
  }
  if (out.indices.empty()) throw std::domain_error("post-success set is empty: every state drops all packets");
  return out;
}

double gaussian_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double dropout_from_snr(double snr, int blocklength, double rate) {
  if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
  if (blocklength < 1) throw std::invalid_argument("blocklength must be at least 1");
  if (!(rate > 0.0)) throw std::invalid_argument("rate must be positive");
  const double capacity = std::log2(1.0 + snr);
  const double log2e = std::numbers::log2e;
  const double dispersion = snr * (2.0 + snr) / ((1.0 + snr) * (1.0 + snr)) * log2e * log2e;
  const double arg = std::sqrt(static_cast<double>(blocklength) / dispersion) * (capacity - rate);
  return std::clamp(gaussian_q(arg), 0.0, 1.0);
}

std::size_t sample_index(std::span<const double> probabilities, double u) {
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    if (probabilities[j] <= 0.0) continue;
    acc += probabilities[j];
    last_positive = j;
    if (u < acc) return j;
  }
  return last_positive;  // rounding in the cumulative sum
}

ChannelStep sample_step(const MarkovChannel& channel, std::size_t state, Rng& rng) {
  const bool dropped = rng.uniform() < channel.dropout[state];
  const std::size_t next = sample_index(channel.transition.row_span(state), rng.uniform());
  return {next, dropped};
}

}  // namespace remest
