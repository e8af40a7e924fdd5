#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "remest/matrix.hpp"
#include "remest/rng.hpp"

namespace remest {

/// Finite-state Markov fading channel.
///
/// transition(i, j) is the probability of moving from state i to state j, so
/// rows sum to one. dropout[i] is the packet loss probability in state i and
/// D = diag(dropout) acts on the left: D M scales row i by dropout[i].
struct MarkovChannel {
  Matrix transition;
  Vector dropout;
  /// Per-state SNR, when the dropouts were derived from it.
  std::optional<Vector> gains;

  std::size_t states() const { return transition.rows(); }
  Matrix drop_matrix() const { return Matrix::diagonal(dropout); }
  /// D M.
  Matrix drop_transition() const;
  /// (I - D) M.
  Matrix success_transition() const;

  bool operator==(const MarkovChannel&) const = default;
};

struct ChannelValidation {
  bool row_stochastic = false;
  bool probabilities_in_range = false;
  bool dropout_in_range = false;
  bool irreducible = false;
  /// Irreducible and aperiodic (some power of M is entrywise positive).
  bool ergodic = false;
  /// One message per violated invariant, naming the offending entry.
  std::vector<std::string> issues;

  /// Structurally valid (probabilities well formed), ergodic or not.
  bool well_formed() const { return row_stochastic && probabilities_in_range && dropout_in_range; }
  bool valid() const { return well_formed() && ergodic; }
};

/// Checks row-stochasticity (1e-12), entry ranges, and primitivity. Throws
/// std::invalid_argument only when the dimensions are inconsistent.
ChannelValidation validate(const MarkovChannel& channel);

/// Throws std::invalid_argument with the first issue unless the channel is
/// well formed (and ergodic, when required).
void require_valid(const MarkovChannel& channel, bool require_ergodic);

/// Stationary distribution pi with pi M = pi, via the null vector of I - Mᵀ.
/// Periodic chains are accepted as long as they are irreducible.
Vector stationary_distribution(const MarkovChannel& channel);

/// States reachable in the slot right after a successful delivery:
/// j such that max_i (1 - d_i) p_ij > 0. Zero-based, ascending.
struct PostSuccessSet {
  std::vector<std::size_t> indices;
  std::size_t size() const { return indices.size(); }
  bool contains(std::size_t j) const;
};

/// Throws std::domain_error when the set is empty (every d_i = 1).
PostSuccessSet post_success_set(const MarkovChannel& channel);

/// Normal-approximation packet error rate at finite blocklength:
/// Q(sqrt(blocklength / dispersion) (C - rate)), C = log2(1 + snr),
/// dispersion = snr (2 + snr) / (1 + snr)^2 (log2 e)^2. Clamped to [0, 1].
double dropout_from_snr(double snr, int blocklength, double rate);

/// Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2.
double gaussian_q(double x);

struct ChannelStep {
  std::size_t next_state;
  bool dropped;
};

/// Draws the loss indicator for `state` first, then the next state from row
/// `state` of the transition matrix; each draw consumes one uniform.
ChannelStep sample_step(const MarkovChannel& channel, std::size_t state, Rng& rng);

/// Index drawn from a probability vector with one uniform.
std::size_t sample_index(std::span<const double> probabilities, double u);

}  // namespace remest
