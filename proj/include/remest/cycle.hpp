#pragma once

#include <cstddef>
#include <optional>

#include "remest/channel.hpp"
#include "remest/linalg.hpp"
#include "remest/lti.hpp"
#include "remest/matrix.hpp"

namespace remest {

/// Embedded chain of channel states at the start of each estimation cycle
/// (the slot after a successful delivery).
struct CycleModel {
  PostSuccessSet post_success;
  /// G = sum_j (DM)^j (I - D) M = (I - DM)⁻¹ (I - D) M, M x M.
  Matrix transition;
  /// G restricted to the post-success states.
  Matrix restricted;
  /// Stationary distribution of the restricted chain, one entry per
  /// post-success state.
  Vector beta;
  /// beta scattered onto all M states, zero outside the post-success set.
  Vector beta_padded;
};

/// Builds G, its restriction and beta. Throws std::domain_error when every
/// d_i = 1 (no cycle ever ends) and std::invalid_argument for a malformed or
/// non-ergodic channel.
CycleModel cycle_model(const MarkovChannel& channel);

/// P(T = i | cycle starts in state m) = sum_k [(DM)^(i-1) (I - D) M]_{m,k}.
/// `start_state` is zero-based and must be a post-success state; i >= 1.
double cycle_length_pmf(const MarkovChannel& channel, std::size_t start_state, std::size_t i);

/// Unconditional P(T = i) for i = 1..max_length under the start-state
/// distribution `start` (length M).
Vector cycle_length_distribution(const MarkovChannel& channel, std::span<const double> start,
                                 std::size_t max_length);

/// Average estimation MSE from cycle statistics, J = E[C] / E[T].
struct MseResult {
  bool bounded = false;
  double value = 0.0;            // J, meaningful only when bounded
  double expected_length = 0.0;  // E[T]
  double expected_cost = 0.0;    // E[C]
  std::size_t terms = 0;         // series terms summed
  double tail_bound = 0.0;       // bound on the relative truncation error
  /// The tail could not be certified (margin within the guard of 1, or the
  /// term cap was reached); `value` is then a partial sum.
  bool uncertain = false;
};

struct StabilityReport {
  double rho_a = 0.0;
  double sigma_a = 0.0;  // largest singular value of A
  double rho_dm = 0.0;
  /// rho(A)^2 rho(DM); mean-square stable iff < 1.
  double margin = 0.0;
  bool stable = false;
  /// max_i sum_j p_ij d_j.
  double max_expected_drop = 0.0;
  /// sigma(A)^2 max_i sum_j p_ij d_j, the classical sufficient test.
  double margin_sufficient = 0.0;
  bool stable_sufficient = false;
  std::optional<MseResult> mse;
};

/// Evaluates both stability margins; mse is left empty.
StabilityReport stability_margin(const Matrix& a, const MarkovChannel& channel,
                                 double tol = kDefaultIterTol);

/// Same, reusing precomputed spectra of A.
StabilityReport stability_margin(double rho_a, double sigma_a, const MarkovChannel& channel,
                                 double tol = kDefaultIterTol);

inline constexpr double kTailGuard = 1e-6;
inline constexpr std::size_t kMaxSeriesTerms = 2'000'000;

/// J via the cycle series, or bounded = false when the margin is >= 1.
MseResult analytic_mse(const LtiSystem& sys, const SteadyStateFilter& filter,
                       const MarkovChannel& channel, double tol = kDefaultIterTol);

/// Variant for repeated evaluation on one system: `traces` must have been
/// built from (sys, filter.covariance) and is extended as needed.
MseResult analytic_mse(const StabilityReport& report, ErrorTraceSequence& traces,
                       const MarkovChannel& channel, double tol = kDefaultIterTol);

}  // namespace remest
