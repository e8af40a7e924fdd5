#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "remest/linalg.hpp"
#include "remest/matrix.hpp"

namespace remest {

/// Plant x' = A x + w, sensor y = C x + v, with w ~ N(0, W) and v ~ N(0, V).
struct LtiSystem {
  Matrix A;
  Matrix C;
  Matrix W;
  Matrix V;

  std::size_t state_dim() const { return A.rows(); }
  std::size_t measurement_dim() const { return C.rows(); }

  bool operator==(const LtiSystem&) const = default;
};

struct SystemValidation {
  std::size_t state_dim = 0;
  std::size_t observability_rank = 0;
  std::size_t controllability_rank = 0;
  bool observable = false;
  bool controllable = false;
  double rho_a = 0.0;
  /// rho(A)^2 >= 1: the plant state grows without bound in open loop.
  bool open_loop_unstable = false;

  bool ok() const { return observable && controllable; }
};

/// Checks dimensions, W symmetric PSD, V symmetric positive definite, and
/// the rank conditions on [Cᵀ, AᵀCᵀ, ..., (Aⁿ)ᵀCᵀ] and [√W, A√W, ..., Aⁿ√W].
/// Throws std::invalid_argument for malformed inputs; rank failures are
/// reported, not thrown.
SystemValidation validate(const LtiSystem& sys, double rank_tol = kDefaultRankTol);

/// [Cᵀ, AᵀCᵀ, ..., (Aⁿ)ᵀCᵀ].
Matrix observability_matrix(const Matrix& a, const Matrix& c);
/// [B, AB, ..., AⁿB].
Matrix controllability_matrix(const Matrix& a, const Matrix& b);

/// Converged local Kalman filter.
struct SteadyStateFilter {
  Matrix covariance;  // posterior error covariance at the fixed point
  Matrix gain;
  int iterations = 0;
  double residual = 0.0;
};

struct KalmanUpdate {
  Matrix gain;
  Matrix posterior;
};

/// Measurement update of a prior covariance: K = P Cᵀ (C P Cᵀ + V)⁻¹,
/// posterior (I - K C) P, symmetrised.
KalmanUpdate kalman_update(const LtiSystem& sys, const Matrix& prior);

/// Iterates prediction and update from `initial` (W when omitted) until two
/// successive posterior covariances differ by less than `tol` in max-abs norm.
SteadyStateFilter riccati_steady_state(const LtiSystem& sys, double tol = kDefaultIterTol,
                                       int max_iter = 1000000,
                                       const std::optional<Matrix>& initial = std::nullopt);

/// A X Aᵀ + W, symmetrised.
Matrix holding_map(const LtiSystem& sys, const Matrix& x);

/// c(i) = Tr(vⁱ(P)) where v is the holding map and P the steady-state
/// posterior covariance. Throws for i = 0. Returns ErrorTraceSequence::kSaturated
/// once the value passes ErrorTraceSequence::kSaturationThreshold.
double error_trace(const LtiSystem& sys, const SteadyStateFilter& filter, std::size_t i);

/// Lazily extended table of c(i) and its running sum g(i) = c(1) + ... + c(i).
///
/// Iterates in scaled form vⁱ(P) = exp(L) Y with max|Y| = 1 so the log values
/// stay exact far past the double range. Not thread-safe; give each worker
/// its own copy.
class ErrorTraceSequence {
 public:
  static constexpr double kSaturationThreshold = 1e250;
  static constexpr double kSaturated = std::numeric_limits<double>::infinity();

  ErrorTraceSequence(const LtiSystem& sys, const Matrix& start);

  /// c(i); kSaturated once c(i) > kSaturationThreshold.
  double trace(std::size_t i);
  /// g(i); kSaturated once g(i) > kSaturationThreshold.
  double cumulative(std::size_t i);
  double log_trace(std::size_t i);
  double log_cumulative(std::size_t i);
  /// Smallest index whose c value has passed the saturation threshold, among
  /// the indices computed so far.
  std::optional<std::size_t> saturation_index() const { return saturation_index_; }
  std::size_t computed() const { return log_c_.size(); }

 private:
  void extend_to(std::size_t i);

  Matrix a_;
  Matrix w_;
  Matrix scaled_;
  double log_scale_ = 0.0;
  std::vector<double> log_c_;
  std::vector<double> log_g_;
  std::vector<double> c_;
  std::optional<std::size_t> saturation_index_;
};

struct GatedEstimate {
  Vector state;
  Matrix covariance;
};

/// One step of a Kalman filter whose measurement may be lost: prediction
/// always, update with `measurement` only when `received`.
GatedEstimate gated_kalman_step(const LtiSystem& sys, std::span<const double> prior_state,
                                const Matrix& prior_cov, std::span<const double> measurement,
                                bool received);

}  // namespace remest
