#include "remest/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace remest {
namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_dimensions(const LtiSystem& sys) {
  const std::size_t n = sys.A.rows();
  if (n == 0 || !sys.A.is_square()) throw std::invalid_argument("A must be a nonempty square matrix");
  if (sys.C.cols() != n || sys.C.rows() == 0)
    throw std::invalid_argument("C must have as many columns as A has rows");
  if (sys.W.rows() != n || sys.W.cols() != n) throw std::invalid_argument("W must be n x n");
  const std::size_t m = sys.C.rows();
  if (sys.V.rows() != m || sys.V.cols() != m) throw std::invalid_argument("V must be m x m");
}

}  // namespace

Matrix observability_matrix(const Matrix& a, const Matrix& c) {
  const Matrix at = a.transpose();
  Matrix block = c.transpose();
  Matrix out = block;
  for (std::size_t k = 0; k < a.rows(); ++k) {
    block = at * block;
    out = out.hcat(block);
  }
  return out;
}

Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  Matrix block = b;
  Matrix out = block;
  for (std::size_t k = 0; k < a.rows(); ++k) {
    block = a * block;
    out = out.hcat(block);
  }
  return out;
}

SystemValidation validate(const LtiSystem& sys, double rank_tol) {
  check_dimensions(sys);
  if (!sys.W.is_symmetric(1e-9)) throw std::invalid_argument("W is not symmetric");
  if (!sys.V.is_symmetric(1e-9)) throw std::invalid_argument("V is not symmetric");
  const Matrix root_w = sqrt_psd(sys.W);  // throws when W is indefinite
  if (!is_positive_definite(sys.V)) throw std::invalid_argument("V is not positive definite");

  SystemValidation out;
  out.state_dim = sys.state_dim();
  out.observability_rank = rank(observability_matrix(sys.A, sys.C), rank_tol);
  out.controllability_rank = rank(controllability_matrix(sys.A, root_w), rank_tol);
  out.observable = out.observability_rank == out.state_dim;
  out.controllable = out.controllability_rank == out.state_dim;
  out.rho_a = spectral_radius(sys.A).value;
  out.open_loop_unstable = out.rho_a * out.rho_a >= 1.0;
  return out;
}

Matrix holding_map(const LtiSystem& sys, const Matrix& x) {
  if (x.rows() != sys.A.rows() || x.cols() != sys.A.rows())
    throw std::invalid_argument("holding_map: X must be n x n");
  return (sys.A * x * sys.A.transpose() + sys.W).symmetrized();
}

KalmanUpdate kalman_update(const LtiSystem& sys, const Matrix& prior) {
  const Matrix ct = sys.C.transpose();
  const Matrix innovation = (sys.C * prior * ct + sys.V).symmetrized();
  // K = P Cᵀ S⁻¹  <=>  Kᵀ = S⁻¹ C P (S and P symmetric).
  const Matrix gain = solve_linear(innovation, sys.C * prior).transpose();
  const Matrix eye = Matrix::identity(sys.state_dim());
  return {gain, ((eye - gain * sys.C) * prior).symmetrized()};
}

SteadyStateFilter riccati_steady_state(const LtiSystem& sys, double tol, int max_iter,
                                       const std::optional<Matrix>& initial) {
  check_dimensions(sys);
  if (!(tol > 0.0)) throw std::invalid_argument("riccati_steady_state: tolerance must be positive");
  Matrix posterior = initial.value_or(sys.W);
  for (int it = 1; it <= max_iter; ++it) {
    KalmanUpdate step = kalman_update(sys, holding_map(sys, posterior));
    const double change = max_abs_diff(step.posterior, posterior);
    posterior = std::move(step.posterior);
    if (change < tol) return {posterior, std::move(step.gain), it, change};
  }
  throw NumericError("riccati_steady_state: no convergence within " + std::to_string(max_iter) +
                     " iterations");
}

ErrorTraceSequence::ErrorTraceSequence(const LtiSystem& sys, const Matrix& start)
    : a_(sys.A), w_(sys.W) {
  if (start.rows() != a_.rows() || start.cols() != a_.rows())
    throw std::invalid_argument("ErrorTraceSequence: start covariance must be n x n");
  const double s = start.max_abs();
  if (s > 0.0) {
    scaled_ = start * (1.0 / s);
    log_scale_ = std::log(s);
  } else {
    scaled_ = start;
  }
}

void ErrorTraceSequence::extend_to(std::size_t i) {
  const Matrix at = a_.transpose();
  while (log_c_.size() < i) {
    // exp(L) Y  ->  exp(L) (A Y Aᵀ + exp(-L) W)
    Matrix next = a_ * scaled_ * at;
    const double w_weight = std::exp(-log_scale_);
    if (w_weight > 0.0) next += w_ * w_weight;
    next = next.symmetrized();
    const double s = next.max_abs();
    if (s > 0.0) {
      next *= 1.0 / s;
      log_scale_ += std::log(s);
    }
    scaled_ = std::move(next);
    const double tr = scaled_.trace();
    const double log_c = tr > 0.0 ? log_scale_ + std::log(tr) : -std::numeric_limits<double>::infinity();
    const double log_g = log_add(log_g_.empty() ? -std::numeric_limits<double>::infinity() : log_g_.back(), log_c);
    double c = tr > 0.0 && log_scale_ < 700.0 ? std::exp(log_scale_) * tr : (tr > 0.0 ? kSaturated : 0.0);
    if (c > kSaturationThreshold) {
      c = kSaturated;
      if (!saturation_index_) saturation_index_ = log_c_.size() + 1;
    }
    log_c_.push_back(log_c);
    log_g_.push_back(log_g);
    c_.push_back(c);
  }
}

double ErrorTraceSequence::trace(std::size_t i) {
  if (i == 0) throw std::invalid_argument("error trace index must be at least 1");
  extend_to(i);
  return c_[i - 1];
}

double ErrorTraceSequence::cumulative(std::size_t i) {
  const double lg = log_cumulative(i);
  const double g = lg < 700.0 ? std::exp(lg) : kSaturated;
  return g > kSaturationThreshold ? kSaturated : g;
}

double ErrorTraceSequence::log_trace(std::size_t i) {
  if (i == 0) throw std::invalid_argument("error trace index must be at least 1");
  extend_to(i);
  return log_c_[i - 1];
}

double ErrorTraceSequence::log_cumulative(std::size_t i) {
  if (i == 0) throw std::invalid_argument("error trace index must be at least 1");
  extend_to(i);
  return log_g_[i - 1];
}

double error_trace(const LtiSystem& sys, const SteadyStateFilter& filter, std::size_t i) {
  if (i == 0) throw std::invalid_argument("error trace index must be at least 1");
  ErrorTraceSequence seq(sys, filter.covariance);
  return seq.trace(i);
}

GatedEstimate gated_kalman_step(const LtiSystem& sys, std::span<const double> prior_state,
                                const Matrix& prior_cov, std::span<const double> measurement,
                                bool received) {
  if (prior_state.size() != sys.state_dim())
    throw std::invalid_argument("gated_kalman_step: state dimension mismatch");
  Vector state = multiply(sys.A, prior_state);
  Matrix predicted = holding_map(sys, prior_cov);
  if (!received) return {std::move(state), std::move(predicted)};
  if (measurement.size() != sys.measurement_dim())
    throw std::invalid_argument("gated_kalman_step: measurement dimension mismatch");

  KalmanUpdate update = kalman_update(sys, predicted);
  const Vector predicted_y = multiply(sys.C, state);
  Vector innovation(measurement.begin(), measurement.end());
  for (std::size_t i = 0; i < innovation.size(); ++i) innovation[i] -= predicted_y[i];
  const Vector correction = multiply(update.gain, innovation);
  for (std::size_t i = 0; i < state.size(); ++i) state[i] += correction[i];
  return {std::move(state), std::move(update.posterior)};
}

}  // namespace remest
