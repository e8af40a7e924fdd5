#pragma once

#include <cstddef>

#include "remest/matrix.hpp"

namespace remest {

inline constexpr double kDefaultIterTol = 1e-9;
inline constexpr double kDefaultRankTol = 1e-10;

/// Result of an iterative spectral computation.
struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  /// Last relative change between successive estimates.
  double residual = 0.0;
};

/// Thrown when an iteration stops before meeting its tolerance. Carries the
/// last estimate so callers can still inspect it.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, SpectralEstimate last)
      : NumericError(what), last_(last) {}
  const SpectralEstimate& last() const { return last_; }

 private:
  SpectralEstimate last_;
};

/// Spectral radius from Gelfand's formula, rho = lim ||Z^k||^(1/k).
///
/// Z is squared repeatedly, renormalising in the induced infinity norm after
/// every squaring and carrying the scale in a log accumulator, so powers far
/// beyond the double range are handled. Converges once two consecutive
/// doublings change the estimate by less than `tol` relative.
SpectralEstimate spectral_radius(const Matrix& z, double tol = kDefaultIterTol,
                                 int max_doublings = 64);

/// Largest singular value via power iteration on ZᵀZ.
SpectralEstimate largest_singular_value(const Matrix& z, double tol = kDefaultIterTol,
                                        int max_iter = 100000);

/// Perron root of a nonnegative square matrix.
///
/// Power iteration from the all-ones vector on the shifted matrix Z + sI
/// (s > 0 keeps every iterate strictly positive and removes periodicity);
/// the shifted matrix is squared each step so the iteration count is
/// logarithmic in the inverse spectral gap.
SpectralEstimate perron_root(const Matrix& z, double tol = kDefaultIterTol, int max_doublings = 64);

/// Numerical rank by Gaussian elimination with partial pivoting. A pivot
/// counts when it exceeds tol times the largest initial absolute entry.
std::size_t rank(const Matrix& z, double tol = kDefaultRankTol);

/// Solves Z X = B with partial pivoting and one step of iterative refinement.
Matrix solve_linear(const Matrix& z, const Matrix& b, double rank_tol = kDefaultRankTol);

/// Unique null vector of a square matrix of nullity one, normalised to unit
/// 1-norm with its largest-magnitude entry positive. Pivots count above
/// kDefaultRankTol * max(1, max|Z|).
Vector null_vector(const Matrix& z, double tol = kDefaultIterTol);

/// Factor L (n x r, r = numerical rank) with L Lᵀ = Q for symmetric positive
/// semidefinite Q, by diagonally pivoted Cholesky. Throws std::invalid_argument
/// if Q is not symmetric or is indefinite beyond `tol` relative.
Matrix psd_factor(const Matrix& q, double tol = kDefaultRankTol);

/// True when Q is symmetric positive definite (Cholesky succeeds with every
/// pivot above tol times the largest diagonal entry).
bool is_positive_definite(const Matrix& q, double tol = kDefaultRankTol);

/// Principal inverse square root of a symmetric positive definite matrix by
/// Denman–Beavers iteration.
Matrix inverse_sqrt_pd(const Matrix& x, double tol = 1e-12, int max_iter = 200);

/// Symmetric positive semidefinite square root S (S = Sᵀ, S S = Q).
///
/// With Q = L Lᵀ from psd_factor, S = L (LᵀL)^(-1/2) Lᵀ; the inner r x r
/// matrix is positive definite, so Denman–Beavers applies even when Q is
/// singular.
Matrix sqrt_psd(const Matrix& q, double tol = 1e-12);

}  // namespace remest
