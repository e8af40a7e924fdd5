#include "remest/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace remest {
namespace {

void require_square(const Matrix& z, const char* what) {
  if (!z.is_square()) {
    throw std::invalid_argument(std::string(what) + ": matrix is " + std::to_string(z.rows()) +
                                "x" + std::to_string(z.cols()) + ", expected square");
  }
}

void require_positive_tol(double tol, const char* what) {
  if (!(tol > 0.0)) throw std::invalid_argument(std::string(what) + ": tolerance must be positive");
}

double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

// Row-pivoted LU factorisation, stored in place. perm[i] is the original row
// now at position i.
struct LuFactors {
  Matrix lu;
  std::vector<std::size_t> perm;
};

LuFactors lu_factor(const Matrix& z, double rank_tol) {
  const std::size_t n = z.rows();
  LuFactors f{z, std::vector<std::size_t>(n)};
  std::iota(f.perm.begin(), f.perm.end(), 0);
  const double threshold = rank_tol * z.max_abs();
  Matrix& a = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (!(std::abs(a(p, k)) > threshold)) {
      throw NumericError("solve_linear: singular system (pivot " + std::to_string(k) + ")");
    }
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(k, c), a(p, c));
      std::swap(f.perm[k], f.perm[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double m = a(i, k) / a(k, k);
      a(i, k) = m;
      if (m == 0.0) continue;
      for (std::size_t c = k + 1; c < n; ++c) a(i, c) -= m * a(k, c);
    }
  }
  return f;
}

Matrix lu_solve(const LuFactors& f, const Matrix& b) {
  const std::size_t n = f.lu.rows();
  const Matrix& a = f.lu;
  Matrix x(n, b.cols());
  for (std::size_t col = 0; col < b.cols(); ++col) {
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b(f.perm[i], col);
      for (std::size_t j = 0; j < i; ++j) s -= a(i, j) * y[j];
      y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x(j, col);
      x(i, col) = s / a(i, i);
    }
  }
  if (!x.all_finite()) throw NumericError("solve_linear: non-finite solution");
  return x;
}

}  // namespace

SpectralEstimate spectral_radius(const Matrix& z, double tol, int max_doublings) {
  require_square(z, "spectral_radius");
  require_positive_tol(tol, "spectral_radius");
  const double norm = z.inf_norm();
  if (z.empty() || norm == 0.0) return {0.0, 0, 0.0};

  Matrix b = z * (1.0 / norm);
  double log_scale = std::log(norm);  // log ||Z^(2^m)|| once b is renormalised
  double exponent = 1.0;
  double estimate = norm;
  SpectralEstimate out{estimate, 0, std::numeric_limits<double>::infinity()};
  int quiet = 0;
  for (int m = 1; m <= max_doublings; ++m) {
    b = b * b;
    const double nu = b.inf_norm();
    if (nu == 0.0) return {0.0, m, 0.0};  // nilpotent
    b *= 1.0 / nu;
    log_scale = 2.0 * log_scale + std::log(nu);
    exponent *= 2.0;
    const double next = std::exp(log_scale / exponent);
    out = {next, m, std::abs(next - estimate) / next};
    estimate = next;
    quiet = out.residual < tol ? quiet + 1 : 0;
    if (quiet >= 2) return out;
  }
  throw ConvergenceError("spectral_radius: no convergence within " +
                             std::to_string(max_doublings) + " doublings",
                         out);
}

SpectralEstimate largest_singular_value(const Matrix& z, double tol, int max_iter) {
  require_positive_tol(tol, "largest_singular_value");
  if (z.empty()) return {0.0, 0, 0.0};
  const Matrix gram = (z.transpose() * z).symmetrized();
  const double scale = frobenius(gram);
  if (scale == 0.0) return {0.0, 0, 0.0};

  // b holds (ZᵀZ)^(2^m) up to scale; the Rayleigh-type ratio
  // ||ZᵀZ b|| / ||b|| increases monotonically to the dominant eigenvalue.
  Matrix b = gram * (1.0 / scale);
  double sigma = std::sqrt(frobenius(gram * b) / frobenius(b));
  SpectralEstimate out{sigma, 0, std::numeric_limits<double>::infinity()};
  int quiet = 0;
  for (int it = 1; it <= max_iter; ++it) {
    b = b * b;
    const double nb = frobenius(b);
    if (nb == 0.0) break;
    b *= 1.0 / nb;
    const double next = std::sqrt(frobenius(gram * b));
    out = {next, it, std::abs(next - sigma) / next};
    sigma = next;
    quiet = out.residual < tol ? quiet + 1 : 0;
    if (quiet >= 2) return out;
  }
  throw ConvergenceError("largest_singular_value: no convergence", out);
}

SpectralEstimate perron_root(const Matrix& z, double tol, int max_doublings) {
  require_square(z, "perron_root");
  require_positive_tol(tol, "perron_root");
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c)
      if (z(r, c) < 0.0) {
        throw std::invalid_argument("perron_root: negative entry at (" + std::to_string(r) + "," +
                                    std::to_string(c) + ")");
      }
  const std::size_t n = z.rows();
  const double norm = z.inf_norm();
  if (n == 0 || norm == 0.0) return {0.0, 0, 0.0};

  const double shift = 0.5 * norm;
  const Matrix shifted = z + Matrix::identity(n) * shift;
  const double floor = 8.0 * std::numeric_limits<double>::epsilon() * (norm + shift);
  Matrix b = shifted * (1.0 / shifted.inf_norm());
  double previous = std::numeric_limits<double>::quiet_NaN();
  SpectralEstimate out{0.0, 0, std::numeric_limits<double>::infinity()};
  int quiet = 0;
  for (int m = 0; m <= max_doublings; ++m) {
    Vector x = multiply(b, Vector(n, 1.0));
    const double sx = std::accumulate(x.begin(), x.end(), 0.0);
    for (double& v : x) v /= sx;
    const Vector y = multiply(shifted, x);
    const double ratio = std::accumulate(y.begin(), y.end(), 0.0);
    const double estimate = std::max(0.0, ratio - shift);

    // Collatz–Wielandt bracket, available while every component is positive.
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    bool bracket = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(x[i] > 0.0)) {
        bracket = false;
        break;
      }
      lo = std::min(lo, y[i] / x[i]);
      hi = std::max(hi, y[i] / x[i]);
    }
    const double change = std::isnan(previous) ? std::numeric_limits<double>::infinity()
                                               : std::abs(estimate - previous);
    out = {estimate, m, change / std::max(estimate, floor)};
    if (bracket && hi - lo <= tol * estimate + floor) {
      out.residual = (hi - lo) / std::max(estimate, floor);
      return out;
    }
    quiet = change <= tol * estimate + floor ? quiet + 1 : 0;
    if (quiet >= 2) return out;
    previous = estimate;

    b = b * b;
    const double nb = b.inf_norm();
    b *= 1.0 / nb;
  }
  throw ConvergenceError("perron_root: no convergence", out);
}

std::size_t rank(const Matrix& z, double tol) {
  require_positive_tol(tol, "rank");
  if (z.empty()) return 0;
  const double threshold = tol * z.max_abs();
  if (threshold == 0.0) return 0;
  Matrix a = z;
  std::size_t row = 0;
  for (std::size_t col = 0; col < a.cols() && row < a.rows(); ++col) {
    std::size_t p = row;
    for (std::size_t i = row + 1; i < a.rows(); ++i)
      if (std::abs(a(i, col)) > std::abs(a(p, col))) p = i;
    if (!(std::abs(a(p, col)) > threshold)) continue;
    if (p != row)
      for (std::size_t c = 0; c < a.cols(); ++c) std::swap(a(row, c), a(p, c));
    for (std::size_t i = row + 1; i < a.rows(); ++i) {
      const double m = a(i, col) / a(row, col);
      if (m == 0.0) continue;
      for (std::size_t c = col; c < a.cols(); ++c) a(i, c) -= m * a(row, c);
    }
    ++row;
  }
  return row;
}

Matrix solve_linear(const Matrix& z, const Matrix& b, double rank_tol) {
  require_square(z, "solve_linear");
  if (b.rows() != z.rows()) throw std::invalid_argument("solve_linear: right-hand side rows mismatch");
  if (z.empty()) throw NumericError("solve_linear: empty system");
  const LuFactors f = lu_factor(z, rank_tol);
  Matrix x = lu_solve(f, b);
  // One refinement step against the residual.
  const Matrix residual = b - z * x;
  x += lu_solve(f, residual);
  return x;
}

Vector null_vector(const Matrix& z, double tol) {
  require_square(z, "null_vector");
  require_positive_tol(tol, "null_vector");
  const std::size_t n = z.rows();
  if (n == 0) throw NumericError("null_vector: empty matrix");
  // Same absolute floor as the residual test below: I - G' can be a roundoff
  // residue like [[1e-17]] when the chain has a single state.
  const double threshold = kDefaultRankTol * std::max(1.0, z.max_abs());

  // Gaussian elimination with complete pivoting.
  Matrix a = z;
  std::vector<std::size_t> cols(n);
  std::iota(cols.begin(), cols.end(), 0);
  std::size_t r = 0;
  for (; r < n; ++r) {
    std::size_t pi = r, pj = r;
    for (std::size_t i = r; i < n; ++i)
      for (std::size_t j = r; j < n; ++j)
        if (std::abs(a(i, j)) > std::abs(a(pi, pj))) {
          pi = i;
          pj = j;
        }
    if (!(std::abs(a(pi, pj)) > threshold)) break;
    for (std::size_t c = 0; c < n; ++c) std::swap(a(r, c), a(pi, c));
    for (std::size_t i = 0; i < n; ++i) std::swap(a(i, r), a(i, pj));
    std::swap(cols[r], cols[pj]);
    for (std::size_t i = r + 1; i < n; ++i) {
      const double m = a(i, r) / a(r, r);
      if (m == 0.0) continue;
      for (std::size_t c = r; c < n; ++c) a(i, c) -= m * a(r, c);
    }
  }
  if (r + 1 != n) {
    throw NumericError("null_vector: nullity is " + std::to_string(n - r) + ", expected 1");
  }

  // Free variable is the last pivot column; back-substitute the rest.
  Vector permuted(n, 0.0);
  permuted[n - 1] = 1.0;
  for (std::size_t i = n - 1; i-- > 0;) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * permuted[j];
    permuted[i] = -s / a(i, i);
  }
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[cols[i]] = permuted[i];

  const double scale = norm1(v);
  std::size_t big = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[big])) big = i;
  const double sign = v[big] < 0.0 ? -1.0 : 1.0;
  for (double& x : v) x *= sign / scale;

  const Vector zv = multiply(z, v);
  double res = 0.0;
  for (double x : zv) res = std::max(res, std::abs(x));
  if (res > tol * std::max(1.0, z.max_abs())) {
    throw NumericError("null_vector: residual " + std::to_string(res) + " exceeds tolerance");
  }
  return v;
}

Matrix psd_factor(const Matrix& q, double tol) {
  require_square(q, "psd_factor");
  if (!q.is_symmetric(1e-9)) throw std::invalid_argument("matrix is not symmetric");
  const std::size_t n = q.rows();
  Matrix residual = q.symmetrized();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(q(i, i)));
  scale = std::max(scale, q.max_abs());
  std::vector<Vector> columns;
  std::vector<bool> used(n, false);
  while (columns.size() < n && scale > 0.0) {
    std::size_t p = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i] && (p == n || residual(i, i) > residual(p, p))) p = i;
    if (!(residual(p, p) > tol * scale)) break;
    used[p] = true;
    const double root = std::sqrt(residual(p, p));
    Vector l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = residual(i, p) / root;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) residual(i, j) -= l[i] * l[j];
    columns.push_back(std::move(l));
  }
  if (residual.max_abs() > 1e-8 * std::max(scale, 1e-300) && scale > 0.0) {
    throw std::invalid_argument("matrix is not positive semidefinite");
  }
  Matrix out(n, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) out(i, c) = columns[c][i];
  return out;
}

bool is_positive_definite(const Matrix& q, double tol) {
  if (!q.is_square() || q.empty() || !q.is_symmetric(1e-9)) return false;
  const std::size_t n = q.rows();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, q(i, i));
  if (!(scale > 0.0)) return false;
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = q(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol * scale)) return false;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = q(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return true;
}

Matrix inverse_sqrt_pd(const Matrix& x, double tol, int max_iter) {
  require_square(x, "inverse_sqrt_pd");
  const std::size_t n = x.rows();
  const Matrix eye = Matrix::identity(n);
  // Normalise so the iteration starts near the identity; undo at the end.
  const double c = x.trace() / static_cast<double>(n);
  if (!(c > 0.0)) throw NumericError("inverse_sqrt_pd: matrix is not positive definite");
  const Matrix xs = x * (1.0 / c);
  Matrix y = xs;
  Matrix z = eye;
  for (int k = 0; k < max_iter; ++k) {
    const Matrix y_inv = solve_linear(y, eye);
    const Matrix z_inv = solve_linear(z, eye);
    y = ((y + z_inv) * 0.5).symmetrized();
    z = ((z + y_inv) * 0.5).symmetrized();
    if (max_abs_diff(y * y, xs) <= tol * xs.max_abs()) return z * (1.0 / std::sqrt(c));
  }
  throw NumericError("inverse_sqrt_pd: Denman-Beavers iteration did not converge");
}

Matrix sqrt_psd(const Matrix& q, double tol) {
  const Matrix l = psd_factor(q);
  if (l.cols() == 0) return Matrix(q.rows(), q.cols());
  const Matrix inner = (l.transpose() * l).symmetrized();
  const Matrix s = (l * inverse_sqrt_pd(inner, tol) * l.transpose()).symmetrized();
  if (max_abs_diff(s * s, q) > 1e-9 * std::max(1.0, q.max_abs())) {
    throw NumericError("sqrt_psd: square root residual too large");
  }
  return s;
}

}  // namespace remest
