#include "remest/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "remest/linalg.hpp"

namespace remest {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kAgreementTol = 1e-6;
// Slack in log space when the second pass re-checks a fitted inequality.
constexpr double kVerifySlack = 1e-9;
// Allowed drop of the window maxima between the third and fourth quarter.
constexpr double kDecayTol = 1e-3;

void check_range(IndexRange range, std::size_t min_size = 8) {
  if (range.first < 1 || range.last < range.first)
    throw std::invalid_argument("index range must satisfy 1 <= first <= last");
  if (range.size() < min_size)
    throw std::invalid_argument("index range too short to fit a burn-in (need at least " +
                                std::to_string(min_size) + " indices)");
}

// Rescales m to max|m| = 1 and returns log of the removed factor (0 for a
// zero matrix).
double normalize(Matrix& m) {
  const double s = m.max_abs();
  if (s == 0.0) return 0.0;
  m *= 1.0 / s;
  return std::log(s);
}

void append(ScaledPowers& out, Matrix y, double log_scale, const Matrix& right) {
  if (!right.empty()) {
    y = y * right;
    log_scale += normalize(y);
  }
  out.normalized.push_back(std::move(y));
  out.log_scale.push_back(log_scale);
}

double max_agreement(const ScaledPowers& a, const ScaledPowers& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.normalized.size(); ++t) {
    const Matrix& x = a.normalized[t];
    const Matrix& y = b.normalized[t];
    const double ax = x.max_abs(), by = y.max_abs();
    if (ax == 0.0 && by == 0.0) continue;
    if (ax == 0.0 || by == 0.0) return std::numeric_limits<double>::infinity();
    const double top = std::max(a.log_scale[t], b.log_scale[t]);
    const double fx = std::exp(a.log_scale[t] - top), fy = std::exp(b.log_scale[t] - top);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) worst = std::max(worst, std::abs(x(i, j) * fx - y(i, j) * fy));
  }
  return worst;
}

// Growth rate between the last window of `period` values before the
// midpoint and the last window of the range.
double growth_base(const std::vector<double>& log_seq, IndexRange range, std::size_t period = 1) {
  const std::size_t mid = range.midpoint() - range.first;
  const std::size_t end = log_seq.size();
  if (end < period || mid + 1 < period || end - period <= mid + 1 - period) return 0.0;
  const auto window_argmax = [&](std::size_t stop) {
    return static_cast<std::size_t>(std::max_element(log_seq.begin() + static_cast<std::ptrdiff_t>(stop - period),
                                                     log_seq.begin() + static_cast<std::ptrdiff_t>(stop)) -
                                    log_seq.begin());
  };
  const std::size_t ia = window_argmax(mid + 1), ib = window_argmax(end);
  const double a = log_seq[ia], b = log_seq[ib];
  if (!std::isfinite(a) || !std::isfinite(b) || ib <= ia) return 0.0;
  return std::exp((b - a) / static_cast<double>(ib - ia));
}

// Upper envelope: ratio_i = log x_i - i log(reference). Fills burn_in,
// constant and pass.
void fit_upper(EnvelopeFit& fit, const std::vector<double>& ratio, IndexRange range) {
  std::size_t burn = range.first - 1;
  for (std::size_t t = ratio.size(); t-- > 0;) {
    if (ratio[t] >= 0.0) {
      burn = range.first + t;
      break;
    }
  }
  fit.burn_in = burn;
  if (burn >= range.last) {
    fit.pass = false;
    fit.note = "bound with kappa <= 1 never holds within the range";
    return;
  }
  double sup = kNegInf;
  for (std::size_t i = burn + 1; i <= range.last; ++i) sup = std::max(sup, ratio[i - range.first]);
  fit.constant = std::exp(sup);
  fit.pass = burn < range.midpoint();
  if (!fit.pass) fit.note = "burn-in falls in the second half of the range";
}

bool upper_holds(const std::vector<double>& ratio, IndexRange range, std::size_t burn, double constant) {
  const double limit = constant > 0.0 ? std::log(constant) + kVerifySlack : kNegInf;
  for (std::size_t i = burn + 1; i <= range.last; ++i) {
    const double r = ratio[i - range.first];
    if (constant > 0.0 ? r > limit : r != kNegInf) return false;
  }
  return true;
}

std::vector<double> window_maxima(const std::vector<double>& seq, std::size_t period) {
  std::vector<double> out;
  if (seq.size() < period) return out;
  for (std::size_t s = 0; s + period <= seq.size(); ++s)
    out.push_back(*std::max_element(seq.begin() + static_cast<std::ptrdiff_t>(s),
                                    seq.begin() + static_cast<std::ptrdiff_t>(s + period)));
  return out;
}

struct LowerFit {
  bool pass = false;
  double log_eta = kNegInf;
};

// seq[t] = log|x_{first+t}| - (first+t) log rho. Windows start at every
// index; eta comes from windows starting at or after the midpoint.
LowerFit fit_lower(const std::vector<double>& seq, IndexRange range, std::size_t period) {
  LowerFit out;
  const std::vector<double> maxima = window_maxima(seq, period);
  const std::size_t mid = range.midpoint() - range.first;
  const std::size_t q3 = range.size() * 3 / 4;
  if (maxima.size() <= q3 || mid >= q3) return out;
  double min_q3 = std::numeric_limits<double>::infinity();
  double min_q4 = std::numeric_limits<double>::infinity();
  for (std::size_t s = mid; s < maxima.size(); ++s) {
    if (s < q3) min_q3 = std::min(min_q3, maxima[s]);
    else min_q4 = std::min(min_q4, maxima[s]);
  }
  out.log_eta = std::min(min_q3, min_q4);
  out.pass = std::isfinite(out.log_eta) && min_q4 >= min_q3 - kDecayTol;
  return out;
}

bool lower_holds(const std::vector<double>& seq, IndexRange range, std::size_t period, double log_eta) {
  const std::vector<double> maxima = window_maxima(seq, period);
  for (std::size_t s = range.midpoint() - range.first; s < maxima.size(); ++s)
    if (maxima[s] < log_eta - kVerifySlack) return false;
  return true;
}

std::vector<double> entry_sequence(const ScaledPowers& p, std::size_t j, std::size_t k, double log_rho) {
  std::vector<double> seq;
  seq.reserve(p.normalized.size());
  for (std::size_t i = p.range.first; i <= p.range.last; ++i)
    seq.push_back(p.log_abs(i, j, k) - static_cast<double>(i) * log_rho);
  return seq;
}

struct Candidate {
  std::size_t row, col;
};

// Period-outermost witness search over `candidates`; returns the first
// passing (entry, period) with the fit verified against `check`.
EnvelopeFit search_witness(const ScaledPowers& powers, const ScaledPowers& check, double rho,
                           const std::vector<Candidate>& candidates, std::size_t max_period) {
  EnvelopeFit fit;
  fit.reference = rho;
  fit.burn_in = powers.range.midpoint() - 1;
  const double log_rho = std::log(rho);
  const double agreement = max_agreement(powers, check);
  for (std::size_t l = 1; l <= max_period; ++l) {
    for (const Candidate& c : candidates) {
      const std::vector<double> seq = entry_sequence(powers, c.row, c.col, log_rho);
      const LowerFit lf = fit_lower(seq, powers.range, l);
      if (!lf.pass) continue;
      fit.period = l;
      fit.row = c.row + 1;
      fit.col = c.col + 1;
      fit.constant = std::exp(lf.log_eta);
      std::vector<double> raw(seq.size());
      for (std::size_t t = 0; t < seq.size(); ++t)
        raw[t] = seq[t] + static_cast<double>(powers.range.first + t) * log_rho;
      fit.base = growth_base(raw, powers.range, l);
      fit.power_agreement = agreement;
      fit.verified = agreement < kAgreementTol &&
                     lower_holds(entry_sequence(check, c.row, c.col, log_rho), powers.range, l, lf.log_eta);
      fit.pass = fit.verified;
      if (!fit.verified) fit.note = "witness failed the independent re-check";
      return fit;
    }
  }
  fit.power_agreement = agreement;
  fit.note = "no witness found in the range";
  return fit;
}

std::vector<Candidate> all_entries(std::size_t rows, std::size_t cols) {
  std::vector<Candidate> out;
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t k = 0; k < cols; ++k) out.push_back({j, k});
  return out;
}

EnvelopeFit periodic_lower(const Matrix& z, IndexRange range, const Matrix& right) {
  if (!z.is_square() || z.empty()) throw std::invalid_argument("matrix must be square and nonempty");
  check_range(range);
  const double rho = spectral_radius(z).value;
  if (!(rho > 0.0)) throw std::invalid_argument("periodic lower bound needs rho(Z) > 0");
  const ScaledPowers powers = scaled_powers(z, range, right);
  const ScaledPowers check = scaled_powers_by_squaring(z, range, right);
  const std::size_t cols = right.empty() ? z.cols() : right.cols();
  return search_witness(powers, check, rho, all_entries(z.rows(), cols), z.rows());
}

// c(i) by the split Tr(Aⁱ P Aⁱᵀ) + sum_{j<i} Tr(Aʲ W Aʲᵀ), independent of the
// scaled recursion. Empty once the plain doubles overflow.
std::optional<std::vector<double>> log_trace_by_split(const LtiSystem& sys, const Matrix& p, IndexRange range) {
  std::vector<double> out;
  try {
    Matrix ai = Matrix::identity(sys.state_dim());
    double noise = 0.0;
    for (std::size_t i = 1; i <= range.last; ++i) {
      noise += (ai * sys.W * ai.transpose()).trace();
      ai = ai * sys.A;
      const double c = (ai * p * ai.transpose()).trace() + noise;
      if (!std::isfinite(c)) return std::nullopt;
      if (i >= range.first) out.push_back(std::log(c));
    }
  } catch (const NumericError&) {
    return std::nullopt;
  }
  return out;
}

}  // namespace

double ScaledPowers::log_abs(std::size_t i, std::size_t j, std::size_t k) const {
  const double v = normalized.at(i - range.first)(j, k);
  return v == 0.0 ? kNegInf : std::log(std::abs(v)) + log_scale[i - range.first];
}

double ScaledPowers::log_max(std::size_t i) const {
  const Matrix& m = normalized.at(i - range.first);
  return m.max_abs() == 0.0 ? kNegInf : log_scale[i - range.first];
}

ScaledPowers scaled_powers(const Matrix& z, IndexRange range, const Matrix& right) {
  if (!z.is_square()) throw std::invalid_argument("matrix powers need a square matrix");
  ScaledPowers out;
  out.range = range;
  Matrix y = Matrix::identity(z.rows());
  double log_scale = 0.0;
  for (std::size_t i = 1; i <= range.last; ++i) {
    y = y * z;
    log_scale += normalize(y);
    if (i >= range.first) append(out, y, log_scale, right);
  }
  return out;
}

ScaledPowers scaled_powers_by_squaring(const Matrix& z, IndexRange range, const Matrix& right) {
  if (!z.is_square()) throw std::invalid_argument("matrix powers need a square matrix");
  ScaledPowers out;
  out.range = range;
  // squares[b] = Z^(2^b) / exp(logs[b]).
  std::vector<Matrix> squares{z};
  std::vector<double> logs{normalize(squares[0])};
  for (std::size_t i = range.first; i <= range.last; ++i) {
    while ((std::size_t{1} << squares.size()) <= i) {
      Matrix s = squares.back() * squares.back();
      const double l = 2.0 * logs.back() + normalize(s);
      squares.push_back(std::move(s));
      logs.push_back(l);
    }
    Matrix acc = Matrix::identity(z.rows());
    double log_scale = 0.0;
    for (std::size_t b = 0; b < squares.size(); ++b) {
      if (!((i >> b) & 1u)) continue;
      acc = acc * squares[b];
      log_scale += logs[b] + normalize(acc);
    }
    append(out, std::move(acc), log_scale, right);
  }
  return out;
}

EnvelopeFit check_upper_bound(const Matrix& z, double epsilon, IndexRange range) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!z.is_square() || z.empty()) throw std::invalid_argument("matrix must be square and nonempty");
  check_range(range);
  const double rho = spectral_radius(z).value;
  EnvelopeFit fit;
  fit.reference = rho + epsilon;
  const double log_ref = std::log(fit.reference);

  auto ratios = [&](const ScaledPowers& p) {
    std::vector<double> r;
    for (std::size_t i = range.first; i <= range.last; ++i)
      r.push_back(2.0 * p.log_max(i) - 2.0 * static_cast<double>(i) * log_ref);
    return r;
  };
  const ScaledPowers powers = scaled_powers(z, range);
  std::vector<double> log_max;
  for (std::size_t i = range.first; i <= range.last; ++i) log_max.push_back(powers.log_max(i));
  fit.base = growth_base(log_max, range);
  fit_upper(fit, ratios(powers), range);

  const ScaledPowers check = scaled_powers_by_squaring(z, range);
  fit.power_agreement = max_agreement(powers, check);
  fit.verified = fit.burn_in < range.last && fit.power_agreement < kAgreementTol &&
                 upper_holds(ratios(check), range, fit.burn_in, fit.constant);
  if (fit.pass && !fit.verified) fit.note = "bound failed the independent re-check";
  fit.pass = fit.pass && fit.verified;
  return fit;
}

EnvelopeFit check_periodic_lower_bound(const Matrix& z, IndexRange range) {
  return periodic_lower(z, range, Matrix());
}

EnvelopeFit check_lower_bound_with_Q(const Matrix& z, const Matrix& q, IndexRange range) {
  if (!z.is_square() || z.empty() || q.rows() != z.rows() || q.cols() != z.cols())
    throw std::invalid_argument("Z and Q must be square matrices of the same size");
  const Matrix factor = psd_factor(q);
  if (factor.cols() == 0 || rank(controllability_matrix(z, factor)) < z.rows()) {
    EnvelopeFit fit;
    fit.applicable = false;
    fit.note = "(Z, sqrt(Q)) is not controllable";
    return fit;
  }
  return periodic_lower(z, range, sqrt_psd(q));
}

DmPropertiesReport check_dm_properties(const MarkovChannel& channel, IndexRange range) {
  require_valid(channel, false);
  check_range(range);
  DmPropertiesReport r;
  const std::size_t m = channel.states();
  const auto& d = channel.dropout;
  if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) {
    r.applicable = false;
    r.note = "D = 0 is an excluded trivial case";
    return r;
  }
  if (std::all_of(d.begin(), d.end(), [](double x) { return x == 1.0; })) {
    r.applicable = false;
    r.note = "D = I is an excluded trivial case";
    return r;
  }
  const Matrix dm = channel.drop_transition();
  r.rho_dm = perron_root(dm).value;
  r.rho_below_one = r.rho_dm < 1.0 - 1e-9;
  for (std::size_t j = 0; j < m; ++j)
    if (d[j] == 0.0) r.zero_dropout_states.push_back(j);
  r.part = r.zero_dropout_states.empty() ? "i" : "ii";
  if (r.rho_dm < 1e-12) {
    r.note = "DM is nilpotent; its powers vanish and no lower bound applies";
    r.pass = r.rho_below_one;
    return r;
  }

  const Matrix success = channel.success_transition();
  const PostSuccessSet post = post_success_set(channel);
  const ScaledPowers powers = scaled_powers(dm, range);
  const ScaledPowers powers_check = scaled_powers_by_squaring(dm, range);
  const ScaledPowers products = scaled_powers(dm, range, success);
  const ScaledPowers products_check = scaled_powers_by_squaring(dm, range, success);

  bool ok = r.rho_below_one;
  if (r.part == "i") {
    for (const Candidate& c : all_entries(m, m)) {
      r.power_fits.push_back(search_witness(powers, powers_check, r.rho_dm, {c}, m));
      ok = ok && r.power_fits.back().pass;
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k : post.indices) {
        r.product_fits.push_back(search_witness(products, products_check, r.rho_dm, {{j, k}}, m));
        ok = ok && r.product_fits.back().pass;
      }
    }
  } else {
    std::vector<Candidate> power_set, product_set;
    for (std::size_t j = 0; j < m; ++j) {
      if (d[j] == 0.0) continue;
      for (std::size_t k : r.zero_dropout_states) power_set.push_back({j, k});
      for (std::size_t k : post.indices) product_set.push_back({j, k});
    }
    r.power_fits.push_back(search_witness(powers, powers_check, r.rho_dm, power_set, m));
    r.product_fits.push_back(search_witness(products, products_check, r.rho_dm, product_set, m));
    ok = ok && r.power_fits.back().pass && r.product_fits.back().pass;
  }
  r.pass = ok;
  if (!r.rho_below_one) r.note = "rho(DM) is not below 1";
  return r;
}

TraceEnvelopeReport check_c_envelopes(const LtiSystem& sys, const SteadyStateFilter& filter, double epsilon,
                                      IndexRange range) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  check_range(range);
  const double rho = spectral_radius(sys.A).value;
  ErrorTraceSequence traces(sys, filter.covariance);
  std::vector<double> log_c;
  for (std::size_t i = range.first; i <= range.last; ++i) log_c.push_back(traces.log_trace(i));
  const std::optional<std::vector<double>> check = log_trace_by_split(sys, filter.covariance, range);

  TraceEnvelopeReport out;
  EnvelopeFit& up = out.upper;
  up.reference = rho * rho + epsilon;
  up.base = growth_base(log_c, range);
  auto upper_ratio = [&](const std::vector<double>& lc) {
    std::vector<double> r;
    for (std::size_t t = 0; t < lc.size(); ++t)
      r.push_back(lc[t] - static_cast<double>(range.first + t) * std::log(up.reference));
    return r;
  };
  fit_upper(up, upper_ratio(log_c), range);

  EnvelopeFit& low = out.lower;
  low.reference = rho * rho;
  low.base = up.base;
  low.burn_in = range.midpoint() - 1;
  auto lower_seq = [&](const std::vector<double>& lc) {
    std::vector<double> s;
    for (std::size_t t = 0; t < lc.size(); ++t)
      s.push_back(lc[t] - static_cast<double>(range.first + t) * std::log(low.reference));
    return s;
  };
  const LowerFit lf = fit_lower(lower_seq(log_c), range, 1);
  low.constant = std::exp(lf.log_eta);
  low.pass = lf.pass;
  if (!lf.pass) low.note = "lower envelope keeps decaying over the range";

  if (check) {
    double agreement = 0.0;
    for (std::size_t t = 0; t < log_c.size(); ++t)
      agreement = std::max(agreement, std::abs(std::expm1(log_c[t] - (*check)[t])));
    up.power_agreement = low.power_agreement = agreement;
    up.verified = agreement < kAgreementTol && up.burn_in < range.last &&
                  upper_holds(upper_ratio(*check), range, up.burn_in, up.constant);
    low.verified = agreement < kAgreementTol && lf.pass && lower_holds(lower_seq(*check), range, 1, lf.log_eta);
  } else {
    up.note = low.note = "independent re-check overflowed; range too large for plain doubles";
  }
  if (up.pass && !up.verified && up.note.empty()) up.note = "bound failed the independent re-check";
  if (low.pass && !low.verified && low.note.empty()) low.note = "bound failed the independent re-check";
  up.pass = up.pass && up.verified;
  low.pass = low.pass && low.verified;
  out.pass = up.pass && low.pass;
  return out;
}

}  // namespace remest
