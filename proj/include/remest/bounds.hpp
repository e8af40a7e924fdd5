#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "remest/channel.hpp"
#include "remest/lti.hpp"
#include "remest/matrix.hpp"

namespace remest {

/// Inclusive range of matrix-power exponents.
struct IndexRange {
  std::size_t first = 1;
  std::size_t last = 200;

  std::size_t size() const { return last - first + 1; }
  std::size_t midpoint() const { return first + size() / 2; }

  bool operator==(const IndexRange&) const = default;
};

/// Result of fitting an exponential envelope to a power sequence.
struct EnvelopeFit {
  bool applicable = true;
  /// Why the check was refused or failed.
  std::string note;
  /// Growth rate of the sequence over the second half of the range.
  double base = 0.0;
  /// Envelope base the sequence is compared against.
  double reference = 0.0;
  /// Fitted kappa (upper bounds) or eta (lower bounds).
  double constant = 0.0;
  std::size_t burn_in = 0;
  std::size_t period = 1;
  /// One-based witness entry (0 when the fit is about the max entry).
  std::size_t row = 0;
  std::size_t col = 0;
  /// Second pass: powers recomputed by repeated squaring confirm the
  /// inequality over the whole tested range.
  bool verified = false;
  /// Largest disagreement between the two power computations, relative to
  /// the largest entry of each power.
  double power_agreement = 0.0;
  bool pass = false;
};

/// Powers Z^first..Z^last stored as log scale plus a max-normalised matrix.
/// Entries are exact zeros where the iteration produces them.
struct ScaledPowers {
  IndexRange range;
  std::vector<Matrix> normalized;
  std::vector<double> log_scale;

  double log_abs(std::size_t i, std::size_t j, std::size_t k) const;
  double log_max(std::size_t i) const;
};

/// Iterated multiplication with renormalisation; `right` (if nonempty)
/// multiplies every power on the right.
ScaledPowers scaled_powers(const Matrix& z, IndexRange range, const Matrix& right = Matrix());
/// The same table built independently by repeated squaring of Z.
ScaledPowers scaled_powers_by_squaring(const Matrix& z, IndexRange range, const Matrix& right = Matrix());

/// max_{j,k} |[Zⁱ]_{j,k}|² < kappa (rho(Z) + epsilon)^(2i) beyond the burn-in.
/// The burn-in N is the smallest index after which the bound holds with
/// kappa <= 1; kappa is then the supremum over i > N. Passes when N lies in
/// the first half of the range.
EnvelopeFit check_upper_bound(const Matrix& z, double epsilon, IndexRange range = {});

/// Searches periods l = 1..dim(Z) and entries (j, k) in row-major order for
/// a witness whose window maxima over l consecutive powers stay above
/// eta rho(Z)ⁱ. eta is fitted over the second half of the range (the burn-in
/// is the midpoint), and a witness passes only if the window maxima do not
/// keep decaying between the third and the fourth quarter.
EnvelopeFit check_periodic_lower_bound(const Matrix& z, IndexRange range = {});

/// Same on Zⁱ √Q. Refuses (applicable = false) when (Z, √Q) is not
/// controllable.
EnvelopeFit check_lower_bound_with_Q(const Matrix& z, const Matrix& q, IndexRange range = {});

struct DmPropertiesReport {
  bool applicable = true;
  std::string note;
  double rho_dm = 0.0;
  bool rho_below_one = false;
  /// Zero-based states with d_j = 0.
  std::vector<std::size_t> zero_dropout_states;
  /// "i" when no state has d_j = 0, "ii" otherwise.
  std::string part;
  /// Part (i): one fit per entry of (DM)ⁱ. Part (ii): the first witness
  /// with j outside and k inside the zero-dropout set.
  std::vector<EnvelopeFit> power_fits;
  /// Same for (DM)ⁱ (I - D) M.
  std::vector<EnvelopeFit> product_fits;
  bool pass = false;
};

/// Refuses D = 0 and D = I.
DmPropertiesReport check_dm_properties(const MarkovChannel& channel, IndexRange range = {});

struct TraceEnvelopeReport {
  /// c(i) < kappa (rho²(A) + epsilon)ⁱ.
  EnvelopeFit upper;
  /// c(i) >= eta rho(A)^(2i), period 1 since c is nondecreasing.
  EnvelopeFit lower;
  bool pass = false;
};

/// Throws std::invalid_argument when the range has fewer than 8 indices.
TraceEnvelopeReport check_c_envelopes(const LtiSystem& sys, const SteadyStateFilter& filter, double epsilon,
                                      IndexRange range = {});

}  // namespace remest
