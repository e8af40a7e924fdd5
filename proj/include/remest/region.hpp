#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "remest/channel.hpp"
#include "remest/cycle.hpp"
#include "remest/lti.hpp"

namespace remest {

/// One varied dropout probability: state index (zero-based) and its range.
struct ScanAxis {
  std::size_t state = 0;
  double lo = 0.0;
  double hi = 1.0;

  bool operator==(const ScanAxis&) const = default;
};

struct ScanCell {
  Vector dropout;
  double margin = 0.0;
  bool stable = false;
  double margin_sufficient = 0.0;
  bool stable_sufficient = false;
  /// Analytic J; empty when unbounded or not requested.
  std::optional<double> mse;
};

/// Cells in row-major order over the axes (first axis varies slowest).
struct RegionScan {
  std::vector<ScanAxis> axes;
  std::size_t resolution = 0;
  std::size_t states = 0;
  std::vector<ScanCell> cells;

  std::size_t stable_count() const;
  std::size_t sufficient_count() const;
  /// Cells stable under the sufficient test but not under the exact one.
  std::size_t containment_violations() const;
};

struct ScanOptions {
  bool compute_mse = true;
  double tol = kDefaultIterTol;
  unsigned workers = 1;
};

/// Evaluates both stability tests (and optionally J) at every grid point,
/// holding the non-varied dropout probabilities at their template values.
/// `filter` is required when options.compute_mse is set.
RegionScan region_scan(const LtiSystem& sys, const SteadyStateFilter* filter,
                       const MarkovChannel& channel_template, const std::vector<ScanAxis>& axes,
                       std::size_t resolution, const ScanOptions& options = {});

/// Header d1,...,dM,margin_thm1,stable_thm1,margin_eq15,stable_eq15,J;
/// 6 significant digits; J empty when unbounded.
std::string region_csv(const RegionScan& scan);

/// Heatmap of the exact margin over a one- or two-axis scan.
std::string region_svg(const RegionScan& scan);

}  // namespace remest
