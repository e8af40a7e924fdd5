#include "remest/region.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "remest/parallel.hpp"

namespace remest {
namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Rgb {
  double r, g, b;
};

Rgb mix(Rgb a, Rgb b, double t) {
  t = std::clamp(t, 0.0, 1.0);
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Stable cells: white (margin 0) to blue (margin 1). Unstable: light red
// (margin 1) to dark red (margin >= 2).
std::string ramp(double margin) {
  const Rgb c = margin < 1.0 ? mix({255, 255, 255}, {33, 102, 172}, margin)
                             : mix({253, 219, 199}, {178, 24, 43}, margin - 1.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
  return buf;
}

}  // namespace

std::size_t RegionScan::stable_count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const ScanCell& c) { return c.stable; }));
}

std::size_t RegionScan::sufficient_count() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const ScanCell& c) { return c.stable_sufficient; }));
}

std::size_t RegionScan::containment_violations() const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [](const ScanCell& c) { return c.stable_sufficient && !c.stable; }));
}

RegionScan region_scan(const LtiSystem& sys, const SteadyStateFilter* filter,
                       const MarkovChannel& channel_template, const std::vector<ScanAxis>& axes,
                       std::size_t resolution, const ScanOptions& options) {
  require_valid(channel_template, false);
  if (axes.empty()) throw std::invalid_argument("region scan needs at least one axis");
  if (resolution < 2) throw std::invalid_argument("resolution must be at least 2 per axis");
  std::set<std::size_t> seen;
  for (const ScanAxis& axis : axes) {
    if (axis.state >= channel_template.states())
      throw std::invalid_argument("scan axis state " + std::to_string(axis.state + 1) + " does not exist");
    if (!seen.insert(axis.state).second) throw std::invalid_argument("scan axis state declared twice");
    if (!(axis.lo >= 0.0 && axis.hi <= 1.0 && axis.lo <= axis.hi))
      throw std::invalid_argument("scan axis range must lie within [0, 1]");
  }
  if (options.compute_mse && filter == nullptr) throw std::invalid_argument("region scan with J needs a filter");

  RegionScan scan;
  scan.axes = axes;
  scan.resolution = resolution;
  scan.states = channel_template.states();
  std::size_t count = 1;
  for (std::size_t k = 0; k < axes.size(); ++k) count *= resolution;
  scan.cells.resize(count);

  const double rho_a = spectral_radius(sys.A, options.tol).value;
  const double sigma_a = largest_singular_value(sys.A, options.tol).value;
  const unsigned workers = std::max(1u, options.workers);
  std::vector<std::optional<ErrorTraceSequence>> traces(workers);

  parallel_for(count, workers, [&](std::size_t index, unsigned worker) {
    MarkovChannel channel = channel_template;
    std::size_t rest = index;
    for (std::size_t k = axes.size(); k-- > 0;) {
      const std::size_t step = rest % resolution;
      rest /= resolution;
      const ScanAxis& axis = axes[k];
      channel.dropout[axis.state] =
          axis.lo + (axis.hi - axis.lo) * static_cast<double>(step) / static_cast<double>(resolution - 1);
    }
    const StabilityReport report = stability_margin(rho_a, sigma_a, channel, options.tol);
    ScanCell& cell = scan.cells[index];
    cell.dropout = channel.dropout;
    cell.margin = report.margin;
    cell.stable = report.stable;
    cell.margin_sufficient = report.margin_sufficient;
    cell.stable_sufficient = report.stable_sufficient;
    if (options.compute_mse && report.stable) {
      if (!traces[worker]) traces[worker].emplace(sys, filter->covariance);
      const MseResult mse = analytic_mse(report, *traces[worker], channel, options.tol);
      if (mse.bounded) cell.mse = mse.value;
    }
  });
  return scan;
}

std::string region_csv(const RegionScan& scan) {
  std::ostringstream os;
  for (std::size_t j = 0; j < scan.states; ++j) os << 'd' << (j + 1) << ',';
  os << "margin_thm1,stable_thm1,margin_eq15,stable_eq15,J\n";
  for (const ScanCell& cell : scan.cells) {
    for (double d : cell.dropout) os << fmt6(d) << ',';
    os << fmt6(cell.margin) << ',' << (cell.stable ? 1 : 0) << ',' << fmt6(cell.margin_sufficient) << ','
       << (cell.stable_sufficient ? 1 : 0) << ',';
    if (cell.mse) os << fmt6(*cell.mse);
    os << '\n';
  }
  return os.str();
}

std::string region_svg(const RegionScan& scan) {
  if (scan.axes.size() > 2) throw std::invalid_argument("SVG heatmaps support one or two scan axes");
  const int cell = scan.resolution > 60 ? 4 : 400 / static_cast<int>(scan.resolution);
  const int nx = static_cast<int>(scan.resolution);
  const int ny = scan.axes.size() == 2 ? nx : 1;
  const int margin = 40;
  const int width = nx * cell + 2 * margin;
  const int height = ny * cell + 2 * margin;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t index = 0; index < scan.cells.size(); ++index) {
    const int ix = ny == 1 ? static_cast<int>(index) : static_cast<int>(index / scan.resolution);
    const int iy = ny == 1 ? 0 : static_cast<int>(index % scan.resolution);
    const int x = margin + ix * cell;
    const int y = margin + (ny - 1 - iy) * cell;
    const ScanCell& c = scan.cells[index];
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
       << ramp(c.margin) << "\"/>\n";
    if (c.stable_sufficient) {
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"black\" fill-opacity=\"0.25\"/>\n";
    }
  }
  os << "<text x=\"" << margin << "\" y=\"" << height - 10 << "\" font-size=\"12\">d"
     << scan.axes[0].state + 1 << " [" << fmt6(scan.axes[0].lo) << ", " << fmt6(scan.axes[0].hi) << "]</text>\n";
  if (ny > 1) {
    os << "<text x=\"4\" y=\"" << margin - 10 << "\" font-size=\"12\">d" << scan.axes[1].state + 1 << " ["
       << fmt6(scan.axes[1].lo) << ", " << fmt6(scan.axes[1].hi) << "]</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace remest
