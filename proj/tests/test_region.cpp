#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "remest/linalg.hpp"
#include "remest/region.hpp"

using namespace remest;
using remest::test::pendubot;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(RegionScan, CsvLayoutAndOrdering) {
  const LtiSystem s = pendubot();
  const SteadyStateFilter f = riccati_steady_state(s);
  const std::vector<ScanAxis> axes{{0, 0.0, 1.0}, {1, 0.0, 1.0}};
  const RegionScan scan = region_scan(s, &f, test::two_state(0.8, 0.1), axes, 5, {true, 1e-9, 3});
  ASSERT_EQ(scan.cells.size(), 25u);
  // First axis varies slowest.
  EXPECT_EQ(scan.cells[1].dropout, (Vector{0.0, 0.25}));
  EXPECT_EQ(scan.cells[5].dropout, (Vector{0.25, 0.0}));
  const auto lines = lines_of(region_csv(scan));
  ASSERT_EQ(lines.size(), 26u);
  EXPECT_EQ(lines[0], "d1,d2,margin_thm1,stable_thm1,margin_eq15,stable_eq15,J");
  // The all-loss corner is unstable and has an empty J column.
  EXPECT_FALSE(scan.cells.back().stable);
  EXPECT_EQ(lines.back().back(), ',');
  for (const ScanCell& c : scan.cells) EXPECT_EQ(c.mse.has_value(), c.stable);
}

TEST(RegionScan, ResolutionTwoHitsCorners) {
  const LtiSystem s = pendubot();
  const RegionScan scan =
      region_scan(s, nullptr, test::two_state(0.8, 0.1), {{0, 0.2, 0.6}, {1, 0.1, 0.3}}, 2, {false, 1e-9, 1});
  ASSERT_EQ(scan.cells.size(), 4u);
  EXPECT_EQ(scan.cells[0].dropout, (Vector{0.2, 0.1}));
  EXPECT_EQ(scan.cells[3].dropout, (Vector{0.6, 0.3}));
  for (const ScanCell& c : scan.cells) EXPECT_FALSE(c.mse.has_value());
}

TEST(RegionScan, RejectsBadAxes) {
  const LtiSystem s = pendubot();
  const MarkovChannel ch = test::two_state(0.8, 0.1);
  EXPECT_THROW(region_scan(s, nullptr, ch, {{0, -0.1, 1.0}}, 5, {false}), std::invalid_argument);
  EXPECT_THROW(region_scan(s, nullptr, ch, {{2, 0.0, 1.0}}, 5, {false}), std::invalid_argument);
  EXPECT_THROW(region_scan(s, nullptr, ch, {{0, 0.0, 1.0}}, 1, {false}), std::invalid_argument);
}

TEST(RegionScan, OnOffBoundaryMatchesClosedForm) {
  // d1 = 0: DM = [[0, 0], [d p21, d p22]] so rho(DM) = d p22 and the
  // boundary sits at d = 1 / (rho(A)² p22).
  const LtiSystem s = pendubot();
  const MarkovChannel ch{Matrix{{0.3, 0.7}, {0.05, 0.95}}, {0.0, 0.0}, std::nullopt};
  const double rho = spectral_radius(s.A).value;
  const double boundary = 1.0 / (rho * rho * 0.95);
  const RegionScan scan = region_scan(s, nullptr, ch, {{1, 0.0, 1.0}}, 201, {false, 1e-9, 2});
  for (const ScanCell& c : scan.cells) {
    const double d = c.dropout[1];
    if (std::abs(d - boundary) < 1e-6) continue;
    EXPECT_EQ(c.stable, d < boundary) << d;
    EXPECT_NEAR(c.margin, rho * rho * 0.95 * d, 1e-9);
  }
}

TEST(RegionScan, StablePlantIsStableEverywhere) {
  LtiSystem s = pendubot();
  s.A = s.A * 0.8;
  const RegionScan scan =
      region_scan(s, nullptr, test::two_state(0.8, 0.1), {{0, 0.0, 1.0}, {1, 0.0, 1.0}}, 11, {false, 1e-9, 2});
  EXPECT_EQ(scan.stable_count(), scan.cells.size());
}

TEST(RegionScan, SvgHeatmap) {
  const LtiSystem s = pendubot();
  const RegionScan scan =
      region_scan(s, nullptr, test::two_state(0.8, 0.1), {{0, 0.0, 1.0}, {1, 0.0, 1.0}}, 4, {false, 1e-9, 1});
  const std::string svg = region_svg(scan);
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t rects = 0;
  for (std::size_t pos = svg.find("<rect"); pos != std::string::npos; pos = svg.find("<rect", pos + 1)) ++rects;
  EXPECT_GE(rects, 16u);
}
