#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "remest/channel.hpp"
#include "remest/rng.hpp"

using namespace remest;
using remest::test::two_state;

namespace {

MarkovChannel make(Matrix p, Vector d) { return MarkovChannel{std::move(p), std::move(d), std::nullopt}; }

// Independent oracle for the finite-blocklength approximation.
double snr_oracle(double h, double zeta, double rate) {
  const double log2e = 1.0 / std::log(2.0);
  const double cap = std::log2(1.0 + h);
  const double disp = h * (2.0 + h) / ((1.0 + h) * (1.0 + h)) * log2e * log2e;
  return 0.5 * std::erfc(std::sqrt(zeta / disp) * (cap - rate) / std::sqrt(2.0));
}

}  // namespace

TEST(ChannelValidate, Examples) {
  const ChannelValidation v = validate(two_state(0.8, 0.1));
  EXPECT_TRUE(v.valid());
  EXPECT_TRUE(v.issues.empty());

  const ChannelValidation periodic = validate(make(Matrix{{0, 1}, {1, 0}}, {1, 0}));
  EXPECT_TRUE(periodic.well_formed());
  EXPECT_TRUE(periodic.irreducible);
  EXPECT_FALSE(periodic.ergodic);
  EXPECT_FALSE(periodic.valid());
  EXPECT_FALSE(periodic.issues.empty());

  const ChannelValidation reducible = validate(make(Matrix::identity(2), {0.5, 0.5}));
  EXPECT_FALSE(reducible.irreducible);
  EXPECT_FALSE(reducible.valid());
  EXPECT_NO_THROW(require_valid(make(Matrix::identity(2), {0.5, 0.5}), false));
  EXPECT_THROW(require_valid(make(Matrix::identity(2), {0.5, 0.5}), true), std::invalid_argument);
}

TEST(ChannelValidate, NamesOffendingEntries) {
  const ChannelValidation rows = validate(make(Matrix{{0.2, 0.7}, {0.5, 0.5}}, {0.1, 0.1}));
  EXPECT_FALSE(rows.row_stochastic);
  ASSERT_FALSE(rows.issues.empty());
  EXPECT_NE(rows.issues.front().find("row 0"), std::string::npos);

  const ChannelValidation drop = validate(make(Matrix{{0.5, 0.5}, {0.5, 0.5}}, {0.1, 1.5}));
  EXPECT_FALSE(drop.dropout_in_range);
  const ChannelValidation neg = validate(make(Matrix{{1.2, -0.2}, {0.5, 0.5}}, {0.1, 0.1}));
  EXPECT_FALSE(neg.probabilities_in_range);
  EXPECT_THROW(validate(make(Matrix{{0.5, 0.5}, {0.5, 0.5}}, {0.1})), std::invalid_argument);
}

TEST(StationaryDistribution, Examples) {
  const Vector half = stationary_distribution(make(Matrix{{0.5, 0.5}, {0.5, 0.5}}, {0, 0}));
  EXPECT_NEAR(half[0], 0.5, 1e-12);
  const Vector pi = stationary_distribution(two_state(0.8, 0.1));
  EXPECT_NEAR(pi[0], 5.0 / 14.0, 1e-12);
  EXPECT_NEAR(pi[1], 9.0 / 14.0, 1e-12);
  EXPECT_THROW(stationary_distribution(make(Matrix::identity(2), {0.5, 0.5})), std::invalid_argument);
}

TEST(StationaryDistribution, RandomChainsAreFixedPoints) {
  std::mt19937_64 gen(23);
  for (int trial = 0; trial < 100; ++trial) {
    const MarkovChannel ch = make(test::random_stochastic(5, gen), Vector(5, 0.3));
    const Vector pi = stationary_distribution(ch);
    const Vector pi_p = left_multiply(pi, ch.transition);
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_GT(pi[j], 0.0);
      EXPECT_NEAR(pi_p[j], pi[j], 1e-10);
    }
    EXPECT_NEAR(norm1(pi), 1.0, 1e-12);
  }
}

TEST(PostSuccessSet, Examples) {
  const PostSuccessSet ex2 = post_success_set(make(Matrix{{0, 1}, {1, 0}}, {1, 0}));
  ASSERT_EQ(ex2.size(), 1u);
  EXPECT_EQ(ex2.indices[0], 0u);
  EXPECT_TRUE(ex2.contains(0));
  EXPECT_FALSE(ex2.contains(1));

  EXPECT_EQ(post_success_set(two_state(0.8, 0.1)).size(), 2u);
  EXPECT_THROW(post_success_set(two_state(1.0, 1.0)), std::domain_error);
}

TEST(PostSuccessSet, MatchesPositiveColumnsOfSuccessTransition) {
  std::mt19937_64 gen(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + trial % 4;
    Matrix p = test::random_stochastic(m, gen);
    // Sparsify a few entries while keeping rows stochastic.
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = static_cast<std::size_t>(u(gen) * static_cast<double>(m)) % m;
      const double mass = p(i, j);
      p(i, j) = 0.0;
      p(i, (j + 1) % m) += mass;
    }
    Vector d(m);
    for (auto& x : d) x = u(gen) < 0.4 ? 1.0 : u(gen);
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 1.0; })) d[0] = 0.5;
    const MarkovChannel ch = make(p, d);
    const PostSuccessSet set = post_success_set(ch);
    const Matrix s = ch.success_transition();
    for (std::size_t j = 0; j < m; ++j) {
      bool positive = false;
      for (std::size_t i = 0; i < m; ++i) positive = positive || s(i, j) > 0.0;
      EXPECT_EQ(set.contains(j), positive);
    }
  }
}

TEST(DropoutFromSnr, FormulaValues) {
  // The normal approximation evaluated independently.
  EXPECT_NEAR(dropout_from_snr(300, 200, 8), snr_oracle(300, 200, 8), 1e-12);
  EXPECT_NEAR(dropout_from_snr(250, 200, 8), snr_oracle(250, 200, 8), 1e-12);
  EXPECT_NEAR(dropout_from_snr(300, 200, 8), 0.011008, 1e-6);
  EXPECT_NEAR(dropout_from_snr(250, 200, 8), 0.609858, 1e-6);
}

TEST(DropoutFromSnr, RateAtCapacityIsHalf) {
  for (double h : {1.0, 10.0, 255.0}) EXPECT_NEAR(dropout_from_snr(h, 100, std::log2(1.0 + h)), 0.5, 1e-12);
  EXPECT_NEAR(gaussian_q(0.0), 0.5, 1e-15);
  EXPECT_NEAR(gaussian_q(1.959963984540054), 0.025, 1e-12);
}

TEST(DropoutFromSnr, Monotone) {
  // Grids chosen so the values stay strictly inside (0, 1) in double.
  double prev = 1.0;
  for (int k = 0; k < 100; ++k) {
    const double h = 200.0 + 2.0 * k;
    const double e = dropout_from_snr(h, 200, 8);
    EXPECT_LT(e, prev) << h;
    prev = e;
  }
  prev = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double r = 7.5 + 0.01 * k;
    const double e = dropout_from_snr(250, 200, r);
    EXPECT_GT(e, prev) << r;
    prev = e;
  }
}

TEST(SampleStep, DegenerateDropouts) {
  Rng rng(1, Stream::kChannel);
  const MarkovChannel ch = two_state(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    EXPECT_FALSE(sample_step(ch, 0, rng).dropped);
    EXPECT_TRUE(sample_step(ch, 1, rng).dropped);
  }
}

TEST(SampleStep, FrequenciesMatchTransitionRows) {
  const MarkovChannel ch = two_state(0.8, 0.1);
  Rng rng(42, Stream::kChannel);
  std::array<std::array<double, 2>, 2> counts{};
  std::array<double, 2> visits{}, drops{};
  std::size_t state = 0;
  for (int k = 0; k < 1000000; ++k) {
    const ChannelStep s = sample_step(ch, state, rng);
    visits[state] += 1;
    drops[state] += s.dropped;
    counts[state][s.next_state] += 1;
    state = s.next_state;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(counts[i][j] / visits[i], ch.transition(i, j), 0.002);
    EXPECT_NEAR(drops[i] / visits[i], ch.dropout[i], 0.002);
  }
}

TEST(SampleStep, Reproducible) {
  const MarkovChannel ch = two_state(0.8, 0.1);
  Rng a(7, Stream::kChannel), b(7, Stream::kChannel);
  std::size_t sa = 1, sb = 1;
  for (int k = 0; k < 10000; ++k) {
    const ChannelStep x = sample_step(ch, sa, a), y = sample_step(ch, sb, b);
    ASSERT_EQ(x.next_state, y.next_state);
    ASSERT_EQ(x.dropped, y.dropped);
    sa = x.next_state;
    sb = y.next_state;
  }
}

TEST(Rng, StreamsDifferAndUniformRange) {
  Rng a(5, Stream::kChannel), b(5, Stream::kProcessNoise), c(6, Stream::kChannel);
  const double ua = a.uniform();
  EXPECT_NE(ua, b.uniform());
  EXPECT_NE(ua, c.uniform());
  Rng r(9, Stream::kMeasurementNoise);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(SampleIndex, Boundaries) {
  const Vector p{0.25, 0.0, 0.75};
  EXPECT_EQ(sample_index(p, 0.0), 0u);
  EXPECT_EQ(sample_index(p, 0.2499), 0u);
  EXPECT_EQ(sample_index(p, 0.25), 2u);
  EXPECT_EQ(sample_index(p, 0.999999), 2u);
}
