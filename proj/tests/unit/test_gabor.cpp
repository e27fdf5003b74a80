#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "activebasis/error.hpp"
#include "activebasis/gabor.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace abm;

namespace {

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double norm(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

}  // namespace

TEST(Gabor, DefaultSupportIs17AndComponentsAreNormalized) {
  const Dictionary dict;
  ASSERT_EQ(dict.length(), 17);
  ASSERT_EQ(dict.orientations(), 15);
  for (int o = 0; o < 15; ++o) {
    const GaborElement& g = dict.prototype(o);
    EXPECT_EQ(g.cosine.size(), 17u * 17u);
    EXPECT_EQ(g.sine.size(), 17u * 17u);
    EXPECT_LE(std::abs(mean(g.cosine)), 1e-9);
    EXPECT_LE(std::abs(mean(g.sine)), 1e-9);
    EXPECT_LE(std::abs(norm(g.cosine) - 1.0), 1e-9);
    EXPECT_LE(std::abs(norm(g.sine) - 1.0), 1e-9);
    EXPECT_LE(std::abs(std::inner_product(g.cosine.begin(), g.cosine.end(), g.sine.begin(), 0.0)), 1e-6);
  }
}

TEST(Gabor, AngleNearPiMirrorsAngleZero) {
  const GaborParams p;
  const GaborElement a = make_gabor(p, 0.0, p.default_scale());
  const GaborElement b = make_gabor(p, kPi - 1e-9, p.default_scale());
  for (std::size_t i = 0; i < a.cosine.size(); ++i) {
    EXPECT_NEAR(a.cosine[i], b.cosine[i], 1e-7);
    EXPECT_NEAR(a.sine[i], -b.sine[i], 1e-7);
  }
}

TEST(Gabor, AlphaZeroWaveRunsAlongColumns) {
  const Dictionary dict;
  const GaborElement& g = dict.prototype(0);
  // Constant down each column near the centre: the bar is vertical.
  EXPECT_NEAR(g.cos_at(0, -1), g.cos_at(0, 1), 1e-12);
  EXPECT_GT(std::abs(g.cos_at(0, 0) - g.cos_at(2, 0)), 0.01);
}

TEST(Gabor, InvalidInputsThrow) {
  GaborParams p;
  p.length_px = 16;
  EXPECT_THROW(Dictionary{p}, ConfigError);
  p.length_px = 3;
  EXPECT_THROW(Dictionary{p}, ConfigError);
  p = {};
  p.orientations = 1;
  EXPECT_THROW(Dictionary{p}, ConfigError);
  p = {};
  p.aspect = 1.0;
  EXPECT_THROW(Dictionary{p}, ConfigError);
  EXPECT_THROW(make_gabor({}, kPi, 6.8), ConfigError);
  EXPECT_THROW(make_gabor({}, -0.1, 6.8), ConfigError);
  EXPECT_THROW(make_gabor({}, 0.0, 0.0), ConfigError);
  // Period of 2 px on a 5 px support makes the sine vanish.
  p = {};
  p.length_px = 5;
  EXPECT_THROW(Dictionary{p}, ConfigError);
}

TEST(Correlation, SelfIsTwo) {
  const Dictionary dict;
  for (int o = 0; o < dict.orientations(); ++o) {
    EXPECT_NEAR(dict.correlation({10, 10, o}, {10, 10, o}), 2.0, 1e-9);
    const GaborElement& g = dict.prototype(o);
    EXPECT_NEAR(correlation(g, 0, 0, g, 0, 0), 2.0, 1e-9);
  }
}

TEST(Correlation, DisjointSupportsGiveZero) {
  const Dictionary dict;
  EXPECT_EQ(dict.correlation({0, 0, 3}, {17, 0, 3}), 0.0);
  EXPECT_EQ(dict.correlation({0, 0, 3}, {30, 25, 7}), 0.0);
  EXPECT_EQ(correlation(dict.prototype(2), 0, 0, dict.prototype(5), 0, 17), 0.0);
}

TEST(Correlation, ShiftByFourMatchesDenseOracle) {
  const Dictionary dict;
  const double oracle = test::dense_correlation(dict, {0, 0, 0}, {4, 0, 0});
  EXPECT_NEAR(dict.correlation({0, 0, 0}, {4, 0, 0}), oracle, 1e-10);
  EXPECT_NEAR(correlation(dict.prototype(0), 0, 0, dict.prototype(0), 4, 0), oracle, 1e-10);
  EXPECT_GT(oracle, 0.0);
  EXPECT_LT(oracle, 2.0);
}

TEST(Correlation, PropertySymmetricBoundedAndMatchesOracle) {
  const Dictionary dict;
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> off(-18, 18), ori(0, 14);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose a{0, 0, ori(rng)};
    const Pose b{off(rng), off(rng), ori(rng)};
    const double ab = dict.correlation(a, b);
    const double ba = dict.correlation(b, a);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_LE(ab, 2.0 + 1e-9);
    EXPECT_GE(ab, 0.0);
    if (trial < 40) EXPECT_NEAR(ab, test::dense_correlation(dict, a, b), 1e-10);
  }
}

TEST(Correlation, TableMatchesDirectOverlapOnToyDictionary) {
  const Dictionary dict = test::toy_dictionary();
  const auto& table = dict.correlations();
  for (int o1 = 0; o1 < 3; ++o1) {
    for (int o2 = 0; o2 < 3; ++o2) {
      for (int dy = -6; dy <= 6; ++dy) {
        for (int dx = -6; dx <= 6; ++dx) {
          const double direct = correlation(dict.prototype(o1), 0, 0, dict.prototype(o2), dx, dy);
          EXPECT_NEAR(table.corr(o1, o2, dx, dy), direct, 1e-12);
        }
      }
    }
  }
}

TEST(Dictionary, CopiesShareTheCorrelationTable) {
  const Dictionary a = test::toy_dictionary();
  const Dictionary b = a;
  EXPECT_EQ(&a.correlations(), &b.correlations());
}
