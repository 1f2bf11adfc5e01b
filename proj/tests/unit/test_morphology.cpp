#include <random>

#include <gtest/gtest.h>

#include "coronal/morphology.hpp"
#include "support.hpp"

using namespace coronal;

namespace {

// Oracle on the plane of rows (-inf, inf) x periodic columns.
bool in_field(const BoolField& f, int r, int c) {
  if (r < 0 || r >= f.rows()) return false;
  return f(r, f.wrap_col(c)) != 0;
}

bool in_dilation(const BoolField& f, int r, int c, int radius) {
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius && in_field(f, r - dr, c - dc)) return true;
  return false;
}

BoolField closing_oracle(const BoolField& f, int radius) {
  BoolField out(f.rows(), f.cols(), 0);
  for (int r = 0; r < f.rows(); ++r)
    for (int c = 0; c < f.cols(); ++c) {
      bool all = true;
      for (int dr = -radius; dr <= radius && all; ++dr)
        for (int dc = -radius; dc <= radius && all; ++dc)
          if (dr * dr + dc * dc <= radius * radius && !in_dilation(f, r + dr, c + dc, radius)) all = false;
      out(r, c) = all ? 1 : 0;
    }
  return out;
}

}  // namespace

TEST(Morphology, DiscElementRadiusOneIsPlus) {
  EXPECT_EQ(disc_element(0).size(), 1u);
  EXPECT_EQ(disc_element(1).size(), 5u);
  EXPECT_EQ(disc_element(2).size(), 13u);
}

TEST(Morphology, ClosingMatchesBruteForceOracle) {
  std::mt19937_64 rng(8);
  for (int radius : {1, 2}) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto f = testing_support::random_bool_field(16, 16, 0.3, rng);
      EXPECT_EQ(binary_close(f, radius), closing_oracle(f, radius)) << "radius " << radius;
    }
  }
}

TEST(Morphology, ClosingIsExtensiveAndIdempotent) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const auto f = testing_support::random_bool_field(16, 20, 0.25, rng);
    const auto c1 = binary_close(f, 1);
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f[i]) EXPECT_TRUE(c1[i]);
    EXPECT_EQ(binary_close(c1, 1), c1);
  }
}

TEST(Morphology, ClosingWrapsInLongitude) {
  BoolField f(5, 8, 0);
  for (int r = 1; r <= 3; ++r) f(r, 7) = f(r, 1) = 1;
  const auto c = binary_close(f, 1);
  EXPECT_TRUE(c(2, 0));
}

TEST(Morphology, ErodeIsInsideDilate) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const auto f = testing_support::random_bool_field(12, 12, 0.6, rng);
    const auto e = erode(f, 1), d = dilate(f, 1);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (e[i]) EXPECT_TRUE(f[i]);
      if (f[i]) EXPECT_TRUE(d[i]);
    }
  }
}
