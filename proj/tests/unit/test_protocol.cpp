#include <gtest/gtest.h>

#include "coronal/protocol.hpp"
#include "support.hpp"

using namespace coronal;
using namespace coronal::protocol;
using testing_support::block;

namespace {

const GridSpec kGrid(360, 180);

CoronalHole hole(int r0, int c0, int h, int w, Polarity p = Polarity::Positive) {
  return CoronalHole::from_pixels(block(r0, c0, h, w, kGrid), p, kGrid);
}

}  // namespace

TEST(Protocol, PolarDetection) {
  EXPECT_TRUE(is_polar(hole(25, 10, 5, 5), kGrid));   // reaches lat 65.5
  EXPECT_FALSE(is_polar(hole(35, 10, 5, 5), kGrid));  // tops out at 54.5
  EXPECT_TRUE(is_polar(hole(150, 10, 5, 5), kGrid));
}

TEST(Protocol, PolarCapsGroupOnlyWithinHemisphere) {
  const auto n1 = hole(5, 10, 3, 3), n2 = hole(5, 200, 3, 3), s1 = hole(170, 10, 3, 3);
  EXPECT_EQ(cluster_rule(n1, n2, kGrid), ClusterRule::PolarCap);
  EXPECT_FALSE(cluster_rule(n1, s1, kGrid).has_value());
}

TEST(Protocol, DistanceRules) {
  // 1 degree pixels: 0.0175 rad per column near the equator.
  const auto big = hole(85, 10, 10, 10), big2 = hole(85, 20, 10, 10);  // adjacent
  EXPECT_EQ(cluster_rule(big, big2, kGrid), ClusterRule::Nearby);
  const auto big3 = hole(85, 24, 10, 10);  // ~5 degrees: close but not near
  EXPECT_FALSE(cluster_rule(big, big3, kGrid).has_value());  // large-large never groups
  const auto s1 = hole(88, 40, 2, 2), s2 = hole(88, 45, 2, 2);
  EXPECT_EQ(cluster_rule(s1, s2, kGrid), ClusterRule::SmallSmall);
  const auto s3 = hole(88, 25, 2, 2);
  EXPECT_EQ(cluster_rule(big, s3, kGrid), ClusterRule::LargeSmall);
  EXPECT_FALSE(cluster_rule(s1, hole(88, 60, 2, 2), kGrid).has_value());
  EXPECT_FALSE(cluster_rule(s1, hole(88, 45, 2, 2, Polarity::Negative), kGrid).has_value());
}

TEST(Protocol, MatchRules) {
  const auto a = block(80, 10, 10, 10, kGrid);
  EXPECT_EQ(match_rule(a, block(80, 12, 10, 10, kGrid), kGrid), MatchRule::MidMid);
  EXPECT_FALSE(match_rule(a, block(80, 40, 10, 10, kGrid), kGrid).has_value());
  // Weak overlap, but the model is centred on the reference.
  PixelSet flank = block(80, 5, 10, 5, kGrid);
  for (const auto& px : block(80, 20, 10, 5, kGrid)) flank.push_back(px);
  PixelSet sliced = flank;
  for (const auto& px : block(80, 14, 10, 1, kGrid)) sliced.push_back(px);
  normalize(flank);
  normalize(sliced);
  EXPECT_NEAR(overlap_fraction(a, sliced, kGrid), 0.1, 1e-12);
  EXPECT_EQ(match_rule(a, sliced, kGrid), MatchRule::MidMid);
  EXPECT_FALSE(match_rule(a, flank, kGrid).has_value());
  const auto p1 = block(5, 0, 20, 60, kGrid), p2 = block(5, 0, 20, 50, kGrid);
  EXPECT_EQ(match_rule(p1, p2, kGrid), MatchRule::PolarPolar);
  EXPECT_FALSE(match_rule(p1, block(5, 55, 20, 20, kGrid), kGrid).has_value());
  EXPECT_EQ(match_rule(block(35, 0, 10, 10, kGrid), block(25, 0, 20, 10, kGrid), kGrid), MatchRule::PolarMid);
}

TEST(Protocol, GroupLabels) {
  EXPECT_TRUE(group_label(Rank::First, true, true));
  EXPECT_TRUE(group_label(Rank::Second, true, true));
  EXPECT_TRUE(group_label(Rank::First, true, false));
  EXPECT_FALSE(group_label(Rank::Second, true, false));
  EXPECT_FALSE(group_label(Rank::First, false, false));
  EXPECT_FALSE(group_label(Rank::Second, false, true));
}
