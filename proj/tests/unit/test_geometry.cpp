#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "coronal/error.hpp"
#include "coronal/geometry.hpp"
#include "support.hpp"

using namespace coronal;

namespace {

// Independent haversine, written out longhand.
double haversine_deg(double lat1, double lon1, double lat2, double lon2) {
  const double d2r = 3.14159265358979323846 / 180.0;
  const double a = std::pow(std::sin((lat2 - lat1) * d2r / 2), 2) +
                   std::cos(lat1 * d2r) * std::cos(lat2 * d2r) * std::pow(std::sin((lon2 - lon1) * d2r / 2), 2);
  return 2.0 * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace

TEST(PixelToSphere, GridCentre) {
  const GridSpec g(360, 180);
  const auto p = pixel_to_sphere(89, 179, g);
  EXPECT_DOUBLE_EQ(p.lat, 0.5);
  EXPECT_DOUBLE_EQ(p.lon, 179.5);
}

TEST(PixelToSphere, Corner) {
  const auto p = pixel_to_sphere(0, 0, GridSpec(360, 180));
  EXPECT_DOUBLE_EQ(p.lat, 89.5);
  EXPECT_DOUBLE_EQ(p.lon, 0.5);
}

TEST(PixelToSphere, Row45Col300) {
  const auto p = pixel_to_sphere(45, 300, GridSpec(360, 180));
  EXPECT_DOUBLE_EQ(p.lat, 44.5);
  EXPECT_DOUBLE_EQ(p.lon, 300.5);
}

TEST(PixelToSphere, OutOfRangeThrows) {
  const GridSpec g(360, 180);
  EXPECT_THROW(pixel_to_sphere(180, 0, g), ContractViolation);
  EXPECT_THROW(pixel_to_sphere(0, -1, g), ContractViolation);
}

TEST(GridSpecTest, RejectsDegenerateGrids) {
  EXPECT_THROW(GridSpec(1, 180), ContractViolation);
  EXPECT_THROW(GridSpec(360, 1), ContractViolation);
}

TEST(GeodesicDistance, Identity) {
  EXPECT_EQ(geodesic_distance({12.0, 34.0}, {12.0, 34.0}, 1.0), 0.0);
}

TEST(GeodesicDistance, AntipodalOnEquator) {
  EXPECT_NEAR(geodesic_distance({0, 0}, {0, 180}, 2.5), kPi * 2.5, 1e-12);
}

TEST(GeodesicDistance, WrapsAcrossZeroLongitude) {
  const double d = geodesic_distance({0, 359.5}, {0, 0.5}, 1.0);
  EXPECT_NEAR(d, haversine_deg(0, 359.5, 0, 0.5), 1e-12);
  EXPECT_NEAR(d, 0.017453292519943295, 1e-9);
}

TEST(GeodesicDistance, SymmetryAndTriangleOnRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-90, 90), lon(0, 360);
  for (int i = 0; i < 2000; ++i) {
    const SpherePoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = geodesic_distance(a, b, 1), ba = geodesic_distance(b, a, 1);
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_LE(ab, geodesic_distance(a, c, 1) + geodesic_distance(c, b, 1) + 1e-9);
    EXPECT_NEAR(ab, haversine_deg(a.lat, a.lon, b.lat, b.lon), 1e-9);
  }
}

TEST(PixelArea, SumsToSphereArea) {
  const GridSpec g(360, 180);
  double exact = 0.0, mid = 0.0;
  for (int r = 0; r < g.n_rows; ++r) {
    exact += pixel_area(r, g) * g.n_cols;
    mid += pixel_area_midpoint(r, g) * g.n_cols;
  }
  EXPECT_NEAR(exact / (4 * kPi), 1.0, 1e-12);
  EXPECT_NEAR(mid / (4 * kPi), 1.0, 1e-3);
  // Closed-form midpoint oracle.
  double oracle = 0.0;
  for (int r = 0; r < 180; ++r) {
    oracle += 360 * (2 * kPi / 360) * (kPi / 180) * std::cos((89.5 - r) * kPi / 180);
  }
  EXPECT_NEAR(mid, oracle, 1e-9);
}

TEST(PixelArea, EquatorLargerThanPole) {
  const GridSpec g(360, 180);
  EXPECT_GT(pixel_area(89, g), pixel_area(0, g));
  EXPECT_GT(pixel_area(0, g), 0.0);
}

TEST(PixelArea, ScalesWithRadiusSquared) {
  const GridSpec g1(360, 180, 1.0), g2(360, 180, 2.0);
  for (int r : {0, 45, 89, 179}) EXPECT_NEAR(pixel_area(r, g2), 4.0 * pixel_area(r, g1), 1e-15);
}

TEST(SetDistance, OverlapIsZero) {
  const GridSpec g(36, 18);
  const auto a = testing_support::block(5, 5, 3, 3, g);
  const auto b = testing_support::block(6, 6, 3, 3, g);
  EXPECT_EQ(set_distance(a, b, g), 0.0);
}

TEST(SetDistance, SingletonsReduceToGeodesic) {
  const GridSpec g(360, 180);
  const PixelSet a{{10, 20}}, b{{100, 300}};
  EXPECT_NEAR(set_distance(a, b, g),
              geodesic_distance(pixel_to_sphere(10, 20, g), pixel_to_sphere(100, 300, g), 1.0), 1e-12);
}

TEST(SetDistance, WrapAroundIsShort) {
  const GridSpec g(360, 180);
  const PixelSet a{{89, 358}, {89, 359}}, b{{89, 1}};
  const double d = set_distance(a, b, g);
  EXPECT_NEAR(d, set_distance_bruteforce(a, b, g), 1e-12);
  EXPECT_NEAR(d, haversine_deg(0.5, 359.5, 0.5, 1.5), 1e-12);
  EXPECT_LT(d, 3.0 * kDegToRad);
}

TEST(SetDistance, EmptySetThrows) {
  const GridSpec g(36, 18);
  const PixelSet a{{1, 1}}, empty;
  EXPECT_THROW(set_distance(a, empty, g), ContractViolation);
}

TEST(SetDistance, BoundaryShortcutMatchesExhaustiveScan) {
  std::mt19937_64 rng(5);
  const GridSpec g(72, 36);
  for (int trial = 0; trial < 200; ++trial) {
    auto fa = testing_support::random_bool_field(36, 72, 0.02, rng);
    auto fb = testing_support::random_bool_field(36, 72, 0.02, rng);
    // Add solid blocks so boundaries and interiors both exist.
    std::uniform_int_distribution<int> rr(0, 30), cc(0, 71);
    PixelSet a = testing_support::block(rr(rng), cc(rng), 5, 6, g);
    PixelSet b = testing_support::block(rr(rng), cc(rng), 4, 7, g);
    for (int r = 0; r < 36; ++r)
      for (int c = 0; c < 72; ++c) {
        if (fa(r, c)) a.push_back({r, c});
        if (fb(r, c)) b.push_back({r, c});
      }
    normalize(a);
    normalize(b);
    EXPECT_NEAR(set_distance(a, b, g), set_distance_bruteforce(a, b, g), 1e-12);
  }
}

TEST(SetDistance, MonotoneUnderGrowth) {
  std::mt19937_64 rng(9);
  const GridSpec g(72, 36);
  std::uniform_int_distribution<int> rr(0, 35), cc(0, 71);
  for (int trial = 0; trial < 100; ++trial) {
    PixelSet a{{rr(rng), cc(rng)}}, b = testing_support::block(rr(rng) % 30, cc(rng), 3, 3, g);
    double prev = set_distance(a, b, g);
    for (int k = 0; k < 10; ++k) {
      a.push_back({rr(rng), cc(rng)});
      normalize(a);
      const double now = set_distance(a, b, g);
      EXPECT_LE(now, prev + 1e-15);
      prev = now;
    }
  }
}

TEST(SetDistance, InvariantUnderCommonLongitudeShift) {
  std::mt19937_64 rng(21);
  const GridSpec g(72, 36);
  std::uniform_int_distribution<int> rr(0, 30), cc(0, 71), shift(1, 71);
  for (int trial = 0; trial < 100; ++trial) {
    const int r1 = rr(rng), c1 = cc(rng), r2 = rr(rng), c2 = cc(rng), s = shift(rng);
    const auto a = testing_support::block(r1, c1, 4, 5, g), b = testing_support::block(r2, c2, 3, 6, g);
    const auto as = testing_support::block(r1, c1 + s, 4, 5, g), bs = testing_support::block(r2, c2 + s, 3, 6, g);
    EXPECT_NEAR(set_distance(a, b, g), set_distance(as, bs, g), 1e-9);
  }
}

TEST(Centroid, SymmetricBlockAcrossSeam) {
  const GridSpec g(360, 180);
  const auto s = testing_support::block(80, 358, 20, 4, g);  // lon 358..2, lat symmetric about 0
  const auto c = centroid(s, g);
  EXPECT_NEAR(c.lat, 0.0, 1e-9);
  EXPECT_TRUE(c.lon < 1e-9 || c.lon > 360.0 - 1e-9);
}
