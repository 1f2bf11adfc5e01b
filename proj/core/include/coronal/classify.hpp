#pragma once

#include <array>
#include <string>
#include <vector>

#include "coronal/forest.hpp"
#include "coronal/matching.hpp"

namespace coronal::classify {

/// How newA and missA are measured. PerFeature follows the usual feature
/// chart: pixel counts for new/missing, spherical areas for overA/sameA.
enum class AreaMode { PerFeature, Spherical };

struct MapFeatures {
  double newN = 0.0;
  double newA = 0.0;
  double missN = 0.0;
  double missA = 0.0;
  double overA = 0.0;  // model area outside the overlap, matched pairs only
  double sameA = 0.0;  // overlap area of matched pairs

  MapFeatures& operator+=(const MapFeatures& o);
  bool operator==(const MapFeatures&) const = default;
};

inline constexpr std::array<const char*, 6> kFeatureNames = {"newN",  "newA",  "missN",
                                                             "missA", "overA", "sameA"};

MapFeatures extract_features(const matching::MatchResult& m, const GridSpec& grid,
                             AreaMode mode = AreaMode::PerFeature);

/// Six values in kFeatureNames order, or the first five without sameA.
std::vector<double> feature_vector(const MapFeatures& f, bool include_same = true);

enum class MapClass { Bad = 0, Good = 1 };

struct Classification {
  MapClass label = MapClass::Bad;
  double vote_fraction = 0.0;
};

/// Forest vote; an exact tie is Bad.
Classification classify_map(const MapFeatures& f, const forest::TrainedForest& model,
                            bool include_same = true);

std::string to_string(MapClass c);

}  // namespace coronal::classify
