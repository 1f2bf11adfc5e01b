#include "coronal/classify.hpp"

#include <algorithm>

namespace coronal::classify {

MapFeatures& MapFeatures::operator+=(const MapFeatures& o) {
  newN += o.newN;
  newA += o.newA;
  missN += o.missN;
  missA += o.missA;
  overA += o.overA;
  sameA += o.sameA;
  return *this;
}

MapFeatures extract_features(const matching::MatchResult& m, const GridSpec& grid,
                             AreaMode mode) {
  (void)grid;
  auto unmatched_area = [mode](const matching::Cluster& c) {
    return mode == AreaMode::Spherical ? c.physical_area : static_cast<double>(c.image_area);
  };
  MapFeatures f;
  f.newN = static_cast<double>(m.new_clusters.size());
  for (int k : m.new_clusters) f.newA += unmatched_area(m.model_clusters.at(k));
  f.missN = static_cast<double>(m.missing_clusters.size());
  for (int k : m.missing_clusters) f.missA += unmatched_area(m.ref_clusters.at(k));
  for (const auto& p : m.matched) {
    const double model_area = m.model_clusters.at(p.model).physical_area;
    f.overA += std::max(0.0, model_area - p.overlap_area);
    f.sameA += p.overlap_area;
  }
  return f;
}

std::vector<double> feature_vector(const MapFeatures& f, bool include_same) {
  std::vector<double> v{f.newN, f.newA, f.missN, f.missA, f.overA};
  if (include_same) v.push_back(f.sameA);
  return v;
}

Classification classify_map(const MapFeatures& f, const forest::TrainedForest& model,
                            bool include_same) {
  const auto v = feature_vector(f, include_same);
  const auto p = forest::predict(model, v, forest::TiePolicy::Negative);
  return {p.label == 1 ? MapClass::Good : MapClass::Bad, p.vote_fraction};
}

std::string to_string(MapClass c) { return c == MapClass::Good ? "good" : "bad"; }

}  // namespace coronal::classify
