#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coronal/assignment.hpp"
#include "coronal/maps.hpp"

namespace coronal::matching {

/// Same-polarity group of coronal holes treated as one unit for matching.
struct Cluster {
  std::vector<CoronalHole> holes;
  PixelSet pixels;
  Polarity polarity = Polarity::Positive;
  double physical_area = 0.0;
  std::size_t image_area = 0;
  SpherePoint centroid;

  static Cluster from_holes(std::vector<CoronalHole> holes, const GridSpec& grid);
  static Cluster merge(const Cluster& a, const Cluster& b, const GridSpec& grid);
};

/// Transitive closure of d(A, B) < threshold. Output is canonical: clusters
/// ordered by their first pixel, members likewise, independent of input order.
std::vector<Cluster> cluster_by_distance(std::span<const CoronalHole> holes, double threshold,
                                         const GridSpec& grid);

/// Gate on v = (|log area ratio|, set distance) between cross-map clusters.
class MahalanobisModel {
 public:
  using Vec = std::array<double, 2>;
  using Mat = std::array<double, 4>;  // row-major 2x2

  /// Throws ModelFitError unless the covariance is symmetric positive
  /// definite and the threshold positive.
  MahalanobisModel(Vec mean, Mat covariance, double threshold);

  /// Sample mean and covariance of labelled matchable pairs.
  static MahalanobisModel fit(std::span<const Vec> samples, double threshold);

  static MahalanobisModel default_model();

  double distance(const Vec& v) const noexcept;
  bool accepts(const Vec& v) const noexcept { return distance(v) <= threshold_; }

  const Vec& mean() const noexcept { return mean_; }
  const Mat& covariance() const noexcept { return cov_; }
  double threshold() const noexcept { return threshold_; }

 private:
  Vec mean_;
  Mat cov_;
  Mat inv_;
  double threshold_;
};

/// sqrt of the 99th percentile of chi-square with 2 degrees of freedom.
inline constexpr double kChi2TwoDof99 = 3.0348542587702925;

MahalanobisModel::Vec pair_features(const Cluster& ref, const Cluster& model,
                                    const GridSpec& grid);

struct Detection {
  std::vector<Cluster> matchable_ref;
  std::vector<Cluster> matchable_model;
  std::vector<Cluster> new_clusters;      // model-only
  std::vector<Cluster> missing_clusters;  // reference-only
};

Detection detect_new_missing(std::span<const Cluster> ref, std::span<const Cluster> model,
                             const MahalanobisModel& mm, const GridSpec& grid);

/// Greedily merges the closest pair on the larger side until the counts
/// agree. Ties in distance go to the pair with the smallest combined area,
/// then to the lowest indices.
std::pair<std::vector<Cluster>, std::vector<Cluster>> recluster_equal(
    std::vector<Cluster> ref, std::vector<Cluster> model, const GridSpec& grid);

/// Same merge rule applied to one list.
std::vector<Cluster> merge_to_count(std::vector<Cluster> clusters, std::size_t target,
                                    const GridSpec& grid);

/// Costs are converted to integer micro-units of arc before solving.
inline constexpr double kCostScale = 1e6;

struct MatchedPair {
  int ref = 0;
  int model = 0;
  double cost = 0.0;
  std::int64_t cost_micro = 0;
  double overlap_area = 0.0;
  std::size_t overlap_pixels = 0;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  std::int64_t total_micro = 0;
};

Matching match_assign(std::span<const Cluster> ref, std::span<const Cluster> model,
                      const GridSpec& grid);

/// Matched, new and missing clusters for one physical map.
struct MatchResult {
  std::string model_id;
  std::vector<Cluster> ref_clusters;
  std::vector<Cluster> model_clusters;
  std::vector<MatchedPair> matched;  // indices into the two lists
  std::vector<int> new_clusters;     // indices into model_clusters
  std::vector<int> missing_clusters; // indices into ref_clusters
  std::int64_t total_cost_micro = 0;
};

/// Concatenates two results (e.g. the two polarities), offsetting indices.
MatchResult merge_results(const MatchResult& a, const MatchResult& b);

/// Each cluster id appears once; counts add up on both sides.
bool conserves_clusters(const MatchResult& r);

struct MatchConfig {
  double cluster_threshold = 0.1;  // arc length, radians on the unit sphere
  MahalanobisModel mahalanobis = MahalanobisModel::default_model();
  PreprocessOptions preprocess;
};

/// Cluster -> detect -> re-cluster -> assign for one polarity of two
/// pre-processed masks on the same grid.
MatchResult match_polarity(const SegmentationMask& ref, const SegmentationMask& model,
                           Polarity polarity, const MatchConfig& cfg);

/// Both polarities, merged.
MatchResult match_maps(const SegmentationMask& ref, const SegmentationMask& model,
                       const MatchConfig& cfg);

/// Pre-processes the reference and every model onto the reference grid and
/// matches each model independently.
std::vector<MatchResult> run_matching(const SegmentationMask& ref,
                                      std::span<const SegmentationMask> models,
                                      const MatchConfig& cfg,
                                      const BoolField* observed = nullptr);

std::string to_json(const MatchResult& r, const GridSpec& grid);
MatchResult match_result_from_json(const std::string& text, GridSpec* grid = nullptr);

}  // namespace coronal::matching
