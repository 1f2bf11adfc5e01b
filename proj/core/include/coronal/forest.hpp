#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coronal::forest {

/// Row-major n x d feature matrix.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t n_features) : d_(n_features) {}

  void add(std::span<const double> row, int label);
  std::size_t rows() const noexcept { return labels_.size(); }
  std::size_t features() const noexcept { return d_; }
  double at(std::size_t i, std::size_t f) const noexcept { return x_[i * d_ + f]; }
  std::span<const double> row(std::size_t i) const noexcept { return {x_.data() + i * d_, d_}; }
  int label(std::size_t i) const noexcept { return labels_[i]; }
  std::span<const int> labels() const noexcept { return labels_; }

 private:
  std::size_t d_ = 0;
  std::vector<double> x_;
  std::vector<int> labels_;
};

struct ForestConfig {
  int n_trees = 20;
  int max_depth = 11;
  int min_leaf = 1;
  /// Features sampled per split; 0 selects round(sqrt(d)).
  int n_feature_sub = 0;
  /// Upper bound on split nodes per tree (breadth-first growth); 0 = unlimited.
  int max_splits = 0;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  /// Worker threads for tree construction; results are independent of it.
  int threads = 1;

  void validate() const;
};

/// How an exact 50/50 vote is resolved.
enum class TiePolicy { Positive, Negative };

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // x[feature] <= threshold
  int right = -1;  // x[feature] >  threshold
  double p1 = 0.0;  // fraction of class-1 samples reaching this node
  int samples = 0;
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& leaf_for(std::span<const double> x) const;
  int depth() const;
  int split_count() const;
};

struct Prediction {
  int label = 0;
  double vote_fraction = 0.0;
};

struct TrainedForest {
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  double oob_error = 0.0;
  std::size_t oob_samples = 0;
  std::vector<double> importances;

  bool operator==(const TrainedForest& other) const;
};

TrainedForest train(const Dataset& data, const ForestConfig& cfg);

int tree_vote(const Tree& tree, std::span<const double> x, TiePolicy tie);
Prediction predict(const TrainedForest& forest, std::span<const double> x,
                   TiePolicy tie = TiePolicy::Negative);

struct OobPoint {
  int n_trees = 0;
  int max_depth = 0;
  double oob_error = 0.0;
};

struct OobSurface {
  ForestConfig best;
  std::vector<OobPoint> points;
};

/// Trains one forest per (n_trees, max_depth) pair with the shared seed of
/// `base`; ties in OOB error prefer fewer trees, then shallower trees.
OobSurface tune_oob(const Dataset& data, std::span<const std::pair<int, int>> grid,
                    const ForestConfig& base);

/// Mean drop in accuracy when one column is shuffled, over `repeats` shuffles.
std::vector<double> permutation_importance(const TrainedForest& forest, const Dataset& data,
                                           int repeats, std::uint64_t seed,
                                           TiePolicy tie = TiePolicy::Negative);

inline constexpr int kModelFormatVersion = 1;

std::string to_json(const TrainedForest& forest);
TrainedForest from_json(const std::string& text);
void save(const std::filesystem::path& path, const TrainedForest& forest);
TrainedForest load(const std::filesystem::path& path);

}  // namespace coronal::forest
