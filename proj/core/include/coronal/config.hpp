#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coronal/classify.hpp"
#include "coronal/forest.hpp"
#include "coronal/initseg.hpp"
#include "coronal/levelset.hpp"
#include "coronal/matching.hpp"
#include "coronal/synth.hpp"

namespace coronal {

struct PathsConfig {
  std::filesystem::path root = "work";
};

struct LevelsetConfig {
  levelset::Params params;
  bool use_tuned = true;  // take alpha/sigma from tune/levelset.json when present
  // Tuning
  int tune_images = 4;
  int tune_max_evaluations = 50;
  double tune_initial_step = 0.25;
  double tune_min_step = 1e-2;
};

struct InitConfig {
  HenneyHarveyParams hh;
  std::vector<std::string> external = {"external"};
  bool use_selectors = true;
  double valid_overlap = 0.5;  // selector training label: fraction inside consensus holes
};

struct MatchingConfig {
  double cluster_threshold = 0.1;
  double mahalanobis_threshold = matching::kChi2TwoDof99;
  double mean_area = 0.25;
  double mean_distance = 0.02;
  double sd_area = 0.3;
  double sd_distance = 0.05;
  double correlation = 0.0;
  int close_radius = 1;
  std::string reference = "consensus";  // or "segmented"

  matching::MatchConfig to_match_config() const;
};

struct ForestSection {
  forest::ForestConfig classifier;
  forest::ForestConfig selector_hh;
  forest::ForestConfig selector_external;
  double train_fraction = 0.7;
  bool include_same = true;
  classify::AreaMode area_mode = classify::AreaMode::PerFeature;
  std::vector<int> oob_trees = {1, 5, 10, 20, 40};
  std::vector<int> oob_depths = {1, 2, 3, 5, 7, 9, 11};
  std::uint64_t seed = 1;

  ForestSection();
};

struct PipelineConfig {
  PathsConfig paths;
  LevelsetConfig levelset;
  InitConfig init;
  MatchingConfig matching;
  ForestSection forest;
  synth::SynthSpec synth;

  /// Range checks for every section; throws ConfigError.
  void validate() const;
  /// Replaces every seed in the configuration.
  void set_seed(std::uint64_t seed);
};

/// INI text with [paths] [levelset] [init] [matching] [forest] [synth]
/// sections. Unknown sections or keys are rejected.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Serialises every key with its current value.
std::string format_config(const PipelineConfig& cfg);

}  // namespace coronal
