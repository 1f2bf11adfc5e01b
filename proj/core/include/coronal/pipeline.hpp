#pragma once

// Stage functions behind the command line tool. Each stage reads its inputs
// from the work root and writes its outputs there; no state is shared in
// memory between stages.
//
//   dates/dayNNN/{euv,mag,consensus,external,model_XX}.csv, truth.json
//   tune/{selector_hh,selector_<source>,levelset}.json
//   segment/dayNNN/{init,result}.csv, overlay.png; segment/metrics.csv
//   match/dayNNN/model_XX.{json,png}; match/{features,accuracy,confusion}.csv
//   classify/{model.json,confusion.csv,importances.csv,oob_surface.csv,
//             predictions.csv,classified.csv}
//   report/report.md + CSV tables

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coronal/config.hpp"

namespace coronal::pipeline {

/// Inclusive range of date indices; `to` < 0 means "through the last".
struct DateRange {
  int from = 0;
  int to = -1;
};

/// "FROM:TO", "FROM:" or "N". Throws ConfigError on malformed text.
DateRange parse_date_range(const std::string& text);

/// Date indices with a dates/dayNNN directory, ascending.
std::vector<int> list_dates(const std::filesystem::path& root);

struct RunOptions {
  PipelineConfig cfg;
  DateRange dates;
  int jobs = 1;
  std::ostream* log = nullptr;  // warnings; nullptr discards them

  const std::filesystem::path& root() const { return cfg.paths.root; }
};

void run_synth(const RunOptions& opt);

// ---------------------------------------------------------------------------

struct DateMetrics {
  int date = 0;
  bool defined = false;  // false: consensus has no hole pixels
  levelset::SensSpec full;
  levelset::SensSpec init;
};

struct SegmentSummary {
  std::vector<DateMetrics> rows;
  double median_full = 0.0;  // over dates with defined metrics
  double median_init = 0.0;
};

/// Initializers -> selectors -> union -> level set for each date.
SegmentSummary run_segment(const RunOptions& opt);

struct TuneSummary {
  bool selector_hh = false;
  std::vector<std::string> selector_external;  // sources with a trained selector
  levelset::TuneResult levelset;
};

/// Trains the candidate selectors and tunes (alpha, sigma) on the training
/// share of the selected dates.
TuneSummary run_tune(const RunOptions& opt);

// ---------------------------------------------------------------------------

enum class ClusterStatus { Matched = 0, New = 1, Missing = 2 };

struct MatchAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t wrong_partner = 0;  // matched, but to the wrong counterpart
  /// confusion[truth][predicted] over {matched, new, missing, absent}.
  std::array<std::array<std::size_t, 4>, 3> confusion{};

  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
  MatchAccuracy& operator+=(const MatchAccuracy& o);
};

/// Scores one match result against the generator's correspondences.
MatchAccuracy score_match(const matching::MatchResult& result, const synth::DateTruth& truth,
                          std::size_t model, const GridSpec& grid);

struct MatchSummary {
  std::size_t results = 0;
  bool conserved = true;  // every result satisfied the conservation identities
  bool scored = false;    // ground truth was available
  MatchAccuracy accuracy;
};

MatchSummary run_match(const RunOptions& opt);

// ---------------------------------------------------------------------------

struct ClassifySummary {
  double accuracy = 0.0;
  std::size_t train_size = 0, test_size = 0;
  std::array<std::array<std::size_t, 2>, 2> confusion{};  // [truth][predicted], 1 = good
  std::vector<double> importances;
  forest::OobSurface oob;
};

ClassifySummary run_train_classifier(const RunOptions& opt);

/// Applies classify/model.json to every map in match/features.csv.
void run_classify(const RunOptions& opt);

/// Consolidated report; names any missing stage output.
void run_eval(const RunOptions& opt);

}  // namespace coronal::pipeline
