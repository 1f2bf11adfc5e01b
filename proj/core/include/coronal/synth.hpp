#pragma once

// Desk-scale synthetic corpus: EUV and magnetic maps with planted coronal
// holes, a consensus mask, a coarse external initializer mask and a family
// of perturbed model masks with known correspondences and good/bad labels.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coronal/maps.hpp"

namespace coronal::synth {

/// Perturbation family applied to the consensus to build one model map.
struct Perturbation {
  double jitter_max = 0.0;   // degrees of centre displacement
  double scale_min = 1.0;    // area scale range
  double scale_max = 1.0;
  double remove_prob = 0.0;  // per reference hole
  double add_prob = 0.0;     // per reference hole, one extra hole each

  void validate() const;
};

struct SynthSpec {
  int n_dates = 20;
  std::uint64_t seed = 7;
  int n_cols = 360, n_rows = 180;
  int model_cols = 144, model_rows = 172;

  int holes_min = 4, holes_max = 6;
  double semi_major_min = 5.0, semi_major_max = 11.0;  // degrees
  double axis_ratio_min = 0.55, axis_ratio_max = 1.0;
  double max_abs_lat = 40.0;     // hole centres
  double min_separation = 20.0;  // approximate edge gap between holes, degrees

  double quiet_euv = 100.0;
  double euv_noise = 6.0;
  double hole_depth = 60.0;
  double edge_width = 0.8;  // degrees, soft EUV edge

  double flux_hole = 8.0;
  double flux_background = 2.0;
  double flux_noise = 0.5;

  int fakes_max = 2;         // dark bipolar blobs, only in the external mask
  double band_width = 30.0;  // unobserved longitude band, degrees; 0 disables
  int external_block = 3;    // block size (pixels) of the coarse external mask

  int n_models = 12;
  int rank1_min = 4, rank1_max = 8;  // size of the better group
  Perturbation rank1{1.5, 0.85, 1.2, 0.04, 0.04};
  Perturbation rank2{5.0, 1.6, 2.2, 0.35, 0.35};

  // A model map is good iff all three hold.
  double max_missing_fraction = 0.15;
  double max_new_fraction = 0.25;
  double max_area_ratio = 1.45;

  void validate() const;
  GridSpec grid() const { return GridSpec(n_cols, n_rows); }
  GridSpec model_grid() const { return GridSpec(model_cols, model_rows); }
};

/// Ellipse on the sphere, evaluated in local (lon cos lat, lat) degrees.
struct Ellipse {
  double lat = 0.0, lon = 0.0;
  double a = 1.0, b = 1.0;  // semi-axes, degrees
  double theta = 0.0;       // radians
};

/// Normalised radius of the pixel centre; <= 1 is inside.
double ellipse_radius(const Ellipse& e, double lat, double lon);
PixelSet rasterize(const Ellipse& e, const GridSpec& grid);

struct TruthHole {
  int id = 0;
  Ellipse shape;
  Polarity polarity = Polarity::Positive;
};

struct ModelHole {
  int ref = -1;  // reference hole id, or -1 for a new hole
  Ellipse shape;
  Polarity polarity = Polarity::Positive;
};

struct ModelTruth {
  int rank = 1;
  bool good = true;
  std::vector<ModelHole> holes;
  std::vector<int> removed;  // reference ids absent from the model
  double missing_fraction = 0.0;
  double new_fraction = 0.0;
  double area_ratio = 1.0;
};

struct DateTruth {
  int date = 0;
  double band_lon = 0.0;  // start of the unobserved band
  std::vector<TruthHole> holes;
  std::vector<Ellipse> fakes;
  std::vector<ModelTruth> models;
};

struct SynthDate {
  SynopticMap euv;
  SynopticMap mag;
  SegmentationMask consensus;
  SegmentationMask external;
  std::vector<SegmentationMask> models;
  DateTruth truth;
};

SynthDate generate_date(const SynthSpec& spec, int date);

/// Applies the labelling thresholds of `spec` to the realised statistics.
bool label_rule(const SynthSpec& spec, double missing_fraction, double new_fraction,
                double area_ratio);

std::string to_json(const DateTruth& t);
DateTruth truth_from_json(const std::string& text);

std::string date_dir_name(int date);

/// Writes dates/dayNNN/{euv,mag,consensus,external,model_XX}.csv + truth.json.
void write_dataset(const SynthSpec& spec, const std::filesystem::path& root, int jobs = 1);

}  // namespace coronal::synth
