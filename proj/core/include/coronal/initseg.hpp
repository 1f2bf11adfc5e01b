#pragma once

#include <array>
#include <span>
#include <vector>

#include "coronal/forest.hpp"
#include "coronal/maps.hpp"

namespace coronal {

inline constexpr std::size_t kEuvBins = 255;
inline constexpr std::size_t kFluxBins = 40;
inline constexpr std::size_t kHoleFeatureCount = kEuvBins + kFluxBins + 1;

/// Per-hole appearance descriptor used by the candidate selectors.
struct HoleFeatureVector {
  std::array<double, kEuvBins> euv_hist{};
  std::array<double, kFluxBins> flux_hist{};
  double area = 0.0;

  std::vector<double> flatten() const;
};

struct HenneyHarveyParams {
  double dark_quantile = 0.25;
  double unipolarity_min = 0.6;
};

/// |mean flux| / mean |flux| over observed pixels; 0 when no flux is present.
double unipolarity(std::span<const Pixel> pixels, const SynopticMap& mag);

/// Mean observed flux over the pixels (0 if none observed).
double mean_flux(std::span<const Pixel> pixels, const SynopticMap& mag);

/// Two-rule dark/unipolar initializer: pixels strictly darker than the
/// dark_quantile of the observed intensities are grouped into 8-connected
/// components; a component is kept when its unipolarity reaches
/// unipolarity_min and is labelled by the sign of its mean flux.
SegmentationMask henney_harvey_init(const SynopticMap& euv, const SynopticMap& mag,
                                    const HenneyHarveyParams& params = {});

/// EUV histogram over 255 uniform bins spanning the observed intensity range
/// of the map; flux histogram over 40 bins spanning [-F, F], F = max |flux|.
HoleFeatureVector hole_features(const CoronalHole& hole, const SynopticMap& euv,
                                const SynopticMap& mag);

struct CandidateDecision {
  std::size_t hole_index = 0;
  bool kept = false;
  double vote_fraction = 0.0;
};

struct CandidateSelection {
  std::vector<CoronalHole> kept;
  std::vector<CandidateDecision> decisions;  // one per input hole, input order
};

/// Keeps holes whose forest vote is 1 ("valid"). Ties keep the hole unless
/// the caller asks otherwise.
CandidateSelection select_candidates(std::span<const CoronalHole> holes,
                                     std::span<const HoleFeatureVector> features,
                                     const forest::TrainedForest& model,
                                     forest::TiePolicy tie = forest::TiePolicy::Positive);

/// Pixelwise union. A pixel is a hole if any input marks it; disagreeing
/// polarities are settled by the sign of `mag` (>= 0 is positive).
/// NoObservation in any input wins.
SegmentationMask union_masks(std::span<const SegmentationMask> masks, const SynopticMap& mag);

/// Paints holes into a fresh mask on `grid`; cells unobserved in `observed`
/// (if given) become NoObservation.
SegmentationMask mask_from_holes(std::span<const CoronalHole> holes, const GridSpec& grid,
                                 const BoolField* observed = nullptr);

}  // namespace coronal
