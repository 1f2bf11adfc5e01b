#pragma once

// Manual clustering / matching / grouping rules written down as predicates.
// They are not used by the automatic matcher; tests use them to check that
// synthetic ground truth is consistent with how a human reader would label it.

#include <optional>
#include <span>
#include <vector>

#include "coronal/maps.hpp"

namespace coronal::protocol {

struct Thresholds {
  double polar_latitude = 60.0;   // degrees; holes reaching past it are polar
  double near_distance = 0.03;    // "extremely close", radians of arc
  double close_distance = 0.12;   // "relatively close"
  double small_area = 0.02;       // physical area below which a hole is small
  double large_ratio = 4.0;       // "much larger"
  double polar_overlap = 0.7;     // polar-polar
  double polar_mid_overlap = 0.15;
  double mid_overlap = 0.3;
  double weak_overlap = 0.05;     // lower bound for the weak-overlap branch
  double localization = 0.05;     // centroid separation for "good localization"
};

enum class ClusterRule { PolarCap, Nearby, SmallSmall, LargeSmall, LargeLarge };
enum class MatchRule { PolarPolar, PolarMid, MidMid };

bool is_polar(const CoronalHole& h, const GridSpec& grid, const Thresholds& t = {});

/// Rule under which two same-polarity holes belong together, if any.
/// LargeLarge is never returned: two large holes only group through Nearby.
std::optional<ClusterRule> cluster_rule(const CoronalHole& a, const CoronalHole& b,
                                        const GridSpec& grid, const Thresholds& t = {});

/// Fraction of the smaller region covered by the overlap.
double overlap_fraction(std::span<const Pixel> a, std::span<const Pixel> b,
                        const GridSpec& grid);

/// Rule under which a reference region and a model region would be matched
/// by hand, if any. `ref` and `model` are pixel sets of one polarity.
std::optional<MatchRule> match_rule(std::span<const Pixel> ref, std::span<const Pixel> model,
                                    const GridSpec& grid, const Thresholds& t = {});

enum class Rank { First = 1, Second = 2 };

/// Group-level decision: given whether each rank is an acceptable match,
/// returns whether maps of that rank are labelled good.
///   both acceptable -> all good; neither -> all bad; only rank 1 -> rank 1 good.
/// Rank 2 acceptable without rank 1 is inconsistent with the ranking and
/// yields all bad.
bool group_label(Rank rank, bool rank1_acceptable, bool rank2_acceptable);

}  // namespace coronal::protocol
