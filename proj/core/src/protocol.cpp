#include "coronal/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace coronal::protocol {

bool is_polar(const CoronalHole& h, const GridSpec& grid, const Thresholds& t) {
  return std::any_of(h.pixels.begin(), h.pixels.end(), [&](const Pixel& p) {
    return std::abs(pixel_to_sphere(p.row, p.col, grid).lat) >= t.polar_latitude;
  });
}

std::optional<ClusterRule> cluster_rule(const CoronalHole& a, const CoronalHole& b,
                                        const GridSpec& grid, const Thresholds& t) {
  if (a.polarity != b.polarity) return std::nullopt;
  const bool north_a = a.centroid.lat > 0, north_b = b.centroid.lat > 0;
  if (is_polar(a, grid, t) && is_polar(b, grid, t) && north_a == north_b)
    return ClusterRule::PolarCap;
  const double d = set_distance(a.pixels, b.pixels, grid);
  if (d < t.near_distance) return ClusterRule::Nearby;
  if (d >= t.close_distance) return std::nullopt;
  const bool small_a = a.physical_area < t.small_area, small_b = b.physical_area < t.small_area;
  if (small_a && small_b) return ClusterRule::SmallSmall;
  const double big = std::max(a.physical_area, b.physical_area);
  const double little = std::min(a.physical_area, b.physical_area);
  if ((small_a || small_b) && big >= t.large_ratio * little) return ClusterRule::LargeSmall;
  return std::nullopt;
}

double overlap_fraction(std::span<const Pixel> a, std::span<const Pixel> b,
                        const GridSpec& grid) {
  const double inter = total_area(set_intersection(a, b), grid);
  const double smaller = std::min(total_area(a, grid), total_area(b, grid));
  return smaller > 0.0 ? inter / smaller : 0.0;
}

std::optional<MatchRule> match_rule(std::span<const Pixel> ref, std::span<const Pixel> model,
                                    const GridSpec& grid, const Thresholds& t) {
  if (ref.empty() || model.empty()) return std::nullopt;
  auto polar = [&](std::span<const Pixel> s) {
    return std::any_of(s.begin(), s.end(), [&](const Pixel& p) {
      return std::abs(pixel_to_sphere(p.row, p.col, grid).lat) >= t.polar_latitude;
    });
  };
  const double f = overlap_fraction(ref, model, grid);
  const bool pr = polar(ref), pm = polar(model);
  if (pr && pm) {
    return f >= t.polar_overlap ? std::optional(MatchRule::PolarPolar) : std::nullopt;
  }
  if (!pr && pm) {
    return f >= t.polar_mid_overlap ? std::optional(MatchRule::PolarMid) : std::nullopt;
  }
  if (f > t.mid_overlap) return MatchRule::MidMid;
  const double sep =
      geodesic_distance(centroid(ref, grid), centroid(model, grid), grid.radius);
  if (f >= t.weak_overlap && sep <= t.localization * grid.radius) return MatchRule::MidMid;
  return std::nullopt;
}

bool group_label(Rank rank, bool rank1_acceptable, bool rank2_acceptable) {
  if (rank1_acceptable && rank2_acceptable) return true;
  if (!rank1_acceptable) return false;
  return rank == Rank::First;
}

}  // namespace coronal::protocol
