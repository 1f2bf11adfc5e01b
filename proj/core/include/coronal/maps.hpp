#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coronal/geometry.hpp"
#include "coronal/raster.hpp"

namespace coronal {

enum class MapKind { Euv, Magnetic, Mask, Model };

std::string_view to_string(MapKind kind) noexcept;
MapKind parse_map_kind(std::string_view text);

enum class Label : std::uint8_t {
  Background = 0,
  Positive = 1,
  Negative = 2,
  NoObservation = 3,
};

enum class Polarity : std::int8_t { Negative = -1, Positive = 1 };

constexpr Label label_of(Polarity p) noexcept {
  return p == Polarity::Positive ? Label::Positive : Label::Negative;
}
constexpr bool is_hole(Label l) noexcept {
  return l == Label::Positive || l == Label::Negative;
}
std::string_view to_string(Polarity p) noexcept;

/// EUV intensity or signed magnetic flux over an equirectangular grid.
/// `observed` is 0 where the instrument has no data; `values` there is NaN.
struct SynopticMap {
  GridSpec grid;
  MapKind kind = MapKind::Euv;
  Field values;
  BoolField observed;

  SynopticMap() = default;
  SynopticMap(const GridSpec& g, MapKind k);

  bool is_observed(int r, int c) const noexcept { return observed(r, c) != 0; }
  void validate() const;
};

struct SegmentationMask {
  GridSpec grid;
  Raster<Label> labels;

  SegmentationMask() = default;
  explicit SegmentationMask(const GridSpec& g, Label fill = Label::Background);

  std::size_t count(Label l) const;
  std::size_t hole_count() const;
  bool operator==(const SegmentationMask&) const = default;
};

/// 8-connected (longitude-wrapping) set of same-polarity hole pixels.
struct CoronalHole {
  PixelSet pixels;
  Polarity polarity = Polarity::Positive;
  std::size_t image_area = 0;
  double physical_area = 0.0;
  SpherePoint centroid;

  static CoronalHole from_pixels(PixelSet pixels, Polarity polarity, const GridSpec& grid);
};

using AnyMap = std::variant<SynopticMap, SegmentationMask>;

// ---------------------------------------------------------------------------
// CSV I/O. Header line `cols,rows,kind`, then one line per latitude row
// (north first) of comma-separated values. Scalar maps use NaN for missing
// observations; masks use label codes 0..3.

AnyMap load_map(const std::filesystem::path& path, MapKind kind);
SynopticMap load_scalar_map(const std::filesystem::path& path, MapKind kind);
SegmentationMask load_mask(const std::filesystem::path& path, MapKind kind = MapKind::Mask);

std::string format_map_csv(const SynopticMap& map);
std::string format_mask_csv(const SegmentationMask& mask, MapKind kind = MapKind::Mask);
void save_map(const std::filesystem::path& path, const SynopticMap& map);
void save_mask(const std::filesystem::path& path, const SegmentationMask& mask,
               MapKind kind = MapKind::Mask);

// ---------------------------------------------------------------------------
// Resampling and pre-processing.

/// Bilinear resampling with the pixel-centre convention
/// src = (dst + 0.5) * src_n / dst_n - 0.5, clamped at the edges.
Field resize_bilinear(const Field& field, int rows, int cols);

/// Scalar values bilinear (over observed samples), observed mask nearest-neighbour.
SynopticMap resize_bilinear(const SynopticMap& map, const GridSpec& target);

/// Each polarity indicator is resampled bilinearly and re-thresholded at 0.5
/// (exactly 0.5 counts as hole); NoObservation is resampled nearest-neighbour.
SegmentationMask resize_bilinear(const SegmentationMask& mask, const GridSpec& target);

/// Nearest-neighbour resampling of a boolean field (pixel-centre convention).
BoolField resize_nearest(const BoolField& field, int rows, int cols);

/// Applies binary closing to each polarity indicator; only Background pixels
/// may be filled, and a pixel filled by both polarities stays Background.
SegmentationMask close_holes(const SegmentationMask& mask, int radius);

/// Polar caps (co-latitude < 30 or > 150 degrees, i.e. |lat| > 60) become
/// Background; NoObservation pixels are kept as NoObservation.
SegmentationMask remove_regions(const SegmentationMask& mask);

/// As above, additionally marking pixels with observed == 0 as NoObservation.
SegmentationMask remove_regions(const SegmentationMask& mask, const BoolField& observed);

inline constexpr double kPolarCapLatitude = 60.0;

/// Connected components (8-connectivity, longitude wrap, no pole wrap) of
/// each polarity. Positive holes come first; each group is ordered by the
/// first pixel in row-major order.
std::vector<CoronalHole> extract_holes(const SegmentationMask& mask);
std::vector<CoronalHole> extract_holes(const SegmentationMask& mask, Polarity polarity);

/// Generic 8-connected labelling with longitude wrap; returns one pixel set
/// per component in first-pixel row-major order.
std::vector<PixelSet> connected_components(const BoolField& mask);

/// Same with 4-connectivity.
std::vector<PixelSet> connected_components4(const BoolField& mask);

BoolField hole_indicator(const SegmentationMask& mask);
BoolField polarity_indicator(const SegmentationMask& mask, Polarity polarity);

/// Full pre-processing chain for cluster matching: close small gaps, resize
/// to the target grid, drop polar caps and unobserved regions.
struct PreprocessOptions {
  int close_radius = 1;
};
SegmentationMask preprocess_for_matching(const SegmentationMask& mask, const GridSpec& target,
                                         const BoolField* observed,
                                         const PreprocessOptions& options = {});

}  // namespace coronal
