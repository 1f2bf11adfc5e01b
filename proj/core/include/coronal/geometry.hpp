#pragma once

#include <compare>
#include <span>
#include <vector>

#include "coronal/raster.hpp"

namespace coronal {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;

/// Equirectangular lon x lat grid. Pixel (r, c) is centred at
/// lon = (c + 0.5) * 360 / n_cols, lat = 90 - (r + 0.5) * 180 / n_rows.
struct GridSpec {
  int n_cols = 360;
  int n_rows = 180;
  double radius = 1.0;  // solar radii

  GridSpec() = default;
  GridSpec(int cols, int rows, double r = 1.0);

  bool operator==(const GridSpec&) const = default;
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(n_cols) * static_cast<std::size_t>(n_rows);
  }
};

/// Latitude/longitude in degrees. lon is kept in [0, 360).
struct SpherePoint {
  double lat = 0.0;
  double lon = 0.0;
};

struct Pixel {
  int row = 0;
  int col = 0;
  auto operator<=>(const Pixel&) const = default;
};

/// Sorted (row-major), duplicate-free list of pixels.
using PixelSet = std::vector<Pixel>;

SpherePoint pixel_to_sphere(int row, int col, const GridSpec& grid);

/// Great-circle arc length (haversine form), in units of `radius`.
double geodesic_distance(const SpherePoint& a, const SpherePoint& b, double radius);

/// Exact cell area R^2 * dlon * (sin(lat_top) - sin(lat_bottom)). Summing
/// every cell reproduces 4 pi R^2 to rounding.
double pixel_area(int row, const GridSpec& grid);

/// Midpoint-rule variant, R^2 * cos(lat_c) * dlon * dlat. Kept for comparison;
/// its total differs from 4 pi R^2 by O(1/n_rows^2).
double pixel_area_midpoint(int row, const GridSpec& grid);

double total_area(std::span<const Pixel> pixels, const GridSpec& grid);

/// Minimum geodesic distance between pixel centres of two non-empty sets.
/// Returns 0 when the sets share a pixel. Only 4-neighbour boundary pixels
/// of each set are compared: for any non-boundary pixel some 4-neighbour
/// lies strictly closer to any pixel outside the set.
double set_distance(std::span<const Pixel> a, std::span<const Pixel> b,
                    const GridSpec& grid);

/// Exhaustive all-pairs minimum, used for verification and small sets.
double set_distance_bruteforce(std::span<const Pixel> a, std::span<const Pixel> b,
                               const GridSpec& grid);

/// Pixels of `set` that have a 4-neighbour (longitude wraps) outside the set.
PixelSet boundary_pixels(std::span<const Pixel> set, const GridSpec& grid);

/// Area-weighted centroid on the sphere.
SpherePoint centroid(std::span<const Pixel> pixels, const GridSpec& grid);

/// Sort and deduplicate.
void normalize(PixelSet& pixels);
bool intersects(std::span<const Pixel> a, std::span<const Pixel> b);
PixelSet set_union(std::span<const Pixel> a, std::span<const Pixel> b);
PixelSet set_intersection(std::span<const Pixel> a, std::span<const Pixel> b);

/// Precomputed per-pixel unit vectors for fast repeated distance queries.
class SphereTable {
 public:
  explicit SphereTable(const GridSpec& grid);
  const GridSpec& grid() const noexcept { return grid_; }
  /// Arc length between two pixel centres.
  double distance(const Pixel& a, const Pixel& b) const noexcept;

 private:
  GridSpec grid_;
  std::vector<double> sin_lat_, cos_lat_, sin_lon_, cos_lon_;
};

}  // namespace coronal
