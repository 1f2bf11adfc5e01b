#include "coronal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "coronal/error.hpp"

namespace coronal {

GridSpec::GridSpec(int cols, int rows, double r) : n_cols(cols), n_rows(rows), radius(r) {
  CORONAL_EXPECTS(cols >= 2 && rows >= 2, "GridSpec requires at least 2x2 samples");
  CORONAL_EXPECTS(r > 0.0, "GridSpec radius must be positive");
}

SpherePoint pixel_to_sphere(int row, int col, const GridSpec& grid) {
  if (row < 0 || row >= grid.n_rows || col < 0 || col >= grid.n_cols) {
    throw ContractViolation("pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") outside " + std::to_string(grid.n_cols) + "x" +
                            std::to_string(grid.n_rows) + " grid");
  }
  return {90.0 - (row + 0.5) * 180.0 / grid.n_rows, (col + 0.5) * 360.0 / grid.n_cols};
}

double geodesic_distance(const SpherePoint& a, const SpherePoint& b, double radius) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double s_lat = std::sin((lat2 - lat1) / 2.0);
  const double s_lon = std::sin((b.lon - a.lon) * kDegToRad / 2.0);
  double h = s_lat * s_lat + std::cos(lat1) * std::cos(lat2) * s_lon * s_lon;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * radius * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

double pixel_area(int row, const GridSpec& grid) {
  CORONAL_EXPECTS(row >= 0 && row < grid.n_rows, "pixel_area: row out of range");
  const double top = (90.0 - row * 180.0 / grid.n_rows) * kDegToRad;
  const double bottom = (90.0 - (row + 1) * 180.0 / grid.n_rows) * kDegToRad;
  const double dlon = 2.0 * kPi / grid.n_cols;
  return grid.radius * grid.radius * dlon * (std::sin(top) - std::sin(bottom));
}

double pixel_area_midpoint(int row, const GridSpec& grid) {
  const double lat = pixel_to_sphere(row, 0, grid).lat * kDegToRad;
  return grid.radius * grid.radius * std::cos(lat) * (2.0 * kPi / grid.n_cols) *
         (kPi / grid.n_rows);
}

double total_area(std::span<const Pixel> pixels, const GridSpec& grid) {
  double sum = 0.0;
  for (const auto& p : pixels) sum += pixel_area(p.row, grid);
  return sum;
}

void normalize(PixelSet& pixels) {
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
}

bool intersects(std::span<const Pixel> a, std::span<const Pixel> b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      return true;
    }
  }
  return false;
}

PixelSet set_union(std::span<const Pixel> a, std::span<const Pixel> b) {
  PixelSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

PixelSet set_intersection(std::span<const Pixel> a, std::span<const Pixel> b) {
  PixelSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

PixelSet boundary_pixels(std::span<const Pixel> set, const GridSpec& grid) {
  auto contains = [&](int r, int c) {
    return std::binary_search(set.begin(), set.end(), Pixel{r, c});
  };
  PixelSet out;
  for (const auto& p : set) {
    const int west = (p.col + grid.n_cols - 1) % grid.n_cols;
    const int east = (p.col + 1) % grid.n_cols;
    bool edge = !contains(p.row, west) || !contains(p.row, east);
    if (!edge && p.row > 0) edge = !contains(p.row - 1, p.col);
    if (!edge && p.row + 1 < grid.n_rows) edge = !contains(p.row + 1, p.col);
    if (edge) out.push_back(p);
  }
  return out;
}

SphereTable::SphereTable(const GridSpec& grid) : grid_(grid) {
  sin_lat_.resize(grid.n_rows);
  cos_lat_.resize(grid.n_rows);
  for (int r = 0; r < grid.n_rows; ++r) {
    const double lat = pixel_to_sphere(r, 0, grid).lat * kDegToRad;
    sin_lat_[r] = std::sin(lat);
    cos_lat_[r] = std::cos(lat);
  }
  sin_lon_.resize(grid.n_cols);
  cos_lon_.resize(grid.n_cols);
  for (int c = 0; c < grid.n_cols; ++c) {
    const double lon = pixel_to_sphere(0, c, grid).lon * kDegToRad;
    sin_lon_[c] = std::sin(lon);
    cos_lon_[c] = std::cos(lon);
  }
}

double SphereTable::distance(const Pixel& a, const Pixel& b) const noexcept {
  // atan2(|u x v|, u . v) on unit vectors: well conditioned at all separations.
  const double ax = cos_lat_[a.row] * cos_lon_[a.col];
  const double ay = cos_lat_[a.row] * sin_lon_[a.col];
  const double az = sin_lat_[a.row];
  const double bx = cos_lat_[b.row] * cos_lon_[b.col];
  const double by = cos_lat_[b.row] * sin_lon_[b.col];
  const double bz = sin_lat_[b.row];
  const double cx = ay * bz - az * by;
  const double cy = az * bx - ax * bz;
  const double cz = ax * by - ay * bx;
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = ax * bx + ay * by + az * bz;
  return grid_.radius * std::atan2(cross, dot);
}

namespace {

double min_pairwise(std::span<const Pixel> a, std::span<const Pixel> b, const GridSpec& grid) {
  const SphereTable table(grid);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a) {
    for (const auto& q : b) {
      best = std::min(best, table.distance(p, q));
    }
  }
  return best;
}

}  // namespace

double set_distance(std::span<const Pixel> a, std::span<const Pixel> b, const GridSpec& grid) {
  CORONAL_EXPECTS(!a.empty() && !b.empty(), "set_distance requires non-empty sets");
  if (intersects(a, b)) return 0.0;
  const PixelSet ba = boundary_pixels(a, grid);
  const PixelSet bb = boundary_pixels(b, grid);
  return min_pairwise(ba, bb, grid);
}

double set_distance_bruteforce(std::span<const Pixel> a, std::span<const Pixel> b,
                               const GridSpec& grid) {
  CORONAL_EXPECTS(!a.empty() && !b.empty(), "set_distance requires non-empty sets");
  return min_pairwise(a, b, grid);
}

SpherePoint centroid(std::span<const Pixel> pixels, const GridSpec& grid) {
  CORONAL_EXPECTS(!pixels.empty(), "centroid of an empty pixel set");
  double x = 0.0, y = 0.0, z = 0.0;
  for (const auto& p : pixels) {
    const auto s = pixel_to_sphere(p.row, p.col, grid);
    const double w = pixel_area(p.row, grid);
    const double lat = s.lat * kDegToRad;
    const double lon = s.lon * kDegToRad;
    x += w * std::cos(lat) * std::cos(lon);
    y += w * std::cos(lat) * std::sin(lon);
    z += w * std::sin(lat);
  }
  const double norm = std::sqrt(x * x + y * y + z * z);
  if (norm < 1e-12) return pixel_to_sphere(pixels.front().row, pixels.front().col, grid);
  double lon = std::atan2(y, x) / kDegToRad;
  if (lon < 0.0) lon += 360.0;
  if (lon >= 360.0) lon -= 360.0;
  return {std::asin(std::clamp(z / norm, -1.0, 1.0)) / kDegToRad, lon};
}

}  // namespace coronal
