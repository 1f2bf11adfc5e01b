#include "coronal/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>

#include "coronal/error.hpp"
#include "coronal/fileio.hpp"

namespace coronal::render {

namespace {

constexpr Rgb kRed{230, 30, 30}, kBlue{30, 60, 230}, kGreen{40, 200, 60};
constexpr Rgb kFadedRed{240, 170, 170}, kFadedBlue{170, 185, 240};
constexpr Rgb kDarkRed{150, 40, 40}, kDarkBlue{40, 50, 150};

/// Pixels of `set` with a 4-neighbour outside it (longitude wraps).
BoolField outline(const BoolField& set) {
  BoolField out(set.rows(), set.cols(), 0);
  for (int r = 0; r < set.rows(); ++r) {
    for (int c = 0; c < set.cols(); ++c) {
      if (!set(r, c)) continue;
      const bool edge = r == 0 || r + 1 == set.rows() || !set(r - 1, c) || !set(r + 1, c) ||
                        !set(r, set.wrap_col(c - 1)) || !set(r, set.wrap_col(c + 1));
      if (edge) out(r, c) = 1;
    }
  }
  return out;
}

BoolField indicator(const PixelSet& px, const GridSpec& grid) {
  BoolField m(grid.n_rows, grid.n_cols, 0);
  for (const auto& p : px) m(p.row, p.col) = 1;
  return m;
}

void draw(Image& img, const BoolField& m, Rgb c) {
  for (int r = 0; r < m.rows(); ++r)
    for (int col = 0; col < m.cols(); ++col)
      if (m(r, col)) img.set(col, r, c);
}

}  // namespace

Image::Image(int w, int h, Rgb fill) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  CORONAL_EXPECTS(w > 0 && h > 0, "image dimensions must be positive");
  for (std::size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + i);
}

void Image::set(int x, int y, Rgb c) {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  std::copy(c.begin(), c.end(), rgb.begin() + i);
}

Rgb Image::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Image segmentation_overlay(const SynopticMap& euv, const SegmentationMask& result,
                           const SegmentationMask* truth) {
  const GridSpec& g = euv.grid;
  CORONAL_EXPECTS(result.grid.n_cols == g.n_cols && result.grid.n_rows == g.n_rows,
                  "overlay: result mask must share the EUV grid");
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (std::size_t i = 0; i < euv.values.size(); ++i) {
    if (!euv.observed[i]) continue;
    lo = std::min(lo, euv.values[i]);
    hi = std::max(hi, euv.values[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  Image img(g.n_cols, g.n_rows);
  for (int r = 0; r < g.n_rows; ++r) {
    for (int c = 0; c < g.n_cols; ++c) {
      if (!euv.observed(r, c)) continue;
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * (euv.values(r, c) - lo) / span));
      img.set(c, r, {v, v, v});
    }
  }
  if (truth) draw(img, outline(hole_indicator(*truth)), kGreen);
  draw(img, outline(polarity_indicator(result, Polarity::Positive)), kRed);
  draw(img, outline(polarity_indicator(result, Polarity::Negative)), kBlue);
  return img;
}

Image matching_overlay(const matching::MatchResult& result, const GridSpec& grid) {
  Image img(grid.n_cols, grid.n_rows, {255, 255, 255});
  std::vector<char> ref_matched(result.ref_clusters.size(), 0);
  std::vector<char> model_matched(result.model_clusters.size(), 0);
  for (const auto& p : result.matched) {
    ref_matched[p.ref] = 1;
    model_matched[p.model] = 1;
  }
  for (std::size_t i = 0; i < result.ref_clusters.size(); ++i) {
    const auto& c = result.ref_clusters[i];
    const bool pos = c.polarity == Polarity::Positive;
    const Rgb col = ref_matched[i] ? (pos ? kFadedRed : kFadedBlue) : (pos ? kRed : kBlue);
    draw(img, indicator(c.pixels, grid), col);
  }
  for (std::size_t j = 0; j < result.model_clusters.size(); ++j) {
    const auto& c = result.model_clusters[j];
    const bool pos = c.polarity == Polarity::Positive;
    const Rgb col = model_matched[j] ? (pos ? kDarkRed : kDarkBlue) : (pos ? kRed : kBlue);
    draw(img, outline(indicator(c.pixels, grid)), col);
  }
  return img;
}

std::string encode_png(const Image& image) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_png(image));
}

}  // namespace coronal::render
