#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "coronal/maps.hpp"
#include "coronal/matching.hpp"

namespace coronal::render {

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0});
  void set(int x, int y, Rgb c);
  Rgb get(int x, int y) const;
};

/// EUV in grey (unobserved black), result hole boundaries on top:
/// red for positive, blue for negative. Optional truth boundary in green.
Image segmentation_overlay(const SynopticMap& euv, const SegmentationMask& result,
                           const SegmentationMask* truth = nullptr);

/// Reference clusters solid, model clusters as hollow outlines. Matched
/// clusters are drawn in faded colours, new and missing ones in bright
/// red (positive) or blue (negative).
Image matching_overlay(const matching::MatchResult& result, const GridSpec& grid);

/// Deterministic PNG bytes (no timestamps or text chunks).
std::string encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace coronal::render
