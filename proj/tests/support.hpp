#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "coronal/maps.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("coronal_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Rows of characters: '.' background, '+' positive, '-' negative, '#' no observation.
inline coronal::SegmentationMask mask_from_rows(const std::vector<std::string>& rows) {
  coronal::GridSpec g(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()));
  coronal::SegmentationMask m(g);
  for (int r = 0; r < g.n_rows; ++r) {
    for (int c = 0; c < g.n_cols; ++c) {
      const char ch = rows[r][c];
      m.labels(r, c) = ch == '+'   ? coronal::Label::Positive
                       : ch == '-' ? coronal::Label::Negative
                       : ch == '#' ? coronal::Label::NoObservation
                                   : coronal::Label::Background;
    }
  }
  return m;
}

inline coronal::BoolField random_bool_field(int rows, int cols, double p, std::mt19937_64& rng) {
  coronal::BoolField f(rows, cols, 0);
  std::bernoulli_distribution b(p);
  for (auto& v : f.values()) v = b(rng) ? 1 : 0;
  return f;
}

inline coronal::SegmentationMask random_mask(const coronal::GridSpec& g, std::mt19937_64& rng,
                                             double p_hole = 0.2, double p_noobs = 0.0) {
  coronal::SegmentationMask m(g);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& l : m.labels.values()) {
    const double x = u(rng);
    if (x < p_noobs) l = coronal::Label::NoObservation;
    else if (x < p_noobs + p_hole / 2) l = coronal::Label::Positive;
    else if (x < p_noobs + p_hole) l = coronal::Label::Negative;
  }
  return m;
}

inline coronal::PixelSet block(int r0, int c0, int h, int w, const coronal::GridSpec& g) {
  coronal::PixelSet s;
  for (int r = r0; r < r0 + h; ++r)
    for (int c = c0; c < c0 + w; ++c) s.push_back({r, ((c % g.n_cols) + g.n_cols) % g.n_cols});
  coronal::normalize(s);
  return s;
}

}  // namespace testing_support
