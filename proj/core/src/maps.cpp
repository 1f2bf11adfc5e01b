#include "coronal/maps.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#include "coronal/error.hpp"
#include "coronal/fileio.hpp"
#include "coronal/morphology.hpp"

namespace coronal {

std::string_view to_string(MapKind kind) noexcept {
  switch (kind) {
    case MapKind::Euv: return "euv";
    case MapKind::Magnetic: return "magnetic";
    case MapKind::Mask: return "mask";
    case MapKind::Model: return "model";
  }
  return "unknown";
}

MapKind parse_map_kind(std::string_view text) {
  if (text == "euv") return MapKind::Euv;
  if (text == "magnetic") return MapKind::Magnetic;
  if (text == "mask") return MapKind::Mask;
  if (text == "model") return MapKind::Model;
  throw IoError("unknown map kind '" + std::string(text) + "'");
}

std::string_view to_string(Polarity p) noexcept {
  return p == Polarity::Positive ? "+" : "-";
}

SynopticMap::SynopticMap(const GridSpec& g, MapKind k)
    : grid(g), kind(k), values(g.n_rows, g.n_cols, 0.0), observed(g.n_rows, g.n_cols, 1) {}

void SynopticMap::validate() const {
  CORONAL_EXPECTS(values.rows() == grid.n_rows && values.cols() == grid.n_cols,
                  "map values do not match grid dimensions");
  CORONAL_EXPECTS(observed.same_shape(values), "observed mask does not match grid dimensions");
  if (kind == MapKind::Euv) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      CORONAL_EXPECTS(!observed[i] || values[i] >= 0.0,
                      "EUV intensities must be non-negative where observed");
    }
  }
}

SegmentationMask::SegmentationMask(const GridSpec& g, Label fill)
    : grid(g), labels(g.n_rows, g.n_cols, fill) {}

std::size_t SegmentationMask::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::size_t SegmentationMask::hole_count() const {
  return count(Label::Positive) + count(Label::Negative);
}

CoronalHole CoronalHole::from_pixels(PixelSet pixels, Polarity polarity, const GridSpec& grid) {
  CORONAL_EXPECTS(!pixels.empty(), "a coronal hole needs at least one pixel");
  normalize(pixels);
  CoronalHole h;
  h.polarity = polarity;
  h.image_area = pixels.size();
  h.physical_area = total_area(pixels, grid);
  h.centroid = coronal::centroid(pixels, grid);
  h.pixels = std::move(pixels);
  return h;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct CsvHeader {
  int cols = 0;
  int rows = 0;
  MapKind kind = MapKind::Euv;
};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                 : pos - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
      cell.remove_suffix(1);
    out.push_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view s, const std::string& where) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError(where + ": expected integer, got '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, const std::string& where) {
  if (s == "NaN" || s == "nan" || s == "NAN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw IoError(where + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

struct CsvTable {
  CsvHeader header;
  std::vector<std::vector<std::string_view>> rows;
  std::string text;
};

CsvTable read_csv(const std::filesystem::path& path) {
  CsvTable t;
  t.text = read_text_file(path);
  const std::string where = path.string();
  std::string_view view(t.text);
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < view.size()) {
    auto pos = view.find('\n', start);
    if (pos == std::string_view::npos) pos = view.size();
    auto line = view.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = pos + 1;
  }
  if (lines.empty()) throw IoError(where + ": empty file");
  const auto head = split_commas(lines.front());
  if (head.size() != 3) throw IoError(where + ": header must be 'cols,rows,kind'");
  t.header.cols = parse_int(head[0], where + " header");
  t.header.rows = parse_int(head[1], where + " header");
  t.header.kind = parse_map_kind(head[2]);
  if (t.header.cols < 2 || t.header.rows < 2) {
    throw IoError(where + ": grid must be at least 2x2");
  }
  if (static_cast<int>(lines.size()) - 1 != t.header.rows) {
    throw IoError(where + ": header declares " + std::to_string(t.header.rows) + " rows, found " +
                  std::to_string(lines.size() - 1));
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto cells = split_commas(lines[i]);
    if (static_cast<int>(cells.size()) != t.header.cols) {
      throw IoError(where + ": row " + std::to_string(i - 1) + " has " +
                    std::to_string(cells.size()) + " values, expected " +
                    std::to_string(t.header.cols));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

bool is_mask_kind(MapKind k) { return k == MapKind::Mask || k == MapKind::Model; }

void check_kind(MapKind requested, MapKind found, const std::filesystem::path& path) {
  const bool ok = requested == found || (is_mask_kind(requested) && is_mask_kind(found));
  if (!ok) {
    throw IoError(path.string() + ": file holds a '" + std::string(to_string(found)) +
                  "' map, expected '" + std::string(to_string(requested)) + "'");
  }
}

void append_double(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "NaN";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

SynopticMap load_scalar_map(const std::filesystem::path& path, MapKind kind) {
  CORONAL_EXPECTS(!is_mask_kind(kind), "load_scalar_map expects euv or magnetic kind");
  const auto t = read_csv(path);
  check_kind(kind, t.header.kind, path);
  SynopticMap map(GridSpec(t.header.cols, t.header.rows), kind);
  for (int r = 0; r < t.header.rows; ++r) {
    for (int c = 0; c < t.header.cols; ++c) {
      const double v = parse_double(t.rows[r][c], path.string());
      map.values(r, c) = v;
      map.observed(r, c) = std::isnan(v) ? 0 : 1;
    }
  }
  try {
    map.validate();
  } catch (const ContractViolation& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return map;
}

SegmentationMask load_mask(const std::filesystem::path& path, MapKind kind) {
  CORONAL_EXPECTS(is_mask_kind(kind), "load_mask expects mask or model kind");
  const auto t = read_csv(path);
  check_kind(kind, t.header.kind, path);
  SegmentationMask mask(GridSpec(t.header.cols, t.header.rows));
  for (int r = 0; r < t.header.rows; ++r) {
    for (int c = 0; c < t.header.cols; ++c) {
      const int code = parse_int(t.rows[r][c], path.string());
      if (code < 0 || code > 3) {
        throw IoError(path.string() + ": invalid label code " + std::to_string(code));
      }
      mask.labels(r, c) = static_cast<Label>(code);
    }
  }
  return mask;
}

AnyMap load_map(const std::filesystem::path& path, MapKind kind) {
  if (is_mask_kind(kind)) return load_mask(path, kind);
  return load_scalar_map(path, kind);
}

std::string format_map_csv(const SynopticMap& map) {
  map.validate();
  std::string out;
  out.reserve(map.grid.pixel_count() * 12);
  out += std::to_string(map.grid.n_cols) + "," + std::to_string(map.grid.n_rows) + "," +
         std::string(to_string(map.kind)) + "\n";
  for (int r = 0; r < map.grid.n_rows; ++r) {
    for (int c = 0; c < map.grid.n_cols; ++c) {
      if (c) out += ',';
      append_double(out, map.observed(r, c) ? map.values(r, c)
                                            : std::numeric_limits<double>::quiet_NaN());
    }
    out += '\n';
  }
  return out;
}

std::string format_mask_csv(const SegmentationMask& mask, MapKind kind) {
  CORONAL_EXPECTS(is_mask_kind(kind), "mask files use kind mask or model");
  std::string out;
  out.reserve(mask.grid.pixel_count() * 2 + 32);
  out += std::to_string(mask.grid.n_cols) + "," + std::to_string(mask.grid.n_rows) + "," +
         std::string(to_string(kind)) + "\n";
  for (int r = 0; r < mask.grid.n_rows; ++r) {
    for (int c = 0; c < mask.grid.n_cols; ++c) {
      if (c) out += ',';
      out += static_cast<char>('0' + static_cast<int>(mask.labels(r, c)));
    }
    out += '\n';
  }
  return out;
}

void save_map(const std::filesystem::path& path, const SynopticMap& map) {
  write_file_atomic(path, format_map_csv(map));
}

void save_mask(const std::filesystem::path& path, const SegmentationMask& mask, MapKind kind) {
  write_file_atomic(path, format_mask_csv(mask, kind));
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct Tap {
  int i0 = 0;
  int i1 = 0;
  double w1 = 0.0;  // weight of i1; i0 gets 1 - w1
  int nearest = 0;
};

std::vector<Tap> make_taps(int src_n, int dst_n) {
  std::vector<Tap> taps(dst_n);
  const double scale = static_cast<double>(src_n) / dst_n;
  for (int d = 0; d < dst_n; ++d) {
    const double x = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(src_n - 1));
    Tap t;
    t.i0 = static_cast<int>(std::floor(x));
    t.i1 = std::min(t.i0 + 1, src_n - 1);
    t.w1 = x - t.i0;
    t.nearest = std::clamp(static_cast<int>(std::floor(x + 0.5)), 0, src_n - 1);
    taps[d] = t;
  }
  return taps;
}

template <typename Sample, typename Weight>
double interpolate(const Tap& ty, const Tap& tx, Sample&& sample, Weight&& valid) {
  const int rs[2] = {ty.i0, ty.i1};
  const double wr[2] = {1.0 - ty.w1, ty.w1};
  const int cs[2] = {tx.i0, tx.i1};
  const double wc[2] = {1.0 - tx.w1, tx.w1};
  double acc = 0.0;
  double wsum = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double w = wr[a] * wc[b];
      if (w == 0.0 || !valid(rs[a], cs[b])) continue;
      acc += w * sample(rs[a], cs[b]);
      wsum += w;
    }
  }
  return wsum > 0.0 ? acc / wsum : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

Field resize_bilinear(const Field& field, int rows, int cols) {
  CORONAL_EXPECTS(rows >= 2 && cols >= 2, "resize target must be at least 2x2");
  const auto ty = make_taps(field.rows(), rows);
  const auto tx = make_taps(field.cols(), cols);
  Field out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out(r, c) = interpolate(
          ty[r], tx[c], [&](int rr, int cc) { return field(rr, cc); },
          [](int, int) { return true; });
    }
  }
  return out;
}

BoolField resize_nearest(const BoolField& field, int rows, int cols) {
  CORONAL_EXPECTS(rows >= 2 && cols >= 2, "resize target must be at least 2x2");
  const auto ty = make_taps(field.rows(), rows);
  const auto tx = make_taps(field.cols(), cols);
  BoolField out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = field(ty[r].nearest, tx[c].nearest);
  }
  return out;
}

SynopticMap resize_bilinear(const SynopticMap& map, const GridSpec& target) {
  const auto ty = make_taps(map.grid.n_rows, target.n_rows);
  const auto tx = make_taps(map.grid.n_cols, target.n_cols);
  SynopticMap out(target, map.kind);
  out.observed = resize_nearest(map.observed, target.n_rows, target.n_cols);
  for (int r = 0; r < target.n_rows; ++r) {
    for (int c = 0; c < target.n_cols; ++c) {
      if (!out.observed(r, c)) {
        out.values(r, c) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      out.values(r, c) = interpolate(
          ty[r], tx[c], [&](int rr, int cc) { return map.values(rr, cc); },
          [&](int rr, int cc) { return map.observed(rr, cc) != 0; });
    }
  }
  return out;
}

SegmentationMask resize_bilinear(const SegmentationMask& mask, const GridSpec& target) {
  const auto ty = make_taps(mask.grid.n_rows, target.n_rows);
  const auto tx = make_taps(mask.grid.n_cols, target.n_cols);
  SegmentationMask out(target);
  auto indicator = [&](Label l) {
    return [&mask, l](int rr, int cc) { return mask.labels(rr, cc) == l ? 1.0 : 0.0; };
  };
  const auto all = [](int, int) { return true; };
  for (int r = 0; r < target.n_rows; ++r) {
    for (int c = 0; c < target.n_cols; ++c) {
      if (mask.labels(ty[r].nearest, tx[c].nearest) == Label::NoObservation) {
        out.labels(r, c) = Label::NoObservation;
        continue;
      }
      const double pos = interpolate(ty[r], tx[c], indicator(Label::Positive), all);
      const double neg = interpolate(ty[r], tx[c], indicator(Label::Negative), all);
      if (pos >= 0.5 || neg >= 0.5) {
        out.labels(r, c) = pos >= neg ? Label::Positive : Label::Negative;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pre-processing

BoolField hole_indicator(const SegmentationMask& mask) {
  BoolField out(mask.grid.n_rows, mask.grid.n_cols, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = is_hole(mask.labels[i]) ? 1 : 0;
  return out;
}

BoolField polarity_indicator(const SegmentationMask& mask, Polarity polarity) {
  const Label want = label_of(polarity);
  BoolField out(mask.grid.n_rows, mask.grid.n_cols, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.labels[i] == want ? 1 : 0;
  return out;
}

SegmentationMask close_holes(const SegmentationMask& mask, int radius) {
  CORONAL_EXPECTS(radius >= 0, "closing radius must be non-negative");
  if (radius == 0) return mask;
  const BoolField pos = binary_close(polarity_indicator(mask, Polarity::Positive), radius);
  const BoolField neg = binary_close(polarity_indicator(mask, Polarity::Negative), radius);
  SegmentationMask out = mask;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (out.labels[i] != Label::Background) continue;
    if (pos[i] && !neg[i]) out.labels[i] = Label::Positive;
    if (neg[i] && !pos[i]) out.labels[i] = Label::Negative;
  }
  return out;
}

SegmentationMask remove_regions(const SegmentationMask& mask) {
  SegmentationMask out = mask;
  for (int r = 0; r < mask.grid.n_rows; ++r) {
    const double lat = pixel_to_sphere(r, 0, mask.grid).lat;
    if (std::abs(lat) <= kPolarCapLatitude) continue;
    for (int c = 0; c < mask.grid.n_cols; ++c) {
      if (is_hole(out.labels(r, c))) out.labels(r, c) = Label::Background;
    }
  }
  return out;
}

SegmentationMask remove_regions(const SegmentationMask& mask, const BoolField& observed) {
  CORONAL_EXPECTS(observed.rows() == mask.grid.n_rows && observed.cols() == mask.grid.n_cols,
                  "observation mask does not match segmentation grid");
  SegmentationMask out = remove_regions(mask);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (!observed[i]) out.labels[i] = Label::NoObservation;
  }
  return out;
}

namespace {

template <bool Eight>
std::vector<PixelSet> label_components(const BoolField& mask) {
  const int rows = mask.rows();
  const int cols = mask.cols();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<PixelSet> out;
  std::deque<Pixel> queue;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const auto idx = mask.index(r, c);
      if (!mask[idx] || seen[idx]) continue;
      PixelSet comp;
      seen[idx] = 1;
      queue.push_back({r, c});
      while (!queue.empty()) {
        const Pixel p = queue.front();
        queue.pop_front();
        comp.push_back(p);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (!Eight && dr != 0 && dc != 0) continue;
            const int rr = p.row + dr;
            if (rr < 0 || rr >= rows) continue;
            const int cc = mask.wrap_col(p.col + dc);
            const auto j = mask.index(rr, cc);
            if (mask[j] && !seen[j]) {
              seen[j] = 1;
              queue.push_back({rr, cc});
            }
          }
        }
      }
      normalize(comp);
      out.push_back(std::move(comp));
    }
  }
  return out;
}

}  // namespace

std::vector<PixelSet> connected_components(const BoolField& mask) {
  return label_components<true>(mask);
}

std::vector<PixelSet> connected_components4(const BoolField& mask) {
  return label_components<false>(mask);
}

std::vector<CoronalHole> extract_holes(const SegmentationMask& mask, Polarity polarity) {
  std::vector<CoronalHole> out;
  for (auto& comp : connected_components(polarity_indicator(mask, polarity))) {
    out.push_back(CoronalHole::from_pixels(std::move(comp), polarity, mask.grid));
  }
  return out;
}

std::vector<CoronalHole> extract_holes(const SegmentationMask& mask) {
  auto out = extract_holes(mask, Polarity::Positive);
  auto neg = extract_holes(mask, Polarity::Negative);
  out.insert(out.end(), std::make_move_iterator(neg.begin()), std::make_move_iterator(neg.end()));
  return out;
}

SegmentationMask preprocess_for_matching(const SegmentationMask& mask, const GridSpec& target,
                                         const BoolField* observed,
                                         const PreprocessOptions& options) {
  SegmentationMask m = close_holes(mask, options.close_radius);
  if (!(m.grid.n_cols == target.n_cols && m.grid.n_rows == target.n_rows)) {
    m = resize_bilinear(m, target);
  }
  m.grid = target;
  return observed ? remove_regions(m, *observed) : remove_regions(m);
}

}  // namespace coronal
