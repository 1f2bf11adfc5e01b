#include "coronal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "json.hpp"

#include "coronal/error.hpp"
#include "coronal/fileio.hpp"
#include "coronal/parallel.hpp"

namespace coronal::synth {

namespace {

using Rng = std::mt19937_64;

double wrap_deg(double d) {
  d = std::fmod(d, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d < -180.0) d += 360.0;
  return d;
}

double wrap_lon(double lon) {
  lon = std::fmod(lon, 360.0);
  return lon < 0.0 ? lon + 360.0 : lon;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double center_distance_deg(const Ellipse& a, const Ellipse& b) {
  return geodesic_distance({a.lat, a.lon}, {b.lat, b.lon}, 1.0) / kDegToRad;
}

double edge_gap(const Ellipse& a, const Ellipse& b) { return center_distance_deg(a, b) - a.a - b.a; }

/// Longitude distance from `lon` to the unobserved band, 0 inside it.
double band_gap(double lon, double band_lon, double width) {
  if (width <= 0.0) return std::numeric_limits<double>::infinity();
  const double rel = wrap_lon(lon - band_lon);
  if (rel <= width) return 0.0;
  return std::min(rel - width, 360.0 - rel);
}

bool in_band(double lon, double band_lon, double width) {
  return width > 0.0 && wrap_lon(lon - band_lon) < width;
}

bool clear_of_band(const Ellipse& e, const SynthSpec& s, double band_lon, double margin) {
  const double reach = (e.a + margin) / std::max(std::cos(e.lat * kDegToRad), 0.2);
  return band_gap(e.lon, band_lon, s.band_width) > reach;
}

Ellipse random_shape(Rng& rng, const SynthSpec& s) {
  Ellipse e;
  e.a = uniform(rng, s.semi_major_min, s.semi_major_max);
  e.b = e.a * uniform(rng, s.axis_ratio_min, s.axis_ratio_max);
  e.theta = uniform(rng, 0.0, kPi);
  e.lat = uniform(rng, -s.max_abs_lat, s.max_abs_lat);
  e.lon = uniform(rng, 0.0, 360.0);
  return e;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Rotated local coordinates in degrees.
std::pair<double, double> local_xy(const Ellipse& e, double lat, double lon) {
  const double dx = wrap_deg(lon - e.lon) * std::cos(lat * kDegToRad);
  const double dy = lat - e.lat;
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  return {c * dx + s * dy, -s * dx + c * dy};
}

double area_of(const Ellipse& e, const GridSpec& grid) {
  const PixelSet px = rasterize(e, grid);
  return total_area(px, grid);
}

void paint(SegmentationMask& m, const PixelSet& px, Label l) {
  for (const auto& p : px) m.labels(p.row, p.col) = l;
}

nlohmann::json ellipse_json(const Ellipse& e) {
  return {{"lat", e.lat}, {"lon", e.lon}, {"a", e.a}, {"b", e.b}, {"theta", e.theta}};
}

Ellipse ellipse_from(const nlohmann::json& j) {
  return {j.at("lat").get<double>(), j.at("lon").get<double>(), j.at("a").get<double>(),
          j.at("b").get<double>(), j.at("theta").get<double>()};
}

Polarity polarity_from(const std::string& s) {
  return s == "+" ? Polarity::Positive : Polarity::Negative;
}

}  // namespace

void Perturbation::validate() const {
  if (!(jitter_max >= 0.0)) throw ConfigError("perturbation jitter must be non-negative");
  if (!(scale_min > 0.0 && scale_min <= scale_max))
    throw ConfigError("perturbation scale range must satisfy 0 < min <= max");
  for (double p : {remove_prob, add_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("perturbation probabilities must be in [0, 1]");
  }
}

void SynthSpec::validate() const {
  if (n_dates < 1) throw ConfigError("synth: n_dates must be at least 1");
  if (n_cols < 2 || n_rows < 2 || model_cols < 2 || model_rows < 2)
    throw ConfigError("synth: grids must be at least 2x2");
  if (holes_min < 0 || holes_max < holes_min) throw ConfigError("synth: invalid hole count range");
  if (!(semi_major_min > 0.0 && semi_major_max >= semi_major_min))
    throw ConfigError("synth: invalid hole size range");
  if (!(axis_ratio_min > 0.0 && axis_ratio_max >= axis_ratio_min && axis_ratio_max <= 1.0))
    throw ConfigError("synth: invalid axis ratio range");
  if (!(max_abs_lat >= 0.0 && max_abs_lat < 90.0)) throw ConfigError("synth: invalid max_abs_lat");
  if (!(band_width >= 0.0 && band_width < 180.0)) throw ConfigError("synth: invalid band width");
  if (external_block < 1) throw ConfigError("synth: external_block must be >= 1");
  if (n_models < 0 || rank1_min < 0 || rank1_max < rank1_min)
    throw ConfigError("synth: invalid model group sizes");
  if (fakes_max < 0) throw ConfigError("synth: fakes_max must be >= 0");
  if (!(euv_noise >= 0.0 && flux_noise >= 0.0 && edge_width > 0.0))
    throw ConfigError("synth: noise levels must be >= 0 and edge width > 0");
  rank1.validate();
  rank2.validate();
}

double ellipse_radius(const Ellipse& e, double lat, double lon) {
  const auto [x, y] = local_xy(e, lat, lon);
  return std::sqrt((x / e.a) * (x / e.a) + (y / e.b) * (y / e.b));
}

PixelSet rasterize(const Ellipse& e, const GridSpec& grid) {
  PixelSet out;
  const double dlat = 180.0 / grid.n_rows;
  const double reach = std::max(e.a, e.b) + dlat;
  for (int r = 0; r < grid.n_rows; ++r) {
    const double lat = 90.0 - (r + 0.5) * dlat;
    if (std::abs(lat - e.lat) > reach) continue;
    for (int c = 0; c < grid.n_cols; ++c) {
      const SpherePoint p = pixel_to_sphere(r, c, grid);
      if (ellipse_radius(e, p.lat, p.lon) <= 1.0) out.push_back({r, c});
    }
  }
  return out;
}

bool label_rule(const SynthSpec& spec, double missing_fraction, double new_fraction,
                double area_ratio) {
  return missing_fraction <= spec.max_missing_fraction && new_fraction <= spec.max_new_fraction &&
         area_ratio <= spec.max_area_ratio;
}

SynthDate generate_date(const SynthSpec& spec, int date) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(date)};
  Rng rng(seq);
  const GridSpec grid = spec.grid();

  SynthDate out;
  DateTruth& truth = out.truth;
  truth.date = date;
  truth.band_lon = spec.band_width > 0.0 ? uniform(rng, 0.0, 360.0) : 0.0;
  const double band_margin = spec.rank2.jitter_max + 6.0;

  const int n_holes = uniform_int(rng, spec.holes_min, spec.holes_max);
  for (int k = 0; k < n_holes; ++k) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      Ellipse e = random_shape(rng, spec);
      const double grown = std::sqrt(spec.rank2.scale_max);
      Ellipse reach = e;
      reach.a *= grown;
      if (!clear_of_band(reach, spec, truth.band_lon, band_margin)) continue;
      const bool ok = std::all_of(truth.holes.begin(), truth.holes.end(), [&](const TruthHole& h) {
        return edge_gap(e, h.shape) >= spec.min_separation;
      });
      if (!ok) continue;
      const Polarity pol = uniform(rng, 0.0, 1.0) < 0.5 ? Polarity::Positive : Polarity::Negative;
      truth.holes.push_back({static_cast<int>(truth.holes.size()), e, pol});
      break;
    }
  }

  const int n_fakes = uniform_int(rng, 0, spec.fakes_max);
  for (int k = 0; k < n_fakes; ++k) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      Ellipse e = random_shape(rng, spec);
      e.a = std::min(e.a, 7.0);
      e.b = std::min(e.b, e.a);
      if (!clear_of_band(e, spec, truth.band_lon, 3.0)) continue;
      const bool ok =
          std::all_of(truth.holes.begin(), truth.holes.end(),
                      [&](const TruthHole& h) { return edge_gap(e, h.shape) >= 15.0; }) &&
          std::all_of(truth.fakes.begin(), truth.fakes.end(),
                      [&](const Ellipse& f) { return edge_gap(e, f) >= 10.0; });
      if (!ok) continue;
      truth.fakes.push_back(e);
      break;
    }
  }

  // Observations.
  out.euv = SynopticMap(grid, MapKind::Euv);
  out.mag = SynopticMap(grid, MapKind::Magnetic);
  const double phase1 = uniform(rng, 0.0, 2.0 * kPi), phase2 = uniform(rng, 0.0, 2.0 * kPi);
  const double phase3 = uniform(rng, 0.0, 2.0 * kPi);
  std::normal_distribution<double> euv_noise(0.0, spec.euv_noise), flux_noise(0.0, spec.flux_noise);
  for (int r = 0; r < grid.n_rows; ++r) {
    for (int c = 0; c < grid.n_cols; ++c) {
      const SpherePoint p = pixel_to_sphere(r, c, grid);
      const double lonr = p.lon * kDegToRad, latr = p.lat * kDegToRad;
      // Draw noise unconditionally so the stream does not depend on the band.
      const double ne = spec.euv_noise > 0.0 ? euv_noise(rng) : 0.0;
      const double nf = spec.flux_noise > 0.0 ? flux_noise(rng) : 0.0;
      if (in_band(p.lon, truth.band_lon, spec.band_width)) {
        out.euv.values(r, c) = std::numeric_limits<double>::quiet_NaN();
        out.mag.values(r, c) = std::numeric_limits<double>::quiet_NaN();
        out.euv.observed(r, c) = 0;
        out.mag.observed(r, c) = 0;
        continue;
      }
      double euv = spec.quiet_euv + 4.0 * std::sin(2.0 * lonr + phase1) * std::cos(latr) + ne;
      double flux = spec.flux_background * std::sin(lonr + phase2) * std::cos(2.0 * latr + phase3) + nf;
      for (const auto& h : truth.holes) {
        const double s = ellipse_radius(h.shape, p.lat, p.lon);
        const double scale = std::sqrt(h.shape.a * h.shape.b);
        euv -= spec.hole_depth * sigmoid((1.0 - s) * scale / spec.edge_width);
        flux += static_cast<double>(h.polarity) * spec.flux_hole * std::exp(-s * s / (2.0 * 1.6 * 1.6));
      }
      for (const auto& f : truth.fakes) {
        const double s = ellipse_radius(f, p.lat, p.lon);
        const double scale = std::sqrt(f.a * f.b);
        euv -= 0.75 * spec.hole_depth * sigmoid((1.0 - s) * scale / spec.edge_width);
        const auto [x, y] = local_xy(f, p.lat, p.lon);
        (void)y;
        flux += spec.flux_hole * (x / f.a) * std::exp(-s * s / 2.0);
      }
      out.euv.values(r, c) = std::max(euv, 1.0);
      out.mag.values(r, c) = flux;
    }
  }

  // Consensus and the coarse external mask.
  out.consensus = SegmentationMask(grid);
  for (const auto& h : truth.holes) paint(out.consensus, rasterize(h.shape, grid), label_of(h.polarity));
  out.external = SegmentationMask(grid);
  const int k = spec.external_block;
  for (int r0 = 0; r0 < grid.n_rows; r0 += k) {
    for (int c0 = 0; c0 < grid.n_cols; c0 += k) {
      int pos = 0, neg = 0, total = 0;
      for (int r = r0; r < std::min(r0 + k, grid.n_rows); ++r) {
        for (int c = c0; c < std::min(c0 + k, grid.n_cols); ++c) {
          ++total;
          pos += out.consensus.labels(r, c) == Label::Positive;
          neg += out.consensus.labels(r, c) == Label::Negative;
        }
      }
      if (2 * (pos + neg) < total) continue;
      const Label l = pos >= neg ? Label::Positive : Label::Negative;
      for (int r = r0; r < std::min(r0 + k, grid.n_rows); ++r)
        for (int c = c0; c < std::min(c0 + k, grid.n_cols); ++c) out.external.labels(r, c) = l;
    }
  }
  for (const auto& f : truth.fakes) paint(out.external, rasterize(f, grid), Label::Positive);
  for (std::size_t i = 0; i < grid.pixel_count(); ++i) {
    if (!out.euv.observed[i]) {
      out.consensus.labels[i] = Label::NoObservation;
      out.external.labels[i] = Label::NoObservation;
    }
  }

  // Model maps.
  std::vector<int> order(static_cast<std::size_t>(spec.n_models));
  for (int i = 0; i < spec.n_models; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int n_rank1 = std::min(spec.n_models, uniform_int(rng, spec.rank1_min, spec.rank1_max));
  std::vector<int> rank(static_cast<std::size_t>(spec.n_models), 2);
  for (int i = 0; i < n_rank1; ++i) rank[order[i]] = 1;

  std::vector<double> ref_area(truth.holes.size());
  double ref_total = 0.0;
  for (std::size_t i = 0; i < truth.holes.size(); ++i) {
    ref_area[i] = area_of(truth.holes[i].shape, grid);
    ref_total += ref_area[i];
  }
  const GridSpec mgrid = spec.model_grid();
  for (int m = 0; m < spec.n_models; ++m) {
    const Perturbation& pert = rank[m] == 1 ? spec.rank1 : spec.rank2;
    ModelTruth mt;
    mt.rank = rank[m];
    double kept_ref = 0.0, kept_model = 0.0, removed = 0.0, added = 0.0;
    int n_new = 0;
    for (std::size_t i = 0; i < truth.holes.size(); ++i) {
      const TruthHole& h = truth.holes[i];
      const bool remove = uniform(rng, 0.0, 1.0) < pert.remove_prob;
      const double jd = uniform(rng, 0.0, pert.jitter_max);
      const double jdir = uniform(rng, 0.0, 2.0 * kPi);
      const double scale = uniform(rng, pert.scale_min, pert.scale_max);
      const bool add = uniform(rng, 0.0, 1.0) < pert.add_prob;
      if (remove) {
        mt.removed.push_back(h.id);
        removed += ref_area[i];
      } else {
        Ellipse e = h.shape;
        e.lat += jd * std::sin(jdir);
        e.lon = wrap_lon(e.lon + jd * std::cos(jdir) / std::cos(e.lat * kDegToRad));
        e.a *= std::sqrt(scale);
        e.b *= std::sqrt(scale);
        mt.holes.push_back({h.id, e, h.polarity});
        kept_ref += ref_area[i];
        kept_model += area_of(e, grid);
      }
      if (add) ++n_new;
    }
    for (int k2 = 0; k2 < n_new; ++k2) {
      for (int attempt = 0; attempt < 2000; ++attempt) {
        Ellipse e = random_shape(rng, spec);
        if (!clear_of_band(e, spec, truth.band_lon, 3.0)) continue;
        const double gap = spec.min_separation + 5.0;
        const bool ok =
            std::all_of(truth.holes.begin(), truth.holes.end(),
                        [&](const TruthHole& h) { return edge_gap(e, h.shape) >= gap; }) &&
            std::all_of(mt.holes.begin(), mt.holes.end(),
                        [&](const ModelHole& h) { return edge_gap(e, h.shape) >= gap; });
        if (!ok) continue;
        const Polarity pol = uniform(rng, 0.0, 1.0) < 0.5 ? Polarity::Positive : Polarity::Negative;
        mt.holes.push_back({-1, e, pol});
        added += area_of(e, grid);
        break;
      }
    }
    mt.missing_fraction = ref_total > 0.0 ? removed / ref_total : 0.0;
    mt.new_fraction = ref_total > 0.0 ? added / ref_total : 0.0;
    mt.area_ratio = kept_ref > 0.0 ? kept_model / kept_ref : 1.0;
    mt.good = label_rule(spec, mt.missing_fraction, mt.new_fraction, mt.area_ratio);

    SegmentationMask mask(mgrid);
    for (const auto& h : mt.holes) paint(mask, rasterize(h.shape, mgrid), label_of(h.polarity));
    out.models.push_back(std::move(mask));
    truth.models.push_back(std::move(mt));
  }
  return out;
}

std::string to_json(const DateTruth& t) {
  nlohmann::json j;
  j["format"] = "coronal.truth";
  j["version"] = 1;
  j["date"] = t.date;
  j["band_lon"] = t.band_lon;
  auto& holes = j["holes"] = nlohmann::json::array();
  for (const auto& h : t.holes) {
    holes.push_back({{"id", h.id},
                     {"polarity", std::string(to_string(h.polarity))},
                     {"shape", ellipse_json(h.shape)}});
  }
  auto& fakes = j["fakes"] = nlohmann::json::array();
  for (const auto& f : t.fakes) fakes.push_back(ellipse_json(f));
  auto& models = j["models"] = nlohmann::json::array();
  for (std::size_t m = 0; m < t.models.size(); ++m) {
    const auto& mt = t.models[m];
    nlohmann::json mj{{"id", m},
                      {"rank", mt.rank},
                      {"label", mt.good ? "good" : "bad"},
                      {"removed", mt.removed},
                      {"missing_fraction", mt.missing_fraction},
                      {"new_fraction", mt.new_fraction},
                      {"area_ratio", mt.area_ratio}};
    auto& mh = mj["holes"] = nlohmann::json::array();
    for (const auto& h : mt.holes) {
      mh.push_back({{"ref", h.ref},
                    {"polarity", std::string(to_string(h.polarity))},
                    {"shape", ellipse_json(h.shape)}});
    }
    models.push_back(std::move(mj));
  }
  return j.dump(1) + "\n";
}

DateTruth truth_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "coronal.truth" || j.value("version", 0) != 1)
      throw IoError("truth file: unsupported format or version");
    DateTruth t;
    t.date = j.at("date").get<int>();
    t.band_lon = j.at("band_lon").get<double>();
    for (const auto& h : j.at("holes")) {
      t.holes.push_back({h.at("id").get<int>(), ellipse_from(h.at("shape")),
                         polarity_from(h.at("polarity").get<std::string>())});
    }
    for (const auto& f : j.at("fakes")) t.fakes.push_back(ellipse_from(f));
    for (const auto& mj : j.at("models")) {
      ModelTruth mt;
      mt.rank = mj.at("rank").get<int>();
      mt.good = mj.at("label").get<std::string>() == "good";
      mt.removed = mj.at("removed").get<std::vector<int>>();
      mt.missing_fraction = mj.at("missing_fraction").get<double>();
      mt.new_fraction = mj.at("new_fraction").get<double>();
      mt.area_ratio = mj.at("area_ratio").get<double>();
      for (const auto& h : mj.at("holes")) {
        mt.holes.push_back({h.at("ref").get<int>(), ellipse_from(h.at("shape")),
                            polarity_from(h.at("polarity").get<std::string>())});
      }
      t.models.push_back(std::move(mt));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("truth file: ") + e.what());
  }
}

std::string date_dir_name(int date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "day%03d", date);
  return buf;
}

void write_dataset(const SynthSpec& spec, const std::filesystem::path& root, int jobs) {
  spec.validate();
  parallel_for(static_cast<std::size_t>(spec.n_dates), jobs, [&](std::size_t i) {
    const int date = static_cast<int>(i);
    const SynthDate d = generate_date(spec, date);
    const auto dir = root / "dates" / date_dir_name(date);
    save_map(dir / "euv.csv", d.euv);
    save_map(dir / "mag.csv", d.mag);
    save_mask(dir / "consensus.csv", d.consensus);
    save_mask(dir / "external.csv", d.external);
    for (std::size_t m = 0; m < d.models.size(); ++m) {
      char name[32];
      std::snprintf(name, sizeof name, "model_%02zu.csv", m);
      save_mask(dir / name, d.models[m], MapKind::Model);
    }
    write_file_atomic(dir / "truth.json", to_json(d.truth));
  });
}

}  // namespace coronal::synth
