#include "coronal/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "coronal/classify.hpp"
#include "coronal/error.hpp"
#include "coronal/fileio.hpp"
#include "coronal/parallel.hpp"
#include "coronal/render.hpp"

namespace coronal::pipeline {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Small helpers

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

class Logger {
 public:
  explicit Logger(std::ostream* os) : os_(os) {}
  void warn(const std::string& msg) {
    if (!os_) return;
    std::lock_guard lock(mu_);
    *os_ << "warning: " << msg << '\n';
  }

 private:
  std::ostream* os_;
  std::mutex mu_;
};

fs::path date_dir(const fs::path& root, int date) { return root / "dates" / synth::date_dir_name(date); }

void require_files(const std::vector<fs::path>& paths) {
  std::string missing;
  for (const auto& p : paths) {
    if (!fs::exists(p)) missing += (missing.empty() ? "" : ", ") + p.string();
  }
  if (!missing.empty()) throw MissingInput("missing input: " + missing);
}

std::vector<int> selected_dates(const RunOptions& opt) {
  std::vector<int> out;
  for (int d : list_dates(opt.root())) {
    if (d >= opt.dates.from && (opt.dates.to < 0 || d <= opt.dates.to)) out.push_back(d);
  }
  if (out.empty()) {
    throw MissingInput("no dates found under " + (opt.root() / "dates").string() +
                       " for the requested range");
  }
  return out;
}

std::vector<fs::path> model_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("model_", 0) == 0 && e.path().extension() == ".csv") {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(where.string() + ": bad number '" + s + "'");
  }
  return v;
}

/// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------
// Segmentation pieces

struct Selectors {
  std::optional<forest::TrainedForest> hh;
  std::map<std::string, forest::TrainedForest> external;
};

fs::path selector_path(const fs::path& root, const std::string& source) {
  return root / "tune" / ("selector_" + source + ".json");
}

Selectors load_selectors(const RunOptions& opt, Logger& log) {
  Selectors s;
  if (!opt.cfg.init.use_selectors) return s;
  std::vector<std::string> absent;
  if (fs::exists(selector_path(opt.root(), "hh"))) {
    s.hh = forest::load(selector_path(opt.root(), "hh"));
  } else {
    absent.push_back("hh");
  }
  for (const auto& name : opt.cfg.init.external) {
    if (fs::exists(selector_path(opt.root(), name))) {
      s.external.emplace(name, forest::load(selector_path(opt.root(), name)));
    } else {
      absent.push_back(name);
    }
  }
  for (const auto& name : absent) {
    log.warn("no trained selector for '" + name + "'; keeping all of its candidates");
  }
  return s;
}

struct DateMaps {
  SynopticMap euv;
  SynopticMap mag;
  std::vector<std::pair<std::string, SegmentationMask>> externals;
};

DateMaps load_date_maps(const RunOptions& opt, int date) {
  const fs::path dir = date_dir(opt.root(), date);
  std::vector<fs::path> need{dir / "euv.csv", dir / "mag.csv"};
  for (const auto& name : opt.cfg.init.external) need.push_back(dir / (name + ".csv"));
  require_files(need);
  DateMaps m;
  m.euv = load_scalar_map(dir / "euv.csv", MapKind::Euv);
  m.mag = load_scalar_map(dir / "mag.csv", MapKind::Magnetic);
  CORONAL_EXPECTS(m.euv.grid == m.mag.grid, "EUV and magnetic maps of " +
                                                synth::date_dir_name(date) + " differ in size");
  for (const auto& name : opt.cfg.init.external) {
    SegmentationMask ext = load_mask(dir / (name + ".csv"));
    if (!(ext.grid == m.euv.grid)) ext = resize_bilinear(ext, m.euv.grid);
    for (std::size_t i = 0; i < ext.labels.size(); ++i) {
      if (!m.euv.observed[i]) ext.labels[i] = Label::NoObservation;
    }
    m.externals.emplace_back(name, std::move(ext));
  }
  return m;
}

std::vector<HoleFeatureVector> features_of(const std::vector<CoronalHole>& holes, const DateMaps& m) {
  std::vector<HoleFeatureVector> f;
  f.reserve(holes.size());
  for (const auto& h : holes) f.push_back(hole_features(h, m.euv, m.mag));
  return f;
}

SegmentationMask apply_selector(const SegmentationMask& candidates, const DateMaps& m,
                                const forest::TrainedForest* selector) {
  if (!selector) return candidates;
  const auto holes = extract_holes(candidates);
  const auto feats = features_of(holes, m);
  const auto sel = select_candidates(holes, feats, *selector);
  return mask_from_holes(sel.kept, m.euv.grid, &m.euv.observed);
}

/// Union of the selected candidates of every initializer.
SegmentationMask initial_mask(const RunOptions& opt, const DateMaps& m, const Selectors& s) {
  std::vector<SegmentationMask> parts;
  const SegmentationMask hh = henney_harvey_init(m.euv, m.mag, opt.cfg.init.hh);
  parts.push_back(apply_selector(hh, m, s.hh ? &*s.hh : nullptr));
  for (const auto& [name, mask] : m.externals) {
    const auto it = s.external.find(name);
    parts.push_back(apply_selector(mask, m, it == s.external.end() ? nullptr : &it->second));
  }
  return union_masks(parts, m.mag);
}

levelset::Params effective_params(const RunOptions& opt) {
  levelset::Params p = opt.cfg.levelset.params;
  const fs::path tuned = opt.root() / "tune" / "levelset.json";
  if (opt.cfg.levelset.use_tuned && fs::exists(tuned)) {
    try {
      const auto j = nlohmann::json::parse(read_text_file(tuned));
      p.alpha = j.at("alpha").get<double>();
      p.sigma = j.at("sigma").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(tuned.string() + ": " + e.what());
    }
    p.validate();
  }
  return p;
}

std::optional<SegmentationMask> load_consensus(const fs::path& dir) {
  if (!fs::exists(dir / "consensus.csv")) return std::nullopt;
  return load_mask(dir / "consensus.csv");
}

/// Fraction of a candidate's pixels lying in consensus holes.
double inside_fraction(const CoronalHole& h, const SegmentationMask& consensus) {
  std::size_t in = 0;
  for (const auto& p : h.pixels) in += is_hole(consensus.labels(p.row, p.col));
  return static_cast<double>(in) / static_cast<double>(h.pixels.size());
}

std::vector<int> training_share(const std::vector<int>& dates, double fraction) {
  const auto n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(dates.size()))));
  return {dates.begin(), dates.begin() + static_cast<std::ptrdiff_t>(std::min(n, dates.size()))};
}

// ---------------------------------------------------------------------------
// Matching pieces

int best_cluster(const PixelSet& px, const std::vector<matching::Cluster>& clusters, Polarity pol) {
  int best = -1;
  std::size_t best_overlap = 0;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (clusters[k].polarity != pol) continue;
    const std::size_t o = set_intersection(px, clusters[k].pixels).size();
    if (o > best_overlap) {
      best_overlap = o;
      best = static_cast<int>(k);
    }
  }
  return best;
}

constexpr int kAbsent = 3;

const char* status_name(int s) {
  static const char* names[] = {"matched", "new", "missing", "absent"};
  return names[s];
}

}  // namespace

// ---------------------------------------------------------------------------

DateRange parse_date_range(const std::string& text) {
  auto parse_int = [&](const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
      throw ConfigError("--dates: expected FROM:TO with non-negative integers, got '" + text + "'");
    }
    return v;
  };
  DateRange r;
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    r.from = r.to = parse_int(text);
    return r;
  }
  const std::string a = text.substr(0, colon), b = text.substr(colon + 1);
  r.from = a.empty() ? 0 : parse_int(a);
  r.to = b.empty() ? -1 : parse_int(b);
  if (r.to >= 0 && r.to < r.from) throw ConfigError("--dates: TO is before FROM in '" + text + "'");
  return r;
}

std::vector<int> list_dates(const fs::path& root) {
  std::vector<int> out;
  const fs::path dir = root / "dates";
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_directory() || name.size() < 4 || name.rfind("day", 0) != 0) continue;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(name.data() + 3, name.data() + name.size(), v);
    if (ec == std::errc() && ptr == name.data() + name.size()) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void run_synth(const RunOptions& opt) {
  synth::SynthSpec spec = opt.cfg.synth;
  synth::write_dataset(spec, opt.root(), opt.jobs);
}

// ---------------------------------------------------------------------------

SegmentSummary run_segment(const RunOptions& opt) {
  Logger log(opt.log);
  const auto dates = selected_dates(opt);
  for (int d : dates) {
    const fs::path dir = date_dir(opt.root(), d);
    std::vector<fs::path> need{dir / "euv.csv", dir / "mag.csv"};
    for (const auto& name : opt.cfg.init.external) need.push_back(dir / (name + ".csv"));
    require_files(need);
  }
  const Selectors selectors = load_selectors(opt, log);
  const levelset::Params params = effective_params(opt);

  SegmentSummary summary;
  summary.rows.resize(dates.size());
  parallel_for(dates.size(), opt.jobs, [&](std::size_t i) {
    const int date = dates[i];
    const fs::path dir = date_dir(opt.root(), date);
    const DateMaps maps = load_date_maps(opt, date);
    const SegmentationMask init = initial_mask(opt, maps, selectors);
    const SegmentationMask result = levelset::segment(maps.euv, maps.mag, init, params);
    const fs::path out = opt.root() / "segment" / synth::date_dir_name(date);
    save_mask(out / "init.csv", init);
    save_mask(out / "result.csv", result);
    const auto consensus = load_consensus(dir);
    render::write_png(out / "overlay.png",
                      render::segmentation_overlay(maps.euv, result, consensus ? &*consensus : nullptr));
    DateMetrics& row = summary.rows[i];
    row.date = date;
    if (!consensus) {
      log.warn(synth::date_dir_name(date) + ": no consensus mask; metrics skipped");
      return;
    }
    try {
      row.full = levelset::sens_spec(result, *consensus);
      row.init = levelset::sens_spec(init, *consensus);
      row.defined = true;
    } catch (const SensitivityUndefined&) {
      row.defined = false;
    }
  });

  std::string csv = "date,status,sens,spec,distance,init_sens,init_spec,init_distance\n";
  std::vector<double> full, init;
  for (const auto& r : summary.rows) {
    if (!r.defined) {
      csv += synth::date_dir_name(r.date) + ",sens undefined,,,,,,\n";
      continue;
    }
    csv += synth::date_dir_name(r.date) + ",ok," + num(r.full.sensitivity) + "," +
           num(r.full.specificity) + "," + num(r.full.distance) + "," + num(r.init.sensitivity) +
           "," + num(r.init.specificity) + "," + num(r.init.distance) + "\n";
    full.push_back(r.full.distance);
    init.push_back(r.init.distance);
  }
  write_file_atomic(opt.root() / "segment" / "metrics.csv", csv);
  if (!full.empty()) {
    summary.median_full = levelset::median(full);
    summary.median_init = levelset::median(init);
  }
  return summary;
}

TuneSummary run_tune(const RunOptions& opt) {
  Logger log(opt.log);
  const auto dates = training_share(selected_dates(opt), opt.cfg.forest.train_fraction);
  for (int d : dates) require_files({date_dir(opt.root(), d) / "consensus.csv"});

  std::vector<DateMaps> maps(dates.size());
  std::vector<SegmentationMask> consensus(dates.size());
  parallel_for(dates.size(), opt.jobs, [&](std::size_t i) {
    maps[i] = load_date_maps(opt, dates[i]);
    consensus[i] = *load_consensus(date_dir(opt.root(), dates[i]));
  });

  // Candidate selectors: one forest per initializer.
  TuneSummary summary;
  Selectors selectors;
  auto train_selector = [&](const std::string& source, const forest::ForestConfig& base,
                            auto&& candidates_of) -> std::optional<forest::TrainedForest> {
    forest::Dataset data(kHoleFeatureCount);
    for (std::size_t i = 0; i < dates.size(); ++i) {
      const auto holes = extract_holes(candidates_of(i));
      const auto feats = features_of(holes, maps[i]);
      for (std::size_t k = 0; k < holes.size(); ++k) {
        const int label = inside_fraction(holes[k], consensus[i]) >= opt.cfg.init.valid_overlap;
        data.add(feats[k].flatten(), label);
      }
    }
    forest::ForestConfig cfg = base;
    cfg.seed = opt.cfg.forest.seed;
    cfg.threads = opt.jobs;
    try {
      auto f = forest::train(data, cfg);
      forest::save(selector_path(opt.root(), source), f);
      return f;
    } catch (const TrainingError& e) {
      log.warn("selector '" + source + "' not trained: " + e.what());
      return std::nullopt;
    }
  };
  selectors.hh = train_selector("hh", opt.cfg.forest.selector_hh, [&](std::size_t i) {
    return henney_harvey_init(maps[i].euv, maps[i].mag, opt.cfg.init.hh);
  });
  summary.selector_hh = selectors.hh.has_value();
  for (std::size_t e = 0; e < opt.cfg.init.external.size(); ++e) {
    const std::string& name = opt.cfg.init.external[e];
    auto f = train_selector(name, opt.cfg.forest.selector_external,
                            [&](std::size_t i) { return maps[i].externals[e].second; });
    if (f) {
      selectors.external.emplace(name, std::move(*f));
      summary.selector_external.push_back(name);
    }
  }
  if (!opt.cfg.init.use_selectors) selectors = {};

  // Level-set (alpha, sigma).
  const std::size_t n_images =
      std::min(dates.size(), static_cast<std::size_t>(opt.cfg.levelset.tune_images));
  std::vector<levelset::TrainingImage> images;
  for (std::size_t i = 0; i < n_images; ++i) {
    if (consensus[i].hole_count() == 0) continue;
    images.push_back({maps[i].euv, maps[i].mag, initial_mask(opt, maps[i], selectors), consensus[i]});
  }
  if (images.empty()) throw MissingInput("tune: no training date has consensus holes");
  levelset::PatternSearchOptions ps;
  ps.initial_step = opt.cfg.levelset.tune_initial_step;
  ps.min_step = opt.cfg.levelset.tune_min_step;
  ps.max_evaluations = opt.cfg.levelset.tune_max_evaluations;
  summary.levelset = levelset::tune(images, opt.cfg.levelset.params, {}, ps, opt.jobs);
  if (summary.levelset.warning) log.warn("level-set tuning hit the evaluation budget on some images");

  nlohmann::json j;
  j["alpha"] = summary.levelset.alpha;
  j["sigma"] = summary.levelset.sigma;
  j["warning"] = summary.levelset.warning;
  auto& per = j["per_image"] = nlohmann::json::array();
  for (std::size_t i = 0; i < summary.levelset.per_image.size(); ++i) {
    const auto& o = summary.levelset.per_image[i];
    per.push_back({{"date", synth::date_dir_name(dates[i])},
                   {"alpha", o.alpha},
                   {"sigma", o.sigma},
                   {"objective", o.objective},
                   {"initial_objective", o.initial_objective},
                   {"evaluations", o.evaluations},
                   {"converged", o.converged}});
  }
  write_file_atomic(opt.root() / "tune" / "levelset.json", j.dump(1) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------

MatchAccuracy& MatchAccuracy::operator+=(const MatchAccuracy& o) {
  correct += o.correct;
  total += o.total;
  wrong_partner += o.wrong_partner;
  for (std::size_t a = 0; a < confusion.size(); ++a)
    for (std::size_t b = 0; b < confusion[a].size(); ++b) confusion[a][b] += o.confusion[a][b];
  return *this;
}

MatchAccuracy score_match(const matching::MatchResult& result, const synth::DateTruth& truth,
                          std::size_t model, const GridSpec& grid) {
  CORONAL_EXPECTS(model < truth.models.size(), "score_match: model index out of range");
  const synth::ModelTruth& mt = truth.models[model];
  std::map<int, int> ref_partner, model_partner;
  for (const auto& p : result.matched) {
    ref_partner[p.ref] = p.model;
    model_partner[p.model] = p.ref;
  }
  auto status_of = [](int idx, const std::vector<int>& flagged, ClusterStatus flag,
                      const std::map<int, int>& partner) {
    if (idx < 0) return kAbsent;
    if (partner.count(idx)) return static_cast<int>(ClusterStatus::Matched);
    if (std::find(flagged.begin(), flagged.end(), idx) != flagged.end()) return static_cast<int>(flag);
    return kAbsent;
  };

  std::map<int, PixelSet> ref_px;
  for (const auto& h : truth.holes) ref_px[h.id] = synth::rasterize(h.shape, grid);
  std::vector<PixelSet> model_px;
  for (const auto& h : mt.holes) model_px.push_back(synth::rasterize(h.shape, grid));

  MatchAccuracy acc;
  auto record = [&](int truth_status, int predicted, bool partner_ok) {
    ++acc.total;
    acc.confusion[truth_status][predicted]++;
    if (predicted == truth_status && partner_ok) ++acc.correct;
    if (predicted == truth_status && !partner_ok) ++acc.wrong_partner;
  };

  for (const auto& h : truth.holes) {
    const bool removed = std::find(mt.removed.begin(), mt.removed.end(), h.id) != mt.removed.end();
    const int expected = removed ? static_cast<int>(ClusterStatus::Missing)
                                 : static_cast<int>(ClusterStatus::Matched);
    const int ci = best_cluster(ref_px[h.id], result.ref_clusters, h.polarity);
    const int predicted =
        status_of(ci, result.missing_clusters, ClusterStatus::Missing, ref_partner);
    bool partner_ok = true;
    if (expected == 0 && predicted == 0) {
      std::size_t k = 0;
      while (k < mt.holes.size() && mt.holes[k].ref != h.id) ++k;
      partner_ok = k < mt.holes.size() &&
                   best_cluster(model_px[k], result.model_clusters, mt.holes[k].polarity) ==
                       ref_partner[ci];
    }
    record(expected, predicted, partner_ok);
  }
  for (std::size_t k = 0; k < mt.holes.size(); ++k) {
    const auto& h = mt.holes[k];
    const int expected = h.ref < 0 ? static_cast<int>(ClusterStatus::New)
                                   : static_cast<int>(ClusterStatus::Matched);
    const int cj = best_cluster(model_px[k], result.model_clusters, h.polarity);
    const int predicted =
        status_of(cj, result.new_clusters, ClusterStatus::New, model_partner);
    bool partner_ok = true;
    if (expected == 0 && predicted == 0) {
      partner_ok = best_cluster(ref_px[h.ref], result.ref_clusters, h.polarity) == model_partner[cj];
    }
    record(expected, predicted, partner_ok);
  }
  return acc;
}

MatchSummary run_match(const RunOptions& opt) {
  Logger log(opt.log);
  const auto dates = selected_dates(opt);
  const bool segmented = opt.cfg.matching.reference == "segmented";
  auto ref_path = [&](int d) {
    return segmented ? opt.root() / "segment" / synth::date_dir_name(d) / "result.csv"
                     : date_dir(opt.root(), d) / "consensus.csv";
  };
  {
    std::vector<fs::path> need;
    for (int d : dates) need.push_back(ref_path(d));
    require_files(need);
  }
  const matching::MatchConfig mcfg = opt.cfg.matching.to_match_config();

  struct DateOut {
    std::vector<std::string> feature_rows;
    std::vector<std::string> accuracy_rows;
    MatchAccuracy acc;
    std::size_t results = 0;
    bool conserved = true;
    bool scored = false;
  };
  std::vector<DateOut> outs(dates.size());
  parallel_for(dates.size(), opt.jobs, [&](std::size_t i) {
    const int date = dates[i];
    const fs::path dir = date_dir(opt.root(), date);
    const std::string day = synth::date_dir_name(date);
    const auto files = model_files(dir);
    if (files.empty()) {
      log.warn(day + ": no model maps; nothing to match");
      return;
    }
    const SegmentationMask ref = load_mask(ref_path(date));
    BoolField observed(ref.grid.n_rows, ref.grid.n_cols, 1);
    for (std::size_t k = 0; k < observed.size(); ++k)
      observed[k] = ref.labels[k] != Label::NoObservation;
    std::vector<SegmentationMask> models;
    for (const auto& f : files) models.push_back(load_mask(f, MapKind::Model));
    auto results = matching::run_matching(ref, models, mcfg, &observed);

    std::optional<synth::DateTruth> truth;
    if (fs::exists(dir / "truth.json")) truth = synth::truth_from_json(read_text_file(dir / "truth.json"));

    DateOut& o = outs[i];
    const fs::path out = opt.root() / "match" / day;
    for (std::size_t m = 0; m < results.size(); ++m) {
      auto& r = results[m];
      r.model_id = files[m].stem().string();
      o.conserved &= matching::conserves_clusters(r);
      write_file_atomic(out / (r.model_id + ".json"), matching::to_json(r, ref.grid));
      render::write_png(out / (r.model_id + ".png"), render::matching_overlay(r, ref.grid));
      const auto f = classify::extract_features(r, ref.grid, opt.cfg.forest.area_mode);
      std::string label;
      if (truth && m < truth->models.size()) label = truth->models[m].good ? "good" : "bad";
      o.feature_rows.push_back(day + "," + r.model_id + "," + num(f.newN) + "," + num(f.newA) + "," +
                               num(f.missN) + "," + num(f.missA) + "," + num(f.overA) + "," +
                               num(f.sameA) + "," + label);
      if (truth && m < truth->models.size()) {
        const MatchAccuracy a = score_match(r, *truth, m, ref.grid);
        o.acc += a;
        o.scored = true;
        o.accuracy_rows.push_back(day + "," + r.model_id + "," + std::to_string(a.correct) + "," +
                                  std::to_string(a.total) + "," +
                                  std::to_string(a.wrong_partner));
      }
      ++o.results;
    }
  });

  MatchSummary summary;
  std::string features = "date,model,newN,newA,missN,missA,overA,sameA,label\n";
  std::string accuracy = "date,model,correct,total,wrong_partner\n";
  for (const auto& o : outs) {
    for (const auto& r : o.feature_rows) features += r + "\n";
    for (const auto& r : o.accuracy_rows) accuracy += r + "\n";
    summary.results += o.results;
    summary.conserved &= o.conserved;
    summary.scored |= o.scored;
    summary.accuracy += o.acc;
  }
  write_file_atomic(opt.root() / "match" / "features.csv", features);
  if (summary.scored) {
    write_file_atomic(opt.root() / "match" / "accuracy.csv", accuracy);
    std::string conf = "truth,matched,new,missing,absent\n";
    for (int t = 0; t < 3; ++t) {
      conf += status_name(t);
      for (int p = 0; p < 4; ++p) conf += "," + std::to_string(summary.accuracy.confusion[t][p]);
      conf += "\n";
    }
    write_file_atomic(opt.root() / "match" / "confusion.csv", conf);
  }
  return summary;
}

// ---------------------------------------------------------------------------

namespace {

struct FeatureRow {
  std::string date, model;
  classify::MapFeatures f;
  std::string label;
};

std::vector<FeatureRow> load_features(const fs::path& root) {
  const fs::path path = root / "match" / "features.csv";
  require_files({path});
  const auto rows = read_csv(path);
  std::vector<FeatureRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 9) throw IoError(path.string() + ": row " + std::to_string(i) + " has wrong width");
    FeatureRow fr;
    fr.date = r[0];
    fr.model = r[1];
    fr.f = {to_double(r[2], path), to_double(r[3], path), to_double(r[4], path),
            to_double(r[5], path), to_double(r[6], path), to_double(r[7], path)};
    fr.label = r[8];
    out.push_back(std::move(fr));
  }
  return out;
}

}  // namespace

ClassifySummary run_train_classifier(const RunOptions& opt) {
  auto rows = load_features(opt.root());
  std::erase_if(rows, [](const FeatureRow& r) { return r.label.empty(); });
  const bool same = opt.cfg.forest.include_same;
  const std::size_t d = same ? 6 : 5;
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(opt.cfg.forest.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::lround(opt.cfg.forest.train_fraction * static_cast<double>(rows.size())));
  forest::Dataset train(d), test(d);
  std::vector<char> in_train(rows.size(), 0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& r = rows[idx[k]];
    const int y = r.label == "good";
    if (k < n_train) {
      train.add(classify::feature_vector(r.f, same), y);
      in_train[idx[k]] = 1;
    } else {
      test.add(classify::feature_vector(r.f, same), y);
    }
  }
  std::size_t pos = 0;
  for (int y : train.labels()) pos += y == 1;
  if (train.rows() < 2 || pos == 0 || pos == train.rows()) {
    throw TrainingError("train-classifier: need at least two labelled classes in the training split");
  }

  forest::ForestConfig cfg = opt.cfg.forest.classifier;
  cfg.seed = opt.cfg.forest.seed;
  cfg.threads = opt.jobs;

  ClassifySummary s;
  std::vector<std::pair<int, int>> grid;
  for (int t : opt.cfg.forest.oob_trees)
    for (int dep : opt.cfg.forest.oob_depths) grid.emplace_back(t, dep);
  s.oob = forest::tune_oob(train, grid, cfg);

  const forest::TrainedForest model = forest::train(train, cfg);
  forest::save(opt.root() / "classify" / "model.json", model);
  s.train_size = train.rows();
  s.test_size = test.rows();
  s.importances = model.importances;

  std::string predictions = "split,date,model,truth,predicted,vote_fraction\n";
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = classify::classify_map(rows[i].f, model, same);
    const int y = rows[i].label == "good";
    const int yhat = c.label == classify::MapClass::Good;
    if (!in_train[i]) {
      s.confusion[y][yhat]++;
      correct += y == yhat;
    }
    predictions += std::string(in_train[i] ? "train" : "test") + "," + rows[i].date + "," +
                   rows[i].model + "," + rows[i].label + "," + classify::to_string(c.label) + "," +
                   num(c.vote_fraction) + "\n";
  }
  s.accuracy = s.test_size ? static_cast<double>(correct) / static_cast<double>(s.test_size) : 0.0;

  const fs::path out = opt.root() / "classify";
  write_file_atomic(out / "predictions.csv", predictions);
  write_file_atomic(out / "confusion.csv",
                    "truth,predicted_bad,predicted_good\nbad," + std::to_string(s.confusion[0][0]) +
                        "," + std::to_string(s.confusion[0][1]) + "\ngood," +
                        std::to_string(s.confusion[1][0]) + "," + std::to_string(s.confusion[1][1]) +
                        "\naccuracy," + num(s.accuracy) + ",\n");
  std::string imp = "feature,importance\n";
  for (std::size_t k = 0; k < model.importances.size(); ++k)
    imp += std::string(classify::kFeatureNames[k]) + "," + num(model.importances[k]) + "\n";
  write_file_atomic(out / "importances.csv", imp);
  std::string surf = "n_trees,max_depth,oob_error\n";
  for (const auto& p : s.oob.points)
    surf += std::to_string(p.n_trees) + "," + std::to_string(p.max_depth) + "," + num(p.oob_error) + "\n";
  write_file_atomic(out / "oob_surface.csv", surf);
  return s;
}

void run_classify(const RunOptions& opt) {
  const fs::path model_path = opt.root() / "classify" / "model.json";
  require_files({model_path});
  const auto model = forest::load(model_path);
  const auto rows = load_features(opt.root());
  std::string out = "date,model,predicted,vote_fraction\n";
  for (const auto& r : rows) {
    const auto c = classify::classify_map(r.f, model, opt.cfg.forest.include_same);
    out += r.date + "," + r.model + "," + classify::to_string(c.label) + "," + num(c.vote_fraction) + "\n";
  }
  write_file_atomic(opt.root() / "classify" / "classified.csv", out);
}

void run_eval(const RunOptions& opt) {
  const fs::path root = opt.root();
  const fs::path metrics = root / "segment" / "metrics.csv";
  const fs::path mconf = root / "match" / "confusion.csv";
  const fs::path macc = root / "match" / "accuracy.csv";
  const fs::path cconf = root / "classify" / "confusion.csv";
  const fs::path surf = root / "classify" / "oob_surface.csv";
  const fs::path imp = root / "classify" / "importances.csv";
  {
    std::string missing;
    const std::pair<fs::path, const char*> need[] = {{metrics, "segment"}, {mconf, "match"},
                                                     {macc, "match"},      {cconf, "train-classifier"},
                                                     {surf, "train-classifier"},
                                                     {imp, "train-classifier"}};
    for (const auto& [p, stage] : need) {
      if (!fs::exists(p)) missing += (missing.empty() ? "" : "; ") + p.string() + " (run '" + stage + "')";
    }
    if (!missing.empty()) throw MissingInput("eval: missing stage outputs: " + missing);
  }

  std::string md = "# Coronal-hole pipeline report\n\n";
  const fs::path out = root / "report";

  // Segmentation distances.
  std::vector<double> full, init;
  std::size_t undefined = 0;
  const auto mrows = read_csv(metrics);
  for (std::size_t i = 1; i < mrows.size(); ++i) {
    if (mrows[i].size() < 8 || mrows[i][1] != "ok") {
      ++undefined;
      continue;
    }
    full.push_back(to_double(mrows[i][4], metrics));
    init.push_back(to_double(mrows[i][7], metrics));
  }
  std::sort(full.begin(), full.end());
  std::sort(init.begin(), init.end());
  std::string seg_csv = "method,n,min,q1,median,q3,max\n";
  md += "## Segmentation: distance from (sens, spec) = (1, 1)\n\n";
  md += "| method | n | min | q1 | median | q3 | max |\n|---|---|---|---|---|---|---|\n";
  for (const auto& [name, v] : {std::pair{"initializers", &init}, std::pair{"full pipeline", &full}}) {
    const double q[5] = {quantile(*v, 0.0), quantile(*v, 0.25), quantile(*v, 0.5), quantile(*v, 0.75),
                         quantile(*v, 1.0)};
    seg_csv += std::string(name) + "," + std::to_string(v->size());
    md += std::string("| ") + name + " | " + std::to_string(v->size());
    for (double x : q) {
      seg_csv += "," + num(x);
      md += " | " + fixed(x);
    }
    seg_csv += "\n";
    md += " |\n";
  }
  if (undefined) md += "\nDates with undefined sensitivity: " + std::to_string(undefined) + "\n";
  write_file_atomic(out / "segmentation_distance.csv", seg_csv);

  // Matching.
  const auto crows = read_csv(mconf);
  md += "\n## Cluster matching: truth (rows) vs assigned label (columns)\n\n";
  md += "| truth | matched | new | missing | absent |\n|---|---|---|---|---|\n";
  for (std::size_t i = 1; i < crows.size(); ++i) {
    md += "| " + crows[i][0];
    for (std::size_t k = 1; k < crows[i].size(); ++k) md += " | " + crows[i][k];
    md += " |\n";
  }
  std::size_t correct = 0, total = 0, wrong = 0;
  const auto arows = read_csv(macc);
  for (std::size_t i = 1; i < arows.size(); ++i) {
    correct += static_cast<std::size_t>(to_double(arows[i][2], macc));
    total += static_cast<std::size_t>(to_double(arows[i][3], macc));
    wrong += static_cast<std::size_t>(to_double(arows[i][4], macc));
  }
  const double match_acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  md += "\nPer-cluster accuracy: " + fixed(match_acc) + " (" + std::to_string(correct) + "/" +
        std::to_string(total) + "; matched to a wrong partner: " + std::to_string(wrong) + ")\n";
  write_file_atomic(out / "matching_confusion.csv", read_text_file(mconf));

  // Classification.
  const auto cls = read_csv(cconf);
  md += "\n## Map classification (held-out split)\n\n";
  md += "| truth | predicted bad | predicted good |\n|---|---|---|\n";
  for (std::size_t i = 1; i < cls.size(); ++i) {
    if (cls[i][0] == "accuracy") {
      md += "\nAccuracy: " + fixed(to_double(cls[i][1], cconf)) + "\n";
    } else {
      md += "| " + cls[i][0] + " | " + cls[i][1] + " | " + cls[i][2] + " |\n";
    }
  }
  write_file_atomic(out / "classification_confusion.csv", read_text_file(cconf));

  md += "\n## Out-of-bag error surface\n\n| n_trees | max_depth | oob_error |\n|---|---|---|\n";
  const auto srows = read_csv(surf);
  for (std::size_t i = 1; i < srows.size(); ++i)
    md += "| " + srows[i][0] + " | " + srows[i][1] + " | " + fixed(to_double(srows[i][2], surf)) + " |\n";
  write_file_atomic(out / "oob_surface.csv", read_text_file(surf));

  md += "\n## Feature importances\n\n| feature | importance |\n|---|---|\n";
  const auto irows = read_csv(imp);
  for (std::size_t i = 1; i < irows.size(); ++i)
    md += "| " + irows[i][0] + " | " + fixed(to_double(irows[i][1], imp)) + " |\n";
  write_file_atomic(out / "importances.csv", read_text_file(imp));

  write_file_atomic(out / "report.md", md);
}

}  // namespace coronal::pipeline
