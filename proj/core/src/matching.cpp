#include "coronal/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "coronal/error.hpp"

namespace coronal::matching {

namespace {

bool first_pixel_less(const PixelSet& a, const PixelSet& b) { return a.front() < b.front(); }

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

Cluster Cluster::from_holes(std::vector<CoronalHole> holes, const GridSpec& grid) {
  CORONAL_EXPECTS(!holes.empty(), "a cluster needs at least one hole");
  const Polarity pol = holes.front().polarity;
  for (const auto& h : holes) {
    CORONAL_EXPECTS(h.polarity == pol, "cluster members must share one polarity");
  }
  std::sort(holes.begin(), holes.end(), [](const CoronalHole& a, const CoronalHole& b) {
    return first_pixel_less(a.pixels, b.pixels);
  });
  Cluster c;
  c.polarity = pol;
  for (const auto& h : holes) {
    c.pixels.insert(c.pixels.end(), h.pixels.begin(), h.pixels.end());
    c.physical_area += h.physical_area;
    c.image_area += h.image_area;
  }
  const std::size_t before = c.pixels.size();
  normalize(c.pixels);
  CORONAL_EXPECTS(c.pixels.size() == before, "cluster members must be pixel-disjoint");
  c.centroid = coronal::centroid(c.pixels, grid);
  c.holes = std::move(holes);
  return c;
}

Cluster Cluster::merge(const Cluster& a, const Cluster& b, const GridSpec& grid) {
  CORONAL_EXPECTS(a.polarity == b.polarity, "cannot merge clusters of different polarity");
  std::vector<CoronalHole> holes = a.holes;
  holes.insert(holes.end(), b.holes.begin(), b.holes.end());
  return from_holes(std::move(holes), grid);
}

std::vector<Cluster> cluster_by_distance(std::span<const CoronalHole> holes, double threshold,
                                         const GridSpec& grid) {
  CORONAL_EXPECTS(threshold >= 0.0, "cluster threshold must be non-negative");
  UnionFind uf(holes.size());
  for (std::size_t i = 0; i < holes.size(); ++i) {
    for (std::size_t j = i + 1; j < holes.size(); ++j) {
      if (uf.find(i) == uf.find(j)) continue;
      if (set_distance(holes[i].pixels, holes[j].pixels, grid) < threshold) uf.unite(i, j);
    }
  }
  std::vector<std::vector<CoronalHole>> groups(holes.size());
  for (std::size_t i = 0; i < holes.size(); ++i) groups[uf.find(i)].push_back(holes[i]);
  std::vector<Cluster> out;
  for (auto& g : groups) {
    if (!g.empty()) out.push_back(Cluster::from_holes(std::move(g), grid));
  }
  std::sort(out.begin(), out.end(),
            [](const Cluster& a, const Cluster& b) { return first_pixel_less(a.pixels, b.pixels); });
  return out;
}

// ---------------------------------------------------------------------------

MahalanobisModel::MahalanobisModel(Vec mean, Mat covariance, double threshold)
    : mean_(mean), cov_(covariance), threshold_(threshold) {
  const double a = cov_[0], b = cov_[1], c = cov_[2], d = cov_[3];
  if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d))) {
    throw ModelFitError("Mahalanobis covariance has non-finite entries");
  }
  if (std::abs(b - c) > 1e-12 * std::max({1.0, std::abs(b), std::abs(c)})) {
    throw ModelFitError("Mahalanobis covariance is not symmetric");
  }
  const double det = a * d - b * c;
  if (!(a > 0.0) || !(det > 1e-300)) {
    throw ModelFitError("Mahalanobis covariance is not positive definite");
  }
  if (!(threshold > 0.0)) throw ModelFitError("Mahalanobis threshold must be positive");
  inv_ = {d / det, -b / det, -c / det, a / det};
}

MahalanobisModel MahalanobisModel::fit(std::span<const Vec> samples, double threshold) {
  if (samples.size() < 3) throw ModelFitError("Mahalanobis fit needs at least 3 samples");
  Vec m{0.0, 0.0};
  for (const auto& s : samples) {
    m[0] += s[0];
    m[1] += s[1];
  }
  const double n = static_cast<double>(samples.size());
  m[0] /= n;
  m[1] /= n;
  Mat cov{0.0, 0.0, 0.0, 0.0};
  for (const auto& s : samples) {
    const double x = s[0] - m[0], y = s[1] - m[1];
    cov[0] += x * x;
    cov[1] += x * y;
    cov[3] += y * y;
  }
  for (auto& v : cov) v /= (n - 1.0);
  cov[2] = cov[1];
  return MahalanobisModel(m, cov, threshold);
}

MahalanobisModel MahalanobisModel::default_model() {
  return MahalanobisModel({0.25, 0.02}, {0.09, 0.0, 0.0, 0.0025}, kChi2TwoDof99);
}

double MahalanobisModel::distance(const Vec& v) const noexcept {
  const double x = v[0] - mean_[0], y = v[1] - mean_[1];
  const double q = x * (inv_[0] * x + inv_[1] * y) + y * (inv_[2] * x + inv_[3] * y);
  return std::sqrt(std::max(q, 0.0));
}

MahalanobisModel::Vec pair_features(const Cluster& ref, const Cluster& model,
                                    const GridSpec& grid) {
  return {std::abs(std::log(model.physical_area / ref.physical_area)),
          set_distance(ref.pixels, model.pixels, grid)};
}

Detection detect_new_missing(std::span<const Cluster> ref, std::span<const Cluster> model,
                             const MahalanobisModel& mm, const GridSpec& grid) {
  std::vector<char> ref_ok(ref.size(), 0), model_ok(model.size(), 0);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t j = 0; j < model.size(); ++j) {
      CORONAL_EXPECTS(ref[i].polarity == model[j].polarity,
                      "detect_new_missing: clusters of mixed polarity");
      if (mm.accepts(pair_features(ref[i], model[j], grid))) {
        ref_ok[i] = 1;
        model_ok[j] = 1;
      }
    }
  }
  Detection d;
  for (std::size_t i = 0; i < ref.size(); ++i)
    (ref_ok[i] ? d.matchable_ref : d.missing_clusters).push_back(ref[i]);
  for (std::size_t j = 0; j < model.size(); ++j)
    (model_ok[j] ? d.matchable_model : d.new_clusters).push_back(model[j]);
  return d;
}

std::vector<Cluster> merge_to_count(std::vector<Cluster> clusters, std::size_t target,
                                    const GridSpec& grid) {
  CORONAL_EXPECTS(target >= 1, "merge_to_count: target must be at least 1");
  std::size_t n = clusters.size();
  if (n <= target) return clusters;
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] = set_distance(clusters[i].pixels, clusters[j].pixels, grid);
    }
  }
  while (clusters.size() > target) {
    n = clusters.size();
    std::size_t bi = 0, bj = 1;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = dist[i][j], bd = dist[bi][bj];
        if (d < bd) {
          bi = i;
          bj = j;
        } else if (d == bd) {
          const double area = clusters[i].physical_area + clusters[j].physical_area;
          const double barea = clusters[bi].physical_area + clusters[bj].physical_area;
          if (area < barea) {
            bi = i;
            bj = j;
          }
        }
      }
    }
    clusters[bi] = Cluster::merge(clusters[bi], clusters[bj], grid);
    for (std::size_t k = 0; k < n; ++k) {
      dist[bi][k] = dist[k][bi] = std::min(dist[bi][k], dist[bj][k]);
    }
    dist[bi][bi] = 0.0;
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return clusters;
}

std::pair<std::vector<Cluster>, std::vector<Cluster>> recluster_equal(std::vector<Cluster> ref,
                                                                      std::vector<Cluster> model,
                                                                      const GridSpec& grid) {
  CORONAL_EXPECTS(!ref.empty() && !model.empty(), "recluster_equal: both sides must be non-empty");
  const std::size_t target = std::min(ref.size(), model.size());
  if (ref.size() > target) ref = merge_to_count(std::move(ref), target, grid);
  if (model.size() > target) model = merge_to_count(std::move(model), target, grid);
  return {std::move(ref), std::move(model)};
}

Matching match_assign(std::span<const Cluster> ref, std::span<const Cluster> model,
                      const GridSpec& grid) {
  CORONAL_EXPECTS(ref.size() == model.size() && !ref.empty(),
                  "match_assign: needs equal, non-zero cluster counts");
  const std::size_t n = ref.size();
  std::vector<double> w(n * n);
  CostMatrix cost(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      CORONAL_EXPECTS(ref[i].polarity == model[j].polarity, "match_assign: mixed polarity");
      w[i * n + j] = set_distance(ref[i].pixels, model[j].pixels, grid);
      cost(i, j) = std::llround(w[i * n + j] * kCostScale);
    }
  }
  const Assignment a = solve_assignment(cost);
  Matching m;
  m.total_micro = a.total;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(a.column_of_row[i]);
    const PixelSet overlap = set_intersection(ref[i].pixels, model[j].pixels);
    m.pairs.push_back({static_cast<int>(i), static_cast<int>(j), w[i * n + j], cost(i, j),
                       total_area(overlap, grid), overlap.size()});
  }
  return m;
}

MatchResult merge_results(const MatchResult& a, const MatchResult& b) {
  MatchResult out = a;
  const int ro = static_cast<int>(a.ref_clusters.size());
  const int mo = static_cast<int>(a.model_clusters.size());
  out.ref_clusters.insert(out.ref_clusters.end(), b.ref_clusters.begin(), b.ref_clusters.end());
  out.model_clusters.insert(out.model_clusters.end(), b.model_clusters.begin(),
                            b.model_clusters.end());
  for (auto p : b.matched) {
    p.ref += ro;
    p.model += mo;
    out.matched.push_back(p);
  }
  for (int k : b.new_clusters) out.new_clusters.push_back(k + mo);
  for (int k : b.missing_clusters) out.missing_clusters.push_back(k + ro);
  out.total_cost_micro += b.total_cost_micro;
  return out;
}

bool conserves_clusters(const MatchResult& r) {
  std::vector<int> ref_seen(r.ref_clusters.size(), 0), model_seen(r.model_clusters.size(), 0);
  auto bump = [](std::vector<int>& seen, int k) {
    if (k < 0 || k >= static_cast<int>(seen.size())) return false;
    ++seen[k];
    return true;
  };
  for (const auto& p : r.matched) {
    if (!bump(ref_seen, p.ref) || !bump(model_seen, p.model)) return false;
    if (r.ref_clusters[p.ref].polarity != r.model_clusters[p.model].polarity) return false;
  }
  for (int k : r.missing_clusters)
    if (!bump(ref_seen, k)) return false;
  for (int k : r.new_clusters)
    if (!bump(model_seen, k)) return false;
  auto all_once = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [](int c) { return c == 1; });
  };
  return all_once(ref_seen) && all_once(model_seen) &&
         r.ref_clusters.size() == r.matched.size() + r.missing_clusters.size() &&
         r.model_clusters.size() == r.matched.size() + r.new_clusters.size();
}

MatchResult match_polarity(const SegmentationMask& ref, const SegmentationMask& model,
                           Polarity polarity, const MatchConfig& cfg) {
  CORONAL_EXPECTS(ref.grid.n_cols == model.grid.n_cols && ref.grid.n_rows == model.grid.n_rows,
                  "match_polarity: masks must share one grid");
  const GridSpec& grid = ref.grid;
  const auto ref_holes = extract_holes(ref, polarity);
  const auto model_holes = extract_holes(model, polarity);
  const auto ref_clusters = cluster_by_distance(ref_holes, cfg.cluster_threshold, grid);
  const auto model_clusters = cluster_by_distance(model_holes, cfg.cluster_threshold, grid);
  Detection det = detect_new_missing(ref_clusters, model_clusters, cfg.mahalanobis, grid);

  MatchResult r;
  if (!det.matchable_ref.empty()) {
    auto [rc, mc] = recluster_equal(std::move(det.matchable_ref), std::move(det.matchable_model), grid);
    const Matching m = match_assign(rc, mc, grid);
    r.ref_clusters = std::move(rc);
    r.model_clusters = std::move(mc);
    r.matched = m.pairs;
    r.total_cost_micro = m.total_micro;
  }
  for (auto& c : det.missing_clusters) {
    r.missing_clusters.push_back(static_cast<int>(r.ref_clusters.size()));
    r.ref_clusters.push_back(std::move(c));
  }
  for (auto& c : det.new_clusters) {
    r.new_clusters.push_back(static_cast<int>(r.model_clusters.size()));
    r.model_clusters.push_back(std::move(c));
  }
  return r;
}

MatchResult match_maps(const SegmentationMask& ref, const SegmentationMask& model,
                       const MatchConfig& cfg) {
  return merge_results(match_polarity(ref, model, Polarity::Positive, cfg),
                       match_polarity(ref, model, Polarity::Negative, cfg));
}

std::vector<MatchResult> run_matching(const SegmentationMask& ref,
                                      std::span<const SegmentationMask> models,
                                      const MatchConfig& cfg, const BoolField* observed) {
  const GridSpec target = ref.grid;
  const SegmentationMask ref_pre = preprocess_for_matching(ref, target, observed, cfg.preprocess);
  std::vector<MatchResult> out;
  for (std::size_t k = 0; k < models.size(); ++k) {
    const SegmentationMask model_pre =
        preprocess_for_matching(models[k], target, observed, cfg.preprocess);
    out.push_back(match_maps(ref_pre, model_pre, cfg));
    out.back().model_id = "model_" + std::to_string(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json runs_of(const PixelSet& pixels) {
  auto runs = nlohmann::json::array();
  std::size_t i = 0;
  while (i < pixels.size()) {
    std::size_t j = i + 1;
    while (j < pixels.size() && pixels[j].row == pixels[i].row &&
           pixels[j].col == pixels[j - 1].col + 1)
      ++j;
    runs.push_back({pixels[i].row, pixels[i].col, static_cast<int>(j - i)});
    i = j;
  }
  return runs;
}

PixelSet pixels_of(const nlohmann::json& runs) {
  PixelSet out;
  for (const auto& r : runs) {
    const int row = r.at(0).get<int>(), col = r.at(1).get<int>(), len = r.at(2).get<int>();
    for (int k = 0; k < len; ++k) out.push_back({row, col + k});
  }
  normalize(out);
  return out;
}

nlohmann::json cluster_json(int id, const Cluster& c) {
  return {{"id", id},
          {"polarity", std::string(to_string(c.polarity))},
          {"centroid", {{"lat", c.centroid.lat}, {"lon", c.centroid.lon}}},
          {"physical_area", c.physical_area},
          {"image_area", c.image_area},
          {"holes", c.holes.size()},
          {"pixels", runs_of(c.pixels)}};
}

Cluster cluster_from_json(const nlohmann::json& j, const GridSpec& grid) {
  const Polarity pol = j.at("polarity").get<std::string>() == "+" ? Polarity::Positive
                                                                  : Polarity::Negative;
  PixelSet px = pixels_of(j.at("pixels"));
  if (px.empty()) throw IoError("match result: cluster without pixels");
  // Members are rebuilt as the 8-connected pieces of the stored pixel set.
  BoolField m(grid.n_rows, grid.n_cols, 0);
  for (const auto& p : px) {
    if (p.row < 0 || p.row >= grid.n_rows || p.col < 0 || p.col >= grid.n_cols)
      throw IoError("match result: cluster pixel outside grid");
    m(p.row, p.col) = 1;
  }
  std::vector<CoronalHole> holes;
  for (auto& comp : connected_components(m))
    holes.push_back(CoronalHole::from_pixels(std::move(comp), pol, grid));
  return Cluster::from_holes(std::move(holes), grid);
}

}  // namespace

std::string to_json(const MatchResult& r, const GridSpec& grid) {
  nlohmann::json j;
  j["format"] = "coronal.match";
  j["version"] = 1;
  j["model"] = r.model_id;
  j["grid"] = {{"cols", grid.n_cols}, {"rows", grid.n_rows}, {"radius", grid.radius}};
  j["total_cost_micro"] = r.total_cost_micro;
  auto& matched = j["matched"] = nlohmann::json::array();
  for (const auto& p : r.matched) {
    matched.push_back({{"ref", p.ref},
                       {"model", p.model},
                       {"cost", p.cost},
                       {"cost_micro", p.cost_micro},
                       {"overlap_area", p.overlap_area},
                       {"overlap_pixels", p.overlap_pixels}});
  }
  j["new"] = r.new_clusters;
  j["missing"] = r.missing_clusters;
  auto& rc = j["ref_clusters"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.ref_clusters.size(); ++i)
    rc.push_back(cluster_json(static_cast<int>(i), r.ref_clusters[i]));
  auto& mc = j["model_clusters"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.model_clusters.size(); ++i)
    mc.push_back(cluster_json(static_cast<int>(i), r.model_clusters[i]));
  return j.dump(1) + "\n";
}

MatchResult match_result_from_json(const std::string& text, GridSpec* grid_out) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "coronal.match" || j.value("version", 0) != 1)
      throw IoError("match result: unsupported format or version");
    const GridSpec grid(j.at("grid").at("cols").get<int>(), j.at("grid").at("rows").get<int>(),
                        j.at("grid").at("radius").get<double>());
    if (grid_out) *grid_out = grid;
    MatchResult r;
    r.model_id = j.at("model").get<std::string>();
    r.total_cost_micro = j.at("total_cost_micro").get<std::int64_t>();
    for (const auto& c : j.at("ref_clusters")) r.ref_clusters.push_back(cluster_from_json(c, grid));
    for (const auto& c : j.at("model_clusters"))
      r.model_clusters.push_back(cluster_from_json(c, grid));
    for (const auto& p : j.at("matched")) {
      r.matched.push_back({p.at("ref").get<int>(), p.at("model").get<int>(),
                           p.at("cost").get<double>(), p.at("cost_micro").get<std::int64_t>(),
                           p.at("overlap_area").get<double>(),
                           p.at("overlap_pixels").get<std::size_t>()});
    }
    r.new_clusters = j.at("new").get<std::vector<int>>();
    r.missing_clusters = j.at("missing").get<std::vector<int>>();
    if (!conserves_clusters(r)) throw IoError("match result: inconsistent cluster bookkeeping");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("match result: ") + e.what());
  }
}

}  // namespace coronal::matching
