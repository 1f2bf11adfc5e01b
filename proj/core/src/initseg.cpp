#include "coronal/initseg.hpp"

#include <algorithm>
#include <cmath>

#include "coronal/error.hpp"

namespace coronal {

std::vector<double> HoleFeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(kHoleFeatureCount);
  out.insert(out.end(), euv_hist.begin(), euv_hist.end());
  out.insert(out.end(), flux_hist.begin(), flux_hist.end());
  out.push_back(area);
  return out;
}

namespace {

void require_same_grid(const SynopticMap& a, const SynopticMap& b, const char* what) {
  if (!(a.grid.n_cols == b.grid.n_cols && a.grid.n_rows == b.grid.n_rows)) {
    throw ContractViolation(std::string(what) + ": EUV and magnetic maps are on different grids");
  }
}

}  // namespace

double mean_flux(std::span<const Pixel> pixels, const SynopticMap& mag) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : pixels) {
    if (!mag.is_observed(p.row, p.col)) continue;
    sum += mag.values(p.row, p.col);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double unipolarity(std::span<const Pixel> pixels, const SynopticMap& mag) {
  double sum = 0.0, abs_sum = 0.0;
  for (const auto& p : pixels) {
    if (!mag.is_observed(p.row, p.col)) continue;
    sum += mag.values(p.row, p.col);
    abs_sum += std::abs(mag.values(p.row, p.col));
  }
  return abs_sum > 0.0 ? std::abs(sum) / abs_sum : 0.0;
}

SegmentationMask henney_harvey_init(const SynopticMap& euv, const SynopticMap& mag,
                                    const HenneyHarveyParams& params) {
  require_same_grid(euv, mag, "henney_harvey_init");
  CORONAL_EXPECTS(euv.observed == mag.observed,
                  "henney_harvey_init: EUV and magnetic observation masks differ");
  CORONAL_EXPECTS(params.dark_quantile >= 0.0 && params.dark_quantile <= 1.0,
                  "dark_quantile must lie in [0, 1]");
  SegmentationMask out(euv.grid);
  std::vector<double> observed_values;
  for (std::size_t i = 0; i < euv.values.size(); ++i) {
    if (euv.observed[i]) observed_values.push_back(euv.values[i]);
    else out.labels[i] = Label::NoObservation;
  }
  if (observed_values.empty()) return out;
  std::sort(observed_values.begin(), observed_values.end());
  const auto k = static_cast<std::size_t>(
      std::floor(params.dark_quantile * static_cast<double>(observed_values.size() - 1)));
  const double threshold = observed_values[k];

  BoolField dark(euv.grid.n_rows, euv.grid.n_cols, 0);
  for (std::size_t i = 0; i < dark.size(); ++i) {
    dark[i] = euv.observed[i] && euv.values[i] < threshold ? 1 : 0;
  }
  for (const auto& comp : connected_components(dark)) {
    if (unipolarity(comp, mag) < params.unipolarity_min) continue;
    const double m = mean_flux(comp, mag);
    if (m == 0.0) continue;
    const Label l = m > 0.0 ? Label::Positive : Label::Negative;
    for (const auto& p : comp) out.labels(p.row, p.col) = l;
  }
  return out;
}

HoleFeatureVector hole_features(const CoronalHole& hole, const SynopticMap& euv,
                                const SynopticMap& mag) {
  CORONAL_EXPECTS(!hole.pixels.empty(), "hole_features: empty hole");
  require_same_grid(euv, mag, "hole_features");
  double lo = INFINITY, hi = -INFINITY, flux_max = 0.0;
  for (std::size_t i = 0; i < euv.values.size(); ++i) {
    if (euv.observed[i]) {
      lo = std::min(lo, euv.values[i]);
      hi = std::max(hi, euv.values[i]);
    }
    if (mag.observed[i]) flux_max = std::max(flux_max, std::abs(mag.values[i]));
  }
  HoleFeatureVector f;
  const double n = static_cast<double>(hole.pixels.size());
  for (const auto& p : hole.pixels) {
    CORONAL_EXPECTS(euv.is_observed(p.row, p.col) && mag.is_observed(p.row, p.col),
                    "hole_features: hole contains unobserved pixels");
    std::size_t eb = 0;
    if (hi > lo) {
      const double t = (euv.values(p.row, p.col) - lo) / (hi - lo);
      eb = std::min(kEuvBins - 1, static_cast<std::size_t>(t * kEuvBins));
    }
    f.euv_hist[eb] += 1.0 / n;
    std::size_t fb = kFluxBins / 2;
    if (flux_max > 0.0) {
      const double t = (mag.values(p.row, p.col) + flux_max) / (2.0 * flux_max);
      fb = std::min(kFluxBins - 1, static_cast<std::size_t>(std::max(0.0, t) * kFluxBins));
    }
    f.flux_hist[fb] += 1.0 / n;
  }
  f.area = n;
  return f;
}

CandidateSelection select_candidates(std::span<const CoronalHole> holes,
                                     std::span<const HoleFeatureVector> features,
                                     const forest::TrainedForest& model, forest::TiePolicy tie) {
  CORONAL_EXPECTS(holes.size() == features.size(),
                  "select_candidates: one feature vector per hole required");
  if (model.n_features != kHoleFeatureCount) {
    throw ContractViolation("select_candidates: selector expects " +
                            std::to_string(model.n_features) + " features, hole descriptors have " +
                            std::to_string(kHoleFeatureCount));
  }
  CandidateSelection out;
  for (std::size_t i = 0; i < holes.size(); ++i) {
    const auto x = features[i].flatten();
    const auto pred = forest::predict(model, x, tie);
    const bool keep = pred.label == 1;
    out.decisions.push_back({i, keep, pred.vote_fraction});
    if (keep) out.kept.push_back(holes[i]);
  }
  return out;
}

SegmentationMask union_masks(std::span<const SegmentationMask> masks, const SynopticMap& mag) {
  CORONAL_EXPECTS(!masks.empty(), "union_masks needs at least one mask");
  const GridSpec& g = masks.front().grid;
  for (const auto& m : masks) {
    CORONAL_EXPECTS(m.grid.n_cols == g.n_cols && m.grid.n_rows == g.n_rows,
                    "union_masks: masks are on different grids");
  }
  CORONAL_EXPECTS(mag.grid.n_cols == g.n_cols && mag.grid.n_rows == g.n_rows,
                  "union_masks: magnetic map grid differs from masks");
  SegmentationMask out(g);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    bool noobs = false, pos = false, neg = false;
    for (const auto& m : masks) {
      const Label l = m.labels[i];
      noobs |= l == Label::NoObservation;
      pos |= l == Label::Positive;
      neg |= l == Label::Negative;
    }
    if (noobs) {
      out.labels[i] = Label::NoObservation;
    } else if (pos && neg) {
      const bool positive = !mag.observed[i] || mag.values[i] >= 0.0;
      out.labels[i] = positive ? Label::Positive : Label::Negative;
    } else if (pos) {
      out.labels[i] = Label::Positive;
    } else if (neg) {
      out.labels[i] = Label::Negative;
    }
  }
  return out;
}

SegmentationMask mask_from_holes(std::span<const CoronalHole> holes, const GridSpec& grid,
                                 const BoolField* observed) {
  SegmentationMask out(grid);
  if (observed) {
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      if (!(*observed)[i]) out.labels[i] = Label::NoObservation;
    }
  }
  for (const auto& h : holes) {
    for (const auto& p : h.pixels) {
      if (out.labels(p.row, p.col) != Label::NoObservation)
        out.labels(p.row, p.col) = label_of(h.polarity);
    }
  }
  return out;
}

}  // namespace coronal
