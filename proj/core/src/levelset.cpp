#include "coronal/levelset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "coronal/error.hpp"

namespace coronal::levelset {

void Params::validate() const {
  CORONAL_EXPECTS(timestep > 0.0 && mu >= 0.0 && timestep * mu < 0.25,
                  "level set requires timestep * mu < 0.25");
  CORONAL_EXPECTS(epsilon > 0.0, "level set epsilon must be positive");
  CORONAL_EXPECTS(alpha >= kAlphaMin && alpha <= kAlphaMax, "alpha must lie in [-3, 3]");
  CORONAL_EXPECTS(sigma >= kSigmaMin && sigma <= kSigmaMax, "sigma must lie in [0.2, 1]");
  CORONAL_EXPECTS(n_iters >= 0, "n_iters must be non-negative");
  CORONAL_EXPECTS(kernel_size >= 1 && kernel_size % 2 == 1, "kernel size must be odd");
  CORONAL_EXPECTS(init_level > 0.0, "init_level must be positive");
}

std::vector<double> gaussian_kernel(double sigma, int size) {
  CORONAL_EXPECTS(sigma > 0.0, "Gaussian sigma must be positive");
  CORONAL_EXPECTS(size >= 1 && size % 2 == 1, "Gaussian kernel size must be odd");
  const int half = size / 2;
  std::vector<double> k(size);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + half];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Field gaussian_smooth(const Field& f, double sigma, int size) {
  const auto k = gaussian_kernel(sigma, size);
  const int half = size / 2;
  const int rows = f.rows(), cols = f.cols();
  Field tmp(rows, cols, 0.0), out(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) acc += k[i + half] * f(r, f.wrap_col(c + i));
      tmp(r, c) = acc;
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -half; i <= half; ++i) acc += k[i + half] * tmp(std::clamp(r + i, 0, rows - 1), c);
      out(r, c) = acc;
    }
  }
  return out;
}

namespace {

// Mirror about the edge row: row -1 -> 1, row n -> n - 2.
inline int reflect_row(int r, int rows) noexcept {
  if (r < 0) return std::min(-r, rows - 1);
  if (r >= rows) return std::max(2 * rows - 2 - r, 0);
  return r;
}

// Neighbour index tables shared by every stencil in one evolution.
struct Stencil {
  int rows, cols;
  std::vector<int> north, south, west, east;  // north/south are row indices, west/east cols

  Stencil(int r, int c) : rows(r), cols(c), north(r), south(r), west(c), east(c) {
    for (int i = 0; i < r; ++i) {
      north[i] = reflect_row(i - 1, r);
      south[i] = reflect_row(i + 1, r);
    }
    for (int j = 0; j < c; ++j) {
      west[j] = (j + c - 1) % c;
      east[j] = (j + 1) % c;
    }
  }

  void gradient(const Field& f, Field& dx, Field& dy) const {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        dx(r, c) = 0.5 * (f(r, east[c]) - f(r, west[c]));
        dy(r, c) = 0.5 * (f(south[r], c) - f(north[r], c));
      }
    }
  }

  // d(fx)/dx + d(fy)/dy with central differences.
  double div_at(const Field& fx, const Field& fy, int r, int c) const noexcept {
    return 0.5 * (fx(r, east[c]) - fx(r, west[c])) + 0.5 * (fy(south[r], c) - fy(north[r], c));
  }

  double laplacian_at(const Field& f, int r, int c) const noexcept {
    return f(r, east[c]) + f(r, west[c]) + f(south[r], c) + f(north[r], c) - 4.0 * f(r, c);
  }
};

}  // namespace

Gradient central_gradient(const Field& f) {
  Stencil s(f.rows(), f.cols());
  Gradient g{Field(f.rows(), f.cols()), Field(f.rows(), f.cols())};
  s.gradient(f, g.dx, g.dy);
  return g;
}

Field edge_function(const SynopticMap& euv, double sigma, int kernel_size) {
  CORONAL_EXPECTS(sigma >= kSigmaMin && sigma <= kSigmaMax, "edge_function: sigma must lie in [0.2, 1]");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < euv.values.size(); ++i) {
    if (euv.observed[i]) {
      sum += euv.values[i];
      ++n;
    }
  }
  const double fill = n ? sum / static_cast<double>(n) : 0.0;
  Field img = euv.values;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (!euv.observed[i]) img[i] = fill;
  }
  const Field smooth = gaussian_smooth(img, sigma, kernel_size);
  const Gradient grad = central_gradient(smooth);
  Field g(img.rows(), img.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 1.0 / (1.0 + grad.dx[i] * grad.dx[i] + grad.dy[i] * grad.dy[i]);
  }
  return g;
}

BoolField neutral_line_mask(const SynopticMap& mag, double smoothing_sigma, int kernel_size) {
  Field flux = mag.values;
  for (std::size_t i = 0; i < flux.size(); ++i) {
    if (!mag.observed[i]) flux[i] = 0.0;
  }
  const Field s = smoothing_sigma > 0.0 ? gaussian_smooth(flux, smoothing_sigma, kernel_size) : flux;
  const int rows = s.rows(), cols = s.cols();
  BoolField p(rows, cols, 0);
  auto mark = [&](int r0, int c0, int r1, int c1) {
    if (!mag.observed(r0, c0) || !mag.observed(r1, c1)) return;
    if (s(r0, c0) * s(r1, c1) < 0.0) {
      p(r0, c0) = 1;
      p(r1, c1) = 1;
    }
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      mark(r, c, r, (c + 1) % cols);
      if (r + 1 < rows) mark(r, c, r + 1, c);
    }
  }
  return p;
}

Field barrier_edge(const Field& g, const BoolField& p) {
  CORONAL_EXPECTS(g.same_shape(p), "barrier_edge: g and p differ in shape");
  Field pg(g.rows(), g.cols());
  for (std::size_t i = 0; i < pg.size(); ++i) pg[i] = (1.0 - p[i]) * g[i];
  return pg;
}

double dirac(double x, double epsilon) noexcept {
  if (std::abs(x) > epsilon) return 0.0;
  return (1.0 / (2.0 * epsilon)) * (1.0 + std::cos(kPi * x / epsilon));
}

double double_well_rate(double s) noexcept {
  // p'(s) = sin(2 pi s) / (2 pi) on [0, 1], s - 1 beyond; d_p = p'(s) / s
  // with the removable singularities at p'(s) = 0 or s = 0 set to 1.
  const double ps = s <= 1.0 ? std::sin(2.0 * kPi * s) / (2.0 * kPi) : s - 1.0;
  const double num = ps != 0.0 ? ps : 1.0;
  const double den = s != 0.0 ? s : 1.0;
  return num / den;
}

LevelSetField initial_field(const SegmentationMask& init, double level) {
  LevelSetField f{init.grid, Field(init.grid.n_rows, init.grid.n_cols, level)};
  for (std::size_t i = 0; i < f.phi.size(); ++i) {
    if (is_hole(init.labels[i])) f.phi[i] = -level;
  }
  return f;
}

LevelSetField evolve(const LevelSetField& phi0, const Field& pg, const Params& params) {
  params.validate();
  CORONAL_EXPECTS(phi0.phi.same_shape(pg), "evolve: phi and pg differ in shape");
  const int rows = pg.rows(), cols = pg.cols();
  const Stencil st(rows, cols);
  LevelSetField cur = phi0;
  Field& phi = cur.phi;

  Field vx(rows, cols), vy(rows, cols);
  st.gradient(pg, vx, vy);
  Field px(rows, cols), py(rows, cols), nx(rows, cols), ny(rows, cols);
  Field fe(rows, cols), fs(rows, cols), update(rows, cols);

  for (int it = 0; it < params.n_iters; ++it) {
    st.gradient(phi, px, py);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const double s = std::sqrt(px[i] * px[i] + py[i] * py[i]);
      nx[i] = px[i] / (s + 1e-10);
      ny[i] = py[i] / (s + 1e-10);
    }
    // Face fluxes d_p(|grad phi|) dphi/dn on the east and south faces; the
    // tangential derivative is the mean of the two cell-centred values.
    // No flux crosses the first or last latitude row.
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int e = st.east[c];
        const double dn = phi(r, e) - phi(r, c);
        const double dt = 0.5 * (py(r, c) + py(r, e));
        fe(r, c) = double_well_rate(std::sqrt(dn * dn + dt * dt)) * dn;
        if (r + 1 < rows) {
          const double dn2 = phi(r + 1, c) - phi(r, c);
          const double dt2 = 0.5 * (px(r, c) + px(r + 1, c));
          fs(r, c) = double_well_rate(std::sqrt(dn2 * dn2 + dt2 * dt2)) * dn2;
        } else {
          fs(r, c) = 0.0;
        }
      }
    }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const std::size_t i = phi.index(r, c);
        const double reg = fe(r, c) - fe(r, st.west[c]) + fs(r, c) - (r > 0 ? fs(r - 1, c) : 0.0);
        const double delta = dirac(phi[i], params.epsilon);
        double edge = 0.0, area = 0.0;
        if (delta != 0.0) {
          const double curvature = st.div_at(nx, ny, r, c);
          edge = delta * (vx[i] * nx[i] + vy[i] * ny[i]) + delta * pg[i] * curvature;
          area = delta * pg[i];
        }
        update[i] = params.mu * reg + params.lambda * edge + params.alpha * area;
      }
    }
    bool finite = true;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      phi[i] += params.timestep * update[i];
      finite &= std::isfinite(phi[i]);
    }
    if (!finite) {
      throw NumericalFailure("level set evolution produced non-finite values at iteration " +
                                 std::to_string(it + 1),
                             it + 1);
    }
  }
  return cur;
}

SegmentationMask label_by_flux(const BoolField& inside, const SynopticMap& mag) {
  SegmentationMask out(mag.grid);
  BoolField usable(inside.rows(), inside.cols(), 0);
  for (std::size_t i = 0; i < usable.size(); ++i) {
    if (!mag.observed[i]) out.labels[i] = Label::NoObservation;
    usable[i] = inside[i] && mag.observed[i] ? 1 : 0;
  }
  for (const auto& comp : connected_components(usable)) {
    double sum = 0.0;
    for (const auto& p : comp) sum += mag.values(p.row, p.col);
    if (sum == 0.0) continue;
    const Label l = sum > 0.0 ? Label::Positive : Label::Negative;
    for (const auto& p : comp) out.labels(p.row, p.col) = l;
  }
  return out;
}

SegmentOutput segment_detailed(const SynopticMap& euv, const SynopticMap& mag,
                               const SegmentationMask& init, const Params& params) {
  params.validate();
  const auto same = [](const GridSpec& a, const GridSpec& b) {
    return a.n_cols == b.n_cols && a.n_rows == b.n_rows;
  };
  CORONAL_EXPECTS(same(euv.grid, mag.grid) && same(euv.grid, init.grid),
                  "segment: EUV, magnetic and initial maps must share one grid");
  const Field g = edge_function(euv, params.sigma, params.kernel_size);
  BoolField p = neutral_line_mask(mag, kNeutralLineSigma, params.kernel_size);
  const Field pg = barrier_edge(g, p);
  SegmentOutput out;
  out.barrier = std::move(p);
  if (init.hole_count() == 0) {
    out.phi = initial_field(init, params.init_level);
  } else {
    out.phi = evolve(initial_field(init, params.init_level), pg, params);
  }
  // Hole pixels never sit on a neutral line, so no 4-connected hole path
  // can cross from one polarity to the other.
  BoolField inside(euv.grid.n_rows, euv.grid.n_cols, 0);
  for (std::size_t i = 0; i < inside.size(); ++i) {
    inside[i] = out.phi.phi[i] < 0.0 && euv.observed[i] && !out.barrier[i] ? 1 : 0;
  }
  out.mask = label_by_flux(inside, mag);
  for (std::size_t i = 0; i < inside.size(); ++i) {
    if (!euv.observed[i]) out.mask.labels[i] = Label::NoObservation;
  }
  return out;
}

SegmentationMask segment(const SynopticMap& euv, const SynopticMap& mag,
                         const SegmentationMask& init, const Params& params) {
  return segment_detailed(euv, mag, init, params).mask;
}

double sens_spec_distance(double sensitivity, double specificity) noexcept {
  return std::sqrt((1.0 - specificity) * (1.0 - specificity) +
                   (1.0 - sensitivity) * (1.0 - sensitivity));
}

SensSpec sens_spec(const SegmentationMask& result, const SegmentationMask& truth) {
  CORONAL_EXPECTS(result.grid.n_cols == truth.grid.n_cols && result.grid.n_rows == truth.grid.n_rows,
                  "sens_spec: masks are on different grids");
  SensSpec s;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const Label a = result.labels[i];
    const Label b = truth.labels[i];
    if (a == Label::NoObservation || b == Label::NoObservation) continue;
    const bool pred = is_hole(a), actual = is_hole(b);
    if (pred && actual) ++s.tp;
    else if (!pred && actual) ++s.fn;
    else if (pred && !actual) ++s.fp;
    else ++s.tn;
  }
  if (s.tp + s.fn == 0) throw SensitivityUndefined("sensitivity undefined: truth has no hole pixels");
  if (s.tn + s.fp == 0) throw SensitivityUndefined("specificity undefined: truth has no background pixels");
  s.sensitivity = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  s.specificity = static_cast<double>(s.tn) / static_cast<double>(s.tn + s.fp);
  s.distance = sens_spec_distance(s.sensitivity, s.specificity);
  return s;
}

PatternSearchResult pattern_search(const std::function<double(std::span<const double>)>& f,
                                   std::span<const double> x0, std::span<const double> lower,
                                   std::span<const double> upper,
                                   const PatternSearchOptions& options) {
  const std::size_t d = x0.size();
  CORONAL_EXPECTS(d >= 1 && lower.size() == d && upper.size() == d,
                  "pattern_search: dimension mismatch");
  for (std::size_t i = 0; i < d; ++i) {
    CORONAL_EXPECTS(lower[i] < upper[i] && x0[i] >= lower[i] && x0[i] <= upper[i],
                    "pattern_search: start point outside bounds");
  }
  CORONAL_EXPECTS(options.max_evaluations >= 1 && options.initial_step > 0.0,
                  "pattern_search: invalid options");
  auto to_x = [&](const std::vector<double>& u) {
    std::vector<double> x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = lower[i] + u[i] * (upper[i] - lower[i]);
    return x;
  };
  std::vector<double> u(d);
  for (std::size_t i = 0; i < d; ++i) u[i] = (x0[i] - lower[i]) / (upper[i] - lower[i]);

  PatternSearchResult res;
  res.x.assign(x0.begin(), x0.end());
  res.value = f(res.x);
  res.initial_value = res.value;
  res.evaluations = 1;
  double step = options.initial_step;
  while (step >= options.min_step && res.evaluations < options.max_evaluations) {
    bool improved = false;
    for (std::size_t i = 0; i < d && !improved; ++i) {
      for (double sign : {1.0, -1.0}) {
        if (res.evaluations >= options.max_evaluations) break;
        std::vector<double> cand = u;
        cand[i] += sign * step;
        if (cand[i] < -1e-12 || cand[i] > 1.0 + 1e-12) continue;
        cand[i] = std::clamp(cand[i], 0.0, 1.0);
        const auto x = to_x(cand);
        const double v = f(x);
        ++res.evaluations;
        if (v < res.value) {
          u = cand;
          res.x = x;
          res.value = v;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  res.converged = step < options.min_step;
  return res;
}

double median(std::vector<double> values) {
  CORONAL_EXPECTS(!values.empty(), "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TuneResult tune(std::span<const TrainingImage> images, const Params& base, const TuneBounds& bounds,
                const PatternSearchOptions& options, int threads) {
  CORONAL_EXPECTS(!images.empty(), "tune: training set is empty");
  CORONAL_EXPECTS(bounds.alpha_min >= kAlphaMin && bounds.alpha_max <= kAlphaMax &&
                      bounds.sigma_min >= kSigmaMin && bounds.sigma_max <= kSigmaMax,
                  "tune: bounds exceed the admissible parameter box");
  TuneResult out;
  out.per_image.resize(images.size());
  const double lower[2] = {bounds.alpha_min, bounds.sigma_min};
  const double upper[2] = {bounds.alpha_max, bounds.sigma_max};
  const double x0[2] = {bounds.alpha0, bounds.sigma0};

  std::vector<std::exception_ptr> errors(images.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < images.size(); k = next++) {
      try {
        const TrainingImage& img = images[k];
        auto objective = [&](std::span<const double> x) {
          Params p = base;
          p.alpha = x[0];
          p.sigma = x[1];
          return sens_spec(segment(img.euv, img.mag, img.init, p), img.consensus).distance;
        };
        const auto r = pattern_search(objective, x0, lower, upper, options);
        out.per_image[k] = {r.x[0], r.x[1], r.value, r.initial_value, r.evaluations, r.converged};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads > 1) {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  } else {
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<double> alphas, sigmas;
  for (const auto& o : out.per_image) {
    alphas.push_back(o.alpha);
    sigmas.push_back(o.sigma);
    out.warning |= !o.converged;
  }
  out.alpha = median(alphas);
  out.sigma = median(sigmas);
  return out;
}

}  // namespace coronal::levelset
