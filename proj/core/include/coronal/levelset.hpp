#pragma once

#include <functional>
#include <span>
#include <vector>

#include "coronal/maps.hpp"

namespace coronal::levelset {

/// Evolution parameters for the distance-regularised level set.
struct Params {
  double mu = 0.2;        // distance regulariser weight
  double lambda = 5.0;    // boundary (edge) term weight
  double alpha = 0.0;     // area term weight; > 0 shrinks, < 0 expands
  double epsilon = 1.5;   // Dirac half-width in pixels
  double sigma = 0.5;     // Gaussian std (pixels) for the edge function
  double timestep = 1.0;
  int n_iters = 300;
  int kernel_size = 15;
  double init_level = 2.0;  // |phi| of the initial binary step

  void validate() const;
};

inline constexpr double kAlphaMin = -3.0;
inline constexpr double kAlphaMax = 3.0;
inline constexpr double kSigmaMin = 0.2;
inline constexpr double kSigmaMax = 1.0;
inline constexpr double kNeutralLineSigma = 1.0;

/// phi < 0 inside holes.
struct LevelSetField {
  GridSpec grid;
  Field phi;
};

/// Truncated, unit-sum 1-D Gaussian; the 2-D kernel is its outer product.
std::vector<double> gaussian_kernel(double sigma, int size);

/// Separable convolution; longitude wraps, latitude replicates edge rows.
Field gaussian_smooth(const Field& f, double sigma, int size);

struct Gradient {
  Field dx;  // along longitude (columns)
  Field dy;  // along latitude (rows)
};

/// Central differences; longitude periodic, latitude mirrored about the
/// edge row (zero normal derivative).
Gradient central_gradient(const Field& f);

/// g = 1 / (1 + |grad(G_sigma * I)|^2). Unobserved pixels take the mean
/// observed intensity before smoothing.
Field edge_function(const SynopticMap& euv, double sigma, int kernel_size = 15);

/// 1 where the smoothed flux changes sign across a 4-neighbour pair of
/// observed pixels, else 0.
BoolField neutral_line_mask(const SynopticMap& mag, double smoothing_sigma = kNeutralLineSigma,
                            int kernel_size = 15);

/// pg = (1 - p) g
Field barrier_edge(const Field& g, const BoolField& p);

/// Smoothed Dirac: (1 / 2 eps)(1 + cos(pi x / eps)) for |x| <= eps, else 0.
double dirac(double x, double epsilon) noexcept;

/// d_p(s) = p'(s) / s for the double-well potential.
double double_well_rate(double s) noexcept;

LevelSetField initial_field(const SegmentationMask& init, double level = 2.0);

/// Explicit Euler evolution. Throws NumericalFailure on non-finite values.
LevelSetField evolve(const LevelSetField& phi0, const Field& pg, const Params& params);

struct SegmentOutput {
  SegmentationMask mask;
  LevelSetField phi;
  BoolField barrier;
};

SegmentOutput segment_detailed(const SynopticMap& euv, const SynopticMap& mag,
                               const SegmentationMask& init, const Params& params);

SegmentationMask segment(const SynopticMap& euv, const SynopticMap& mag,
                         const SegmentationMask& init, const Params& params);

/// Labels the components of `inside` (8-connected) by the sign of their mean
/// observed flux; zero-mean components are dropped. Unobserved pixels are
/// NoObservation.
SegmentationMask label_by_flux(const BoolField& inside, const SynopticMap& mag);

struct SensSpec {
  double sensitivity = 0.0;
  double specificity = 0.0;
  double distance = 0.0;
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
};

/// Pixel-level, polarity-agnostic agreement; NoObservation in either mask
/// is excluded. Throws SensitivityUndefined when truth has no hole pixels.
SensSpec sens_spec(const SegmentationMask& result, const SegmentationMask& truth);

double sens_spec_distance(double sensitivity, double specificity) noexcept;

// ---------------------------------------------------------------------------
// Parameter tuning

struct PatternSearchOptions {
  double initial_step = 0.25;  // in box-normalised coordinates
  double min_step = 1e-2;
  int max_evaluations = 50;
};

struct PatternSearchResult {
  std::vector<double> x;
  double value = 0.0;
  double initial_value = 0.0;
  int evaluations = 0;
  bool converged = false;  // false: evaluation budget hit before min_step
};

/// Compass search inside the box [lower, upper]: polls +/- step along each
/// coordinate in order, moves to the first strict improvement, halves the
/// step when no poll improves. Poll points outside the box are skipped.
PatternSearchResult pattern_search(const std::function<double(std::span<const double>)>& f,
                                   std::span<const double> x0, std::span<const double> lower,
                                   std::span<const double> upper,
                                   const PatternSearchOptions& options = {});

struct TrainingImage {
  SynopticMap euv;
  SynopticMap mag;
  SegmentationMask init;
  SegmentationMask consensus;
};

struct TuneBounds {
  double alpha_min = kAlphaMin, alpha_max = kAlphaMax;
  double sigma_min = kSigmaMin, sigma_max = kSigmaMax;
  double alpha0 = 0.0, sigma0 = 0.5;
};

struct ImageOptimum {
  double alpha = 0.0;
  double sigma = 0.0;
  double objective = 0.0;
  double initial_objective = 0.0;
  int evaluations = 0;
  bool converged = false;
};

struct TuneResult {
  double alpha = 0.0;
  double sigma = 0.0;
  std::vector<ImageOptimum> per_image;
  bool warning = false;  // some image stopped on the evaluation budget
};

/// Minimises the (sens, spec) distance per image over (alpha, sigma) and
/// returns the medians of the per-image optima.
TuneResult tune(std::span<const TrainingImage> images, const Params& base,
                const TuneBounds& bounds = {}, const PatternSearchOptions& options = {},
                int threads = 1);

double median(std::vector<double> values);

}  // namespace coronal::levelset
