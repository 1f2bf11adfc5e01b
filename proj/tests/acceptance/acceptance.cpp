// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "coronal/assignment.hpp"
#include "coronal/fileio.hpp"
#include "coronal/geometry.hpp"
#include "coronal/levelset.hpp"
#include "coronal/pipeline.hpp"
#include "support.hpp"

using namespace coronal;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s - %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

void assignment_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> w(0, 20);
  int agree = 0, total = 0;
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int k = 0; k < 1000; ++k) {
      CostMatrix m(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = w(rng);
      const auto fast = solve_assignment(m);
      const auto slow = brute_force_assignment(m);
      std::int64_t recomputed = 0;
      for (std::size_t i = 0; i < n; ++i) recomputed += m(i, static_cast<std::size_t>(fast.column_of_row[i]));
      agree += fast.total == slow.total && recomputed == fast.total;
      ++total;
    }
  }
  const double secs = seconds_since(t0);
  report(1, agree == total && secs < 10.0,
         fmt("%.0f/%.0f matrices optimal, %.2f s", agree, total, secs));
}

void sphere_area() {
  const GridSpec g(360, 180);
  double exact = 0, mid = 0;
  for (int r = 0; r < g.n_rows; ++r) {
    exact += g.n_cols * pixel_area(r, g);
    mid += g.n_cols * pixel_area_midpoint(r, g);
  }
  const double want = 4 * kPi * g.radius * g.radius;
  const double e_exact = std::abs(exact - want) / want, e_mid = std::abs(mid - want) / want;
  report(2, e_exact <= 1e-12 && e_mid <= 1e-3,
         fmt("sine-difference rel. error %.2e, midpoint rel. error %.2e", e_exact, e_mid));
}

// Neutral line along a wavy meridian and its antipode, dark ellipses
// scattered across it.
struct BarrierFixture {
  SynopticMap euv, mag;
  SegmentationMask init;
};

BarrierFixture barrier_fixture(std::uint64_t seed) {
  const GridSpec g(120, 60);
  BarrierFixture f{SynopticMap(g, MapKind::Euv), SynopticMap(g, MapKind::Magnetic), SegmentationMask(g)};
  for (auto& o : f.euv.observed) o = 1;
  for (auto& o : f.mag.observed) o = 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0, 1);
  const double c0 = 20 + 20 * u(rng), amp = 2 + 6 * u(rng), period = 20 + 40 * u(rng);
  const int n_blobs = 2 + static_cast<int>(3 * u(rng));
  struct Blob {
    double r, c, a, b;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < n_blobs; ++k) {
    const double r = 12 + 36 * u(rng);
    const double side = u(rng) < 0.5 ? c0 : c0 + 60;
    blobs.push_back({r, side + amp * std::sin(2 * kPi * r / period) + 6 * (u(rng) - 0.5), 4 + 6 * u(rng),
                     3 + 5 * u(rng)});
  }
  for (int r = 0; r < g.n_rows; ++r)
    for (int c = 0; c < g.n_cols; ++c) {
      const double line = c0 + amp * std::sin(2 * kPi * r / period);
      const bool positive = c >= line && c < line + 60;
      f.mag.values(r, c) = (positive ? 8.0 : -8.0) + noise(rng);
      bool dark = false;
      for (const auto& b : blobs) {
        double dc = std::abs(c - b.c);
        dc = std::min(dc, g.n_cols - dc);
        dark |= (r - b.r) * (r - b.r) / (b.b * b.b) + dc * dc / (b.a * b.a) <= 1.0;
      }
      f.euv.values(r, c) = (dark ? 40.0 : 100.0) + 2 * noise(rng);
      if (dark) f.init.labels(r, c) = Label::Positive;
    }
  return f;
}

void neutral_line_barrier() {
  int clean = 0;
  std::size_t hole_pixels = 0;
  levelset::Params p;
  p.alpha = -1.5;
  p.n_iters = 300;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto f = barrier_fixture(seed);
    const auto out = levelset::segment_detailed(f.euv, f.mag, f.init, p);
    hole_pixels += out.mask.hole_count();
    // Oracle: 4-connected regions of the grid with the barrier removed.
    BoolField free(out.barrier.rows(), out.barrier.cols());
    for (std::size_t i = 0; i < free.size(); ++i) free[i] = !out.barrier[i];
    Raster<int> region(free.rows(), free.cols(), -1);
    int id = 0;
    for (const auto& comp : connected_components4(free)) {
      for (const auto& px : comp) region(px.row, px.col) = id;
      ++id;
    }
    bool ok = true;
    for (const auto& comp : connected_components4(hole_indicator(out.mask))) {
      const int first = region(comp.front().row, comp.front().col);
      for (const auto& px : comp) ok &= first >= 0 && region(px.row, px.col) == first;
    }
    clean += ok;
  }
  report(3, clean == 50 && hole_pixels > 0,
         fmt("%.0f/50 fixtures with no hole path across the neutral line (%.0f hole pixels)", clean,
             static_cast<double>(hole_pixels)));
}

// ---------------------------------------------------------------------------

void default_corpus(const fs::path& root) {
  pipeline::RunOptions opt;
  opt.cfg.paths.root = root;
  opt.jobs = 1;

  const auto t0 = Clock::now();
  pipeline::run_synth(opt);
  pipeline::TuneSummary tune;
  pipeline::SegmentSummary seg;
  guarded(4, [&] {
    tune = pipeline::run_tune(opt);
    seg = pipeline::run_segment(opt);
    const double secs = seconds_since(t0);
    report(4, seg.median_full <= 0.15 && seg.median_full < seg.median_init && secs < 300.0,
           fmt("median distance full %.4f, initializers %.4f, %.0f dates, %.1f s single-threaded",
               seg.median_full, seg.median_init, static_cast<double>(seg.rows.size()), secs));
  });

  guarded(7, [&] {
    const levelset::TuneBounds b;
    const auto& t = tune.levelset;
    std::size_t ok = 0;
    for (const auto& im : t.per_image) {
      ok += im.objective <= im.initial_objective && im.alpha >= b.alpha_min && im.alpha <= b.alpha_max &&
            im.sigma >= b.sigma_min && im.sigma <= b.sigma_max;
    }
    const bool in_box = t.alpha >= b.alpha_min && t.alpha <= b.alpha_max && t.sigma >= b.sigma_min &&
                        t.sigma <= b.sigma_max;
    report(7, !t.per_image.empty() && ok == t.per_image.size() && in_box,
           fmt("%.0f/%.0f images not worse than start; alpha %.3f, sigma %.3f", static_cast<double>(ok),
               static_cast<double>(t.per_image.size()), t.alpha, t.sigma));
  });

  guarded(5, [&] {
    const auto m = pipeline::run_match(opt);
    report(5, m.scored && m.conserved && m.accuracy.accuracy() >= 0.9,
           fmt("accuracy %.4f over %.0f clusters, %.0f results, conservation ", m.accuracy.accuracy(),
               static_cast<double>(m.accuracy.total), static_cast<double>(m.results)) +
               (m.conserved ? "held" : "violated"));
  });

  guarded(6, [&] {
    const auto& fc = opt.cfg.forest.classifier;
    const auto first = pipeline::run_train_classifier(opt);
    const std::string surface = read_text_file(root / "classify/oob_surface.csv");
    const auto second = pipeline::run_train_classifier(opt);
    bool same_surface = surface == read_text_file(root / "classify/oob_surface.csv") &&
                        first.oob.points.size() == second.oob.points.size();
    for (std::size_t i = 0; same_surface && i < first.oob.points.size(); ++i)
      same_surface = first.oob.points[i].oob_error == second.oob.points[i].oob_error;
    double sum = 0;
    for (double v : first.importances) sum += v;
    const auto& imp = first.importances;
    // newN, newA, missN, missA, overA[, sameA]
    const bool rank = imp.size() >= 5 && std::max(imp[3], imp[4]) > std::max(imp[0], imp[2]);
    const bool ok = first.accuracy >= 0.9 && fc.n_trees == 20 && fc.max_depth == 11 && same_surface &&
                    std::abs(sum - 1.0) <= 1e-9 && rank;
    std::ostringstream d;
    d << "held-out accuracy " << first.accuracy << " (" << first.test_size << " maps, " << fc.n_trees
      << " trees, depth " << fc.max_depth << "); OOB surface " << (same_surface ? "bit-identical" : "differs")
      << "; importance sum " << sum << "; area feature ranked " << (rank ? "above" : "not above")
      << " count features";
    report(6, ok, d.str());
  });
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text_file(e.path());
  return files;
}

const char* kSmallConfig =
    "[synth]\nn_dates = 6\nn_cols = 120\nn_rows = 60\nmodel_cols = 96\nmodel_rows = 58\n"
    "n_models = 6\n"
    "[levelset]\nn_iters = 80\n"
    "[forest]\noob_trees = 1,5,10\noob_depths = 1,3,5\n";

void determinism(const fs::path& dir) {
  const auto cfg = dir / "small.ini";
  write_file_atomic(cfg, kSmallConfig);
  std::map<std::string, std::string> trees[2];
  for (int k = 0; k < 2; ++k) {
    const auto work = dir / ("run" + std::to_string(k));
    for (const char* stage : {"synth", "segment", "match", "train-classifier", "eval"}) {
      const std::string cmd = std::string(CORONAL_CLI_PATH) + " " + stage + " --config " + cfg.string() +
                              " --out " + work.string() + " > " + (dir / "log.txt").string() + " 2>&1";
      if (run_command(cmd) != 0) {
        report(8, false, std::string("stage ") + stage + " failed:\n" + read_text_file(dir / "log.txt"));
        return;
      }
    }
    trees[k] = read_tree(work);
  }
  std::size_t differing = 0;
  std::string first_diff;
  for (const auto& [name, bytes] : trees[0]) {
    const auto it = trees[1].find(name);
    if (it == trees[1].end() || it->second != bytes) {
      if (!differing++) first_diff = name;
    }
  }
  const bool ok = differing == 0 && trees[0].size() == trees[1].size() && !trees[0].empty();
  report(8, ok, std::to_string(trees[0].size()) + " artifacts compared, " + std::to_string(differing) +
                    " differ" + (first_diff.empty() ? "" : " (first: " + first_diff + ")"));
}

void invariant_suites(const fs::path& dir) {
  const auto log = dir / "unit.txt";
  const int rc = run_command(std::string(CORONAL_UNIT_TESTS_PATH) + " --gtest_brief=1 > " + log.string() + " 2>&1");
  std::istringstream in(read_text_file(log));
  std::string line, failed, summary;
  while (std::getline(in, line)) {
    if (line.rfind("[  FAILED  ] ", 0) == 0 && line.find(" tests, listed below") == std::string::npos &&
        line.find('(') != std::string::npos)
      failed += "\n    " + line.substr(13);
    if (line.rfind("[==========]", 0) == 0) summary = line.substr(13);
  }
  report(9, rc == 0, summary + (failed.empty() ? "" : "; failing:" + failed));
}

}  // namespace

int main() {
  testing_support::TempDir dir("acceptance");
  guarded(1, assignment_optimality);
  guarded(2, sphere_area);
  guarded(3, neutral_line_barrier);
  try {
    default_corpus(dir.path() / "default");
  } catch (const std::exception& e) {
    std::printf("default corpus run failed: %s\n", e.what());
    for (int id : {4, 5, 6, 7}) report(id, false, "default corpus run failed");
  }
  guarded(8, [&] { determinism(dir.path()); });
  guarded(9, [&] { invariant_suites(dir.path()); });
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
