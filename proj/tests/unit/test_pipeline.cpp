#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "coronal/error.hpp"
#include "coronal/fileio.hpp"
#include "coronal/pipeline.hpp"
#include "support.hpp"

using namespace coronal;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "[synth]\nn_dates = 4\nn_cols = 120\nn_rows = 60\nmodel_cols = 96\nmodel_rows = 58\n"
    "n_models = 6\nrank1_min = 3\nrank1_max = 3\nholes_min = 3\nholes_max = 4\n"
    "[levelset]\nn_iters = 60\ntune_images = 1\ntune_max_evaluations = 4\n"
    "[forest]\noob_trees = 1,5\noob_depths = 1,3\n";

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CORONAL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST(DateRangeTest, Parsing) {
  auto r = pipeline::parse_date_range("2:5");
  EXPECT_EQ(r.from, 2);
  EXPECT_EQ(r.to, 5);
  r = pipeline::parse_date_range("3:");
  EXPECT_EQ(r.from, 3);
  EXPECT_EQ(r.to, -1);
  r = pipeline::parse_date_range("7");
  EXPECT_EQ(r.from, 7);
  EXPECT_EQ(r.to, 7);
  EXPECT_THROW(pipeline::parse_date_range("a:b"), ConfigError);
  EXPECT_THROW(pipeline::parse_date_range("5:2"), ConfigError);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const auto log = dir.path() / "log.txt";
  EXPECT_EQ(run_cli("synth --config " + (dir.path() / "absent.ini").string(), log), 2);
  EXPECT_NE(slurp(log).find("error: E_CONFIG"), std::string::npos);
  EXPECT_EQ(run_cli("synth --no-such-flag", log), 2);
  write_file_atomic(dir.path() / "bad.ini", "[levelset]\nbogus = 1\n");
  EXPECT_EQ(run_cli("synth --config " + (dir.path() / "bad.ini").string(), log), 2);
  EXPECT_EQ(run_cli("segment --out " + (dir.path() / "empty").string(), log), 3);
  EXPECT_NE(slurp(log).find("error: E_MISSING_INPUT"), std::string::npos);
  EXPECT_EQ(run_cli("eval --out " + (dir.path() / "empty").string(), log), 3);
  EXPECT_EQ(run_cli("synth --dates x:y --out " + (dir.path() / "w").string(), log), 2);
}

TEST(Cli, SmallEndToEndRun) {
  TempDir dir("e2e");
  const auto cfg = dir.path() / "small.ini";
  write_file_atomic(cfg, kSmallConfig);
  const auto work = dir.path() / "work";
  const auto log = dir.path() / "log.txt";
  const std::string common = " --config " + cfg.string() + " --out " + work.string() + " --jobs 2";
  for (const char* stage : {"synth", "tune", "segment", "match", "train-classifier", "classify", "eval"}) {
    ASSERT_EQ(run_cli(std::string(stage) + common, log), 0) << stage << "\n" << slurp(log);
  }
  for (const char* f : {"dates/day000/euv.csv", "tune/levelset.json", "tune/selector_hh.json",
                        "segment/metrics.csv", "segment/day003/result.csv", "segment/day003/overlay.png",
                        "match/features.csv", "match/accuracy.csv", "match/day001/model_05.json",
                        "classify/model.json", "classify/oob_surface.csv", "classify/classified.csv",
                        "report/report.md"})
    EXPECT_TRUE(fs::exists(work / f)) << f;
  const auto png = slurp(work / "segment/day000/overlay.png");
  EXPECT_EQ(png.substr(1, 3), "PNG");
}

TEST(Pipeline, StagesThroughLibraryAreDeterministic) {
  TempDir a("det_a"), b("det_b");
  auto run = [](const fs::path& root) {
    pipeline::RunOptions opt;
    opt.cfg = parse_config(kSmallConfig);
    opt.cfg.levelset.use_tuned = false;
    opt.cfg.init.use_selectors = false;
    opt.cfg.paths.root = root;
    opt.jobs = 2;
    pipeline::run_synth(opt);
    pipeline::run_segment(opt);
    pipeline::run_match(opt);
    return pipeline::run_train_classifier(opt);
  };
  const auto sa = run(a.path()), sb = run(b.path());
  EXPECT_EQ(sa.accuracy, sb.accuracy);
  for (const char* f : {"segment/metrics.csv", "match/features.csv", "classify/model.json",
                        "classify/oob_surface.csv", "segment/day002/overlay.png"})
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
}

TEST(Pipeline, ScoreMatchOnPerfectModel) {
  synth::SynthSpec spec;
  spec.n_models = 1;
  spec.model_cols = spec.n_cols;
  spec.model_rows = spec.n_rows;
  spec.rank1 = spec.rank2 = synth::Perturbation{};
  const auto d = synth::generate_date(spec, 2);
  const auto results = matching::run_matching(d.consensus, d.models, matching::MatchConfig{}, &d.euv.observed);
  const auto acc = pipeline::score_match(results[0], d.truth, 0, d.consensus.grid);
  EXPECT_EQ(acc.total, 2 * d.truth.holes.size());
  EXPECT_EQ(acc.correct, acc.total);
  EXPECT_EQ(acc.wrong_partner, 0u);
}
