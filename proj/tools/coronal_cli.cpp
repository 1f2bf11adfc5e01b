// coronal: synthetic data, segmentation, matching and classification stages.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "coronal/error.hpp"
#include "coronal/pipeline.hpp"

namespace {

using namespace coronal;

struct CommonFlags {
  std::string config;
  std::string dates;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI configuration file");
  cmd->add_option("--dates", f.dates, "Date range FROM:TO (inclusive)");
  cmd->add_option("--jobs", f.jobs, "Dates processed concurrently")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for every random stream");
  cmd->add_option("--out", f.out, "Work directory (overrides [paths] root)");
}

pipeline::RunOptions resolve(const CommonFlags& f) {
  pipeline::RunOptions opt;
  opt.cfg = f.config.empty() ? PipelineConfig{} : load_config(f.config);
  if (!f.out.empty()) opt.cfg.paths.root = f.out;
  if (f.seed) opt.cfg.set_seed(*f.seed);
  opt.cfg.validate();
  if (!f.dates.empty()) opt.dates = pipeline::parse_date_range(f.dates);
  opt.jobs = f.jobs;
  opt.log = &std::cerr;
  return opt;
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config: return 2;
    case ErrorCode::MissingInput: return 3;
    case ErrorCode::NumericalFailure: return 4;
    default: return 1;
  }
}

void fail_line(const char* code, const std::string& what) {
  std::string msg = what;
  for (char& ch : msg) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::cerr << "error: " << code << ": " << msg << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coronal-hole segmentation, matching and map classification"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  auto* segment = app.add_subcommand("segment", "Initializers, selectors, union and level set");
  auto* tune = app.add_subcommand("tune", "Train candidate selectors and tune level-set alpha/sigma");
  auto* match = app.add_subcommand("match", "Match model clusters against the reference");
  auto* train = app.add_subcommand("train-classifier", "Train the good/bad map classifier");
  auto* classify = app.add_subcommand("classify", "Classify every matched map with the trained model");
  auto* eval = app.add_subcommand("eval", "Write the consolidated report");
  for (auto* c : {synth, segment, tune, match, train, classify, eval}) add_common(c, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_line("E_CONFIG", e.what());
    return 2;
  }

  try {
    const pipeline::RunOptions opt = resolve(flags);
    if (synth->parsed()) {
      pipeline::run_synth(opt);
      std::cout << "synth: " << opt.cfg.synth.n_dates << " dates written to "
                << (opt.root() / "dates").string() << '\n';
    } else if (segment->parsed()) {
      const auto s = pipeline::run_segment(opt);
      std::printf("segment: %zu dates, median distance %.4f (initializers %.4f)\n", s.rows.size(),
                  s.median_full, s.median_init);
    } else if (tune->parsed()) {
      const auto s = pipeline::run_tune(opt);
      std::printf("tune: alpha %.4f sigma %.4f over %zu images\n", s.levelset.alpha,
                  s.levelset.sigma, s.levelset.per_image.size());
    } else if (match->parsed()) {
      const auto s = pipeline::run_match(opt);
      std::printf("match: %zu results", s.results);
      if (s.scored) std::printf(", per-cluster accuracy %.4f", s.accuracy.accuracy());
      std::printf("\n");
    } else if (train->parsed()) {
      const auto s = pipeline::run_train_classifier(opt);
      std::printf("train-classifier: held-out accuracy %.4f (%zu train, %zu test)\n", s.accuracy,
                  s.train_size, s.test_size);
    } else if (classify->parsed()) {
      pipeline::run_classify(opt);
      std::cout << "classify: wrote " << (opt.root() / "classify" / "classified.csv").string() << '\n';
    } else if (eval->parsed()) {
      pipeline::run_eval(opt);
      std::cout << "eval: wrote " << (opt.root() / "report" / "report.md").string() << '\n';
    }
    return 0;
  } catch (const Error& e) {
    fail_line(error_code_name(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    fail_line("E_INTERNAL", e.what());
    return 1;
  }
}
