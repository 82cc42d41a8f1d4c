#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>

#include "fdhw/io.hpp"
#include "fdhw/pipeline.hpp"

using namespace fdhw;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "pipeline config (INI)");
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed, "override the configured seed");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

PipelineConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = cfg.synth.seed = cfg.cv.seed = *c.seed;
  if (c.jobs) cfg.jobs = *c.jobs;
  return cfg;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out_path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-derivative handwriting features: synthetic cohorts, extraction, statistics, classification"};
  app.require_subcommand(1);

  Common synth_c, extract_c, corr_c, class_c, sweep_c, fd_c;
  auto* synth = app.add_subcommand("synth", "write a synthetic cohort (SVC files + subjects.csv) to input_dir");
  add_common(synth, synth_c, true);
  auto* extract = app.add_subcommand("extract", "features_<GL|RL|C>.csv and features_all.csv in output_dir");
  add_common(extract, extract_c, true);
  auto* correlate = app.add_subcommand("correlate", "correlation of features with clinical status");
  add_common(correlate, corr_c, true);
  auto* classify = app.add_subcommand("classify", "random search + repeated stratified CV per approach and ALL");
  add_common(classify, class_c, true);

  std::string fd_input, fd_output, fd_approach = "C";
  double fd_h = 0, fd_alpha = 0;
  auto* fdc = app.add_subcommand("fd", "fractional derivative of a single-column signal CSV");
  add_common(fdc, fd_c, false);
  fdc->add_option("--input", fd_input, "signal CSV")->required();
  fdc->add_option("--step", fd_h, "sampling step in seconds")->required();
  fdc->add_option("--alpha", fd_alpha, "order in (0, 1]")->required();
  fdc->add_option("--approach", fd_approach, "GL, RL or C")->check(CLI::IsMember({"GL", "RL", "C"}));
  fdc->add_option("--output", fd_output, "output CSV (default stdout)");

  std::string sw_subject, sw_base = "horizontal_velocity", sw_stat = "mean", sw_output;
  auto* sweep = app.add_subcommand("sweep", "feature value over the alpha grid for one subject");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--subject", sw_subject, "subject id from subjects.csv")->required();
  sweep->add_option("--base", sw_base, "kinematic base, e.g. horizontal_velocity");
  sweep->add_option("--stat", sw_stat, "mean or relstd");
  sweep->add_option("--output", sw_output, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (synth->parsed()) return cmd_synth(resolve(synth_c));
    if (extract->parsed()) return cmd_extract(resolve(extract_c));
    if (correlate->parsed()) return cmd_correlate(resolve(corr_c));
    if (classify->parsed()) return cmd_classify(resolve(class_c));
    if (fdc->parsed()) {
      emit(fd_output, fd_csv(read_file(fd_input), fd_h, fd_alpha, parse_approach(fd_approach)));
      return kExitOk;
    }
    if (sweep->parsed()) {
      KinematicBase base;
      Statistic stat;
      try {
        base = parse_base(sw_base);
        stat = parse_stat(sw_stat);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
      emit(sw_output, sweep_csv(resolve(sweep_c), sw_subject, base, stat));
      return kExitOk;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInvalid;
  }
  return kExitInvalid;
}
