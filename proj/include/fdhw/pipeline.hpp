#pragma once

// End-to-end commands behind the `fdhw` executable. Every command writes its
// outputs atomically and is a pure function of its inputs and the seed.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdhw/features.hpp"
#include "fdhw/fracdiff.hpp"
#include "fdhw/learn.hpp"
#include "fdhw/signal.hpp"
#include "fdhw/stats.hpp"

namespace fdhw {

// Invalid configuration or input; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitPartial = 1, kExitInvalid = 2 };

struct PipelineConfig {
  std::filesystem::path input_dir = "cohort";
  std::filesystem::path output_dir = "results";
  std::vector<Approach> approaches{std::begin(kAllApproaches), std::end(kAllApproaches)};
  std::vector<double> alphas = default_alpha_grid();
  std::uint64_t seed = 42;
  CVPlan cv;
  std::size_t search_iterations = 1000;
  std::size_t top_k = 5;
  CovariateSpec covariates;
  SynthConfig synth;
  std::size_t jobs = 1;

  void validate() const;  // throws ConfigError
};

// INI text with [paths], [pipeline], [cv] and [synth] sections. Relative
// paths are resolved against base_dir. Unknown keys are rejected.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// Row order of the classification report.
inline constexpr Approach kReportOrder[] = {Approach::Caputo, Approach::RiemannLiouville,
                                            Approach::GrunwaldLetnikov};

std::filesystem::path feature_csv_path(const PipelineConfig& cfg, Approach a);
std::filesystem::path combined_feature_csv_path(const PipelineConfig& cfg);

int cmd_synth(const PipelineConfig& cfg);
int cmd_extract(const PipelineConfig& cfg);
int cmd_correlate(const PipelineConfig& cfg);
int cmd_classify(const PipelineConfig& cfg);

// Single-column numeric CSV (an optional non-numeric header line is skipped)
// to `t,value` rows.
std::string fd_csv(const std::string& input, double h, double alpha, Approach approach);

// `approach,alpha,value` rows for one subject of the cohort.
std::string sweep_csv(const PipelineConfig& cfg, const std::string& subject, KinematicBase base, Statistic stat);

}  // namespace fdhw
