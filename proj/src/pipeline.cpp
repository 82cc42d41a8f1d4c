#include "fdhw/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "fdhw/io.hpp"
#include "fdhw/parallel.hpp"

namespace fdhw {

namespace {

namespace pt = boost::property_tree;

double parse_double(std::string_view s, std::string_view key) {
  s = trim(s);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, s));
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, std::string_view key) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, s));
  }
  return v;
}

void log(const std::string& msg) { fmt::print(stderr, "{}\n", msg); }

std::vector<SubjectInfo> subject_info(const std::vector<SubjectEntry>& entries) {
  std::vector<SubjectInfo> info;
  for (const auto& e : entries) info.push_back({e.subject_id, e.label, e.age, e.gender});
  return info;
}

FeatureMatrix read_features(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw ConfigError(fmt::format("missing feature file {} (run extract first)", p.string()));
  return read_feature_csv(p);
}

std::string conventions_note(const PipelineConfig& cfg) {
  std::string alphas;
  for (double a : cfg.alphas) alphas += (alphas.empty() ? "" : ",") + fmt::format("{}", a);
  std::string covs;
  if (cfg.covariates.age) covs += "age";
  if (cfg.covariates.gender) covs += covs.empty() ? "gender" : ",gender";
  return fmt::format(
      "status coding for correlation: HC=1, PD=0 (negative rho = higher in PD)\n"
      "gender coding: F=0, M=1\n"
      "covariates residualized: {}\n"
      "p-values: two-sided Student t approximation, df = n - 2\n"
      "adjustment: Benjamini-Hochberg per approach and per correlation type\n"
      "columns with missing values or constant residuals are excluded from the family\n"
      "alphas: {}\n"
      "seed: {}\n",
      covs.empty() ? "none" : covs, alphas, cfg.seed);
}

std::string opt_machine(const std::optional<double>& v) { return v ? fmt_machine(*v) : ""; }
std::string opt_human(const std::optional<double>& v) { return v ? fmt_human(*v) : "NA"; }

}  // namespace

void PipelineConfig::validate() const {
  if (approaches.empty()) throw ConfigError("approaches must not be empty");
  if (alphas.empty()) throw ConfigError("alphas must not be empty");
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError(fmt::format("alpha {} outside (0, 1]", a));
  }
  if (search_iterations < 1) throw ConfigError("search_iterations must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  try {
    cv.validate();
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config: {} (line {})", e.message(), e.line()));
  }

  PipelineConfig cfg;
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(std::string(trim(v)));
    return p.is_absolute() ? p : base_dir / p;
  };

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(fmt::format("config: key '{}' outside a section", section));
    for (const auto& [key, node] : body) {
      const std::string v = node.data();
      const std::string name = section + "." + key;
      if (name == "paths.input_dir") {
        cfg.input_dir = path_of(v);
      } else if (name == "paths.output_dir") {
        cfg.output_dir = path_of(v);
      } else if (name == "pipeline.approaches") {
        cfg.approaches.clear();
        for (auto tok : split(v, ',')) {
          try {
            cfg.approaches.push_back(parse_approach(trim(tok)));
          } catch (const std::exception&) {
            throw ConfigError(fmt::format("{}: unknown approach '{}'", name, trim(tok)));
          }
        }
        std::set<Approach> uniq(cfg.approaches.begin(), cfg.approaches.end());
        if (uniq.size() != cfg.approaches.size()) throw ConfigError(name + ": duplicate approach");
      } else if (name == "pipeline.alphas") {
        cfg.alphas.clear();
        for (auto tok : split(v, ',')) cfg.alphas.push_back(parse_double(tok, name));
      } else if (name == "pipeline.seed") {
        cfg.seed = parse_uint(v, name);
      } else if (name == "pipeline.search_iterations") {
        cfg.search_iterations = parse_uint(v, name);
      } else if (name == "pipeline.top_k") {
        cfg.top_k = parse_uint(v, name);
      } else if (name == "pipeline.jobs") {
        cfg.jobs = parse_uint(v, name);
      } else if (name == "pipeline.covariates") {
        cfg.covariates = {false, false};
        for (auto tok : split(v, ',')) {
          const auto t = trim(tok);
          if (t == "age") {
            cfg.covariates.age = true;
          } else if (t == "gender") {
            cfg.covariates.gender = true;
          } else if (t != "none" && !t.empty()) {
            throw ConfigError(fmt::format("{}: unknown covariate '{}'", name, t));
          }
        }
      } else if (name == "cv.folds") {
        cfg.cv.folds = parse_uint(v, name);
      } else if (name == "cv.repetitions") {
        cfg.cv.repetitions = parse_uint(v, name);
      } else if (name == "cv.stratified") {
        const auto t = trim(v);
        if (t != "true" && t != "false") throw ConfigError(name + ": expected true or false");
        cfg.cv.stratified = t == "true";
      } else if (name == "synth.n_per_group") {
        cfg.synth.n_per_group = parse_uint(v, name);
      } else if (name == "synth.duration_s") {
        cfg.synth.duration_s = parse_double(v, name);
      } else if (name == "synth.loop_freq_hz") {
        cfg.synth.loop_freq_hz = parse_double(v, name);
      } else if (name == "synth.loop_radius_mm") {
        cfg.synth.loop_radius_mm = parse_double(v, name);
      } else if (name == "synth.drift_mm_s") {
        cfg.synth.drift_mm_s = parse_double(v, name);
      } else if (name == "synth.noise_mm") {
        cfg.synth.noise_mm = parse_double(v, name);
      } else if (name == "synth.pd_tremor_hz") {
        cfg.synth.pd_tremor_hz = parse_double(v, name);
      } else if (name == "synth.pd_tremor_amp") {
        cfg.synth.pd_tremor_amp = parse_double(v, name);
      } else if (name == "synth.pd_vel_jitter") {
        cfg.synth.pd_vel_jitter = parse_double(v, name);
      } else if (name == "synth.pd_size_decay") {
        cfg.synth.pd_size_decay = parse_double(v, name);
      } else {
        throw ConfigError(fmt::format("config: unknown key '{}'", name));
      }
    }
  }
  cfg.synth.seed = cfg.seed;
  cfg.cv.seed = cfg.seed;
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("cannot read config {}: {}", path.string(), e.what()));
  }
  return parse_config(text, path.parent_path());
}

std::filesystem::path feature_csv_path(const PipelineConfig& cfg, Approach a) {
  return cfg.output_dir / fmt::format("features_{}.csv", approach_tag(a));
}

std::filesystem::path combined_feature_csv_path(const PipelineConfig& cfg) {
  return cfg.output_dir / "features_all.csv";
}

int cmd_synth(const PipelineConfig& cfg) {
  cfg.validate();
  const auto cohort = synth_cohort(cfg.synth);
  std::vector<SubjectEntry> entries;
  for (const auto& rec : cohort) {
    const auto file = rec.subject_id + ".svc";
    write_file_atomic(cfg.input_dir / file, write_svc(rec));
    entries.push_back({rec.subject_id, rec.label, rec.age, rec.gender, file});
  }
  write_file_atomic(cfg.input_dir / "subjects.csv", write_subjects_csv(entries));
  log(fmt::format("synth: wrote {} recordings to {}", cohort.size(), cfg.input_dir.string()));
  return kExitOk;
}

int cmd_extract(const PipelineConfig& cfg) {
  cfg.validate();
  const auto list = cfg.input_dir / "subjects.csv";
  if (!std::filesystem::exists(list)) throw ConfigError(fmt::format("missing {}", list.string()));
  const auto entries = read_subjects_csv(list);
  if (entries.empty()) throw ConfigError(fmt::format("{} lists no subjects", list.string()));

  // One slot per subject; a failed subject leaves an error message instead.
  std::vector<std::vector<FeatureVector>> vectors(entries.size());
  std::vector<std::string> errors(entries.size());
  parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    try {
      auto rec = read_svc(cfg.input_dir / entries[i].path);
      rec.subject_id = entries[i].subject_id;
      for (auto a : cfg.approaches) vectors[i].push_back(extract_features(rec, a, cfg.alphas));
    } catch (const std::exception& e) {
      vectors[i].clear();
      errors[i] = e.what();
    }
  });

  std::vector<SubjectEntry> ok;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (errors[i].empty()) {
      ok.push_back(entries[i]);
    } else {
      ++failed;
      log(fmt::format("extract: skipping subject '{}': {}", entries[i].subject_id, errors[i]));
    }
  }
  if (ok.empty()) {
    log("extract: every subject failed, nothing written");
    return kExitInvalid;
  }

  const auto info = subject_info(ok);
  std::vector<FeatureMatrix> parts;
  for (std::size_t k = 0; k < cfg.approaches.size(); ++k) {
    std::vector<FeatureVector> col;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (errors[i].empty()) col.push_back(std::move(vectors[i][k]));
    }
    parts.push_back(to_matrix(col, info));
    write_file_atomic(feature_csv_path(cfg, cfg.approaches[k]), write_feature_csv(parts.back()));
  }
  const auto all = concat_columns(parts);
  write_file_atomic(combined_feature_csv_path(cfg), write_feature_csv(all));
  log(fmt::format("extract: {} subjects, {} features per approach, {} combined ({} skipped)", ok.size(),
                  parts.front().n_cols(), all.n_cols(), failed));
  return failed ? kExitPartial : kExitOk;
}

int cmd_correlate(const PipelineConfig& cfg) {
  cfg.validate();
  for (auto a : cfg.approaches) {
    const auto m = read_features(feature_csv_path(cfg, a));
    CorrelationReport rep;
    try {
      rep = correlation_report(m, cfg.covariates);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("correlate [{}]: {}", approach_tag(a), e.what()));
    }
    for (const auto& w : rep.warnings) log(fmt::format("correlate [{}]: {}", approach_tag(a), w));
    if (!rep.excluded.empty()) {
      log(fmt::format("correlate [{}]: {} columns excluded from the family", approach_tag(a), rep.excluded.size()));
    }
    const auto tag = approach_tag(a);
    write_file_atomic(cfg.output_dir / fmt::format("correlation_{}.csv", tag), write_correlation_csv(rep.rows, true));
    const auto top = top_rows(rep, cfg.top_k);
    write_file_atomic(cfg.output_dir / fmt::format("correlation_{}_top{}.csv", tag, cfg.top_k),
                      write_correlation_csv(top, false));
  }
  write_file_atomic(cfg.output_dir / "correlation_conventions.txt", conventions_note(cfg));
  return kExitOk;
}

int cmd_classify(const PipelineConfig& cfg) {
  cfg.validate();
  struct Row {
    std::string name;
    FeatureMatrix m;
  };
  std::vector<Row> rows;
  for (auto a : kReportOrder) {
    if (std::find(cfg.approaches.begin(), cfg.approaches.end(), a) == cfg.approaches.end()) continue;
    rows.push_back({std::string(approach_tag(a)), read_features(feature_csv_path(cfg, a))});
  }
  rows.push_back({"ALL", read_features(combined_feature_csv_path(cfg))});

  std::string machine = "approach,mcc,bacc,sen,spe,pre,f1\n";
  std::string human = fmt::format("{:<8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>6}{:>6}{:>6}{:>6}\n", "approach", "MCC",
                                  "BACC", "SEN", "SPE", "PRE", "F1", "TP", "FN", "FP", "TN");
  std::string params =
      "approach,iteration,n_estimators,learning_rate,gamma,max_depth,subsample,colsample_bylevel,"
      "colsample_bytree,scale_pos_weight,min_child_weight,seed\n";
  for (const auto& r : rows) {
    Dataset d;
    try {
      d = to_dataset(r.m);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("classify [{}]: {}", r.name, e.what()));
    }
    SearchResult res;
    try {
      res = random_search(d, cfg.cv, cfg.search_iterations, cfg.seed, cfg.jobs);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(fmt::format("classify [{}]: {}", r.name, e.what()));
    }
    const auto& s = res.report.summary;
    fmt::format_to(std::back_inserter(machine), "{},{},{},{},{},{},{}\n", r.name, fmt_machine(s.mcc),
                   fmt_machine(s.bacc), fmt_machine(s.sen), fmt_machine(s.spe), opt_machine(s.pre),
                   opt_machine(s.f1));
    fmt::format_to(std::back_inserter(human), "{:<8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>6}{:>6}{:>6}{:>6}\n", r.name,
                   fmt_human(s.mcc), fmt_human(s.bacc), fmt_human(s.sen), fmt_human(s.spe), opt_human(s.pre),
                   opt_human(s.f1), s.matrix.tp, s.matrix.fn, s.matrix.fp, s.matrix.tn);
    const auto& b = res.best;
    fmt::format_to(std::back_inserter(params), "{},{},{},{},{},{},{},{},{},{},{},{}\n", r.name, res.best_iteration,
                   b.n_estimators, b.learning_rate, b.gamma, b.max_depth, b.subsample, b.colsample_bylevel,
                   b.colsample_bytree, b.scale_pos_weight, b.min_child_weight, b.seed);
    log(fmt::format("classify [{}]: BACC {} (iteration {})", r.name, fmt_human(s.bacc), res.best_iteration));
  }
  human += fmt::format(
      "\nmetrics averaged over {} repetitions of stratified {}-fold CV; confusion matrix of the median-BACC "
      "repetition; positive class PD; {} search iterations\n",
      cfg.cv.repetitions, cfg.cv.folds, cfg.search_iterations);
  write_file_atomic(cfg.output_dir / "classification.csv", machine);
  write_file_atomic(cfg.output_dir / "classification.txt", human);
  write_file_atomic(cfg.output_dir / "classification_params.csv", params);
  return kExitOk;
}

std::string fd_csv(const std::string& input, double h, double alpha, Approach approach) {
  std::vector<double> values;
  std::size_t line_no = 0;
  std::istringstream in(input);
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    double v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size()) {
      if (values.empty() && line_no == 1) continue;  // header
      throw ConfigError(fmt::format("signal line {}: '{}' is not a number", line_no, t));
    }
    values.push_back(v);
  }
  std::optional<Alpha> a;
  std::optional<SampledSignal> sig;
  try {
    a.emplace(alpha);
    sig.emplace(std::move(values), h);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto out = fd(*sig, *a, approach);
  std::string csv = "t,value\n";
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    fmt::format_to(std::back_inserter(csv), "{},{}\n", fmt_machine(static_cast<double>(k) * h),
                   fmt_machine(out.values[k]));
  }
  return csv;
}

std::string sweep_csv(const PipelineConfig& cfg, const std::string& subject, KinematicBase base, Statistic stat) {
  cfg.validate();
  const auto entries = read_subjects_csv(cfg.input_dir / "subjects.csv");
  const auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.subject_id == subject; });
  if (it == entries.end()) throw ConfigError(fmt::format("subject '{}' not in subjects.csv", subject));
  const auto rec = read_svc(cfg.input_dir / it->path);
  std::string csv = "approach,alpha,value\n";
  for (const auto& p : sweep_alpha(rec, base, stat, cfg.alphas)) {
    fmt::format_to(std::back_inserter(csv), "{},{},{}\n", approach_tag(p.approach), fmt::format("{}", p.alpha),
                   opt_machine(p.value));
  }
  return csv;
}

}  // namespace fdhw
