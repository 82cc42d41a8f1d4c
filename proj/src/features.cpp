#include "fdhw/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <fmt/format.h>

#include "fdhw/io.hpp"

namespace fdhw {

std::string_view base_name(KinematicBase b) noexcept {
  switch (b) {
    case KinematicBase::velocity: return "velocity";
    case KinematicBase::horizontal_velocity: return "horizontal_velocity";
    case KinematicBase::vertical_velocity: return "vertical_velocity";
    case KinematicBase::acceleration: return "acceleration";
    case KinematicBase::horizontal_acceleration: return "horizontal_acceleration";
    case KinematicBase::vertical_acceleration: return "vertical_acceleration";
    case KinematicBase::jerk: return "jerk";
    case KinematicBase::horizontal_jerk: return "horizontal_jerk";
    case KinematicBase::vertical_jerk: return "vertical_jerk";
  }
  return "?";
}

KinematicBase parse_base(std::string_view s) {
  for (auto b : kAllBases) {
    if (base_name(b) == s) return b;
  }
  throw std::invalid_argument(fmt::format("unknown kinematic base '{}'", s));
}

std::string_view stat_name(Statistic s) noexcept { return s == Statistic::mean ? "mean" : "relstd"; }

Statistic parse_stat(std::string_view s) {
  if (s == "mean") return Statistic::mean;
  if (s == "relstd") return Statistic::relstd;
  throw std::invalid_argument(fmt::format("unknown statistic '{}' (mean or relstd)", s));
}

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 10; ++k) g.push_back(k / 10.0);
  return g;
}

namespace {

std::string format_alpha(double a) {
  const double tenths = a * 10.0;
  if (std::abs(tenths - std::round(tenths)) < 1e-12) return fmt::format("{:.1f}", a);
  return fmt::format("{}", a);
}

// Which derivative level (1..3) and which component a base reads.
struct BaseShape {
  int level;
  enum { magnitude, horizontal, vertical } component;
};

BaseShape shape_of(KinematicBase b) {
  const int idx = static_cast<int>(b);
  return BaseShape{idx / 3 + 1, static_cast<decltype(BaseShape::component)>(idx % 3)};
}

// Applies the order-alpha operator once and drops its warmup samples.
std::vector<double> differentiate(std::span<const double> v, double h, Alpha alpha,
                                  Approach approach) {
  // A series no longer than the warmup has nothing left once it is dropped.
  if (v.size() < 2 || v.size() <= warmup_samples(h, std::numeric_limits<std::size_t>::max())) return {};
  FDOutput out = fd(SampledSignal(std::vector<double>(v.begin(), v.end()), h), alpha, approach);
  if (out.warmup >= out.values.size()) return {};
  out.values.erase(out.values.begin(), out.values.begin() + static_cast<std::ptrdiff_t>(out.warmup));
  return std::move(out.values);
}

// Signed derivative chains of x and y up to level 3.
struct DerivativeChain {
  std::array<std::vector<double>, 3> dx;
  std::array<std::vector<double>, 3> dy;
};

DerivativeChain derivative_chain(const Stroke& stroke, Alpha alpha, Approach approach, int levels) {
  DerivativeChain c;
  const double h = stroke.x.h();
  std::span<const double> x = stroke.x.values();
  std::span<const double> y = stroke.y.values();
  for (int l = 0; l < levels; ++l) {
    c.dx[l] = differentiate(x, h, alpha, approach);
    c.dy[l] = differentiate(y, h, alpha, approach);
    if (c.dx[l].empty()) break;
    x = c.dx[l];
    y = c.dy[l];
  }
  return c;
}

std::vector<double> series_from_chain(const DerivativeChain& c, KinematicBase base) {
  const auto shape = shape_of(base);
  const auto& dx = c.dx[shape.level - 1];
  const auto& dy = c.dy[shape.level - 1];
  std::vector<double> out(dx.size());
  for (std::size_t k = 0; k < dx.size(); ++k) {
    switch (shape.component) {
      case BaseShape::magnitude: out[k] = std::sqrt(dx[k] * dx[k] + dy[k] * dy[k]); break;
      case BaseShape::horizontal: out[k] = std::abs(dx[k]); break;
      case BaseShape::vertical: out[k] = std::abs(dy[k]); break;
    }
  }
  return out;
}

// Mean and relstd of a pooled series. Values are sorted first so the result
// does not depend on stroke order.
std::pair<std::optional<double>, std::optional<double>> pooled_stats(std::vector<double> v) {
  if (v.size() < 4) return {std::nullopt, std::nullopt};
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  const double rel = sd / mean;
  std::optional<double> m = std::isfinite(mean) ? std::optional(mean) : std::nullopt;
  std::optional<double> r = (std::isfinite(rel) && mean != 0.0) ? std::optional(rel) : std::nullopt;
  return {m, r};
}

std::vector<Stroke> usable_strokes(const HandwritingRecording& rec) {
  std::vector<Stroke> out;
  for (const auto& s : segment_strokes(rec)) {
    try {
      out.push_back(repair_outliers(s));
    } catch (const UnusableSignal&) {
      // stroke dropped
    }
  }
  if (out.empty()) {
    throw NoEligibleStroke(fmt::format("subject '{}' has no usable on-surface stroke", rec.subject_id));
  }
  return out;
}

}  // namespace

std::string FeatureName::column(Approach approach) const {
  return fmt::format("{} {} a={} [{}]", stat_name(stat), base_name(base), format_alpha(alpha),
                     approach_tag(approach));
}

std::vector<FeatureName> feature_names(std::span<const double> alphas) {
  std::vector<FeatureName> names;
  names.reserve(kAllBases.size() * alphas.size() * 2);
  for (auto b : kAllBases) {
    for (double a : alphas) {
      names.push_back({b, a, Statistic::mean});
      names.push_back({b, a, Statistic::relstd});
    }
  }
  return names;
}

std::vector<double> kinematic_series(const Stroke& stroke, KinematicBase base, Alpha alpha,
                                     Approach approach) {
  const int level = shape_of(base).level;
  return series_from_chain(derivative_chain(stroke, alpha, approach, level), base);
}

FeatureVector extract_features(const HandwritingRecording& rec, Approach approach,
                               std::span<const double> alphas) {
  const auto strokes = usable_strokes(rec);
  FeatureVector fv{rec.subject_id, approach, feature_names(alphas), {}};
  fv.values.reserve(fv.names.size());

  // Chains per alpha, shared by all nine bases.
  std::vector<std::vector<DerivativeChain>> chains(alphas.size());
  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    for (const auto& s : strokes) chains[ai].push_back(derivative_chain(s, Alpha(alphas[ai]), approach, 3));
  }
  for (auto b : kAllBases) {
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      std::vector<double> pooled;
      for (const auto& c : chains[ai]) {
        auto s = series_from_chain(c, b);
        pooled.insert(pooled.end(), s.begin(), s.end());
      }
      auto [mean, rel] = pooled_stats(std::move(pooled));
      fv.values.push_back(mean);
      fv.values.push_back(rel);
    }
  }
  return fv;
}

FeatureVector extract_features(const HandwritingRecording& rec, Approach approach) {
  const auto grid = default_alpha_grid();
  return extract_features(rec, approach, grid);
}

std::vector<SweepPoint> sweep_alpha(const HandwritingRecording& rec, KinematicBase base,
                                    Statistic stat, std::span<const double> alphas) {
  const auto strokes = usable_strokes(rec);
  std::vector<SweepPoint> out;
  for (Approach ap : kAllApproaches) {
    for (double a : alphas) {
      std::vector<double> pooled;
      for (const auto& s : strokes) {
        auto series = kinematic_series(s, base, Alpha(a), ap);
        pooled.insert(pooled.end(), series.begin(), series.end());
      }
      auto [mean, rel] = pooled_stats(std::move(pooled));
      out.push_back({ap, a, stat == Statistic::mean ? mean : rel});
    }
  }
  return out;
}

std::vector<double> FeatureMatrix::column(std::size_t j) const {
  std::vector<double> c(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) c[i] = rows[i][j];
  return c;
}

FeatureMatrix to_matrix(std::span<const FeatureVector> vectors, std::span<const SubjectInfo> info) {
  if (vectors.size() != info.size()) throw std::invalid_argument("vectors/info length mismatch");
  FeatureMatrix m;
  if (vectors.empty()) return m;
  const Approach ap = vectors.front().approach;
  for (const auto& n : vectors.front().names) m.columns.push_back(n.column(ap));
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = vectors[i];
    if (v.approach != ap) throw std::invalid_argument("mixed approaches in one feature matrix");
    if (v.values.size() != m.columns.size()) throw std::invalid_argument("ragged feature vectors");
    if (!seen.insert(v.subject_id).second) {
      throw std::invalid_argument(fmt::format("duplicate subject '{}'", v.subject_id));
    }
    std::vector<double> row(v.values.size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = v.values[j].value_or(kMissing);
    m.rows.push_back(std::move(row));
    m.subjects.push_back(info[i]);
  }
  return m;
}

FeatureMatrix concat_columns(std::span<const FeatureMatrix> parts) {
  FeatureMatrix out;
  if (parts.empty()) return out;
  out.subjects = parts.front().subjects;
  out.rows.resize(out.subjects.size());
  for (const auto& p : parts) {
    if (p.subjects.size() != out.subjects.size()) throw std::invalid_argument("subject count mismatch");
    for (std::size_t i = 0; i < p.subjects.size(); ++i) {
      if (p.subjects[i].subject_id != out.subjects[i].subject_id) {
        throw std::invalid_argument("subject order mismatch between feature matrices");
      }
      out.rows[i].insert(out.rows[i].end(), p.rows[i].begin(), p.rows[i].end());
    }
    out.columns.insert(out.columns.end(), p.columns.begin(), p.columns.end());
  }
  return out;
}

std::string write_feature_csv(const FeatureMatrix& m) {
  std::string out = "subject_id,label,age,gender";
  for (const auto& c : m.columns) {
    out += ',';
    out += c;
  }
  out += '\n';
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& s = m.subjects[i];
    fmt::format_to(std::back_inserter(out), "{},{},{},{}", s.subject_id,
                   s.label ? label_name(*s.label) : "", s.age ? fmt::format("{}", *s.age) : "",
                   s.gender ? gender_name(*s.gender) : "");
    for (double v : m.rows[i]) {
      out += ',';
      if (!is_missing(v)) out += fmt_machine(v);
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_feature_csv(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw std::runtime_error("empty feature CSV");
  const auto header = split(trim(lines[0]), ',');
  if (header.size() < 4 || header[0] != "subject_id" || header[1] != "label" || header[2] != "age" ||
      header[3] != "gender") {
    throw std::runtime_error("feature CSV header must start with subject_id,label,age,gender");
  }
  FeatureMatrix m;
  for (std::size_t j = 4; j < header.size(); ++j) m.columns.emplace_back(header[j]);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(trim(lines[i]), ',');
    if (f.size() != header.size()) {
      throw std::runtime_error(fmt::format("feature CSV line {}: expected {} fields, found {}", i + 1,
                                           header.size(), f.size()));
    }
    SubjectInfo s{std::string(f[0]), std::nullopt, std::nullopt, std::nullopt};
    if (!f[1].empty()) s.label = parse_label(f[1]);
    if (!f[2].empty()) s.age = std::stod(std::string(f[2]));
    if (!f[3].empty()) s.gender = parse_gender(f[3]);
    std::vector<double> row;
    row.reserve(m.columns.size());
    for (std::size_t j = 4; j < f.size(); ++j) {
      row.push_back(f[j].empty() ? kMissing : std::stod(std::string(f[j])));
    }
    m.subjects.push_back(std::move(s));
    m.rows.push_back(std::move(row));
  }
  return m;
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  return parse_feature_csv(read_file(path));
}

}  // namespace fdhw
