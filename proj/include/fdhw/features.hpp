#pragma once

// FD-kinematic feature vectors: 9 kinematic bases x alpha grid x {mean, relstd}.

#include <array>
#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdhw/fracdiff.hpp"
#include "fdhw/signal.hpp"

namespace fdhw {

enum class KinematicBase {
  velocity,
  horizontal_velocity,
  vertical_velocity,
  acceleration,
  horizontal_acceleration,
  vertical_acceleration,
  jerk,
  horizontal_jerk,
  vertical_jerk,
};

inline constexpr std::array<KinematicBase, 9> kAllBases = {
    KinematicBase::velocity,         KinematicBase::horizontal_velocity,
    KinematicBase::vertical_velocity, KinematicBase::acceleration,
    KinematicBase::horizontal_acceleration, KinematicBase::vertical_acceleration,
    KinematicBase::jerk,             KinematicBase::horizontal_jerk,
    KinematicBase::vertical_jerk};

enum class Statistic { mean, relstd };

std::string_view base_name(KinematicBase b) noexcept;
KinematicBase parse_base(std::string_view s);
std::string_view stat_name(Statistic s) noexcept;
Statistic parse_stat(std::string_view s);

// 0.1, 0.2, ..., 1.0
std::vector<double> default_alpha_grid();

struct FeatureName {
  KinematicBase base;
  double alpha;
  Statistic stat;

  // "<stat> <base> a=<alpha> [<approach>]", e.g. "relstd horizontal_velocity a=0.6 [C]"
  std::string column(Approach approach) const;
};

// Cartesian product in column order: base, then alpha, then stat.
std::vector<FeatureName> feature_names(std::span<const double> alphas);

// One kinematic series of a (repaired) stroke. Each order-alpha application
// drops its warmup samples; an empty result means the stroke is too short.
std::vector<double> kinematic_series(const Stroke& stroke, KinematicBase base, Alpha alpha,
                                     Approach approach);

struct FeatureVector {
  std::string subject_id;
  Approach approach;
  std::vector<FeatureName> names;
  std::vector<std::optional<double>> values;  // nullopt = missing
};

class NoEligibleStroke : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Segments, repairs and pools strokes; never differentiates across pen lifts.
// Strokes whose repair fails are skipped.
FeatureVector extract_features(const HandwritingRecording& rec, Approach approach,
                               std::span<const double> alphas);
FeatureVector extract_features(const HandwritingRecording& rec, Approach approach);

struct SweepPoint {
  Approach approach;
  double alpha;
  std::optional<double> value;
};

std::vector<SweepPoint> sweep_alpha(const HandwritingRecording& rec, KinematicBase base,
                                    Statistic stat, std::span<const double> alphas);

// Subject metadata carried alongside feature rows.
struct SubjectInfo {
  std::string subject_id;
  std::optional<Label> label;
  std::optional<double> age;
  std::optional<Gender> gender;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Rows are subjects, columns features; missing entries hold kMissing.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<SubjectInfo> subjects;
  std::vector<std::vector<double>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return columns.size(); }
  std::vector<double> column(std::size_t j) const;
};

FeatureMatrix to_matrix(std::span<const FeatureVector> vectors, std::span<const SubjectInfo> info);

// Column-wise concatenation; subject lists must match.
FeatureMatrix concat_columns(std::span<const FeatureMatrix> parts);

// Header subject_id,label,age,gender,<features...>; missing = empty field.
std::string write_feature_csv(const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);
FeatureMatrix parse_feature_csv(std::string_view text);

}  // namespace fdhw
