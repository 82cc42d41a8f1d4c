#pragma once

// Tablet recordings: SVC parsing/writing, on-surface stroke segmentation,
// MAD-based outlier repair and a deterministic synthetic cohort generator.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fdhw/fracdiff.hpp"

namespace fdhw {

enum class Label { PD, HC };
enum class Gender { F, M };

std::string_view label_name(Label l) noexcept;
std::string_view gender_name(Gender g) noexcept;
Label parse_label(std::string_view s);
Gender parse_gender(std::string_view s);

struct PenSample {
  double x = 0;  // tablet units
  double y = 0;
  double t = 0;  // seconds since the first sample
  int button = 0;  // 1 = on surface
  int pressure = 0;
  int azimuth = 0;
  int tilt = 0;
  friend bool operator==(const PenSample&, const PenSample&) = default;
};

// Raw timestamp unit of an SVC file; detected from the median gap.
enum class TimeUnit { HundredNanoseconds, Milliseconds };

struct HandwritingRecording {
  std::vector<PenSample> samples;
  double fs = 150.0;
  std::string subject_id;
  std::optional<Label> label;
  std::optional<double> age;
  std::optional<Gender> gender;
  TimeUnit time_unit = TimeUnit::HundredNanoseconds;
  std::int64_t t0_raw = 0;  // raw timestamp of the first sample
};

struct Stroke {
  SampledSignal x;
  SampledSignal y;
  std::size_t start_index;
};

class SvcError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Errors carry the 1-based line number (malformed lines), the sample index
// (non-monotone timestamps) or both counts (header mismatch).
HandwritingRecording parse_svc(std::string_view text);
HandwritingRecording read_svc(const std::filesystem::path& path);
std::string write_svc(const HandwritingRecording& rec);

// Maximal button = 1 runs of length >= 2.
std::vector<Stroke> segment_strokes(const HandwritingRecording& rec);

class UnusableSignal : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hampel-style repair: samples further than 3 scaled MADs (1.4826 * MAD) from
// the median are replaced by linear interpolation of unflagged neighbours.
// Passes repeat until nothing is flagged, which makes the repair idempotent.
// Throws UnusableSignal when more than half of a channel gets flagged.
std::vector<double> repair_channel(std::span<const double> v);
Stroke repair_outliers(const Stroke& stroke);

struct SynthConfig {
  std::size_t n_per_group = 30;
  std::uint64_t seed = 42;
  double duration_s = 4.0;
  double loop_freq_hz = 1.5;
  double loop_radius_mm = 5.0;
  double drift_mm_s = 1.0;
  double noise_mm = 0.01;
  double pd_tremor_hz = 5.0;
  double pd_tremor_amp = 0.3;  // mm
  double pd_vel_jitter = 0.5;
  double pd_size_decay = 0.1;  // 1/s

  void validate() const;  // throws std::invalid_argument
};

inline constexpr double kSynthFs = 150.0;
inline constexpr double kUnitsPerMm = 200.0;

// Subjects 0..n-1 are HC, n..2n-1 are PD. Subject k draws from the stream
// seeded with seed ^ k; loop geometry is shared by HC i and PD i (matched pairs).
std::vector<HandwritingRecording> synth_cohort(const SynthConfig& cfg);

// Cohort sidecar `subjects.csv`: subject_id,label,age,gender,path
struct SubjectEntry {
  std::string subject_id;
  std::optional<Label> label;
  std::optional<double> age;
  std::optional<Gender> gender;
  std::string path;  // relative to the cohort directory
};

std::vector<SubjectEntry> read_subjects_csv(const std::filesystem::path& path);
std::string write_subjects_csv(const std::vector<SubjectEntry>& entries);

}  // namespace fdhw
