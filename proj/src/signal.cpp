#include "fdhw/signal.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "fdhw/io.hpp"
#include "fdhw/rng.hpp"

namespace fdhw {

std::string_view label_name(Label l) noexcept { return l == Label::PD ? "PD" : "HC"; }
std::string_view gender_name(Gender g) noexcept { return g == Gender::F ? "F" : "M"; }

Label parse_label(std::string_view s) {
  if (s == "PD") return Label::PD;
  if (s == "HC") return Label::HC;
  throw std::invalid_argument(fmt::format("unknown label '{}'", s));
}

Gender parse_gender(std::string_view s) {
  if (s == "F") return Gender::F;
  if (s == "M") return Gender::M;
  throw std::invalid_argument(fmt::format("unknown gender '{}'", s));
}

namespace {

constexpr double unit_seconds(TimeUnit u) {
  return u == TimeUnit::HundredNanoseconds ? 1e-7 : 1e-3;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

HandwritingRecording parse_svc(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw SvcError("line 1: missing sample count");

  std::int64_t declared = 0;
  if (!parse_int(trim(lines[0]), declared) || declared < 0) {
    throw SvcError(fmt::format("line 1: malformed sample count '{}'", trim(lines[0])));
  }
  const std::size_t body = lines.size() - 1;
  if (static_cast<std::size_t>(declared) != body) {
    throw SvcError(fmt::format("header declares {} samples but the body has {}", declared, body));
  }
  if (body < 2) throw SvcError("need at least 2 samples to estimate the sampling rate");

  struct Raw {
    std::int64_t v[7];
  };
  std::vector<Raw> raw(body);
  for (std::size_t i = 0; i < body; ++i) {
    const auto tok = tokens(trim(lines[i + 1]));
    const std::size_t line_no = i + 2;
    if (tok.size() != 7) {
      throw SvcError(fmt::format("line {}: expected 7 fields, found {}", line_no, tok.size()));
    }
    for (std::size_t f = 0; f < 7; ++f) {
      if (!parse_int(tok[f], raw[i].v[f])) {
        throw SvcError(fmt::format("line {}: field {} is not an integer: '{}'", line_no, f + 1,
                                   tok[f]));
      }
    }
    if (raw[i].v[3] != 0 && raw[i].v[3] != 1) {
      throw SvcError(fmt::format("line {}: button must be 0 or 1", line_no));
    }
  }

  std::vector<double> gaps;
  gaps.reserve(body - 1);
  for (std::size_t i = 1; i < body; ++i) {
    if (raw[i].v[2] <= raw[i - 1].v[2]) {
      throw SvcError(fmt::format("timestamps not strictly increasing at sample index {}", i));
    }
    gaps.push_back(static_cast<double>(raw[i].v[2] - raw[i - 1].v[2]));
  }

  HandwritingRecording rec;
  const double median_gap = median_of(gaps);
  // Millisecond stamps below 1 Hz or 1e-7 s stamps above 10 kHz are not tablet data.
  rec.time_unit = median_gap >= 1000.0 ? TimeUnit::HundredNanoseconds : TimeUnit::Milliseconds;
  const double unit = unit_seconds(rec.time_unit);
  rec.fs = std::round(1.0 / (median_gap * unit));
  if (!(rec.fs > 0.0)) throw SvcError("estimated sampling rate rounds to 0 Hz");
  rec.t0_raw = raw[0].v[2];

  rec.samples.reserve(body);
  for (const auto& r : raw) {
    PenSample s;
    s.x = static_cast<double>(r.v[0]);
    s.y = static_cast<double>(r.v[1]);
    s.t = static_cast<double>(r.v[2] - rec.t0_raw) * unit;
    s.button = static_cast<int>(r.v[3]);
    s.azimuth = static_cast<int>(r.v[4]);
    s.tilt = static_cast<int>(r.v[5]);
    s.pressure = static_cast<int>(r.v[6]);
    rec.samples.push_back(s);
  }
  return rec;
}

HandwritingRecording read_svc(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_svc(text);
  } catch (const SvcError& e) {
    throw SvcError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string write_svc(const HandwritingRecording& rec) {
  const double unit = unit_seconds(rec.time_unit);
  std::string out = fmt::format("{}\n", rec.samples.size());
  for (const auto& s : rec.samples) {
    const auto t_raw = rec.t0_raw + std::llround(s.t / unit);
    fmt::format_to(std::back_inserter(out), "{} {} {} {} {} {} {}\n", std::llround(s.x),
                   std::llround(s.y), t_raw, s.button, s.azimuth, s.tilt, s.pressure);
  }
  return out;
}

std::vector<Stroke> segment_strokes(const HandwritingRecording& rec) {
  std::vector<Stroke> strokes;
  const double h = 1.0 / rec.fs;
  const auto& s = rec.samples;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i].button != 1) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && s[j].button == 1) ++j;
    if (j - i >= 2) {
      std::vector<double> xs, ys;
      xs.reserve(j - i);
      ys.reserve(j - i);
      for (std::size_t k = i; k < j; ++k) {
        xs.push_back(s[k].x);
        ys.push_back(s[k].y);
      }
      strokes.push_back(Stroke{SampledSignal(std::move(xs), h), SampledSignal(std::move(ys), h), i});
    }
    i = j;
  }
  return strokes;
}

std::vector<double> repair_channel(std::span<const double> v) {
  constexpr double kMadScale = 1.4826;
  constexpr double kThreshold = 3.0;
  constexpr int kMaxPasses = 64;

  std::vector<double> out(v.begin(), v.end());
  const std::size_t n = out.size();
  std::vector<bool> ever_flagged(n, false);

  for (int pass = 0; pass < kMaxPasses; ++pass) {
    const double med = median_of(out);
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(out[i] - med);
    const double mad = median_of(dev);
    if (mad == 0.0) break;

    const double limit = kThreshold * kMadScale * mad;
    std::vector<bool> flag(n, false);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dev[i] > limit) {
        flag[i] = true;
        ++flagged;
        ever_flagged[i] = true;
      }
    }
    if (flagged == 0) break;
    const auto total = static_cast<std::size_t>(std::count(ever_flagged.begin(), ever_flagged.end(), true));
    if (2 * total > n) {
      throw UnusableSignal(
          fmt::format("{} of {} samples are outliers; channel unusable", total, n));
    }

    std::vector<double> next = out;
    std::size_t i = 0;
    while (i < n) {
      if (!flag[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && flag[j]) ++j;
      // [i, j) is a flagged run; neighbours i-1 and j are clean when present.
      const bool has_left = i > 0;
      const bool has_right = j < n;
      for (std::size_t k = i; k < j; ++k) {
        if (has_left && has_right) {
          const double frac = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
          next[k] = out[i - 1] + frac * (out[j] - out[i - 1]);
        } else if (has_left) {
          next[k] = out[i - 1];
        } else {
          next[k] = out[j];
        }
      }
      i = j;
    }
    out = std::move(next);
  }
  return out;
}

Stroke repair_outliers(const Stroke& stroke) {
  auto xs = repair_channel(stroke.x.values());
  auto ys = repair_channel(stroke.y.values());
  return Stroke{SampledSignal(std::move(xs), stroke.x.h()), SampledSignal(std::move(ys), stroke.y.h()),
                stroke.start_index};
}

void SynthConfig::validate() const {
  auto require = [](bool ok, std::string_view what) {
    if (!ok) throw std::invalid_argument(std::string(what));
  };
  require(n_per_group >= 1, "n_per_group must be >= 1");
  require(duration_s > 0.0, "duration_s must be > 0");
  require(loop_freq_hz > 0.0, "loop_freq_hz must be > 0");
  require(pd_tremor_hz > 0.0, "pd_tremor_hz must be > 0");
  require(loop_radius_mm >= 0.0, "loop_radius_mm must be >= 0");
  require(drift_mm_s >= 0.0, "drift_mm_s must be >= 0");
  require(noise_mm >= 0.0, "noise_mm must be >= 0");
  require(pd_tremor_amp >= 0.0, "pd_tremor_amp must be >= 0");
  require(pd_vel_jitter >= 0.0 && pd_vel_jitter < 1.0, "pd_vel_jitter must lie in [0, 1)");
  require(pd_size_decay >= 0.0, "pd_size_decay must be >= 0");
  require(std::round(duration_s * kSynthFs) >= 2.0, "duration_s too short for 2 samples");
}

namespace {

constexpr double kJitterSegmentS = 0.2;

HandwritingRecording synth_subject(const SynthConfig& cfg, std::size_t index) {
  const std::size_t pair = index % cfg.n_per_group;
  const bool pd = index >= cfg.n_per_group;

  Rng shape(Rng::key(cfg.seed, {0x5a4e5, pair}));
  const double radius = cfg.loop_radius_mm * kUnitsPerMm * shape.uniform(0.8, 1.2);
  const double freq = cfg.loop_freq_hz * shape.uniform(0.85, 1.15);
  const double drift = cfg.drift_mm_s * kUnitsPerMm * shape.uniform(0.8, 1.2);

  Rng rng(cfg.seed ^ static_cast<std::uint64_t>(index));
  HandwritingRecording rec;
  rec.fs = kSynthFs;
  rec.subject_id = fmt::format("SYN-{}-{:03d}", pd ? "PD" : "HC", pair + 1);
  rec.label = pd ? Label::PD : Label::HC;
  rec.age = std::round(rng.uniform(50.0, 80.0) * 10.0) / 10.0;
  rec.gender = rng.bernoulli(0.5) ? Gender::M : Gender::F;
  rec.time_unit = TimeUnit::HundredNanoseconds;
  rec.t0_raw = 0;

  const auto n = static_cast<std::size_t>(std::round(cfg.duration_s * kSynthFs));
  const double h = 1.0 / kSynthFs;
  const double two_pi = 2.0 * std::numbers::pi;
  const double noise = cfg.noise_mm * kUnitsPerMm;

  const double tremor = pd ? cfg.pd_tremor_amp * kUnitsPerMm : 0.0;
  const double tremor_phase_x = rng.uniform(0.0, two_pi);
  const double tremor_phase_y = rng.uniform(0.0, two_pi);
  const double decay = pd ? cfg.pd_size_decay : 0.0;
  const double jitter = pd ? cfg.pd_vel_jitter : 0.0;

  const auto seg_len = static_cast<std::size_t>(std::round(kJitterSegmentS * kSynthFs));
  double rate = 1.0;
  double phase = 0.0;
  rec.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSynthFs;
    if (i > 0) phase += two_pi * freq * rate * h;
    if (i % seg_len == 0) rate = 1.0 + (jitter > 0.0 ? rng.uniform(-jitter, jitter) : 0.0);

    const double amp = radius * std::exp(-decay * t);
    PenSample s;
    s.t = t;
    s.x = drift * t + amp * std::sin(phase);
    s.y = amp * std::sin(phase + std::numbers::pi / 2.0);
    if (tremor > 0.0) {
      s.x += tremor * std::sin(two_pi * cfg.pd_tremor_hz * t + tremor_phase_x);
      s.y += tremor * std::sin(two_pi * cfg.pd_tremor_hz * t + tremor_phase_y);
    }
    if (noise > 0.0) {
      s.x += noise * rng.normal();
      s.y += noise * rng.normal();
    }
    s.button = 1;
    s.pressure = 600 + static_cast<int>(std::lround(40.0 * std::sin(two_pi * freq * t)));
    s.azimuth = 180;
    s.tilt = 55;
    rec.samples.push_back(s);
  }
  return rec;
}

}  // namespace

std::vector<HandwritingRecording> synth_cohort(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<HandwritingRecording> out;
  out.reserve(2 * cfg.n_per_group);
  for (std::size_t k = 0; k < 2 * cfg.n_per_group; ++k) out.push_back(synth_subject(cfg, k));
  return out;
}

std::vector<SubjectEntry> read_subjects_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "subject_id,label,age,gender,path") {
    throw std::runtime_error(
        fmt::format("{}: expected header 'subject_id,label,age,gender,path'", path.string()));
  }
  std::vector<SubjectEntry> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5) {
      throw std::runtime_error(fmt::format("{}:{}: expected 5 fields", path.string(), i + 1));
    }
    SubjectEntry e;
    e.subject_id = std::string(f[0]);
    if (!f[1].empty()) e.label = parse_label(f[1]);
    if (!f[2].empty()) e.age = std::stod(std::string(f[2]));
    if (!f[3].empty()) e.gender = parse_gender(f[3]);
    e.path = std::string(f[4]);
    out.push_back(std::move(e));
  }
  return out;
}

std::string write_subjects_csv(const std::vector<SubjectEntry>& entries) {
  std::string out = "subject_id,label,age,gender,path\n";
  for (const auto& e : entries) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{},{}\n", e.subject_id,
                   e.label ? label_name(*e.label) : "", e.age ? fmt::format("{}", *e.age) : "",
                   e.gender ? gender_name(*e.gender) : "", e.path);
  }
  return out;
}

}  // namespace fdhw
