#include "fdhw/signal.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

using namespace fdhw;

namespace {

std::string svc_with_buttons(const std::vector<int>& buttons, std::int64_t gap = 66667) {
  std::string s = fmt::format("{}\n", buttons.size());
  for (std::size_t i = 0; i < buttons.size(); ++i) {
    s += fmt::format("{} {} {} {} 1800 550 {}\n", 100 + 3 * i, 200 - 2 * i, 1000 + gap * i, buttons[i],
                     buttons[i] ? 512 : 0);
  }
  return s;
}

HandwritingRecording recording_with_buttons(const std::vector<int>& buttons) {
  return parse_svc(svc_with_buttons(buttons));
}

}  // namespace

TEST(ParseSvc, EstimatesSamplingRateFromGaps) {
  const auto rec = parse_svc("3\n10 20 0 1 0 0 100\n11 21 66667 1 0 0 100\n12 22 133333 1 0 0 100\n");
  EXPECT_EQ(rec.fs, 150.0);
  EXPECT_EQ(rec.time_unit, TimeUnit::HundredNanoseconds);
  ASSERT_EQ(rec.samples.size(), 3u);
  EXPECT_DOUBLE_EQ(rec.samples[1].t, 0.0066667);
  EXPECT_EQ(rec.samples[2].x, 12.0);
  EXPECT_EQ(rec.samples[2].pressure, 100);
}

TEST(ParseSvc, MillisecondTimestamps) {
  const auto rec = parse_svc("4\n1 1 1000 1 0 0 0\n1 1 1010 1 0 0 0\n1 1 1020 1 0 0 0\n1 1 1030 1 0 0 0\n");
  EXPECT_EQ(rec.time_unit, TimeUnit::Milliseconds);
  EXPECT_EQ(rec.fs, 100.0);
  EXPECT_DOUBLE_EQ(rec.samples[3].t, 0.03);
}

TEST(ParseSvc, CountMismatch) {
  try {
    parse_svc("5\n1 1 0 1 0 0 0\n1 1 1 1 0 0 0\n1 1 2 1 0 0 0\n1 1 3 1 0 0 0\n");
    FAIL() << "expected SvcError";
  } catch (const SvcError& e) {
    EXPECT_NE(std::string(e.what()).find("declares 5"), std::string::npos) << e.what();
  }
}

TEST(ParseSvc, MalformedLineReportsLineNumber) {
  try {
    parse_svc("3\n1 1 0 1 0 0 0\n1 1 x 1 0 0 0\n1 1 3 1 0 0 0\n");
    FAIL();
  } catch (const SvcError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_svc("2\n1 1 0 1 0 0\n1 1 1 1 0 0 0\n"), SvcError);
  EXPECT_THROW(parse_svc("2\n1 1 0 2 0 0 0\n1 1 1 1 0 0 0\n"), SvcError);
  EXPECT_THROW(parse_svc("abc\n"), SvcError);
  EXPECT_THROW(parse_svc(""), SvcError);
}

TEST(ParseSvc, NonMonotoneTimestampsNameIndex) {
  try {
    parse_svc("4\n1 1 0 1 0 0 0\n1 1 10 1 0 0 0\n1 1 10 1 0 0 0\n1 1 30 1 0 0 0\n");
    FAIL();
  } catch (const SvcError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
  }
}

TEST(ParseSvc, ButtonPatternYieldsOneStroke) {
  const auto strokes = segment_strokes(recording_with_buttons({0, 1, 1, 0}));
  ASSERT_EQ(strokes.size(), 1u);
  EXPECT_EQ(strokes[0].x.size(), 2u);
  EXPECT_EQ(strokes[0].start_index, 1u);
}

TEST(ParseSvc, WriteParseRoundTripIsBitExact) {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> coord(-5000, 30000), step(60000, 70000), b(0, 1), misc(0, 3600);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + trial * 7;
    std::string text = fmt::format("{}\n", n);
    std::int64_t t = 1'234'567'890 + trial;
    for (int i = 0; i < n; ++i) {
      t += step(gen);
      text += fmt::format("{} {} {} {} {} {} {}\n", coord(gen), coord(gen), t, b(gen), misc(gen), misc(gen) / 40,
                          misc(gen) / 3);
    }
    const auto rec = parse_svc(text);
    EXPECT_EQ(write_svc(rec), text);
    EXPECT_EQ(parse_svc(write_svc(rec)).samples, rec.samples);
  }
}

TEST(SegmentStrokes, RunLengths) {
  const auto strokes = segment_strokes(recording_with_buttons({1, 1, 1, 0, 1, 1}));
  ASSERT_EQ(strokes.size(), 2u);
  EXPECT_EQ(strokes[0].x.size(), 3u);
  EXPECT_EQ(strokes[1].x.size(), 2u);
  EXPECT_EQ(strokes[1].start_index, 4u);
  EXPECT_DOUBLE_EQ(strokes[0].x.h(), 1.0 / 150.0);
}

TEST(SegmentStrokes, AllInAirIsEmpty) {
  EXPECT_TRUE(segment_strokes(recording_with_buttons({0, 0, 0, 0})).empty());
}

TEST(SegmentStrokes, SingleSampleRunDropped) {
  const auto strokes = segment_strokes(recording_with_buttons({0, 1, 0, 1, 1, 0}));
  ASSERT_EQ(strokes.size(), 1u);
  EXPECT_EQ(strokes[0].start_index, 3u);
}

TEST(SegmentStrokes, PartitionsLongOnSurfaceRuns) {
  std::mt19937_64 gen(4);
  std::bernoulli_distribution coin(0.6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> buttons(40);
    for (auto& b : buttons) b = coin(gen) ? 1 : 0;
    const auto rec = recording_with_buttons(buttons);
    std::vector<int> covered(buttons.size(), 0);
    for (const auto& s : segment_strokes(rec)) {
      for (std::size_t k = 0; k < s.x.size(); ++k) covered[s.start_index + k]++;
    }
    for (std::size_t i = 0; i < buttons.size(); ++i) {
      const bool left = i > 0 && buttons[i - 1] == 1;
      const bool right = i + 1 < buttons.size() && buttons[i + 1] == 1;
      const int want = (buttons[i] == 1 && (left || right)) ? 1 : 0;
      ASSERT_EQ(covered[i], want) << "trial " << trial << " i " << i;
    }
  }
}

TEST(RepairOutliers, SpikeReplacedByInterpolation) {
  std::vector<double> x(21);
  for (int i = 0; i < 21; ++i) x[i] = i;
  x[4] = 1000.0;
  const auto r = repair_channel(x);
  EXPECT_DOUBLE_EQ(r[4], 4.0);
  for (int i = 0; i < 21; ++i) {
    if (i != 4) EXPECT_EQ(r[i], x[i]);
  }
}

TEST(RepairOutliers, ConstantAndRampUnchanged) {
  const std::vector<double> c(30, 7.0);
  EXPECT_EQ(repair_channel(c), c);
  std::vector<double> ramp(50);
  for (int i = 0; i < 50; ++i) ramp[i] = 0.5 * i - 3.0;
  EXPECT_EQ(repair_channel(ramp), ramp);
}

TEST(RepairOutliers, BoundaryUsesNearestValue) {
  std::vector<double> x = {-900.0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 500.0};
  const auto r = repair_channel(x);
  EXPECT_EQ(r.front(), 1.0);
  EXPECT_EQ(r.back(), 10.0);
}

TEST(RepairOutliers, MostlyOutliersIsUnusable) {
  // Each pass shifts the median enough to flag the next layer; over half ends up flagged.
  const std::vector<double> bad = {243, 6561, 8, 27, 8, 3, 81, 59049, 7, 0};
  EXPECT_THROW(repair_channel(bad), UnusableSignal);
}

TEST(RepairOutliers, Idempotent) {
  std::mt19937_64 gen(123);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 199);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> v(200);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 20.0 * std::sin(0.05 * i) + noise(gen);
    for (int k = 0; k < 6; ++k) v[pick(gen)] += (noise(gen) > 0 ? 1 : -1) * 400.0;
    const auto once = repair_channel(v);
    EXPECT_EQ(repair_channel(once), once);
  }
}

TEST(SynthCohort, DeterministicSvcBytes) {
  SynthConfig cfg;
  cfg.n_per_group = 2;
  cfg.seed = 7;
  const auto a = synth_cohort(cfg);
  const auto b = synth_cohort(cfg);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(write_svc(a[i]), write_svc(b[i]));
  cfg.seed = 8;
  EXPECT_NE(write_svc(synth_cohort(cfg)[0]), write_svc(a[0]));
}

TEST(SynthCohort, OutputParsesWithAtLeastOneStroke) {
  SynthConfig cfg;
  cfg.n_per_group = 3;
  for (const auto& rec : synth_cohort(cfg)) {
    const auto parsed = parse_svc(write_svc(rec));
    EXPECT_EQ(parsed.fs, 150.0);
    EXPECT_GE(segment_strokes(parsed).size(), 1u);
  }
}

TEST(SynthCohort, LabelsAndMetadata) {
  SynthConfig cfg;
  cfg.n_per_group = 4;
  const auto c = synth_cohort(cfg);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(*c[i].label, i < 4 ? Label::HC : Label::PD);
    ASSERT_TRUE(c[i].age && c[i].gender);
    EXPECT_GE(*c[i].age, 50.0);
    EXPECT_LE(*c[i].age, 80.0);
    EXPECT_EQ(c[i].subject_id.rfind("SYN-", 0), 0u);
  }
}

TEST(SynthCohort, InvalidConfigRejected) {
  SynthConfig cfg;
  cfg.n_per_group = 0;
  EXPECT_THROW(synth_cohort(cfg), std::invalid_argument);
  cfg = {};
  cfg.pd_vel_jitter = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.loop_freq_hz = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SubjectsCsv, RoundTrip) {
  std::vector<SubjectEntry> e = {{"A", Label::PD, 61.5, Gender::M, "A.svc"},
                                 {"B", std::nullopt, std::nullopt, std::nullopt, "sub/B.svc"}};
  const auto text = write_subjects_csv(e);
  EXPECT_EQ(text, "subject_id,label,age,gender,path\nA,PD,61.5,M,A.svc\nB,,,,sub/B.svc\n");
}
