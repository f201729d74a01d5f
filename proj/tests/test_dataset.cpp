#include "fixtures.hpp"

#include "pmmtalk/dataset.hpp"
#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"
#include "pmmtalk/wav.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

using namespace pmmtalk;
using fixtures::fake_manifest;

namespace {

std::string header() {
  std::string h = "Timecode,BlendShapeCount";
  for (const auto& c : livelink_channels()) h += "," + c;
  return h + "\n";
}

std::string row(const std::string& timecode, double fill, int jaw_index = -1, double jaw = 0.0) {
  std::string r = timecode + ",61";
  for (int i = 0; i < kLivelinkChannelCount; ++i) r += "," + std::to_string(i == jaw_index ? jaw : fill);
  return r + "\n";
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::PreconditionFailed;
}

}  // namespace

TEST(Channels, CountsAndLookup) {
  EXPECT_EQ(livelink_channels().size(), 61u);
  EXPECT_EQ(default_articulation_channels().size(), 32u);
  for (const auto& c : default_articulation_channels()) EXPECT_GE(livelink_channel_index(c), 0) << c;
  EXPECT_EQ(livelink_channel_index("jawopen"), livelink_channel_index("JawOpen"));
  EXPECT_EQ(livelink_channel_index("NotAChannel"), -1);
  const std::set<std::string> unique(livelink_channels().begin(), livelink_channels().end());
  EXPECT_EQ(unique.size(), 61u);
}

TEST(Timecode, ParseAndFormat) {
  EXPECT_DOUBLE_EQ(parse_timecode("00:00:01:30.000"), 1.5);
  EXPECT_DOUBLE_EQ(parse_timecode("01:02:03:00"), 3723.0);
  EXPECT_DOUBLE_EQ(parse_timecode("2.25"), 2.25);
  EXPECT_EQ(format_timecode(1.5), "00:00:01:30.000");
  for (double s : {0.0, 0.1, 1.0 / 60, 59.99, 3600.5}) EXPECT_NEAR(parse_timecode(format_timecode(s)), s, 1e-6);
  EXPECT_THROW(parse_timecode("00:01:02"), Error);
}

TEST(LivelinkCsv, ParsesValuesInOrder) {
  const int jaw = livelink_channel_index("JawOpen");
  const auto track =
      parse_livelink_csv(header() + row("00:00:00:00.000", 0.25, jaw, 0.8) + row("00:00:00:01.000", 0.5));
  ASSERT_EQ(track.frames(), 2);
  EXPECT_EQ(track.values.cols(), 61);
  EXPECT_DOUBLE_EQ(track.values(0, jaw), 0.8);
  EXPECT_DOUBLE_EQ(track.values(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(track.values(1, jaw), 0.5);
  EXPECT_NEAR(track.timecodes[1], 1.0 / 60, 1e-12);
}

TEST(LivelinkCsv, ToleratesCrlfAndReorderedColumns) {
  std::vector<std::string> cols = livelink_channels();
  std::reverse(cols.begin(), cols.end());
  std::string text = "BlendShapeCount,Timecode";
  for (const auto& c : cols) text += "," + c;
  text += "\r\n61,0.0";
  for (std::size_t i = 0; i < cols.size(); ++i) text += i == 0 ? ",0.9" : ",0";
  text += "\r\n";
  const auto t = parse_livelink_csv(text);
  EXPECT_DOUBLE_EQ(t.values(0, 60), 0.9);
}

TEST(LivelinkCsv, Errors) {
  EXPECT_EQ(kind_of([] { parse_livelink_csv(""); }), ErrorKind::MissingColumn);
  EXPECT_EQ(kind_of([] { parse_livelink_csv("Timecode,BlendShapeCount,JawOpen\n0,1,0.5\n"); }),
            ErrorKind::MissingColumn);
  EXPECT_EQ(kind_of([] { parse_livelink_csv(header() + row("0.1", 0.2) + row("0.1", 0.2)); }),
            ErrorKind::NonMonotonicTimecode);
  EXPECT_EQ(kind_of([] { parse_livelink_csv(header() + row("0.1", 1.5)); }), ErrorKind::ValueOutOfRange);
  EXPECT_EQ(kind_of([] { parse_livelink_csv(header() + row("0.1", -0.2)); }), ErrorKind::ValueOutOfRange);
  EXPECT_EQ(kind_of([] { parse_livelink_csv(header() + "0.1,61,0.2\n"); }), ErrorKind::MissingColumn);
}

TEST(Resample, LinearRampStaysLinear) {
  RawCoefficientTrack t;
  t.values.resize(61, 61);
  for (int k = 0; k <= 60; ++k) {
    t.timecodes.push_back(k / 60.0);
    t.values.row(k).setConstant(k / 60.0);
  }
  const auto r = resample_coefficients(t, 30.0);
  ASSERT_EQ(r.frames(), 31);
  for (Eigen::Index k = 0; k < r.frames(); ++k) EXPECT_NEAR(r.values(k, 7), k / 30.0, 1e-12) << k;
  EXPECT_EQ(r.source_rate, 30.0);
}

TEST(Resample, IrregularTimestampsInterpolateByTime) {
  RawCoefficientTrack t;
  t.timecodes = {0.0, 0.1, 0.4};
  t.values = Eigen::MatrixXd::Zero(3, 61);
  t.values(1, 0) = 1.0;
  t.values(2, 0) = 0.4;
  const auto r = resample_coefficients(t, 10.0);
  ASSERT_EQ(r.frames(), 5);
  EXPECT_NEAR(r.values(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(r.values(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.values(2, 0), 0.8, 1e-12);
  EXPECT_NEAR(r.values(4, 0), 0.4, 1e-12);
  RawCoefficientTrack one;
  one.timecodes = {0.0};
  one.values = Eigen::MatrixXd::Zero(1, 61);
  EXPECT_EQ(kind_of([&] { resample_coefficients(one, 30.0); }), ErrorKind::TooShort);
}

TEST(SelectChannels, PicksColumnsAndRejectsUnknowns) {
  RawCoefficientTrack t;
  t.timecodes = {0.0, 1.0};
  t.values = Eigen::MatrixXd::Zero(2, 61);
  const int jaw = livelink_channel_index("JawOpen");
  t.values(1, jaw) = 0.7;
  const auto s = select_channels(t, {"JawOpen", "MouthClose"}, 30.0);
  EXPECT_EQ(s.values.cols(), 2);
  EXPECT_DOUBLE_EQ(s.values(1, 0), 0.7);
  EXPECT_EQ(kind_of([&] { select_channels(t, {"Nope"}, 30.0); }), ErrorKind::UnknownChannel);
  EXPECT_EQ(kind_of([&] { select_channels(t, {"JawOpen", "jawopen"}, 30.0); }), ErrorKind::UnknownChannel);
}

TEST(ExportCsv, RoundTripsThroughTheParser) {
  Rng rng(1);
  BlendshapeSequence seq;
  seq.channel_names = default_articulation_channels();
  seq.values = fixtures::random_matrix(rng, 12, 32, -0.2, 1.2);
  seq.fps = 30.0;
  const auto track = parse_livelink_csv(format_blendshape_csv(seq));
  ASSERT_EQ(track.frames(), 12);
  const auto back = select_channels(track, seq.channel_names, 30.0);
  const Matrix clamped = seq.values.cwiseMax(0.0).cwiseMin(1.0);
  EXPECT_LT((back.values - clamped).cwiseAbs().maxCoeff(), 1e-6);
  for (std::size_t k = 0; k < track.timecodes.size(); ++k) EXPECT_NEAR(track.timecodes[k], k / 30.0, 1e-6);
  // Unmodeled channels export as zero.
  EXPECT_EQ(track.values.col(livelink_channel_index("EyeBlinkLeft")).cwiseAbs().maxCoeff(), 0.0);

  seq.values(0, 0) = std::nan("");
  EXPECT_EQ(kind_of([&] { format_blendshape_csv(seq); }), ErrorKind::ValueOutOfRange);
}

TEST(Audio, LinearResampleLengthAndValues) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(48, 0, 47);
  const auto y = linear_resample(x, 48000, 16000);
  ASSERT_EQ(y.size(), 16);
  for (Eigen::Index k = 0; k < y.size(); ++k) EXPECT_DOUBLE_EQ(y(k), 3.0 * k);
  const auto up = linear_resample(Eigen::VectorXd::LinSpaced(4, 0, 3), 1, 2);
  EXPECT_EQ(up.size(), 8);
  EXPECT_DOUBLE_EQ(up(1), 0.5);
}

TEST(Audio, LoadDownmixesAndResamples) {
  const auto dir = fixtures::temp_dir("audio");
  Eigen::VectorXd tone(4800);
  for (Eigen::Index i = 0; i < tone.size(); ++i) tone(i) = 0.5 * std::sin(i * 0.01);
  wav::write(dir / "a.wav", tone, 48000);
  const auto clip = load_audio(dir / "a.wav");
  EXPECT_EQ(clip.sample_rate, 16000);
  EXPECT_EQ(clip.samples.size(), 1600);
  EXPECT_NEAR(clip.samples(10), 0.5 * std::sin(30 * 0.01), 1e-4);
  EXPECT_EQ(kind_of([&] { load_audio(dir / "missing.wav"); }), ErrorKind::IoFailure);
  io::atomic_write(dir / "bad.wav", "RIFFxxxxWAVE");
  EXPECT_THROW(load_audio(dir / "bad.wav"), Error);
}

TEST(Manifest, BuildFromDirectoryLayout) {
  const auto root = fixtures::temp_dir("manifest");
  std::filesystem::create_directories(root / "s1");
  std::filesystem::create_directories(root / "s2");
  const std::string csv = header() + row("0", 0.1) + row("0.5", 0.2);
  for (const char* s : {"s1", "s2"}) {
    wav::write(root / s / "a.wav", Eigen::VectorXd::Zero(100), 48000);
    io::atomic_write(root / s / "a.csv", csv);
  }
  io::atomic_write(root / "s1" / "meta.json", R"({"gender":"female","transcripts":{"a":"ni hao"}})");
  io::atomic_write(root / "s1" / "notes.txt", "ignored");
  const auto m = build_manifest(root);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].clip_id, "s1/a");
  EXPECT_EQ(m[0].gender, Gender::Female);
  EXPECT_EQ(m[0].transcript, "ni hao");
  EXPECT_FALSE(m[1].gender.has_value());
  EXPECT_EQ(parse_manifest(format_manifest(m)), m);

  wav::write(root / "s2" / "b.wav", Eigen::VectorXd::Zero(100), 48000);
  EXPECT_EQ(kind_of([&] { build_manifest(root); }), ErrorKind::OrphanFile);
  std::filesystem::remove(root / "s2" / "b.wav");
  io::atomic_write(root / "s2" / "c.csv", csv);
  EXPECT_EQ(kind_of([&] { build_manifest(root); }), ErrorKind::OrphanFile);
  EXPECT_EQ(kind_of([&] { build_manifest(root / "nope"); }), ErrorKind::IoFailure);
}

TEST(Manifest, DuplicateIdsRejected) {
  auto m = fake_manifest(1, 0, 1);
  m.push_back(m[0]);
  EXPECT_EQ(kind_of([&] { parse_manifest(format_manifest(m)); }), ErrorKind::PreconditionFailed);
  EXPECT_EQ(kind_of([&] { parse_manifest("{not json\n"); }), ErrorKind::IoFailure);
}

TEST(Split, CrossSubjectProportions) {
  for (auto [subjects, train, val] : {std::tuple{5, 3, 1}, std::tuple{20, 12, 4}, std::tuple{7, 5, 1}}) {
    const auto m = fake_manifest(subjects, 0, 2);
    const auto s = split_cross_subject(m, 3);
    EXPECT_EQ(s.train.size(), 2u * train) << subjects;
    EXPECT_EQ(s.val.size(), 2u * val) << subjects;
    EXPECT_EQ(s.test.size(), 2u * val) << subjects;
    EXPECT_EQ(s.protocol, Protocol::CrossSubject);
  }
  EXPECT_EQ(kind_of([] { split_cross_subject(fake_manifest(4, 0), 1); }), ErrorKind::TooFewSubjects);
}

TEST(Split, CrossGenderUsesMalesForTrainingAndHalvesFemales) {
  const auto m = fake_manifest(14, 6, 3);
  const auto s = split_cross_gender(m, 9);
  EXPECT_EQ(s.train.size(), 14u * 3);
  EXPECT_EQ(s.val.size(), 3u * 3);
  EXPECT_EQ(s.test.size(), 3u * 3);
  for (const auto& rec : select_clips(m, s.train)) EXPECT_EQ(rec.gender, Gender::Male);
  for (const auto& rec : select_clips(m, s.test)) EXPECT_EQ(rec.gender, Gender::Female);
  EXPECT_EQ(kind_of([] { split_cross_gender(fake_manifest(3, 1), 1); }), ErrorKind::InsufficientGenderCoverage);
  EXPECT_EQ(kind_of([] { split_cross_gender(fake_manifest(0, 3), 1); }), ErrorKind::InsufficientGenderCoverage);
  auto missing = fake_manifest(2, 2);
  missing[0].gender.reset();
  EXPECT_EQ(kind_of([&] { split_cross_gender(missing, 1); }), ErrorKind::MissingGender);
  auto conflict = fake_manifest(2, 2);
  conflict[1].gender = Gender::Female;
  EXPECT_EQ(kind_of([&] { split_cross_gender(conflict, 1); }), ErrorKind::MissingGender);
}

TEST(Split, DeterministicBySeedAndRoundTrips) {
  const auto m = fake_manifest(10, 5);
  EXPECT_EQ(make_split(m, Protocol::CrossSubject, 4), make_split(m, Protocol::CrossSubject, 4));
  bool differs = false;
  for (std::uint64_t seed = 5; seed < 15 && !differs; ++seed) {
    differs = make_split(m, Protocol::CrossSubject, seed).test != make_split(m, Protocol::CrossSubject, 4).test;
  }
  EXPECT_TRUE(differs);
  const auto s = make_split(m, Protocol::CrossGender, 2);
  EXPECT_EQ(parse_split(format_split(s)), s);
  EXPECT_EQ(parse_protocol("cross_gender"), Protocol::CrossGender);
  EXPECT_EQ(kind_of([] { parse_protocol("random"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([&] { select_clips(m, {"nope"}); }), ErrorKind::PreconditionFailed);
}
