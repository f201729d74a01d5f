#pragma once

#include "pmmtalk/autodiff.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pmmtalk {

/// The 61 Live Link Face columns, in export order.
const std::vector<std::string>& livelink_channels();

/// The 32 articulation channels modeled by default: jaw, mouth, cheek, nose.
const std::vector<std::string>& default_articulation_channels();

/// Index of `name` among livelink_channels() (case-insensitive), or -1.
int livelink_channel_index(const std::string& name);

inline constexpr int kLivelinkChannelCount = 61;
inline constexpr int kModeledChannelCount = 32;
inline constexpr double kLivelinkRate = 60.0;
inline constexpr int kModelSampleRate = 16000;
inline constexpr double kLabelFps = 30.0;

struct RawCoefficientTrack {
  std::vector<double> timecodes;  // seconds, strictly increasing
  Matrix values;                  // frames x 61, livelink_channels() order
  double source_rate = kLivelinkRate;

  Eigen::Index frames() const { return values.rows(); }
};

struct BlendshapeSequence {
  Matrix values;  // T x channel_names.size()
  double fps = kLabelFps;
  std::vector<std::string> channel_names;

  Eigen::Index frames() const { return values.rows(); }
};

struct AudioClip {
  Eigen::VectorXd samples;
  int sample_rate = kModelSampleRate;
};

enum class Gender { Male, Female };

struct ClipRecord {
  std::string clip_id;
  std::string subject_id;
  std::optional<Gender> gender;
  std::optional<std::string> transcript;
  std::string audio_path;
  std::string coefficients_path;

  bool operator==(const ClipRecord&) const = default;
};

using Manifest = std::vector<ClipRecord>;

enum class Protocol { CrossSubject, CrossGender };

struct SplitSpec {
  Protocol protocol = Protocol::CrossSubject;
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;

  bool operator==(const SplitSpec&) const = default;
};

std::string to_string(Gender g);
std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& text);

// --- Live Link Face CSV -------------------------------------------------

/// Parses "HH:MM:SS:FF[.fff]" (frames at `timecode_rate`) or plain seconds.
double parse_timecode(const std::string& text, double timecode_rate = kLivelinkRate);
std::string format_timecode(double seconds, double timecode_rate = kLivelinkRate);

RawCoefficientTrack parse_livelink_csv(const std::string& text, double timecode_rate = kLivelinkRate);
RawCoefficientTrack ingest_livelink_csv(const std::filesystem::path& path, double timecode_rate = kLivelinkRate);

/// Timestamp-based linear interpolation onto a uniform grid from the first
/// to the last timecode.
RawCoefficientTrack resample_coefficients(const RawCoefficientTrack& track, double target_fps);

BlendshapeSequence select_channels(const RawCoefficientTrack& track, const std::vector<std::string>& channels,
                                   double fps);

/// Live-Link-shaped CSV: the modeled channels carry clamped values, every
/// other channel is 0.
std::string format_blendshape_csv(const BlendshapeSequence& seq);
void export_blendshape_csv(const BlendshapeSequence& seq, const std::filesystem::path& path);

// --- audio ---------------------------------------------------------------

using Resampler = std::function<Eigen::VectorXd(const Eigen::VectorXd& input, int from_rate, int to_rate)>;

/// Linear interpolation; output length floor(n * to / from).
Eigen::VectorXd linear_resample(const Eigen::VectorXd& input, int from_rate, int to_rate);

/// Reads mono/stereo WAV (PCM16 or float32), downmixes, resamples to `target_rate`.
AudioClip load_audio(const std::filesystem::path& path, int target_rate = kModelSampleRate,
                     const Resampler& resampler = linear_resample);

// --- manifests and splits ---------------------------------------------

/// Corpus layout:
///   root/<subject>/meta.json       {"gender": "male"|"female", "transcripts": {"<clip>": "..."}}
///   root/<subject>/<clip>.wav
///   root/<subject>/<clip>.csv
/// meta.json and its keys are optional. Other files are ignored.
Manifest build_manifest(const std::filesystem::path& root);

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

SplitSpec split_cross_subject(const Manifest& manifest, std::uint64_t seed);
SplitSpec split_cross_gender(const Manifest& manifest, std::uint64_t seed);
SplitSpec make_split(const Manifest& manifest, Protocol protocol, std::uint64_t seed);

std::string format_split(const SplitSpec& split);
SplitSpec parse_split(const std::string& text);
void write_split(const SplitSpec& split, const std::filesystem::path& path);
SplitSpec read_split(const std::filesystem::path& path);

/// Clip records named by `ids`, in the order given.
Manifest select_clips(const Manifest& manifest, const std::vector<std::string>& ids);

}  // namespace pmmtalk
