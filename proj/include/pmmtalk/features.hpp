#pragma once

#include "pmmtalk/autodiff.hpp"
#include "pmmtalk/dataset.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace pmmtalk {

enum class Modality { LatentAudio, Audio, Text, Image };

std::string to_string(Modality m);

/// T x d per-frame features of one modality.
struct FeatureStream {
  Matrix values;
  Modality modality = Modality::LatentAudio;
  double fps = kLabelFps;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

/// T grayscale frames, each flattened row-major into one row of `pixels`.
struct LipFrameStream {
  Matrix pixels;  // T x (size * size), values in [0, 1]
  int size = 16;
  double fps = kLabelFps;
  /// Mouth opening per frame in [0, 1] that produced the frames.
  Eigen::VectorXd apertures;

  Eigen::Index frames() const { return pixels.rows(); }
  /// size x size copy of frame t (rows of `pixels` are strided in memory).
  Matrix frame(Eigen::Index t) const {
    const Eigen::RowVectorXd row = pixels.row(t);
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(row.data(), size,
                                                                                                      size);
  }
};

/// Prior face structure: either an identifier (hashed into a texture) or a
/// grayscale image in [0, 1].
struct ReferenceImage {
  std::string identifier = "default";
  std::optional<Matrix> image;
};

enum class ProviderKind { Synthetic, File };

std::string to_string(ProviderKind k);
ProviderKind parse_provider_kind(const std::string& text);

struct FeatureConfig {
  int latent_dim = 64;
  int text_vocab = 40;
  int image_size = 16;
  double envelope_smoothing = 0.5;
  double fps = kLabelFps;
  ProviderKind latent_provider = ProviderKind::Synthetic;
  ProviderKind text_provider = ProviderKind::Synthetic;
  ProviderKind image_provider = ProviderKind::Synthetic;
};

inline constexpr int kFullLatentDim = 1024;
inline constexpr int kFullTextVocab = 3503;

/// floor(samples * fps / rate); throws ClipTooShort when that is 0.
Eigen::Index frame_count(const AudioClip& audio, double fps);

/// Samples per analysis window: round(rate / fps).
Eigen::Index samples_per_frame(int sample_rate, double fps);

/// Triangular band weights over [0, min(8 kHz, rate/2)] for `bins` DFT bins
/// of a length-`window` transform: bands x bins.
Matrix triangular_filterbank(int bands, Eigen::Index window, int sample_rate);

/// Frozen latent-audio stand-in: log(1 + filterbank energy) per frame, T_audio x latent_dim.
FeatureStream audio_latent_synthetic(const AudioClip& audio, const FeatureConfig& cfg);

/// Vocabulary index of a transcript symbol; 0 is the reserved blank.
int text_symbol_id(char c, int vocab);

/// Soft one-hot rows (0.9 peak) with symbols spread uniformly over T frames.
FeatureStream text_stream_synthetic(const std::string& transcript, Eigen::Index frames, const FeatureConfig& cfg);

/// Chooses file mode (precomputed `<clip>.text.pmmf`) or synthetic mode from cfg.
FeatureStream text_stream_provider(const ClipRecord& clip, Eigen::Index frames, const FeatureConfig& cfg);

/// Smoothed RMS envelope normalized to [0, 1], resampled to `frames`.
Eigen::VectorXd lip_aperture_envelope(const AudioClip& audio, Eigen::Index frames, const FeatureConfig& cfg);

/// Background texture in [0.35, 1] derived from the reference alone.
Matrix reference_background(const ReferenceImage& ref, int size);

/// One frame: background with a dark elliptical mouth of the given opening.
Matrix render_lip_frame(double aperture, const Matrix& background);

LipFrameStream lip_frames_synthetic(const AudioClip& audio, const ReferenceImage& ref, Eigen::Index frames,
                                    const FeatureConfig& cfg);

// PMMF1: "PMMF1", u32 frames, u32 dim, frames*dim little-endian float32 (row-major).
std::string encode_feature_file(const Matrix& values);
Matrix decode_feature_file(std::string_view bytes);
void write_feature_file(const Matrix& values, const std::filesystem::path& path);
FeatureStream load_feature_file(const std::filesystem::path& path, Modality modality = Modality::LatentAudio,
                                double fps = kLabelFps);

/// Sidecar path for precomputed features: `<dir>/<stem>.<kind>.pmmf`.
std::filesystem::path feature_sidecar(const ClipRecord& clip, const std::string& kind);

/// Endpoint-aligned linear interpolation along time to exactly `frames` rows.
FeatureStream resample_stream(const FeatureStream& stream, Eigen::Index frames);
Matrix resample_rows(const Matrix& values, Eigen::Index frames);

/// All pseudo-modal inputs of one clip on a common T-frame grid.
struct ClipFeatures {
  FeatureStream latent;
  FeatureStream text;
  LipFrameStream lips;

  Eigen::Index frames() const { return latent.frames(); }
};

ClipFeatures compute_clip_features(const ClipRecord& clip, const AudioClip& audio, const ReferenceImage& ref,
                                   Eigen::Index frames, const FeatureConfig& cfg);

}  // namespace pmmtalk
