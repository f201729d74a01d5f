#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string_view>

namespace pmmtalk::wav {

enum class Encoding { Pcm16, Float32 };

/// Decoded RIFF/WAVE payload, samples scaled to [-1, 1].
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  /// frames x channels
  Eigen::MatrixXd samples;
};

WavData decode(std::string_view bytes);
WavData read(const std::filesystem::path& path);

/// Encodes a mono signal. Values outside [-1, 1] are clipped for PCM16.
std::string encode(const Eigen::VectorXd& mono, int sample_rate, Encoding encoding = Encoding::Pcm16);
void write(const std::filesystem::path& path, const Eigen::VectorXd& mono, int sample_rate,
           Encoding encoding = Encoding::Pcm16);

}  // namespace pmmtalk::wav
