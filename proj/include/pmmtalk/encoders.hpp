#pragma once

#include "pmmtalk/autodiff.hpp"
#include "pmmtalk/features.hpp"
#include "pmmtalk/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pmmtalk {

struct EncoderConfig {
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int conv1_channels = 4;
  int conv2_channels = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Contextualizes frozen latent audio features: input projection followed by
/// a bidirectional pre-norm transformer stack. T x latent -> T x d_model.
class AudioDecoder {
 public:
  static AudioDecoder create(ParameterStore& store, const std::string& prefix, Eigen::Index input_dim,
                             const EncoderConfig& cfg);

  Var operator()(Graph& g, Var latent) const;
  /// Input projection only (what the stack adds its residuals to).
  Var project(Graph& g, Var latent) const;

  Eigen::Index input_dim() const { return input_.in_features(); }
  const std::vector<nn::EncoderLayer>& layers() const { return layers_; }

 private:
  nn::Linear input_;
  std::vector<nn::EncoderLayer> layers_;
};

/// Per-frame CNN with shared weights (two stride-2 3x3 convolutions, flatten,
/// projection) followed by the same transformer stack form as AudioDecoder.
class ImageEncoder {
 public:
  static ImageEncoder create(ParameterStore& store, const std::string& prefix, int image_size,
                             const EncoderConfig& cfg);

  /// `pixels` is T x (size*size), each row a row-major frame.
  Var operator()(Graph& g, const Matrix& pixels) const;
  /// Per-frame CNN embedding before the transformer stack.
  Var embed_frames(Graph& g, const Matrix& pixels) const;

  int image_size() const { return image_size_; }
  const std::vector<nn::EncoderLayer>& layers() const { return layers_; }

 private:
  int image_size_ = 16;
  int conv1_channels_ = 4;
  nn::Linear conv1_, conv2_, project_;
  std::vector<nn::EncoderLayer> layers_;
};

FeatureStream audio_decode(Graph& g, const AudioDecoder& decoder, const FeatureStream& latent);
FeatureStream image_encode(Graph& g, const ImageEncoder& encoder, const LipFrameStream& frames);

}  // namespace pmmtalk
