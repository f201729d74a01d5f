#pragma once

#include "pmmtalk/alignment.hpp"
#include "pmmtalk/dataset.hpp"
#include "pmmtalk/decoder.hpp"
#include "pmmtalk/encoders.hpp"
#include "pmmtalk/features.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pmmtalk {

struct ModelConfig {
  FeatureConfig features;
  EncoderConfig encoder;
  DecoderConfig decoder;
  AlignmentConfig alignment;
  std::vector<std::string> channels = default_articulation_channels();
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ForwardResult {
  Var prediction;  // T x channels, raw
  std::optional<AlignmentResult> alignment;
};

/// All trainable state: audio decoder, image encoder, alignment head, and the
/// fusion decoder with its style table. Parameters live in one named store.
class PmmTalkModel {
 public:
  PmmTalkModel(const ModelConfig& cfg, const std::vector<std::string>& style_ids);

  ForwardResult forward(Graph& g, const ClipFeatures& features, const std::string& style_id,
                        bool with_alignment) const;

  /// No-gradient forward pass returning raw coefficients.
  Matrix predict(const ClipFeatures& features, const std::string& style_id) const;

  /// Round every parameter to the nearest float32 so the in-memory model
  /// matches its checkpoint exactly.
  void quantize();

  ParameterStore& parameters() { return *store_; }
  const ParameterStore& parameters() const { return *store_; }
  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& styles() const { return style_ids_; }
  bool has_style(const std::string& id) const { return decoder_.styles().contains(id); }

  const AudioDecoder& audio_decoder() const { return audio_; }
  const ImageEncoder& image_encoder() const { return image_; }
  const AlignmentHead& alignment_head() const { return align_; }
  const BlendshapeDecoder& decoder() const { return decoder_; }

 private:
  ModelConfig cfg_;
  std::vector<std::string> style_ids_;
  std::unique_ptr<ParameterStore> store_;
  AudioDecoder audio_;
  ImageEncoder image_;
  AlignmentHead align_;
  BlendshapeDecoder decoder_;
};

}  // namespace pmmtalk
