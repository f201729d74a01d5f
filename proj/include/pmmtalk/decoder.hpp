#pragma once

#include "pmmtalk/autodiff.hpp"
#include "pmmtalk/nn.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pmmtalk {

inline constexpr int kStyleDim = 64;

struct DecoderConfig {
  int d_fuse = 64;
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int ppe_period = 25;
  int output_dim = 32;
  /// Output head weights start at this fraction of the usual 1/sqrt(fan_in)
  /// bound so an untrained model predicts near zero.
  double head_init_gain = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// PPE(t, 2i) = sin((t mod period) / 10000^(2i/d)), PPE(t, 2i+1) = cos(same).
Matrix periodic_positional_encoding(Eigen::Index frames, Eigen::Index width, int period);

/// Per-head T x T additive attention bias with the causal mask fused in:
/// -m_h (i - j) for j <= i, -inf above the diagonal, m_h = 2^(-8(h+1)/H).
std::vector<Matrix> alibi_bias(Eigen::Index frames, int heads);

double alibi_slope(int head, int heads);

/// Learned 64-dim style vector per registered subject.
class StyleTable {
 public:
  static StyleTable create(ParameterStore& store, const std::string& prefix, const std::vector<std::string>& ids,
                           std::uint64_t seed);

  Var lookup(Graph& g, const std::string& id) const;
  const Matrix& vector(const std::string& id) const;
  bool contains(const std::string& id) const { return styles_.count(id) != 0; }
  std::vector<std::string> ids() const;

 private:
  const Parameter& find(const std::string& id) const;
  std::map<std::string, Parameter*> styles_;
};

/// Fusion of A/I/C with the style vector, PPE, biased causal decoder layers
/// and a linear output head.
class BlendshapeDecoder {
 public:
  static BlendshapeDecoder create(ParameterStore& store, const std::string& prefix, Eigen::Index audio_dim,
                                  Eigen::Index image_dim, Eigen::Index text_dim,
                                  const std::vector<std::string>& style_ids, const DecoderConfig& cfg);

  /// [A_f ; I_f ; C_f ; p] -> d_model, plus PPE.
  Var fuse(Graph& g, Var audio, Var image, Var text, Var style) const;
  /// Decoder layers and output head. Raw (unclamped) coefficients, T x output_dim.
  Var decode(Graph& g, Var fused) const;

  const StyleTable& styles() const { return styles_; }
  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  nn::Linear audio_proj_, image_proj_, text_proj_, input_proj_, head_;
  std::vector<nn::DecoderLayer> layers_;
  StyleTable styles_;
};

}  // namespace pmmtalk
