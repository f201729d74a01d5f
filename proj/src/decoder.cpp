#include "pmmtalk/decoder.hpp"

#include "pmmtalk/error.hpp"

#include <cmath>
#include <limits>

namespace pmmtalk {

void DecoderConfig::validate() const {
  if (d_fuse <= 0 || d_model <= 0 || n_layers < 0 || n_heads <= 0 || d_ff <= 0 || output_dim <= 0) {
    throw Error(ErrorKind::BadConfigValue, "decoder sizes must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorKind::BadConfigValue, "decoder d_model must be divisible by n_heads");
  if (ppe_period < 2) throw Error(ErrorKind::BadConfigValue, "ppe_period must be at least 2");
}

Matrix periodic_positional_encoding(Eigen::Index frames, Eigen::Index width, int period) {
  if (period < 2) throw Error(ErrorKind::BadConfigValue, "ppe period must be at least 2");
  Matrix pe(frames, width);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const auto phase = static_cast<double>(t % period);
    for (Eigen::Index i = 0; 2 * i < width; ++i) {
      const double arg = phase / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
      pe(t, 2 * i) = std::sin(arg);
      if (2 * i + 1 < width) pe(t, 2 * i + 1) = std::cos(arg);
    }
  }
  return pe;
}

double alibi_slope(int head, int heads) { return std::exp2(-8.0 * (head + 1) / heads); }

std::vector<Matrix> alibi_bias(Eigen::Index frames, int heads) {
  if (heads < 1) throw Error(ErrorKind::BadConfigValue, "alibi needs at least one head");
  std::vector<Matrix> bias;
  bias.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const double m = alibi_slope(h, heads);
    Matrix b(frames, frames);
    for (Eigen::Index i = 0; i < frames; ++i) {
      for (Eigen::Index j = 0; j < frames; ++j) {
        b(i, j) = j <= i ? -m * static_cast<double>(i - j) : -std::numeric_limits<double>::infinity();
      }
    }
    bias.push_back(std::move(b));
  }
  return bias;
}

StyleTable StyleTable::create(ParameterStore& store, const std::string& prefix, const std::vector<std::string>& ids,
                              std::uint64_t seed) {
  StyleTable table;
  for (const auto& id : ids) {
    if (table.styles_.count(id)) throw Error(ErrorKind::PreconditionFailed, "style id registered twice: " + id);
    const std::string name = prefix + "." + id;
    // Unit-scale entries so the style is as loud as the other fused inputs.
    table.styles_[id] = &store.add(name, nn::uniform_init(seed, name, 1, kStyleDim, 1.0));
  }
  return table;
}

const Parameter& StyleTable::find(const std::string& id) const {
  auto it = styles_.find(id);
  if (it == styles_.end()) throw Error(ErrorKind::UnknownStyle, "no style registered for '" + id + "'");
  return *it->second;
}

Var StyleTable::lookup(Graph& g, const std::string& id) const {
  return g.param(const_cast<Parameter&>(find(id)));
}

const Matrix& StyleTable::vector(const std::string& id) const { return find(id).value; }

std::vector<std::string> StyleTable::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, p] : styles_) out.push_back(id);
  return out;
}

BlendshapeDecoder BlendshapeDecoder::create(ParameterStore& store, const std::string& prefix, Eigen::Index audio_dim,
                                            Eigen::Index image_dim, Eigen::Index text_dim,
                                            const std::vector<std::string>& style_ids, const DecoderConfig& cfg) {
  cfg.validate();
  BlendshapeDecoder d;
  d.cfg_ = cfg;
  d.audio_proj_ = nn::Linear::create(store, prefix + ".fuse_audio", audio_dim, cfg.d_fuse, cfg.seed);
  d.image_proj_ = nn::Linear::create(store, prefix + ".fuse_image", image_dim, cfg.d_fuse, cfg.seed);
  d.text_proj_ = nn::Linear::create(store, prefix + ".fuse_text", text_dim, cfg.d_fuse, cfg.seed);
  d.input_proj_ = nn::Linear::create(store, prefix + ".fuse_input", 3 * cfg.d_fuse + kStyleDim, cfg.d_model, cfg.seed);
  for (int l = 0; l < cfg.n_layers; ++l) {
    d.layers_.push_back(nn::DecoderLayer::create(store, prefix + ".layer" + std::to_string(l), cfg.d_model,
                                                 cfg.n_heads, cfg.d_ff, cfg.seed));
  }
  d.head_ = nn::Linear::create(store, prefix + ".head", cfg.d_model, cfg.output_dim, cfg.seed, cfg.head_init_gain);
  d.styles_ = StyleTable::create(store, prefix + ".style", style_ids, cfg.seed);
  return d;
}

Var BlendshapeDecoder::fuse(Graph& g, Var audio, Var image, Var text, Var style) const {
  const Eigen::Index frames = audio.rows();
  if (image.rows() != frames || text.rows() != frames) {
    throw Error(ErrorKind::LengthMismatch, "fusion inputs must share the frame count");
  }
  if (style.rows() != 1 || style.cols() != kStyleDim) {
    throw Error(ErrorKind::DimensionMismatch, "style vector must be 1 x 64");
  }
  Var fused = concat_cols({audio_proj_(g, audio), image_proj_(g, image), text_proj_(g, text),
                           broadcast_rows(style, frames)});
  fused = input_proj_(g, fused);
  return add(fused, g.constant(periodic_positional_encoding(frames, cfg_.d_model, cfg_.ppe_period)));
}

Var BlendshapeDecoder::decode(Graph& g, Var fused) const {
  if (fused.cols() != cfg_.d_model) {
    throw Error(ErrorKind::DimensionMismatch, "decoder expects width " + std::to_string(cfg_.d_model));
  }
  const std::vector<Matrix> bias = alibi_bias(fused.rows(), cfg_.n_heads);
  Var x = fused;
  for (const auto& layer : layers_) x = layer(g, x, bias);
  return head_(g, x);
}

}  // namespace pmmtalk
