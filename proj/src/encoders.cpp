#include "pmmtalk/encoders.hpp"

#include "pmmtalk/error.hpp"

namespace pmmtalk {

void EncoderConfig::validate() const {
  if (d_model <= 0 || n_layers < 0 || n_heads <= 0 || d_ff <= 0 || conv1_channels <= 0 || conv2_channels <= 0) {
    throw Error(ErrorKind::BadConfigValue, "encoder sizes must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorKind::BadConfigValue, "encoder d_model must be divisible by n_heads");
}

namespace {

std::vector<nn::EncoderLayer> make_stack(ParameterStore& store, const std::string& prefix, const EncoderConfig& cfg) {
  std::vector<nn::EncoderLayer> layers;
  for (int l = 0; l < cfg.n_layers; ++l) {
    layers.push_back(nn::EncoderLayer::create(store, prefix + ".layer" + std::to_string(l), cfg.d_model, cfg.n_heads,
                                              cfg.d_ff, cfg.seed));
  }
  return layers;
}

Eigen::Index conv_out(Eigen::Index size) { return (size + 2 - 3) / 2 + 1; }

}  // namespace

AudioDecoder AudioDecoder::create(ParameterStore& store, const std::string& prefix, Eigen::Index input_dim,
                                  const EncoderConfig& cfg) {
  cfg.validate();
  AudioDecoder d;
  d.input_ = nn::Linear::create(store, prefix + ".input", input_dim, cfg.d_model, cfg.seed);
  d.layers_ = make_stack(store, prefix, cfg);
  return d;
}

Var AudioDecoder::project(Graph& g, Var latent) const {
  if (latent.cols() != input_.in_features()) {
    throw Error(ErrorKind::DimensionMismatch, "audio decoder expects latent width " +
                                                  std::to_string(input_.in_features()) + ", got " +
                                                  std::to_string(latent.cols()));
  }
  return input_(g, latent);
}

Var AudioDecoder::operator()(Graph& g, Var latent) const {
  Var x = project(g, latent);
  for (const auto& layer : layers_) x = layer(g, x);
  return x;
}

ImageEncoder ImageEncoder::create(ParameterStore& store, const std::string& prefix, int image_size,
                                  const EncoderConfig& cfg) {
  cfg.validate();
  if (image_size < 4) throw Error(ErrorKind::BadConfigValue, "image_size must be at least 4");
  ImageEncoder e;
  e.image_size_ = image_size;
  e.conv1_channels_ = cfg.conv1_channels;
  e.conv1_ = nn::Linear::create(store, prefix + ".conv1", 9, cfg.conv1_channels, cfg.seed);
  e.conv2_ = nn::Linear::create(store, prefix + ".conv2", 9 * cfg.conv1_channels, cfg.conv2_channels, cfg.seed);
  const Eigen::Index reduced = conv_out(conv_out(image_size));
  e.project_ = nn::Linear::create(store, prefix + ".project", reduced * reduced * cfg.conv2_channels, cfg.d_model,
                                  cfg.seed);
  // Per-frame layers: a frame's embedding must not depend on the clip length.
  for (auto* l : {&e.conv1_, &e.conv2_, &e.project_}) l->row_stable = true;
  e.layers_ = make_stack(store, prefix, cfg);
  return e;
}

Var ImageEncoder::embed_frames(Graph& g, const Matrix& pixels) const {
  const Eigen::Index size = image_size_;
  if (pixels.cols() != size * size) {
    throw Error(ErrorKind::DimensionMismatch, "image encoder expects " + std::to_string(size) + "x" +
                                                  std::to_string(size) + " frames");
  }
  const Eigen::Index frames = pixels.rows();
  // One pixel per row, ordered (frame, y, x).
  Matrix column(frames * size * size, 1);
  for (Eigen::Index t = 0; t < frames; ++t) column.middleRows(t * size * size, size * size) = pixels.row(t).transpose();

  Var x = g.constant(std::move(column));
  const Eigen::Index h1 = conv_out(size);
  x = gelu(conv1_(g, im2col(x, frames, size, size, 1, 3, 2, 1)));
  x = gelu(conv2_(g, im2col(x, frames, h1, h1, conv1_channels_, 3, 2, 1)));
  return project_(g, fold_frames(x, frames));
}

Var ImageEncoder::operator()(Graph& g, const Matrix& pixels) const {
  Var x = embed_frames(g, pixels);
  for (const auto& layer : layers_) x = layer(g, x);
  return x;
}

FeatureStream audio_decode(Graph& g, const AudioDecoder& decoder, const FeatureStream& latent) {
  Var out = decoder(g, g.constant(latent.values));
  return FeatureStream{out.value(), Modality::Audio, latent.fps};
}

FeatureStream image_encode(Graph& g, const ImageEncoder& encoder, const LipFrameStream& frames) {
  if (frames.size != encoder.image_size()) throw Error(ErrorKind::DimensionMismatch, "lip frame size mismatch");
  Var out = encoder(g, frames.pixels);
  return FeatureStream{out.value(), Modality::Image, frames.fps};
}

}  // namespace pmmtalk
