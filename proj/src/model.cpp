#include "pmmtalk/model.hpp"

#include "pmmtalk/error.hpp"

#include <algorithm>
#include <set>

namespace pmmtalk {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (features.latent_dim <= 0 || features.text_vocab < 2 || features.image_size < 4) {
    throw Error(ErrorKind::BadConfigValue, "feature dims too small");
  }
  if (features.envelope_smoothing < 0.0 || features.envelope_smoothing > 1.0) {
    throw Error(ErrorKind::BadConfigValue, "envelope_smoothing must lie in [0, 1]");
  }
  if (!(features.fps > 0.0)) throw Error(ErrorKind::BadConfigValue, "fps must be positive");
  if (alignment.d_align <= 0 || !(alignment.init_temperature > 0.0)) {
    throw Error(ErrorKind::BadConfigValue, "alignment width and temperature must be positive");
  }
  if (channels.empty()) throw Error(ErrorKind::BadConfigValue, "no output channels");
  if (static_cast<int>(channels.size()) != decoder.output_dim) {
    throw Error(ErrorKind::BadConfigValue, "decoder output_dim must equal the channel count");
  }
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (livelink_channel_index(c) < 0) throw Error(ErrorKind::BadConfigValue, "unknown channel '" + c + "'");
    if (!seen.insert(c).second) throw Error(ErrorKind::BadConfigValue, "duplicate channel '" + c + "'");
  }
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["features"] = {{"latent_dim", c.features.latent_dim},
                   {"text_vocab", c.features.text_vocab},
                   {"image_size", c.features.image_size},
                   {"envelope_smoothing", c.features.envelope_smoothing},
                   {"fps", c.features.fps},
                   {"latent_provider", to_string(c.features.latent_provider)},
                   {"text_provider", to_string(c.features.text_provider)},
                   {"image_provider", to_string(c.features.image_provider)}};
  j["encoder"] = {{"d_model", c.encoder.d_model},         {"n_layers", c.encoder.n_layers},
                  {"n_heads", c.encoder.n_heads},         {"d_ff", c.encoder.d_ff},
                  {"conv1_channels", c.encoder.conv1_channels}, {"conv2_channels", c.encoder.conv2_channels}};
  j["decoder"] = {{"d_fuse", c.decoder.d_fuse},         {"d_model", c.decoder.d_model},
                  {"n_layers", c.decoder.n_layers},     {"n_heads", c.decoder.n_heads},
                  {"d_ff", c.decoder.d_ff},             {"ppe_period", c.decoder.ppe_period},
                  {"output_dim", c.decoder.output_dim}, {"head_init_gain", c.decoder.head_init_gain}};
  j["alignment"] = {{"d_align", c.alignment.d_align}, {"init_temperature", c.alignment.init_temperature}};
  j["channels"] = c.channels;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    const auto& f = j.at("features");
    c.features.latent_dim = f.at("latent_dim");
    c.features.text_vocab = f.at("text_vocab");
    c.features.image_size = f.at("image_size");
    c.features.envelope_smoothing = f.at("envelope_smoothing");
    c.features.fps = f.at("fps");
    c.features.latent_provider = parse_provider_kind(f.at("latent_provider"));
    c.features.text_provider = parse_provider_kind(f.at("text_provider"));
    c.features.image_provider = parse_provider_kind(f.at("image_provider"));
    const auto& e = j.at("encoder");
    c.encoder.d_model = e.at("d_model");
    c.encoder.n_layers = e.at("n_layers");
    c.encoder.n_heads = e.at("n_heads");
    c.encoder.d_ff = e.at("d_ff");
    c.encoder.conv1_channels = e.at("conv1_channels");
    c.encoder.conv2_channels = e.at("conv2_channels");
    const auto& d = j.at("decoder");
    c.decoder.d_fuse = d.at("d_fuse");
    c.decoder.d_model = d.at("d_model");
    c.decoder.n_layers = d.at("n_layers");
    c.decoder.n_heads = d.at("n_heads");
    c.decoder.d_ff = d.at("d_ff");
    c.decoder.ppe_period = d.at("ppe_period");
    c.decoder.output_dim = d.at("output_dim");
    c.decoder.head_init_gain = d.at("head_init_gain");
    const auto& a = j.at("alignment");
    c.alignment.d_align = a.at("d_align");
    c.alignment.init_temperature = a.at("init_temperature");
    c.channels = j.at("channels").get<std::vector<std::string>>();
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::BadConfigValue, std::string("model config: ") + ex.what());
  }
  c.encoder.seed = c.decoder.seed = c.alignment.seed = c.seed;
  return c;
}

namespace {
ModelConfig seeded(ModelConfig cfg) {
  cfg.encoder.seed = cfg.decoder.seed = cfg.alignment.seed = cfg.seed;
  cfg.validate();
  return cfg;
}
}  // namespace

PmmTalkModel::PmmTalkModel(const ModelConfig& cfg, const std::vector<std::string>& style_ids)
    : cfg_(seeded(cfg)), style_ids_(style_ids), store_(std::make_unique<ParameterStore>()) {
  if (style_ids_.empty()) throw Error(ErrorKind::PreconditionFailed, "model needs at least one style id");
  std::sort(style_ids_.begin(), style_ids_.end());
  const Eigen::Index d = cfg_.encoder.d_model;
  const Eigen::Index text_dim = cfg_.features.text_vocab;
  audio_ = AudioDecoder::create(*store_, "audio_decoder", cfg_.features.latent_dim, cfg_.encoder);
  image_ = ImageEncoder::create(*store_, "image_encoder", cfg_.features.image_size, cfg_.encoder);
  align_ = AlignmentHead::create(*store_, "alignment", d, d, text_dim, cfg_.alignment);
  decoder_ = BlendshapeDecoder::create(*store_, "decoder", d, d, text_dim, style_ids_, cfg_.decoder);
}

ForwardResult PmmTalkModel::forward(Graph& g, const ClipFeatures& f, const std::string& style_id,
                                    bool with_alignment) const {
  if (f.latent.frames() != f.text.frames() || f.latent.frames() != f.lips.frames()) {
    throw Error(ErrorKind::LengthMismatch, "clip feature streams disagree on frame count");
  }
  Var style = decoder_.styles().lookup(g, style_id);
  Var audio = audio_(g, g.constant(f.latent.values));
  Var image = image_(g, f.lips.pixels);
  // The text stream is frozen: it enters fusion and alignment as-is.
  Var text = g.constant(f.text.values);

  ForwardResult r;
  if (with_alignment) r.alignment = align(g, align_, audio, image, text);
  r.prediction = decoder_.decode(g, decoder_.fuse(g, audio, image, text, style));
  return r;
}

Matrix PmmTalkModel::predict(const ClipFeatures& features, const std::string& style_id) const {
  Graph g(false);
  return forward(g, features, style_id, false).prediction.value();
}

void PmmTalkModel::quantize() {
  for (auto& [name, p] : *store_) p.value = p.value.cast<float>().cast<double>();
}

}  // namespace pmmtalk
