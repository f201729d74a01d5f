#include "pmmtalk/training.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/losses.hpp"
#include "pmmtalk/rng.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>
#include <set>

namespace pmmtalk {

void LossWeights::validate() const {
  if (!(pos >= 0.0) || !(mot >= 0.0) || !(tem >= 0.0) || !(sem >= 0.0)) {
    throw Error(ErrorKind::BadConfigValue, "loss weights must be non-negative");
  }
}

double total_loss(const LossParts& p, const LossWeights& w) {
  return w.pos * p.pos + w.mot * p.mot + w.tem * p.tem + w.sem * p.sem;
}

Var position_loss(Var pred, Var target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "position_loss: prediction and target shapes differ");
  }
  return scale(sum(square(sub(pred, target))), 1.0 / static_cast<double>(pred.rows()));
}

Var motion_loss(Var pred, Var target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "motion_loss: prediction and target shapes differ");
  }
  if (pred.rows() < 2) throw Error(ErrorKind::TooShort, "motion_loss needs at least two frames");
  return scale(sum(square(sub(diff_rows(pred), diff_rows(target)))), 1.0 / static_cast<double>(pred.rows()));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::BadConfigValue, "learning rate must be positive");
  if (batch_size < 1) throw Error(ErrorKind::BadConfigValue, "batch size must be at least 1");
  if (epochs < 0) throw Error(ErrorKind::BadConfigValue, "epochs must be non-negative");
  if (grad_clip < 0.0) throw Error(ErrorKind::BadConfigValue, "grad_clip must be non-negative");
  if (!(lr_decay > 0.0)) throw Error(ErrorKind::BadConfigValue, "lr_decay must be positive");
  weights.validate();
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},               {"seed", c.seed},
          {"lambda_pos", c.weights.pos},      {"lambda_mot", c.weights.mot},
          {"lambda_tem", c.weights.tem},      {"lambda_sem", c.weights.sem},
          {"grad_clip", c.grad_clip},         {"lr_decay", c.lr_decay}};
}

nlohmann::ordered_json to_json(const EpochLog& log) {
  nlohmann::ordered_json j = {{"epoch", log.epoch},      {"mean_loss", log.mean_loss}, {"L_pos", log.parts.pos},
                              {"L_mot", log.parts.mot}, {"L_tem", log.parts.tem},     {"L_sem", log.parts.sem}};
  if (log.val_pos) j["val_L_pos"] = *log.val_pos;
  return j;
}

ReferenceImage reference_for(const ClipRecord& clip) { return ReferenceImage{clip.subject_id, std::nullopt}; }

namespace {

void keep_rows(ClipFeatures& f, Eigen::Index frames) {
  f.latent.values.conservativeResize(frames, Eigen::NoChange);
  f.text.values.conservativeResize(frames, Eigen::NoChange);
  f.lips.pixels.conservativeResize(frames, Eigen::NoChange);
  if (f.lips.apertures.size() > frames) f.lips.apertures.conservativeResize(frames);
}

}  // namespace

PreparedClip prepare_clip(const ClipRecord& clip, const ModelConfig& cfg) {
  try {
    PreparedClip out;
    out.record = clip;
    const AudioClip audio = load_audio(clip.audio_path);
    const Eigen::Index audio_frames = frame_count(audio, cfg.features.fps);
    const RawCoefficientTrack raw = ingest_livelink_csv(clip.coefficients_path);
    const BlendshapeSequence labels =
        select_channels(resample_coefficients(raw, cfg.features.fps), cfg.channels, cfg.features.fps);
    // Label and audio grids can disagree by a frame at the tail; keep the overlap.
    const Eigen::Index frames = std::min(audio_frames, labels.frames());
    if (frames < 2) throw Error(ErrorKind::TooShort, "fewer than two aligned frames");
    out.features = compute_clip_features(clip, audio, reference_for(clip), audio_frames, cfg.features);
    keep_rows(out.features, frames);
    out.target = labels.values.topRows(frames);
    return out;
  } catch (const Error& e) {
    throw Error(ErrorKind::ProviderFailure, clip.clip_id + ": " + e.what());
  }
}

std::vector<PreparedClip> prepare_clips(const Manifest& clips, const ModelConfig& cfg) {
  std::vector<PreparedClip> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(prepare_clip(c, cfg));
  return out;
}

ClipLoss clip_loss(Graph& g, const PmmTalkModel& model, const PreparedClip& clip, const LossWeights& w) {
  const bool need_alignment = w.tem > 0.0 || w.sem > 0.0;
  ForwardResult fwd = model.forward(g, clip.features, clip.record.subject_id, need_alignment);
  Var target = g.constant(clip.target);
  Var pos = position_loss(fwd.prediction, target);
  Var mot = motion_loss(fwd.prediction, target);
  ClipLoss out;
  out.prediction = fwd.prediction;
  out.parts.pos = pos.scalar();
  out.parts.mot = mot.scalar();
  Var total = add(scale(pos, w.pos), scale(mot, w.mot));
  if (need_alignment) {
    out.parts.tem = fwd.alignment->temporal.scalar();
    out.parts.sem = fwd.alignment->semantic.scalar();
    total = add(total, add(scale(fwd.alignment->temporal, w.tem), scale(fwd.alignment->semantic, w.sem)));
  }
  out.total = total;
  return out;
}

std::unique_ptr<PmmTalkModel> initial_model(const ModelConfig& cfg, const std::vector<PreparedClip>& train) {
  std::set<std::string> ids;
  for (const auto& c : train) ids.insert(c.record.subject_id);
  auto model = std::make_unique<PmmTalkModel>(cfg, std::vector<std::string>(ids.begin(), ids.end()));
  model->quantize();
  return model;
}

TrainResult train_prepared(const TrainConfig& cfg, const ModelConfig& model_cfg, const std::vector<PreparedClip>& train,
                           const std::vector<PreparedClip>& val, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw Error(ErrorKind::PreconditionFailed, "training split is empty");
  TrainResult result;
  result.model = initial_model(model_cfg, train);
  PmmTalkModel& model = *result.model;
  ParameterStore& store = model.parameters();

  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  adam.grad_clip = cfg.grad_clip;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double share = 1.0 / static_cast<double>(stop - start);
      store.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const PreparedClip& clip = train[order[k]];
        Graph g;
        ClipLoss loss = clip_loss(g, model, clip, cfg.weights);
        const double value = loss.total.scalar();
        if (!std::isfinite(value)) {
          if (cfg.dump_path) save_checkpoint(*cfg.dump_path, model, &result.adam, to_json(cfg));
          throw Error(ErrorKind::DivergedLoss, "non-finite loss at epoch " + std::to_string(epoch) + " on clip " +
                                                   clip.record.clip_id);
        }
        g.backward(scale(loss.total, share));
        log.mean_loss += value;
        log.parts.pos += loss.parts.pos;
        log.parts.mot += loss.parts.mot;
        log.parts.tem += loss.parts.tem;
        log.parts.sem += loss.parts.sem;
      }
      adam_step(store, result.adam, adam);
    }
    const double n = static_cast<double>(train.size());
    log.mean_loss /= n;
    log.parts.pos /= n;
    log.parts.mot /= n;
    log.parts.tem /= n;
    log.parts.sem /= n;
    if (cfg.validate_each_epoch && !val.empty()) {
      double pos = 0.0;
      for (const auto& c : val) {
        const std::string style = model.has_style(c.record.subject_id) ? c.record.subject_id : model.styles().front();
        pos += position_loss(model.predict(c.features, style), c.target);
      }
      log.val_pos = pos / static_cast<double>(val.size());
    }
    spdlog::debug("epoch {} mean loss {:.6g} L_pos {:.6g}", epoch, log.mean_loss, log.parts.pos);
    if (on_epoch) on_epoch(log);
    result.log.push_back(log);
    adam.learning_rate *= cfg.lr_decay;
  }
  model.quantize();
  return result;
}

TrainResult train_run(const TrainConfig& cfg, const ModelConfig& model_cfg, const Manifest& manifest,
                      const SplitSpec& split, const EpochCallback& on_epoch) {
  if (split.train.empty()) throw Error(ErrorKind::PreconditionFailed, "training split is empty");
  const auto train = prepare_clips(select_clips(manifest, split.train), model_cfg);
  std::vector<PreparedClip> val;
  if (cfg.validate_each_epoch) val = prepare_clips(select_clips(manifest, split.val), model_cfg);
  return train_prepared(cfg, model_cfg, train, val, on_epoch);
}

BlendshapeSequence predict_clip(const PmmTalkModel& model, const ClipRecord& clip, const AudioClip& audio,
                                const ReferenceImage& ref, const std::string& style_id) {
  if (!model.has_style(style_id)) throw Error(ErrorKind::UnknownStyle, "no style registered for '" + style_id + "'");
  const ModelConfig& cfg = model.config();
  const Eigen::Index frames = frame_count(audio, cfg.features.fps);
  ClipRecord rec = clip;
  // Without a transcript the synthetic text stream falls back to blank symbols.
  if (!rec.transcript && cfg.features.text_provider == ProviderKind::Synthetic) rec.transcript = "";
  const ClipFeatures features = compute_clip_features(rec, audio, ref, frames, cfg.features);
  BlendshapeSequence out;
  out.values = model.predict(features, style_id);
  out.fps = cfg.features.fps;
  out.channel_names = cfg.channels;
  return out;
}

}  // namespace pmmtalk
