#pragma once

#include "pmmtalk/checkpoint.hpp"
#include "pmmtalk/dataset.hpp"
#include "pmmtalk/model.hpp"
#include "pmmtalk/optimizer.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pmmtalk {

struct LossWeights {
  double pos = 1.0;
  double mot = 10.0;
  double tem = 1e-4;
  double sem = 1e-5;

  void validate() const;
};

struct LossParts {
  double pos = 0.0;
  double mot = 0.0;
  double tem = 0.0;
  double sem = 0.0;
};

double total_loss(const LossParts& parts, const LossWeights& w);

// Differentiable counterparts of the kernels in losses.hpp.
Var position_loss(Var pred, Var target);
Var motion_loss(Var pred, Var target);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 1;
  int epochs = 200;
  std::uint64_t seed = 0;
  LossWeights weights;
  /// Off unless set: global gradient-norm clip and per-epoch lr multiplier.
  double grad_clip = 0.0;
  double lr_decay = 1.0;
  /// Compute validation L_pos after every epoch when val clips are given.
  bool validate_each_epoch = false;
  /// Checkpoint written here when the loss turns non-finite.
  std::optional<std::filesystem::path> dump_path;

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);

/// Features and targets of one clip on a shared T-frame grid.
struct PreparedClip {
  ClipRecord record;
  ClipFeatures features;
  Matrix target;  // T x channels

  Eigen::Index frames() const { return target.rows(); }
};

ReferenceImage reference_for(const ClipRecord& clip);

/// Loads audio and labels, computes all provider streams. Any failure is
/// rethrown as ProviderFailure naming the clip.
PreparedClip prepare_clip(const ClipRecord& clip, const ModelConfig& cfg);
std::vector<PreparedClip> prepare_clips(const Manifest& clips, const ModelConfig& cfg);

/// Loss parts and the graph node of the weighted total for one clip.
struct ClipLoss {
  LossParts parts;
  Var total;
  Var prediction;
};

ClipLoss clip_loss(Graph& g, const PmmTalkModel& model, const PreparedClip& clip, const LossWeights& w);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  LossParts parts;
  std::optional<double> val_pos;
};

nlohmann::ordered_json to_json(const EpochLog& log);

struct TrainResult {
  std::unique_ptr<PmmTalkModel> model;
  AdamState adam;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Styles are the distinct subject ids of `train`. The returned model is
/// float32-quantized, so it predicts exactly like its saved checkpoint.
TrainResult train_prepared(const TrainConfig& cfg, const ModelConfig& model_cfg, const std::vector<PreparedClip>& train,
                           const std::vector<PreparedClip>& val = {}, const EpochCallback& on_epoch = {});

TrainResult train_run(const TrainConfig& cfg, const ModelConfig& model_cfg, const Manifest& manifest,
                      const SplitSpec& split, const EpochCallback& on_epoch = {});

/// Untrained model over the same styles, quantized like a trained one.
std::unique_ptr<PmmTalkModel> initial_model(const ModelConfig& cfg, const std::vector<PreparedClip>& train);

/// Raw prediction for arbitrary audio: T = frame_count(audio, fps). `clip`
/// supplies the transcript and sidecar location for file providers.
BlendshapeSequence predict_clip(const PmmTalkModel& model, const ClipRecord& clip, const AudioClip& audio,
                                const ReferenceImage& ref, const std::string& style_id);

}  // namespace pmmtalk
