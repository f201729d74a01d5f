#pragma once

#include "pmmtalk/autodiff.hpp"
#include "pmmtalk/features.hpp"
#include "pmmtalk/nn.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

namespace pmmtalk {

struct AlignmentConfig {
  int d_align = 64;
  /// Initial similarity scale is 1 / init_temperature.
  double init_temperature = 0.07;
  std::uint64_t seed = 0;
};

enum class ModalityPair { IC, IA, CA };

inline constexpr std::array<ModalityPair, 3> kModalityPairs = {ModalityPair::IC, ModalityPair::IA, ModalityPair::CA};

std::string to_string(ModalityPair p);

/// Per-modality linear map to the shared width, per-modality layer norm, and
/// a learnable log-temperature.
class AlignmentHead {
 public:
  static AlignmentHead create(ParameterStore& store, const std::string& prefix, Eigen::Index audio_dim,
                              Eigen::Index image_dim, Eigen::Index text_dim, const AlignmentConfig& cfg);

  /// LN(Linear(x)) for the given modality (Audio, Image or Text).
  Var project(Graph& g, Modality modality, Var x) const;
  std::pair<Var, Var> project_pair(Graph& g, Modality mx, Var x, Modality my, Var y) const;
  Var log_temperature(Graph& g) const { return g.param(*log_temperature_); }

  double temperature_scale() const { return std::exp((*log_temperature_).value(0, 0)); }

 private:
  const nn::Linear& linear_for(Modality m) const;
  const nn::LayerNorm& norm_for(Modality m) const;

  nn::Linear audio_, image_, text_;
  nn::LayerNorm audio_norm_, image_norm_, text_norm_;
  Parameter* log_temperature_ = nullptr;
};

/// D = exp(tau) * X Y^T.
Var temporal_similarity(Var x_hat, Var y_hat, Var log_tau);

/// Symmetric row-softmax KL toward the identity label, (1/(2T)) per pair.
Var temporal_pair_loss(Var similarity);
Var temporal_loss(const std::array<Var, 3>& similarities);

/// 1 - cos(mean_rows(X), mean_rows(Y)), averaged over the pairs.
Var semantic_pair_loss(Var x_hat, Var y_hat);
Var semantic_loss(const std::array<std::pair<Var, Var>, 3>& pairs);

/// Projected pairs, similarity matrices and both alignment losses for one clip.
struct AlignmentResult {
  std::array<std::pair<Var, Var>, 3> projected;
  std::array<Var, 3> similarities;
  Var temporal;
  Var semantic;
};

AlignmentResult align(Graph& g, const AlignmentHead& head, Var audio, Var image, Var text);

}  // namespace pmmtalk
