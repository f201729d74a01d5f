#pragma once

#include "pmmtalk/autodiff.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace pmmtalk {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
};

/// First/second moments keyed by parameter name, plus the step counter.
struct AdamState {
  std::map<std::string, Matrix> m, v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter in the store, using
/// the gradients currently accumulated there.
void adam_step(ParameterStore& store, AdamState& state, const AdamConfig& cfg);

double gradient_norm(const ParameterStore& store);

}  // namespace pmmtalk
