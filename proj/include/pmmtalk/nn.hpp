#pragma once

#include "pmmtalk/autodiff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pmmtalk::nn {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) * gain, seeded from (seed, name).
Matrix uniform_init(std::uint64_t seed, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                    double fan_in, double gain = 1.0);

/// y = x W + b, with W stored as (in x out).
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  /// Use matmul_rowwise: output rows independent of the batch they sit in.
  bool row_stable = false;

  static Linear create(ParameterStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                       std::uint64_t seed, double gain = 1.0);
  Var operator()(Graph& g, Var x) const;
  Eigen::Index in_features() const { return weight->value.rows(); }
  Eigen::Index out_features() const { return weight->value.cols(); }
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNorm create(ParameterStore& store, const std::string& prefix, Eigen::Index width);
  Var operator()(Graph& g, Var x) const;
};

/// Multi-head self-attention with optional additive per-head score bias.
struct SelfAttention {
  Linear query, key, value, output;
  int heads = 1;

  static SelfAttention create(ParameterStore& store, const std::string& prefix, Eigen::Index width, int heads,
                              std::uint64_t seed);
  /// `bias`, when non-null, holds one T x T matrix per head (may contain -inf).
  Var operator()(Graph& g, Var x, const std::vector<Matrix>* bias = nullptr) const;
};

struct FeedForward {
  Linear inner, outer;

  static FeedForward create(ParameterStore& store, const std::string& prefix, Eigen::Index width,
                            Eigen::Index hidden, std::uint64_t seed);
  Var operator()(Graph& g, Var x) const;
};

/// Pre-norm bidirectional encoder layer: x + Attn(LN(x)), then x + FFN(LN(x)).
struct EncoderLayer {
  LayerNorm attn_norm, ffn_norm;
  SelfAttention attention;
  FeedForward ffn;

  static EncoderLayer create(ParameterStore& store, const std::string& prefix, Eigen::Index width, int heads,
                             Eigen::Index hidden, std::uint64_t seed);
  Var operator()(Graph& g, Var x) const;
};

/// Post-norm decoder layer with biased causal attention:
/// LN(x + Attn(x; bias)), then LN(x + FFN(x)).
struct DecoderLayer {
  SelfAttention attention;
  LayerNorm attn_norm, ffn_norm;
  FeedForward ffn;

  static DecoderLayer create(ParameterStore& store, const std::string& prefix, Eigen::Index width, int heads,
                             Eigen::Index hidden, std::uint64_t seed);
  Var operator()(Graph& g, Var x, const std::vector<Matrix>& bias) const;
};

}  // namespace pmmtalk::nn
