#include "pmmtalk/nn.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/rng.hpp"

#include <cmath>

namespace pmmtalk::nn {

Matrix uniform_init(std::uint64_t seed, const std::string& name, Eigen::Index rows, Eigen::Index cols,
                    double fan_in, double gain) {
  Rng rng(derive_seed(seed, name));
  const double bound = gain / std::sqrt(fan_in);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

Linear Linear::create(ParameterStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                      std::uint64_t seed, double gain) {
  Linear l;
  l.weight = &store.add(prefix + ".weight", uniform_init(seed, prefix + ".weight", in, out, double(in), gain));
  l.bias = &store.add(prefix + ".bias", Matrix::Zero(1, out));
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  if (x.cols() != weight->value.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "linear layer expects width " + std::to_string(weight->value.rows()) +
                                                  ", got " + std::to_string(x.cols()));
  }
  const Var w = g.param(*weight);
  return add_row(row_stable ? matmul_rowwise(x, w) : matmul(x, w), g.param(*bias));
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& prefix, Eigen::Index width) {
  LayerNorm ln;
  ln.gain = &store.add(prefix + ".gain", Matrix::Ones(1, width));
  ln.bias = &store.add(prefix + ".bias", Matrix::Zero(1, width));
  return ln;
}

Var LayerNorm::operator()(Graph& g, Var x) const { return layer_norm_rows(x, g.param(*gain), g.param(*bias)); }

SelfAttention SelfAttention::create(ParameterStore& store, const std::string& prefix, Eigen::Index width,
                                    int heads, std::uint64_t seed) {
  if (heads <= 0 || width % heads != 0) {
    throw Error(ErrorKind::BadConfigValue, "attention width must be divisible by the head count");
  }
  SelfAttention a;
  a.query = Linear::create(store, prefix + ".query", width, width, seed);
  a.key = Linear::create(store, prefix + ".key", width, width, seed);
  a.value = Linear::create(store, prefix + ".value", width, width, seed);
  a.output = Linear::create(store, prefix + ".output", width, width, seed);
  a.heads = heads;
  return a;
}

Var SelfAttention::operator()(Graph& g, Var x, const std::vector<Matrix>* bias) const {
  const Eigen::Index width = x.cols();
  const Eigen::Index head_width = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));
  Var q = query(g, x);
  Var k = key(g, x);
  Var v = value(g, x);
  std::vector<Var> per_head;
  per_head.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * head_width, head_width);
    Var kh = slice_cols(k, h * head_width, head_width);
    Var vh = slice_cols(v, h * head_width, head_width);
    Var scores = scale(matmul_nt(qh, kh), inv_sqrt);
    if (bias != nullptr) scores = add(scores, g.constant((*bias)[static_cast<std::size_t>(h)]));
    per_head.push_back(matmul(softmax_rows(scores), vh));
  }
  return output(g, heads == 1 ? per_head.front() : concat_cols(per_head));
}

FeedForward FeedForward::create(ParameterStore& store, const std::string& prefix, Eigen::Index width,
                                Eigen::Index hidden, std::uint64_t seed) {
  return FeedForward{Linear::create(store, prefix + ".inner", width, hidden, seed),
                     Linear::create(store, prefix + ".outer", hidden, width, seed)};
}

Var FeedForward::operator()(Graph& g, Var x) const { return outer(g, gelu(inner(g, x))); }

EncoderLayer EncoderLayer::create(ParameterStore& store, const std::string& prefix, Eigen::Index width,
                                  int heads, Eigen::Index hidden, std::uint64_t seed) {
  EncoderLayer layer;
  layer.attn_norm = LayerNorm::create(store, prefix + ".attn_norm", width);
  layer.attention = SelfAttention::create(store, prefix + ".attn", width, heads, seed);
  layer.ffn_norm = LayerNorm::create(store, prefix + ".ffn_norm", width);
  layer.ffn = FeedForward::create(store, prefix + ".ffn", width, hidden, seed);
  return layer;
}

Var EncoderLayer::operator()(Graph& g, Var x) const {
  x = add(x, attention(g, attn_norm(g, x)));
  return add(x, ffn(g, ffn_norm(g, x)));
}

DecoderLayer DecoderLayer::create(ParameterStore& store, const std::string& prefix, Eigen::Index width,
                                  int heads, Eigen::Index hidden, std::uint64_t seed) {
  DecoderLayer layer;
  layer.attention = SelfAttention::create(store, prefix + ".attn", width, heads, seed);
  layer.attn_norm = LayerNorm::create(store, prefix + ".attn_norm", width);
  layer.ffn = FeedForward::create(store, prefix + ".ffn", width, hidden, seed);
  layer.ffn_norm = LayerNorm::create(store, prefix + ".ffn_norm", width);
  return layer;
}

Var DecoderLayer::operator()(Graph& g, Var x, const std::vector<Matrix>& bias) const {
  x = attn_norm(g, add(x, attention(g, x, &bias)));
  return ffn_norm(g, add(x, ffn(g, x)));
}

}  // namespace pmmtalk::nn
