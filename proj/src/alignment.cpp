#include "pmmtalk/alignment.hpp"

#include "pmmtalk/error.hpp"

namespace pmmtalk {

std::string to_string(ModalityPair p) {
  switch (p) {
    case ModalityPair::IC: return "IC";
    case ModalityPair::IA: return "IA";
    case ModalityPair::CA: return "CA";
  }
  return "?";
}

AlignmentHead AlignmentHead::create(ParameterStore& store, const std::string& prefix, Eigen::Index audio_dim,
                                    Eigen::Index image_dim, Eigen::Index text_dim, const AlignmentConfig& cfg) {
  if (cfg.d_align <= 0) throw Error(ErrorKind::BadConfigValue, "d_align must be positive");
  if (!(cfg.init_temperature > 0.0)) throw Error(ErrorKind::BadConfigValue, "temperature must be positive");
  AlignmentHead h;
  h.audio_ = nn::Linear::create(store, prefix + ".audio", audio_dim, cfg.d_align, cfg.seed);
  h.image_ = nn::Linear::create(store, prefix + ".image", image_dim, cfg.d_align, cfg.seed);
  h.text_ = nn::Linear::create(store, prefix + ".text", text_dim, cfg.d_align, cfg.seed);
  h.audio_norm_ = nn::LayerNorm::create(store, prefix + ".audio_norm", cfg.d_align);
  h.image_norm_ = nn::LayerNorm::create(store, prefix + ".image_norm", cfg.d_align);
  h.text_norm_ = nn::LayerNorm::create(store, prefix + ".text_norm", cfg.d_align);
  h.log_temperature_ =
      &store.add(prefix + ".log_temperature", Matrix::Constant(1, 1, std::log(1.0 / cfg.init_temperature)));
  return h;
}

const nn::Linear& AlignmentHead::linear_for(Modality m) const {
  switch (m) {
    case Modality::Audio: return audio_;
    case Modality::Image: return image_;
    case Modality::Text: return text_;
    default: throw Error(ErrorKind::PreconditionFailed, "no alignment projection for " + to_string(m));
  }
}

const nn::LayerNorm& AlignmentHead::norm_for(Modality m) const {
  switch (m) {
    case Modality::Audio: return audio_norm_;
    case Modality::Image: return image_norm_;
    case Modality::Text: return text_norm_;
    default: throw Error(ErrorKind::PreconditionFailed, "no alignment norm for " + to_string(m));
  }
}

Var AlignmentHead::project(Graph& g, Modality modality, Var x) const {
  return norm_for(modality)(g, linear_for(modality)(g, x));
}

std::pair<Var, Var> AlignmentHead::project_pair(Graph& g, Modality mx, Var x, Modality my, Var y) const {
  if (x.rows() != y.rows()) {
    throw Error(ErrorKind::LengthMismatch, "pair streams have " + std::to_string(x.rows()) + " and " +
                                               std::to_string(y.rows()) + " frames");
  }
  return {project(g, mx, x), project(g, my, y)};
}

Var temporal_similarity(Var x_hat, Var y_hat, Var log_tau) {
  if (x_hat.rows() != y_hat.rows() || x_hat.cols() != y_hat.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "similarity operands must share frames and width");
  }
  return scale_by(matmul_nt(x_hat, y_hat), exp(log_tau));
}

Var temporal_pair_loss(Var similarity) {
  if (similarity.rows() != similarity.cols()) throw Error(ErrorKind::DimensionMismatch, "similarity must be square");
  Graph& g = *similarity.graph();
  const Eigen::Index n = similarity.rows();
  // Label distribution goes through the same kernels, so D == I gives exactly 0.
  Var label = g.constant(Matrix::Identity(n, n));
  Var q_var = softmax_rows(label);
  Var log_q_var = log_softmax_rows(label);

  Var log_p = log_softmax_rows(similarity);
  Var p = softmax_rows(similarity);
  // KL(Q||P) + KL(P||Q) = sum (P - Q) .* (logP - logQ)
  Var kl = sum(hadamard(sub(p, q_var), sub(log_p, log_q_var)));
  return scale(kl, 1.0 / (2.0 * static_cast<double>(n)));
}

Var temporal_loss(const std::array<Var, 3>& similarities) {
  Var total = temporal_pair_loss(similarities[0]);
  for (std::size_t i = 1; i < similarities.size(); ++i) total = add(total, temporal_pair_loss(similarities[i]));
  return scale(total, 1.0 / 3.0);
}

Var semantic_pair_loss(Var x_hat, Var y_hat) {
  Var mx = mean_rows(x_hat);
  Var my = mean_rows(y_hat);
  if (mx.value().norm() < 1e-12 || my.value().norm() < 1e-12) {
    throw Error(ErrorKind::ZeroVector, "frame-mean vector has zero norm");
  }
  return add_scalar(scale(cosine_similarity(mx, my), -1.0), 1.0);
}

Var semantic_loss(const std::array<std::pair<Var, Var>, 3>& pairs) {
  Var total = semantic_pair_loss(pairs[0].first, pairs[0].second);
  for (std::size_t i = 1; i < pairs.size(); ++i) total = add(total, semantic_pair_loss(pairs[i].first, pairs[i].second));
  return scale(total, 1.0 / 3.0);
}

AlignmentResult align(Graph& g, const AlignmentHead& head, Var audio, Var image, Var text) {
  if (audio.rows() != image.rows() || audio.rows() != text.rows()) {
    throw Error(ErrorKind::LengthMismatch, "modality streams must share the frame count");
  }
  Var a = head.project(g, Modality::Audio, audio);
  Var i = head.project(g, Modality::Image, image);
  Var c = head.project(g, Modality::Text, text);
  AlignmentResult r;
  r.projected = {std::pair{i, c}, std::pair{i, a}, std::pair{c, a}};
  Var log_tau = head.log_temperature(g);
  for (std::size_t k = 0; k < 3; ++k) {
    r.similarities[k] = temporal_similarity(r.projected[k].first, r.projected[k].second, log_tau);
  }
  r.temporal = temporal_loss(r.similarities);
  r.semantic = semantic_loss(r.projected);
  return r;
}

}  // namespace pmmtalk
