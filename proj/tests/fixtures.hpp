#pragma once

#include "pmmtalk/model.hpp"
#include "pmmtalk/rng.hpp"
#include "pmmtalk/training.hpp"

#include <filesystem>
#include <string>

namespace fixtures {

using namespace pmmtalk;

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

// Under 10k parameters, every mechanism present.
inline ModelConfig tiny_config(std::uint64_t seed = 3) {
  ModelConfig c;
  c.features.latent_dim = 8;
  c.features.text_vocab = 6;
  c.features.image_size = 8;
  c.encoder.d_model = 8;
  c.encoder.n_layers = 1;
  c.encoder.n_heads = 2;
  c.encoder.d_ff = 12;
  c.encoder.conv1_channels = 2;
  c.encoder.conv2_channels = 3;
  c.decoder.d_fuse = 4;
  c.decoder.d_model = 8;
  c.decoder.n_layers = 1;
  c.decoder.n_heads = 2;
  c.decoder.d_ff = 12;
  c.decoder.head_init_gain = 1.0;
  c.alignment.d_align = 4;
  c.seed = seed;
  return c;
}

// Random but well-formed provider outputs and targets for `subject`.
inline PreparedClip random_clip(Rng& rng, const ModelConfig& cfg, Eigen::Index frames, const std::string& subject) {
  PreparedClip c;
  c.record.clip_id = subject + "/random";
  c.record.subject_id = subject;
  c.features.latent.values = random_matrix(rng, frames, cfg.features.latent_dim, 0.0, 2.0);
  c.features.latent.modality = Modality::LatentAudio;
  Matrix text = random_matrix(rng, frames, cfg.features.text_vocab, 0.0, 1.0);
  for (Eigen::Index t = 0; t < frames; ++t) text.row(t) /= text.row(t).sum();
  c.features.text.values = text;
  c.features.text.modality = Modality::Text;
  c.features.lips.size = cfg.features.image_size;
  c.features.lips.pixels = random_matrix(rng, frames, cfg.features.image_size * cfg.features.image_size, 0.0, 1.0);
  c.features.lips.apertures = Eigen::VectorXd::Zero(frames);
  c.target = random_matrix(rng, frames, static_cast<Eigen::Index>(cfg.channels.size()), 0.0, 1.0);
  return c;
}

// Manifest with `males` + `females` subjects, `clips` clips each; no files behind it.
inline Manifest fake_manifest(int males, int females, int clips = 2) {
  Manifest m;
  int n = 0;
  for (int k = 0; k < males + females; ++k) {
    const std::string subject = "p" + std::to_string(100 + n++);
    for (int c = 0; c < clips; ++c) {
      ClipRecord r;
      r.subject_id = subject;
      r.clip_id = subject + "/c" + std::to_string(c);
      r.gender = k < males ? Gender::Male : Gender::Female;
      r.audio_path = r.clip_id + ".wav";
      r.coefficients_path = r.clip_id + ".csv";
      m.push_back(r);
    }
  }
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pmmtalk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
