#pragma once

#include "pmmtalk/dataset.hpp"
#include "pmmtalk/model.hpp"
#include "pmmtalk/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace pmmtalk {

// INI-style run configuration. Sections and keys (defaults in brackets):
//   [data]     root [.], fps [30], channels [32 articulation channels, comma separated]
//   [features] latent_provider/text_provider/image_provider [synthetic|file],
//              latent_dim [64], text_vocab [40], image_size [16], envelope_smoothing [0.5]
//   [model]    d_model [128], n_layers [2], n_heads [4], d_ff [256] (shared by encoders and decoder),
//              conv1_channels [4], conv2_channels [8], d_fuse [64], ppe_period [25],
//              d_align [64], init_temperature [0.07], head_init_gain [0.01], seed [0]
//   [train]    lr [1e-4], batch [1], epochs [200], seed [0], lambda1..lambda4 [1, 10, 1e-4, 1e-5],
//              grad_clip [0 = off], lr_decay [1 = off]
//   [eval]     protocol [cross_subject], partition [test], split_seed [0]
struct RunConfig {
  std::string data_root = ".";
  ModelConfig model;
  TrainConfig train;
  Protocol protocol = Protocol::CrossSubject;
  std::string partition = "test";
  std::uint64_t split_seed = 0;

  void validate() const;
};

/// Applies `section.key = value`; unknown keys throw UnknownConfigKey.
void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value);
/// "section.key=value" form used by command-line overrides.
void apply_override(RunConfig& cfg, const std::string& assignment);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Every key with its effective value, in INI form (round-trips through parse).
std::string format_run_config(const RunConfig& cfg);
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace pmmtalk
