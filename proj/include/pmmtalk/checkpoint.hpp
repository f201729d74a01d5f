#pragma once

#include "pmmtalk/model.hpp"
#include "pmmtalk/optimizer.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace pmmtalk {

// Container layout ("PMMC1"):
//   5 bytes   magic "PMMC1"
//   u64 LE    header length H
//   H bytes   JSON header: {"format", "step", "styles", "model", "run", "tensors": [
//               {"name", "group": param|adam_m|adam_v, "rows", "cols", "offset"} ...]}
//   payload   float32 LE, row-major, offsets in floats from payload start
struct Checkpoint {
  std::unique_ptr<PmmTalkModel> model;
  AdamState adam;
  /// Free-form run configuration echo (training settings, source config).
  nlohmann::ordered_json run;
};

std::string encode_checkpoint(const PmmTalkModel& model, const AdamState* adam, const nlohmann::ordered_json& run);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const PmmTalkModel& model, const AdamState* adam = nullptr,
                     const nlohmann::ordered_json& run = nlohmann::ordered_json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pmmtalk
