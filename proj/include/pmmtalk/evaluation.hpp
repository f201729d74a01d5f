#pragma once

#include "pmmtalk/dataset.hpp"
#include "pmmtalk/model.hpp"
#include "pmmtalk/training.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pmmtalk {

struct ClipMetrics {
  std::string clip_id;
  Eigen::Index frames = 0;
  double lve = 0.0;
  double ale = 0.0;
};

struct EvalReport {
  std::string protocol;
  std::string partition;
  std::size_t clips = 0;
  Eigen::Index frames = 0;
  double lve = 0.0;
  double ale = 0.0;
  std::vector<ClipMetrics> per_clip;
};

/// Frame-weighted aggregate of per-clip metrics.
EvalReport aggregate(std::vector<ClipMetrics> per_clip, const std::string& protocol, const std::string& partition);

/// Metrics for one prepared clip. A subject without a learned style is
/// predicted once per training style and the metrics are averaged.
ClipMetrics evaluate_clip(const PmmTalkModel& model, const PreparedClip& clip);

EvalReport evaluate_prepared(const PmmTalkModel& model, const std::vector<PreparedClip>& clips,
                             const std::string& protocol, const std::string& partition);

/// partition is "val" or "test".
EvalReport evaluate_split(const PmmTalkModel& model, const Manifest& manifest, const SplitSpec& split,
                          const std::string& partition);

/// Raw metrics plus the x1e-2 display values, stable key order.
nlohmann::ordered_json to_json(const EvalReport& report);
std::string per_clip_csv(const EvalReport& report);

}  // namespace pmmtalk
