#include "pmmtalk/evaluation.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/losses.hpp"

#include <cstdio>

namespace pmmtalk {

EvalReport aggregate(std::vector<ClipMetrics> per_clip, const std::string& protocol, const std::string& partition) {
  if (per_clip.empty()) throw Error(ErrorKind::EmptyPartition, "partition '" + partition + "' has no clips");
  EvalReport r;
  r.protocol = protocol;
  r.partition = partition;
  r.clips = per_clip.size();
  double lve_sum = 0.0, ale_sum = 0.0;
  for (const auto& c : per_clip) {
    r.frames += c.frames;
    lve_sum += c.lve * static_cast<double>(c.frames);
    ale_sum += c.ale * static_cast<double>(c.frames);
  }
  r.lve = lve_sum / static_cast<double>(r.frames);
  r.ale = ale_sum / static_cast<double>(r.frames);
  r.per_clip = std::move(per_clip);
  return r;
}

ClipMetrics evaluate_clip(const PmmTalkModel& model, const PreparedClip& clip) {
  ClipMetrics m;
  m.clip_id = clip.record.clip_id;
  m.frames = clip.frames();
  try {
    std::vector<std::string> styles;
    if (model.has_style(clip.record.subject_id)) styles.push_back(clip.record.subject_id);
    else styles = model.styles();
    for (const auto& s : styles) {
      const Matrix pred = model.predict(clip.features, s);
      m.lve += lve(pred, clip.target);
      m.ale += ale(pred, clip.target);
    }
    m.lve /= static_cast<double>(styles.size());
    m.ale /= static_cast<double>(styles.size());
  } catch (const Error& e) {
    throw Error(e.kind(), clip.record.clip_id + ": " + e.what());
  }
  return m;
}

EvalReport evaluate_prepared(const PmmTalkModel& model, const std::vector<PreparedClip>& clips,
                             const std::string& protocol, const std::string& partition) {
  std::vector<ClipMetrics> per_clip;
  per_clip.reserve(clips.size());
  for (const auto& c : clips) per_clip.push_back(evaluate_clip(model, c));
  return aggregate(std::move(per_clip), protocol, partition);
}

EvalReport evaluate_split(const PmmTalkModel& model, const Manifest& manifest, const SplitSpec& split,
                          const std::string& partition) {
  const std::vector<std::string>* ids = nullptr;
  if (partition == "val") ids = &split.val;
  else if (partition == "test") ids = &split.test;
  else throw Error(ErrorKind::BadConfigValue, "partition must be val or test, got '" + partition + "'");
  if (ids->empty()) throw Error(ErrorKind::EmptyPartition, "partition '" + partition + "' has no clips");
  const auto clips = prepare_clips(select_clips(manifest, *ids), model.config());
  return evaluate_prepared(model, clips, to_string(split.protocol), partition);
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["protocol"] = r.protocol;
  j["partition"] = r.partition;
  j["clips"] = r.clips;
  j["frames"] = r.frames;
  j["lve"] = r.lve;
  j["ale"] = r.ale;
  j["lve_x1e-2"] = r.lve * 100.0;
  j["ale_x1e-2"] = r.ale * 100.0;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& c : r.per_clip) {
    rows.push_back({{"clip_id", c.clip_id}, {"frames", c.frames}, {"lve", c.lve}, {"ale", c.ale}});
  }
  j["per_clip"] = std::move(rows);
  return j;
}

std::string per_clip_csv(const EvalReport& r) {
  std::string out = "clip_id,frames,lve,ale\n";
  char buf[128];
  for (const auto& c : r.per_clip) {
    std::snprintf(buf, sizeof buf, ",%lld,%.9g,%.9g\n", static_cast<long long>(c.frames), c.lve, c.ale);
    out += c.clip_id + buf;
  }
  return out;
}

}  // namespace pmmtalk
