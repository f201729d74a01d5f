#include "pmmtalk/dataset.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"
#include "pmmtalk/rng.hpp"
#include "pmmtalk/wav.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace pmmtalk {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& livelink_channels() {
  static const std::vector<std::string> kChannels = {
      "EyeBlinkLeft",      "EyeLookDownLeft",    "EyeLookInLeft",      "EyeLookOutLeft",   "EyeLookUpLeft",
      "EyeSquintLeft",     "EyeWideLeft",        "EyeBlinkRight",      "EyeLookDownRight", "EyeLookInRight",
      "EyeLookOutRight",   "EyeLookUpRight",     "EyeSquintRight",     "EyeWideRight",     "JawForward",
      "JawRight",          "JawLeft",            "JawOpen",            "MouthClose",       "MouthFunnel",
      "MouthPucker",       "MouthRight",         "MouthLeft",          "MouthSmileLeft",   "MouthSmileRight",
      "MouthFrownLeft",    "MouthFrownRight",    "MouthDimpleLeft",    "MouthDimpleRight", "MouthStretchLeft",
      "MouthStretchRight", "MouthRollLower",     "MouthRollUpper",     "MouthShrugLower",  "MouthShrugUpper",
      "MouthPressLeft",    "MouthPressRight",    "MouthLowerDownLeft", "MouthLowerDownRight",
      "MouthUpperUpLeft",  "MouthUpperUpRight",  "BrowDownLeft",       "BrowDownRight",    "BrowInnerUp",
      "BrowOuterUpLeft",   "BrowOuterUpRight",   "CheekPuff",          "CheekSquintLeft",  "CheekSquintRight",
      "NoseSneerLeft",     "NoseSneerRight",     "TongueOut",          "HeadYaw",          "HeadPitch",
      "HeadRoll",          "LeftEyeYaw",         "LeftEyePitch",       "LeftEyeRoll",      "RightEyeYaw",
      "RightEyePitch",     "RightEyeRoll"};
  return kChannels;
}

const std::vector<std::string>& default_articulation_channels() {
  static const std::vector<std::string> kChannels = {
      "JawForward",         "JawLeft",             "JawRight",         "JawOpen",          "MouthClose",
      "MouthFunnel",        "MouthPucker",         "MouthLeft",        "MouthRight",       "MouthSmileLeft",
      "MouthSmileRight",    "MouthFrownLeft",      "MouthFrownRight",  "MouthDimpleLeft",  "MouthDimpleRight",
      "MouthStretchLeft",   "MouthStretchRight",   "MouthRollLower",   "MouthRollUpper",   "MouthShrugLower",
      "MouthShrugUpper",    "MouthPressLeft",      "MouthPressRight",  "MouthLowerDownLeft",
      "MouthLowerDownRight", "MouthUpperUpLeft",   "MouthUpperUpRight", "CheekPuff",       "CheekSquintLeft",
      "CheekSquintRight",   "NoseSneerLeft",       "NoseSneerRight"};
  return kChannels;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::ValueOutOfRange, "cannot parse '" + text + "' (" + context + ")");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

int livelink_channel_index(const std::string& name) {
  static const std::map<std::string, int> kIndex = [] {
    std::map<std::string, int> m;
    const auto& names = livelink_channels();
    for (std::size_t i = 0; i < names.size(); ++i) m[lower(names[i])] = static_cast<int>(i);
    return m;
  }();
  auto it = kIndex.find(lower(name));
  return it == kIndex.end() ? -1 : it->second;
}

std::string to_string(Gender g) { return g == Gender::Male ? "male" : "female"; }

std::string to_string(Protocol p) { return p == Protocol::CrossSubject ? "cross_subject" : "cross_gender"; }

Protocol parse_protocol(const std::string& text) {
  if (text == "cross_subject") return Protocol::CrossSubject;
  if (text == "cross_gender") return Protocol::CrossGender;
  throw Error(ErrorKind::BadConfigValue, "unknown protocol '" + text + "'");
}

double parse_timecode(const std::string& text, double timecode_rate) {
  if (text.find(':') == std::string::npos) return parse_number(text, "timecode");
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, ':')) parts.push_back(part);
  if (parts.size() != 4) throw Error(ErrorKind::NonMonotonicTimecode, "malformed timecode '" + text + "'");
  const double h = parse_number(parts[0], "timecode hours");
  const double m = parse_number(parts[1], "timecode minutes");
  const double s = parse_number(parts[2], "timecode seconds");
  const double f = parse_number(parts[3], "timecode frames");
  return h * 3600.0 + m * 60.0 + s + f / timecode_rate;
}

std::string format_timecode(double seconds, double timecode_rate) {
  // Millisecond-of-a-frame resolution, matching the Live Link "FF.fff" field.
  const long long milli_frames = std::llround(seconds * timecode_rate * 1000.0);
  const long long per_second = std::llround(timecode_rate * 1000.0);
  const long long whole_seconds = milli_frames / per_second;
  const long long rem = milli_frames % per_second;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld:%02lld.%03lld", whole_seconds / 3600, (whole_seconds / 60) % 60,
                whole_seconds % 60, rem / 1000, rem % 1000);
  return buf;
}

RawCoefficientTrack parse_livelink_csv(const std::string& text, double timecode_rate) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MissingColumn, "empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  int timecode_col = -1;
  int count_col = -1;
  std::vector<int> channel_col(kLivelinkChannelCount, -1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string key = lower(header[c]);
    if (key == "timecode") {
      timecode_col = static_cast<int>(c);
    } else if (key == "blendshapecount") {
      count_col = static_cast<int>(c);
    } else if (int idx = livelink_channel_index(header[c]); idx >= 0) {
      channel_col[static_cast<std::size_t>(idx)] = static_cast<int>(c);
    }
  }
  if (timecode_col < 0) throw Error(ErrorKind::MissingColumn, "header lacks Timecode");
  if (count_col < 0) throw Error(ErrorKind::MissingColumn, "header lacks BlendShapeCount");
  for (int i = 0; i < kLivelinkChannelCount; ++i) {
    if (channel_col[static_cast<std::size_t>(i)] < 0) {
      throw Error(ErrorKind::MissingColumn, "header lacks channel " + livelink_channels()[static_cast<std::size_t>(i)]);
    }
  }

  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      throw Error(ErrorKind::MissingColumn, "row " + std::to_string(line_no) + " has too few cells");
    }
    const double t = parse_timecode(cells[static_cast<std::size_t>(timecode_col)], timecode_rate);
    if (!times.empty() && !(t > times.back())) {
      throw Error(ErrorKind::NonMonotonicTimecode, "row " + std::to_string(line_no) + " timecode does not increase");
    }
    std::vector<double> row(kLivelinkChannelCount);
    for (int i = 0; i < kLivelinkChannelCount; ++i) {
      const auto& cell = cells[static_cast<std::size_t>(channel_col[static_cast<std::size_t>(i)])];
      const double v = parse_number(cell, "row " + std::to_string(line_no));
      if (!(v >= -1e-6 && v <= 1.0 + 1e-6)) {
        throw Error(ErrorKind::ValueOutOfRange, "row " + std::to_string(line_no) + " channel " +
                                                    livelink_channels()[static_cast<std::size_t>(i)] + " = " + cell);
      }
      row[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 1.0);
    }
    times.push_back(t);
    rows.push_back(std::move(row));
  }

  RawCoefficientTrack track;
  track.timecodes = std::move(times);
  track.source_rate = timecode_rate;
  track.values.resize(static_cast<Eigen::Index>(rows.size()), kLivelinkChannelCount);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < kLivelinkChannelCount; ++c) {
      track.values(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
  }
  return track;
}

RawCoefficientTrack ingest_livelink_csv(const std::filesystem::path& path, double timecode_rate) {
  try {
    return parse_livelink_csv(io::read_file(path), timecode_rate);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + std::string(e.what()));
  }
}

RawCoefficientTrack resample_coefficients(const RawCoefficientTrack& track, double target_fps) {
  if (!(target_fps > 0.0)) throw Error(ErrorKind::PreconditionFailed, "target fps must be positive");
  if (track.frames() < 2) throw Error(ErrorKind::TooShort, "resampling needs at least two frames");
  const auto& tc = track.timecodes;
  const double first = tc.front();
  const double span = tc.back() - first;
  const auto count = static_cast<Eigen::Index>(std::floor(span * target_fps + 1e-9)) + 1;

  RawCoefficientTrack out;
  out.source_rate = target_fps;
  out.timecodes.resize(static_cast<std::size_t>(count));
  out.values.resize(count, track.values.cols());
  std::size_t seg = 0;
  for (Eigen::Index k = 0; k < count; ++k) {
    const double t = std::min(first + static_cast<double>(k) / target_fps, tc.back());
    while (seg + 2 < tc.size() && tc[seg + 1] < t) ++seg;
    const double t0 = tc[seg];
    const double t1 = tc[seg + 1];
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    out.timecodes[static_cast<std::size_t>(k)] = first + static_cast<double>(k) / target_fps;
    // a + w (b - a) keeps constant stretches exact
    const auto a = track.values.row(static_cast<Eigen::Index>(seg));
    const auto b = track.values.row(static_cast<Eigen::Index>(seg + 1));
    out.values.row(k) = w == 1.0 ? Eigen::RowVectorXd(b) : Eigen::RowVectorXd(a + w * (b - a));
  }
  return out;
}

BlendshapeSequence select_channels(const RawCoefficientTrack& track, const std::vector<std::string>& channels,
                                   double fps) {
  std::set<std::string> seen;
  BlendshapeSequence seq;
  seq.fps = fps;
  seq.values.resize(track.frames(), static_cast<Eigen::Index>(channels.size()));
  for (std::size_t j = 0; j < channels.size(); ++j) {
    const int idx = livelink_channel_index(channels[j]);
    if (idx < 0) throw Error(ErrorKind::UnknownChannel, "no channel named " + channels[j]);
    if (!seen.insert(lower(channels[j])).second) {
      throw Error(ErrorKind::UnknownChannel, "channel requested twice: " + channels[j]);
    }
    seq.values.col(static_cast<Eigen::Index>(j)) = track.values.col(idx);
  }
  seq.channel_names = channels;
  return seq;
}

std::string format_blendshape_csv(const BlendshapeSequence& seq) {
  if (!(seq.fps > 0.0)) throw Error(ErrorKind::PreconditionFailed, "sequence fps must be positive");
  if (static_cast<Eigen::Index>(seq.channel_names.size()) != seq.values.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "channel names do not match the value columns");
  }
  std::vector<int> target(seq.channel_names.size());
  for (std::size_t j = 0; j < seq.channel_names.size(); ++j) {
    target[j] = livelink_channel_index(seq.channel_names[j]);
    if (target[j] < 0) throw Error(ErrorKind::UnknownChannel, "cannot export channel " + seq.channel_names[j]);
  }
  std::string out = "Timecode,BlendShapeCount";
  for (const auto& name : livelink_channels()) out += "," + name;
  out += "\n";
  std::vector<double> row(kLivelinkChannelCount);
  for (Eigen::Index t = 0; t < seq.frames(); ++t) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double v = seq.values(t, static_cast<Eigen::Index>(j));
      if (!std::isfinite(v)) throw Error(ErrorKind::ValueOutOfRange, "non-finite value in sequence");
      row[static_cast<std::size_t>(target[j])] = std::clamp(v, 0.0, 1.0);
    }
    out += format_timecode(static_cast<double>(t) / seq.fps);
    out += "," + std::to_string(kLivelinkChannelCount);
    for (double v : row) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

void export_blendshape_csv(const BlendshapeSequence& seq, const std::filesystem::path& path) {
  io::atomic_write(path, format_blendshape_csv(seq));
}

Eigen::VectorXd linear_resample(const Eigen::VectorXd& input, int from_rate, int to_rate) {
  if (from_rate == to_rate) return input;
  const auto n = input.size();
  const auto m = static_cast<Eigen::Index>((static_cast<long long>(n) * to_rate) / from_rate);
  Eigen::VectorXd out(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    // Exact rational position k * from / to.
    const long long num = static_cast<long long>(k) * from_rate;
    const auto i0 = static_cast<Eigen::Index>(num / to_rate);
    const double frac = static_cast<double>(num % to_rate) / to_rate;
    const Eigen::Index i1 = std::min(i0 + 1, n - 1);
    out(k) = frac == 0.0 ? input(i0) : (1.0 - frac) * input(i0) + frac * input(i1);
  }
  return out;
}

AudioClip load_audio(const std::filesystem::path& path, int target_rate, const Resampler& resampler) {
  wav::WavData data;
  try {
    data = wav::read(path);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + std::string(e.what()));
  }
  Eigen::VectorXd mono = data.samples.rowwise().mean();
  AudioClip clip;
  clip.sample_rate = target_rate;
  clip.samples = resampler(mono, data.sample_rate, target_rate);
  if (clip.samples.size() == 0) throw Error(ErrorKind::EmptyAudio, path.string() + " has no samples after resampling");
  return clip;
}

// --- manifests -----------------------------------------------------------

Manifest build_manifest(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorKind::IoFailure, "corpus root " + root.string() + " is not a directory");
  std::vector<fs::path> subjects;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) subjects.push_back(entry.path());
  }
  std::sort(subjects.begin(), subjects.end());

  Manifest manifest;
  for (const auto& dir : subjects) {
    const std::string subject = dir.filename().string();
    std::optional<Gender> gender;
    std::map<std::string, std::string> transcripts;
    if (fs::exists(dir / "meta.json")) {
      nlohmann::json meta;
      try {
        meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::IoFailure, (dir / "meta.json").string() + ": " + e.what());
      }
      if (meta.contains("gender") && !meta["gender"].is_null()) {
        const auto g = meta["gender"].get<std::string>();
        if (g == "male") gender = Gender::Male;
        else if (g == "female") gender = Gender::Female;
        else throw Error(ErrorKind::MissingGender, (dir / "meta.json").string() + ": unknown gender '" + g + "'");
      }
      if (meta.contains("transcripts")) {
        for (const auto& [k, v] : meta["transcripts"].items()) transcripts[k] = v.get<std::string>();
      }
    }
    std::set<std::string> audio, coeffs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto& p = entry.path();
      if (p.extension() == ".wav") audio.insert(p.stem().string());
      if (p.extension() == ".csv") coeffs.insert(p.stem().string());
    }
    for (const auto& stem : audio) {
      if (!coeffs.count(stem)) {
        throw Error(ErrorKind::OrphanFile, (dir / (stem + ".wav")).string() + " has no coefficient CSV");
      }
    }
    for (const auto& stem : coeffs) {
      if (!audio.count(stem)) throw Error(ErrorKind::OrphanFile, (dir / (stem + ".csv")).string() + " has no audio");
    }
    for (const auto& stem : audio) {
      ClipRecord rec;
      rec.clip_id = subject + "/" + stem;
      rec.subject_id = subject;
      rec.gender = gender;
      if (auto it = transcripts.find(stem); it != transcripts.end()) rec.transcript = it->second;
      rec.audio_path = (dir / (stem + ".wav")).string();
      rec.coefficients_path = (dir / (stem + ".csv")).string();
      manifest.push_back(std::move(rec));
    }
  }
  std::sort(manifest.begin(), manifest.end(),
            [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; });
  return manifest;
}

std::string format_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& rec : manifest) {
    ordered_json j;
    j["clip_id"] = rec.clip_id;
    j["subject_id"] = rec.subject_id;
    j["gender"] = rec.gender ? ordered_json(to_string(*rec.gender)) : ordered_json(nullptr);
    j["transcript"] = rec.transcript ? ordered_json(*rec.transcript) : ordered_json(nullptr);
    j["audio_path"] = rec.audio_path;
    j["coefficients_path"] = rec.coefficients_path;
    out += j.dump() + "\n";
  }
  return out;
}

Manifest parse_manifest(const std::string& text) {
  Manifest manifest;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClipRecord rec;
      rec.clip_id = j.at("clip_id").get<std::string>();
      rec.subject_id = j.at("subject_id").get<std::string>();
      if (j.contains("gender") && !j["gender"].is_null()) {
        rec.gender = j["gender"].get<std::string>() == "male" ? Gender::Male : Gender::Female;
      }
      if (j.contains("transcript") && !j["transcript"].is_null()) rec.transcript = j["transcript"].get<std::string>();
      rec.audio_path = j.at("audio_path").get<std::string>();
      rec.coefficients_path = j.at("coefficients_path").get<std::string>();
      if (!ids.insert(rec.clip_id).second) {
        throw Error(ErrorKind::PreconditionFailed, "duplicate clip_id " + rec.clip_id + " in manifest");
      }
      manifest.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::IoFailure, std::string("malformed manifest line: ") + e.what());
    }
  }
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  io::atomic_write(path, format_manifest(manifest));
}

Manifest read_manifest(const std::filesystem::path& path) { return parse_manifest(io::read_file(path)); }

// --- splits ----------------------------------------------------------------

namespace {

std::vector<std::string> clips_of(const Manifest& manifest, const std::set<std::string>& subjects) {
  std::vector<std::string> ids;
  for (const auto& rec : manifest) {
    if (subjects.count(rec.subject_id)) ids.push_back(rec.clip_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> subjects_of(const Manifest& manifest) {
  std::set<std::string> s;
  for (const auto& rec : manifest) s.insert(rec.subject_id);
  return {s.begin(), s.end()};
}

}  // namespace

SplitSpec split_cross_subject(const Manifest& manifest, std::uint64_t seed) {
  auto subjects = subjects_of(manifest);
  if (subjects.size() < 5) {
    throw Error(ErrorKind::TooFewSubjects,
                "cross_subject needs at least 5 subjects, manifest has " + std::to_string(subjects.size()));
  }
  Rng rng(seed);
  rng.shuffle(subjects);
  const std::size_t n_val = subjects.size() / 5;
  const std::size_t n_test = subjects.size() / 5;
  const std::set<std::string> val(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::set<std::string> test(subjects.begin() + static_cast<std::ptrdiff_t>(n_val),
                                   subjects.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  const std::set<std::string> train(subjects.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), subjects.end());
  return SplitSpec{Protocol::CrossSubject, clips_of(manifest, train), clips_of(manifest, val),
                   clips_of(manifest, test), seed};
}

SplitSpec split_cross_gender(const Manifest& manifest, std::uint64_t seed) {
  std::map<std::string, Gender> gender_of;
  for (const auto& rec : manifest) {
    if (!rec.gender) throw Error(ErrorKind::MissingGender, "clip " + rec.clip_id + " has no gender attribute");
    auto [it, inserted] = gender_of.emplace(rec.subject_id, *rec.gender);
    if (!inserted && it->second != *rec.gender) {
      throw Error(ErrorKind::MissingGender, "subject " + rec.subject_id + " has conflicting gender attributes");
    }
  }
  std::set<std::string> males;
  std::vector<std::string> females;
  for (const auto& [subject, g] : gender_of) {
    if (g == Gender::Male) males.insert(subject);
    else females.push_back(subject);
  }
  if (males.empty() || females.size() < 2) {
    throw Error(ErrorKind::InsufficientGenderCoverage,
                "cross_gender needs >= 1 male and >= 2 female subjects (have " + std::to_string(males.size()) + " / " +
                    std::to_string(females.size()) + ")");
  }
  Rng rng(seed);
  rng.shuffle(females);
  const std::size_t n_val = females.size() / 2;
  const std::set<std::string> val(females.begin(), females.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::set<std::string> test(females.begin() + static_cast<std::ptrdiff_t>(n_val), females.end());
  return SplitSpec{Protocol::CrossGender, clips_of(manifest, males), clips_of(manifest, val), clips_of(manifest, test),
                   seed};
}

SplitSpec make_split(const Manifest& manifest, Protocol protocol, std::uint64_t seed) {
  return protocol == Protocol::CrossSubject ? split_cross_subject(manifest, seed) : split_cross_gender(manifest, seed);
}

std::string format_split(const SplitSpec& split) {
  ordered_json j;
  j["protocol"] = to_string(split.protocol);
  j["seed"] = split.seed;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  return j.dump() + "\n";
}

SplitSpec parse_split(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitSpec s;
    s.protocol = parse_protocol(j.at("protocol").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::IoFailure, std::string("malformed split file: ") + e.what());
  }
}

void write_split(const SplitSpec& split, const std::filesystem::path& path) {
  io::atomic_write(path, format_split(split));
}

SplitSpec read_split(const std::filesystem::path& path) { return parse_split(io::read_file(path)); }

Manifest select_clips(const Manifest& manifest, const std::vector<std::string>& ids) {
  std::map<std::string, const ClipRecord*> by_id;
  for (const auto& rec : manifest) by_id[rec.clip_id] = &rec;
  Manifest out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::PreconditionFailed, "clip " + id + " is not in the manifest");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace pmmtalk
