#include "pmmtalk/checkpoint.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"

#include <bit>
#include <cstring>

namespace pmmtalk {

namespace {

constexpr std::string_view kMagic = "PMMC1";

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

void append_tensor(nlohmann::ordered_json& dir, std::string& payload, const std::string& name, const char* group,
                   const Matrix& m) {
  const std::size_t offset = payload.size() / sizeof(float);
  dir.push_back({{"name", name}, {"group", group}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const auto f = static_cast<float>(m(r, c));
      char buf[sizeof(float)];
      std::memcpy(buf, &f, sizeof f);
      payload.append(buf, sizeof buf);
    }
  }
}

Matrix read_tensor(std::string_view payload, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
  const std::size_t count = static_cast<std::size_t>(rows * cols);
  if ((offset + count) * sizeof(float) > payload.size()) {
    throw Error(ErrorKind::TruncatedPayload, "checkpoint tensor runs past the payload");
  }
  Matrix m(rows, cols);
  const char* p = payload.data() + offset * sizeof(float);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      float f;
      std::memcpy(&f, p, sizeof f);
      p += sizeof f;
      m(r, c) = f;
    }
  }
  return m;
}

}  // namespace

std::string encode_checkpoint(const PmmTalkModel& model, const AdamState* adam, const nlohmann::ordered_json& run) {
  nlohmann::ordered_json header;
  header["format"] = "pmmtalk-checkpoint";
  header["step"] = adam ? adam->step : 0;
  header["styles"] = model.styles();
  header["model"] = to_json(model.config());
  header["run"] = run;
  nlohmann::ordered_json dir = nlohmann::ordered_json::array();
  std::string payload;
  for (const auto& [name, p] : model.parameters()) append_tensor(dir, payload, name, "param", p.value);
  if (adam) {
    for (const auto& [name, m] : adam->m) append_tensor(dir, payload, name, "adam_m", m);
    for (const auto& [name, v] : adam->v) append_tensor(dir, payload, name, "adam_v", v);
  }
  header["tensors"] = std::move(dir);

  const std::string head = header.dump();
  std::string out(kMagic);
  const std::uint64_t len = head.size();
  char buf[sizeof len];
  std::memcpy(buf, &len, sizeof len);
  out.append(buf, sizeof buf);
  out += head;
  out += payload;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorKind::BadMagic, "not a PMMC1 checkpoint");
  }
  std::uint64_t len = 0;
  if (bytes.size() < kMagic.size() + sizeof len) throw Error(ErrorKind::TruncatedPayload, "checkpoint header cut short");
  std::memcpy(&len, bytes.data() + kMagic.size(), sizeof len);
  const std::size_t head_start = kMagic.size() + sizeof len;
  if (bytes.size() - head_start < len) throw Error(ErrorKind::TruncatedPayload, "checkpoint header cut short");

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(head_start, len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::TruncatedPayload, std::string("checkpoint header: ") + e.what());
  }
  const std::string_view payload = bytes.substr(head_start + len);

  Checkpoint ck;
  try {
    const ModelConfig cfg = model_config_from_json(nlohmann::json(header.at("model")));
    ck.model = std::make_unique<PmmTalkModel>(cfg, header.at("styles").get<std::vector<std::string>>());
    ck.adam.step = header.at("step");
    ck.run = header.at("run");
    std::size_t loaded = 0;
    for (const auto& t : header.at("tensors")) {
      const std::string name = t.at("name");
      const std::string group = t.at("group");
      Matrix m = read_tensor(payload, t.at("offset").get<std::size_t>(), t.at("rows"), t.at("cols"));
      if (group == "param") {
        if (!ck.model->parameters().contains(name)) {
          throw Error(ErrorKind::DimensionMismatch, "checkpoint has unknown parameter " + name);
        }
        Parameter& p = ck.model->parameters().at(name);
        if (p.value.rows() != m.rows() || p.value.cols() != m.cols()) {
          throw Error(ErrorKind::DimensionMismatch, "checkpoint tensor " + name + " has the wrong shape");
        }
        p.value = std::move(m);
        ++loaded;
      } else if (group == "adam_m") {
        ck.adam.m[name] = std::move(m);
      } else if (group == "adam_v") {
        ck.adam.v[name] = std::move(m);
      } else {
        throw Error(ErrorKind::BadMagic, "unknown tensor group " + group);
      }
    }
    if (loaded != ck.model->parameters().size()) {
      throw Error(ErrorKind::DimensionMismatch, "checkpoint is missing parameters");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::TruncatedPayload, std::string("checkpoint header: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const PmmTalkModel& model, const AdamState* adam,
                     const nlohmann::ordered_json& run) {
  io::atomic_write(path, encode_checkpoint(model, adam, run));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace pmmtalk
