#include "pmmtalk/config.hpp"

#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

namespace pmmtalk {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorKind::BadConfigValue, key + " = '" + value + "' is not " + want);
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, const std::string& full, const std::string& v)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PMM_INT(SEC, NAME, FIELD)                                                                         \
  Key {                                                                                                   \
    SEC, NAME, [](RunConfig& c, const std::string& k, const std::string& v) {                            \
      c.FIELD = static_cast<std::remove_reference_t<decltype(c.FIELD)>>(to_int(k, v));                   \
    },                                                                                                    \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                                        \
  }
#define PMM_REAL(SEC, NAME, FIELD)                                                                         \
  Key {                                                                                                    \
    SEC, NAME, [](RunConfig& c, const std::string& k, const std::string& v) { c.FIELD = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                                                    \
  }
#define PMM_PROVIDER(NAME, FIELD)                                                                    \
  Key {                                                                                              \
    "features", NAME, [](RunConfig& c, const std::string& k, const std::string& v) {                \
      try {                                                                                          \
        c.model.features.FIELD = parse_provider_kind(v);                                             \
      } catch (const Error&) {                                                                       \
        bad(k, v, "synthetic or file");                                                              \
      }                                                                                              \
    },                                                                                               \
        [](const RunConfig& c) { return to_string(c.model.features.FIELD); }                         \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"data", "root", [](RunConfig& c, const std::string&, const std::string& v) { c.data_root = v; },
          [](const RunConfig& c) { return c.data_root; }},
      PMM_REAL("data", "fps", model.features.fps),
      Key{"data", "channels",
          [](RunConfig& c, const std::string&, const std::string& v) {
            c.model.channels = split_list(v);
            c.model.decoder.output_dim = static_cast<int>(c.model.channels.size());
          },
          [](const RunConfig& c) {
            std::string out;
            for (const auto& ch : c.model.channels) out += (out.empty() ? "" : ",") + ch;
            return out;
          }},
      PMM_PROVIDER("latent_provider", latent_provider),
      PMM_PROVIDER("text_provider", text_provider),
      PMM_PROVIDER("image_provider", image_provider),
      PMM_INT("features", "latent_dim", model.features.latent_dim),
      PMM_INT("features", "text_vocab", model.features.text_vocab),
      PMM_INT("features", "image_size", model.features.image_size),
      PMM_REAL("features", "envelope_smoothing", model.features.envelope_smoothing),
      Key{"model", "d_model",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.model.encoder.d_model = c.model.decoder.d_model = static_cast<int>(to_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.model.decoder.d_model); }},
      Key{"model", "n_layers",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.model.encoder.n_layers = c.model.decoder.n_layers = static_cast<int>(to_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.model.decoder.n_layers); }},
      Key{"model", "n_heads",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.model.encoder.n_heads = c.model.decoder.n_heads = static_cast<int>(to_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.model.decoder.n_heads); }},
      Key{"model", "d_ff",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.model.encoder.d_ff = c.model.decoder.d_ff = static_cast<int>(to_int(k, v));
          },
          [](const RunConfig& c) { return std::to_string(c.model.decoder.d_ff); }},
      PMM_INT("model", "conv1_channels", model.encoder.conv1_channels),
      PMM_INT("model", "conv2_channels", model.encoder.conv2_channels),
      PMM_INT("model", "d_fuse", model.decoder.d_fuse),
      PMM_INT("model", "ppe_period", model.decoder.ppe_period),
      PMM_INT("model", "d_align", model.alignment.d_align),
      PMM_REAL("model", "init_temperature", model.alignment.init_temperature),
      PMM_REAL("model", "head_init_gain", model.decoder.head_init_gain),
      PMM_INT("model", "seed", model.seed),
      PMM_REAL("train", "lr", train.learning_rate),
      PMM_INT("train", "batch", train.batch_size),
      PMM_INT("train", "epochs", train.epochs),
      PMM_INT("train", "seed", train.seed),
      PMM_REAL("train", "lambda1", train.weights.pos),
      PMM_REAL("train", "lambda2", train.weights.mot),
      PMM_REAL("train", "lambda3", train.weights.tem),
      PMM_REAL("train", "lambda4", train.weights.sem),
      PMM_REAL("train", "grad_clip", train.grad_clip),
      PMM_REAL("train", "lr_decay", train.lr_decay),
      Key{"eval", "protocol",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            try {
              c.protocol = parse_protocol(v);
            } catch (const Error&) {
              bad(k, v, "cross_subject or cross_gender");
            }
          },
          [](const RunConfig& c) { return to_string(c.protocol); }},
      Key{"eval", "partition", [](RunConfig& c, const std::string&, const std::string& v) { c.partition = v; },
          [](const RunConfig& c) { return c.partition; }},
      PMM_INT("eval", "split_seed", split_seed),
  };
  return table;
}

#undef PMM_INT
#undef PMM_REAL
#undef PMM_PROVIDER

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (partition != "val" && partition != "test") {
    throw Error(ErrorKind::BadConfigValue, "eval.partition must be val or test");
  }
}

void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (section == k.section && key == k.name) {
      k.set(cfg, section + "." + key, value);
      return;
    }
  }
  throw Error(ErrorKind::UnknownConfigKey, "unknown config key " + section + "." + key);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const std::string lhs = trim(assignment.substr(0, eq));
  const auto dot = lhs.find('.');
  if (eq == std::string::npos || dot == std::string::npos) {
    throw Error(ErrorKind::BadConfigValue, "override '" + assignment + "' is not section.key=value");
  }
  set_config_value(cfg, lhs.substr(0, dot), lhs.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::BadConfigValue, "line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::BadConfigValue, "line " + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw Error(ErrorKind::UnknownConfigKey, "line " + std::to_string(lineno) + ": key outside any section");
    }
    set_config_value(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::BadConfigValue, std::string("config: ") + e.what());
  }
  RunConfig cfg = parse_run_config(text);
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& k : keys()) {
    if (section != k.section) {
      section = k.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  }
  return out;
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  for (const auto& k : keys()) j[k.section][k.name] = k.get(cfg);
  return j;
}

}  // namespace pmmtalk
