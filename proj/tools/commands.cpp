#include "commands.hpp"

#include "pmmtalk/checkpoint.hpp"
#include "pmmtalk/config.hpp"
#include "pmmtalk/error.hpp"
#include "pmmtalk/evaluation.hpp"
#include "pmmtalk/features.hpp"
#include "pmmtalk/io.hpp"
#include "pmmtalk/synthetic_corpus.hpp"
#include "pmmtalk/training.hpp"
#include "pmmtalk/wav.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>

namespace pmmtalk::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "run configuration (INI)");
    cmd->add_option("--set", overrides, "override, section.key=value (repeatable)");
  }

  RunConfig load() const {
    RunConfig cfg;
    if (!path.empty()) {
      cfg = load_run_config(path, overrides);
    } else {
      for (const auto& o : overrides) apply_override(cfg, o);
      cfg.validate();
    }
    return cfg;
  }
};

// Echo of the effective configuration written next to artifacts that have no
// room for it in their own format.
void write_config_echo(const fs::path& artifact, const RunConfig& cfg) {
  io::atomic_write(artifact.string() + ".run.ini", format_run_config(cfg));
}

int cmd_synth(const std::string& out, std::uint64_t seed) {
  SyntheticCorpusOptions opts;
  opts.seed = seed;
  write_synthetic_corpus(out, opts);
  spdlog::info("synthetic corpus written to {}", out);
  return kExitOk;
}

int cmd_ingest(const std::string& root, const std::string& out, bool dry_run) {
  const Manifest manifest = build_manifest(root);
  for (const auto& clip : manifest) {
    try {
      ingest_livelink_csv(clip.coefficients_path);
      wav::read(clip.audio_path);
    } catch (const Error& e) {
      throw Error(e.kind(), clip.clip_id + ": " + e.what());
    }
  }
  spdlog::info("{} clips validated", manifest.size());
  if (dry_run) return kExitOk;
  if (out.empty()) throw Error(ErrorKind::BadConfigValue, "--out is required unless --dry-run is given");
  write_manifest(manifest, out);
  return kExitOk;
}

int cmd_split(const std::string& manifest_path, const std::string& protocol, std::uint64_t seed,
              const std::string& out) {
  Protocol p;
  try {
    p = parse_protocol(protocol);
  } catch (const Error& e) {
    throw Error(ErrorKind::BadConfigValue, e.what());
  }
  const SplitSpec split = make_split(read_manifest(manifest_path), p, seed);
  write_split(split, out);
  spdlog::info("split: {} train, {} val, {} test clips", split.train.size(), split.val.size(), split.test.size());
  return kExitOk;
}

int cmd_train(const ConfigArgs& ca, const std::string& manifest_path, const std::string& split_path,
              const std::string& out, const std::string& log_path) {
  const RunConfig cfg = ca.load();
  const Manifest manifest = read_manifest(manifest_path);
  const SplitSpec split = read_split(split_path);
  TrainConfig tc = cfg.train;
  tc.dump_path = fs::path(out + ".diverged");

  std::string log_text;
  TrainResult result = train_run(tc, cfg.model, manifest, split, [&](const EpochLog& log) {
    log_text += to_json(log).dump() + "\n";
    spdlog::info("epoch {} loss {:.6g}", log.epoch, log.mean_loss);
  });
  nlohmann::ordered_json run;
  run["config"] = to_json(cfg);
  run["train"] = to_json(cfg.train);
  run["split"] = nlohmann::ordered_json::parse(format_split(split));
  save_checkpoint(out, *result.model, &result.adam, run);
  if (!log_path.empty()) io::atomic_write(log_path, log_text);
  return kExitOk;
}

int cmd_eval(const ConfigArgs& ca, const std::string& checkpoint, const std::string& manifest_path,
             const std::string& split_path, const std::optional<std::string>& partition, const std::string& out,
             const std::string& csv) {
  const RunConfig cfg = ca.load();
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Manifest manifest = read_manifest(manifest_path);
  const SplitSpec split = read_split(split_path);
  const EvalReport report = evaluate_split(*ck.model, manifest, split, partition.value_or(cfg.partition));
  nlohmann::ordered_json j = to_json(report);
  j["config"] = to_json(cfg);
  j["checkpoint_run"] = ck.run;
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else io::atomic_write(out, text);
  if (!csv.empty()) io::atomic_write(csv, per_clip_csv(report));
  spdlog::info("{} {}: LVE {:.4f}e-2 ALE {:.4f}e-2", report.protocol, report.partition, report.lve * 100,
               report.ale * 100);
  return kExitOk;
}

int cmd_infer(const ConfigArgs& ca, const std::string& checkpoint, const std::string& audio_path,
              const std::string& style, const std::string& out, const std::string& reference,
              const std::optional<std::string>& transcript) {
  const RunConfig cfg = ca.load();
  const Checkpoint ck = load_checkpoint(checkpoint);
  ClipRecord clip;
  clip.clip_id = fs::path(audio_path).stem().string();
  clip.subject_id = style;
  clip.audio_path = audio_path;
  clip.transcript = transcript;
  ReferenceImage ref{style, std::nullopt};
  if (!reference.empty()) {
    const int size = ck.model->config().features.image_size;
    const FeatureStream img = load_feature_file(reference, Modality::Image);
    if (img.values.size() != static_cast<Eigen::Index>(size) * size) {
      throw Error(ErrorKind::DimensionMismatch, "reference image must hold " + std::to_string(size * size) + " pixels");
    }
    ref.identifier = fs::path(reference).stem().string();
    ref.image = img.values.reshaped<Eigen::RowMajor>(size, size);
  }
  const BlendshapeSequence pred = predict_clip(*ck.model, clip, load_audio(audio_path), ref, style);
  write_feature_file(pred.values, out);
  write_config_echo(out, cfg);
  spdlog::info("{} frames written to {}", pred.frames(), out);
  return kExitOk;
}

int cmd_export(const ConfigArgs& ca, const std::string& input, const std::string& out) {
  const RunConfig cfg = ca.load();
  BlendshapeSequence seq;
  seq.values = decode_feature_file(io::read_file(input));
  seq.fps = cfg.model.features.fps;
  seq.channel_names = cfg.model.channels;
  if (seq.values.cols() != static_cast<Eigen::Index>(seq.channel_names.size())) {
    throw Error(ErrorKind::DimensionMismatch, input + " has " + std::to_string(seq.values.cols()) +
                                                  " columns but the config names " +
                                                  std::to_string(seq.channel_names.size()) + " channels");
  }
  export_blendshape_csv(seq, out);
  write_config_echo(out, cfg);
  return kExitOk;
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Runtime: return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"pmmtalk: speech to blendshape coefficients"};
  app.require_subcommand(1);

  std::string out, root, manifest, split, checkpoint, protocol, audio, style, reference, log_path, csv, input;
  std::optional<std::string> partition, transcript;
  std::uint64_t seed = 0;
  bool dry_run = false;
  ConfigArgs ca;

  auto* synth = app.add_subcommand("synth-corpus", "write the bundled synthetic corpus");
  synth->add_option("--out", out, "corpus root")->required();
  synth->add_option("--seed", seed, "corpus seed");

  auto* ingest = app.add_subcommand("ingest", "validate a corpus and write its manifest");
  ingest->add_option("--root", root, "corpus root")->required();
  ingest->add_option("--out", out, "manifest path (JSONL)");
  ingest->add_flag("--dry-run", dry_run, "validate only");

  auto* split_cmd = app.add_subcommand("split", "partition a manifest by protocol");
  split_cmd->add_option("--manifest", manifest)->required();
  split_cmd->add_option("--protocol", protocol, "cross_subject | cross_gender")->required();
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  ca.attach(train);
  train->add_option("--manifest", manifest)->required();
  train->add_option("--split", split)->required();
  train->add_option("--out", out, "checkpoint path")->required();
  train->add_option("--log", log_path, "per-epoch JSONL log");

  auto* eval = app.add_subcommand("eval", "LVE / ALE on a split partition");
  ca.attach(eval);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--manifest", manifest)->required();
  eval->add_option("--split", split)->required();
  eval->add_option("--partition", partition, "val | test");
  eval->add_option("--out", out, "report JSON (stdout if omitted)");
  eval->add_option("--csv", csv, "per-clip CSV");

  auto* infer = app.add_subcommand("infer", "predict coefficients for one audio file");
  ca.attach(infer);
  infer->add_option("--checkpoint", checkpoint)->required();
  infer->add_option("--audio", audio)->required();
  infer->add_option("--style", style, "registered style id")->required();
  infer->add_option("--out", out, "PMMF1 output (T x channels)")->required();
  infer->add_option("--reference", reference, "PMMF1 reference image (1 x size^2)");
  infer->add_option("--transcript", transcript);

  auto* exp = app.add_subcommand("export", "PMMF1 prediction to Live-Link-shaped CSV");
  ca.attach(exp);
  exp->add_option("--input", input)->required();
  exp->add_option("--out", out)->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(out, seed);
    if (*ingest) return cmd_ingest(root, out, dry_run);
    if (*split_cmd) return cmd_split(manifest, protocol, seed, out);
    if (*train) return cmd_train(ca, manifest, split, out, log_path);
    if (*eval) return cmd_eval(ca, checkpoint, manifest, split, partition, out, csv);
    if (*infer) return cmd_infer(ca, checkpoint, audio, style, out, reference, transcript);
    if (*exp) return cmd_export(ca, input, out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace pmmtalk::cli
