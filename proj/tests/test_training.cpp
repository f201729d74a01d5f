#include "fixtures.hpp"
#include "gradcheck.hpp"

#include "pmmtalk/checkpoint.hpp"
#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"
#include "pmmtalk/losses.hpp"
#include "pmmtalk/synthetic_corpus.hpp"
#include "pmmtalk/training.hpp"
#include "pmmtalk/wav.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pmmtalk;
using fixtures::random_clip;
using fixtures::random_matrix;
using fixtures::tiny_config;

namespace {

std::vector<PreparedClip> random_clips(std::uint64_t seed, const ModelConfig& cfg) {
  Rng rng(seed);
  return {random_clip(rng, cfg, 6, "s01"), random_clip(rng, cfg, 5, "s02"), random_clip(rng, cfg, 7, "s01")};
}

bool same_parameters(const ParameterStore& a, const ParameterStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, p] : a) {
    if (!b.contains(name) || b.at(name).value != p.value) return false;
  }
  return true;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::PreconditionFailed;
}

}  // namespace

TEST(Adam, MatchesScalarRecurrence) {
  ParameterStore store;
  auto& p = store.add("p", Matrix::Constant(1, 2, 1.0));
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState state;
  double m = 0, v = 0, x = 1.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2 * x;  // d/dx x^2
    p.grad = Matrix::Constant(1, 2, g);
    adam_step(store, state, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value(0, 0), x, 1e-14) << t;
  }
  EXPECT_EQ(state.step, 5u);
  // First step moves by the learning rate regardless of gradient scale.
  ParameterStore s2;
  auto& q = s2.add("q", Matrix::Zero(1, 1));
  q.grad = Matrix::Constant(1, 1, 1e-3);
  AdamState st2;
  adam_step(s2, st2, cfg);
  EXPECT_NEAR(q.value(0, 0), -0.1, 1e-5);
}

TEST(Adam, GlobalClipScalesGradients) {
  ParameterStore a, b;
  auto& pa = a.add("p", Matrix::Zero(1, 2));
  auto& pb = b.add("p", Matrix::Zero(1, 2));
  pa.grad = (Matrix(1, 2) << 3, 4).finished();
  pb.grad = (Matrix(1, 2) << 0.3, 0.4).finished();
  EXPECT_DOUBLE_EQ(gradient_norm(a), 5.0);
  AdamConfig clipped;
  clipped.grad_clip = 0.5;
  AdamState sa, sb;
  adam_step(a, sa, clipped);
  adam_step(b, sb, AdamConfig{});
  EXPECT_LT((sa.m.at("p") - sb.m.at("p")).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((sa.v.at("p") - sb.v.at("p")).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GraphLosses, ShapeErrors) {
  Graph g;
  EXPECT_EQ(kind_of([&] { pmmtalk::position_loss(g.constant(Matrix::Zero(2, 2)), g.constant(Matrix::Zero(2, 3))); }),
            ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([&] { pmmtalk::motion_loss(g.constant(Matrix::Zero(1, 2)), g.constant(Matrix::Zero(1, 2))); }),
            ErrorKind::TooShort);
}

TEST(Model, TinyConfigIsSmallAndValid) {
  const auto cfg = tiny_config();
  cfg.validate();
  PmmTalkModel model(cfg, {"s02", "s01"});
  EXPECT_LE(model.parameters().census(), 10000u);
  EXPECT_EQ(model.styles(), (std::vector<std::string>{"s01", "s02"}));
  auto bad = cfg;
  bad.decoder.output_dim = 7;
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.channels.push_back(bad.channels.front());
  bad.decoder.output_dim = static_cast<int>(bad.channels.size());
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Model, ConfigJsonRoundTrip) {
  auto cfg = tiny_config(17);
  cfg.features.text_provider = ProviderKind::File;
  cfg.decoder.ppe_period = 11;
  const auto back = model_config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

// Every trainable tensor, all four loss terms, one clip.
TEST(Model, FullPipelineGradientsMatchFiniteDifferences) {
  const auto cfg = tiny_config();
  PmmTalkModel model(cfg, {"s01"});
  Rng rng(5);
  const PreparedClip clip = random_clip(rng, cfg, 4, "s01");
  // Milder similarity scale so the softmax stays in a well-conditioned range.
  model.parameters().at("alignment.log_temperature").value(0, 0) = 0.5;
  const LossWeights w{1.0, 1.0, 1.0, 1.0};
  auto loss = [&](Graph& g) { return clip_loss(g, model, clip, w).total; };
  const auto r = gradcheck::check(model.parameters(), loss);
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
  EXPECT_EQ(r.tensors, model.parameters().size());
}

TEST(Model, ForwardWithAndWithoutAlignment) {
  const auto cfg = tiny_config();
  PmmTalkModel model(cfg, {"s01"});
  Rng rng(6);
  const auto clip = random_clip(rng, cfg, 5, "s01");
  Graph g(false);
  const auto with = model.forward(g, clip.features, "s01", true);
  const auto without = model.forward(g, clip.features, "s01", false);
  ASSERT_TRUE(with.alignment.has_value());
  EXPECT_FALSE(without.alignment.has_value());
  EXPECT_EQ(with.prediction.value(), without.prediction.value());
  EXPECT_EQ(model.predict(clip.features, "s01"), without.prediction.value());
  EXPECT_EQ(with.prediction.rows(), 5);
  EXPECT_EQ(with.prediction.cols(), 32);
  EXPECT_EQ(kind_of([&] { model.predict(clip.features, "s99"); }), ErrorKind::UnknownStyle);
}

TEST(Model, ClipLossPartsMatchKernels) {
  const auto cfg = tiny_config();
  PmmTalkModel model(cfg, {"s01"});
  Rng rng(7);
  const auto clip = random_clip(rng, cfg, 6, "s01");
  Graph g;
  const LossWeights w;
  const auto l = clip_loss(g, model, clip, w);
  const Matrix pred = l.prediction.value();
  EXPECT_NEAR(l.parts.pos, position_loss(pred, clip.target), 1e-12);
  EXPECT_NEAR(l.parts.mot, motion_loss(pred, clip.target), 1e-12);
  EXPECT_NEAR(l.total.scalar(), total_loss(l.parts, w), 1e-12);
  Graph g2;
  const auto off = clip_loss(g2, model, clip, LossWeights{1, 10, 0, 0});
  EXPECT_EQ(off.parts.tem, 0.0);
  EXPECT_EQ(off.parts.sem, 0.0);
}

TEST(Training, DeterministicForFixedSeeds) {
  const auto cfg = tiny_config();
  const auto clips = random_clips(1, cfg);
  TrainConfig tc;
  tc.epochs = 3;
  tc.learning_rate = 1e-3;
  const auto a = train_prepared(tc, cfg, clips);
  const auto b = train_prepared(tc, cfg, clips);
  EXPECT_TRUE(same_parameters(a.model->parameters(), b.model->parameters()));
  ASSERT_EQ(a.log.size(), 3u);
  EXPECT_EQ(a.log.back().mean_loss, b.log.back().mean_loss);
  tc.seed = 1;
  const auto c = train_prepared(tc, cfg, clips);
  EXPECT_FALSE(same_parameters(a.model->parameters(), c.model->parameters()));
}

TEST(Training, LossDecreasesAndModelIsQuantized) {
  auto cfg = tiny_config();
  cfg.decoder.head_init_gain = 0.01;
  const auto clips = random_clips(2, cfg);
  TrainConfig tc;
  tc.epochs = 30;
  tc.learning_rate = 3e-3;
  tc.batch_size = 2;
  std::vector<double> seen;
  const auto r = train_prepared(tc, cfg, clips, {}, [&](const EpochLog& l) { seen.push_back(l.mean_loss); });
  ASSERT_EQ(seen.size(), 30u);
  EXPECT_LT(r.log.back().parts.pos, 0.5 * r.log.front().parts.pos);
  EXPECT_EQ(r.adam.step, 60u);
  for (const auto& [name, p] : r.model->parameters()) {
    EXPECT_EQ(p.value, p.value.cast<float>().cast<double>()) << name;
  }
}

TEST(Training, ValidationCurveAndEpochJson) {
  const auto cfg = tiny_config();
  const auto clips = random_clips(3, cfg);
  Rng rng(9);
  const std::vector<PreparedClip> val = {random_clip(rng, cfg, 5, "s77")};
  TrainConfig tc;
  tc.epochs = 2;
  tc.validate_each_epoch = true;
  const auto r = train_prepared(tc, cfg, clips, val);
  ASSERT_TRUE(r.log[1].val_pos.has_value());
  const auto j = to_json(r.log[1]);
  EXPECT_EQ(j.at("epoch"), 2);
  EXPECT_TRUE(j.contains("val_L_pos"));
  EXPECT_TRUE(j.contains("L_sem"));
}

TEST(Training, RejectsEmptySplitAndBadConfig) {
  const auto cfg = tiny_config();
  TrainConfig tc;
  EXPECT_EQ(kind_of([&] { train_prepared(tc, cfg, {}); }), ErrorKind::PreconditionFailed);
  SplitSpec split;
  EXPECT_EQ(kind_of([&] { train_run(tc, cfg, {}, split); }), ErrorKind::PreconditionFailed);
  tc.batch_size = 0;
  EXPECT_EQ(kind_of([&] { tc.validate(); }), ErrorKind::BadConfigValue);
  tc = TrainConfig{};
  tc.weights.mot = -1;
  EXPECT_EQ(kind_of([&] { tc.validate(); }), ErrorKind::BadConfigValue);
}

TEST(Training, NonFiniteLossStopsWithDump) {
  const auto cfg = tiny_config();
  auto clips = random_clips(4, cfg);
  clips[1].target(0, 0) = std::nan("");
  TrainConfig tc;
  tc.epochs = 2;
  const auto dump = fixtures::temp_dir("diverged") / "dump.pmmc";
  tc.dump_path = dump;
  EXPECT_EQ(kind_of([&] { train_prepared(tc, cfg, clips); }), ErrorKind::DivergedLoss);
  ASSERT_TRUE(std::filesystem::exists(dump));
  EXPECT_NO_THROW(load_checkpoint(dump));
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto cfg = tiny_config();
  const auto clips = random_clips(5, cfg);
  TrainConfig tc;
  tc.epochs = 2;
  const auto r = train_prepared(tc, cfg, clips);
  const auto path = fixtures::temp_dir("ckpt") / "model.pmmc";
  nlohmann::ordered_json run = {{"note", "x"}, {"epochs", 2}};
  save_checkpoint(path, *r.model, &r.adam, run);
  const auto ck = load_checkpoint(path);
  EXPECT_TRUE(same_parameters(r.model->parameters(), ck.model->parameters()));
  EXPECT_EQ(ck.model->styles(), r.model->styles());
  EXPECT_EQ(to_json(ck.model->config()), to_json(r.model->config()));
  EXPECT_EQ(ck.run, run);
  EXPECT_EQ(ck.adam.step, r.adam.step);
  for (const auto& [name, m] : r.adam.m) {
    EXPECT_EQ(ck.adam.m.at(name), m.cast<float>().cast<double>()) << name;
  }
  for (const auto& c : clips) {
    EXPECT_EQ(ck.model->predict(c.features, "s01"), r.model->predict(c.features, "s01"));
  }
  // Re-encoding the loaded checkpoint reproduces the same bytes.
  EXPECT_EQ(encode_checkpoint(*ck.model, &ck.adam, ck.run), io::read_file(path));
}

TEST(Checkpoint, CorruptInputsFailCleanly) {
  const auto cfg = tiny_config();
  PmmTalkModel model(cfg, {"s01"});
  model.quantize();
  const std::string bytes = encode_checkpoint(model, nullptr, nlohmann::ordered_json::object());
  EXPECT_EQ(kind_of([&] { decode_checkpoint("PMMX1" + bytes.substr(5)); }), ErrorKind::BadMagic);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 4)); }), ErrorKind::TruncatedPayload);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bytes.substr(0, 9)); }), ErrorKind::TruncatedPayload);
  const auto ck = decode_checkpoint(bytes);
  EXPECT_EQ(ck.adam.step, 0u);
  EXPECT_TRUE(ck.adam.m.empty());
  EXPECT_EQ(kind_of([] { load_checkpoint("/nonexistent/model.pmmc"); }), ErrorKind::IoFailure);
}

TEST(Checkpoint, WrongTensorShapeRejected) {
  const auto cfg = tiny_config();
  PmmTalkModel model(cfg, {"s01"});
  std::string bytes = encode_checkpoint(model, nullptr, nlohmann::ordered_json::object());
  // Claim a different model width in the header; tensors no longer fit.
  const std::string from = "\"d_model\":8";
  const auto at = bytes.find(from);
  ASSERT_NE(at, std::string::npos);
  bytes.replace(at, from.size(), "\"d_model\":4");
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bytes); }), ErrorKind::DimensionMismatch);
}

TEST(Prepare, SyntheticCorpusClipsAlignToLabels) {
  const auto root = fixtures::temp_dir("prepare");
  SyntheticCorpusOptions opts;
  opts.clips_per_subject = 1;
  opts.syllables_per_clip = 3;
  write_synthetic_corpus(root, opts);
  const auto manifest = build_manifest(root);
  ASSERT_EQ(manifest.size(), 3u);
  const auto cfg = tiny_config();
  const auto clip = prepare_clip(manifest[0], cfg);
  // 1.2 s of audio at 30 fps.
  EXPECT_NEAR(static_cast<double>(clip.frames()), 36.0, 1.0);
  EXPECT_EQ(clip.features.frames(), clip.frames());
  EXPECT_EQ(clip.features.lips.frames(), clip.frames());
  EXPECT_EQ(clip.target.cols(), 32);
  EXPECT_GE(clip.target.minCoeff(), 0.0);
  EXPECT_GT(clip.target.maxCoeff(), 0.1);

  ClipRecord broken = manifest[0];
  broken.audio_path = (root / "missing.wav").string();
  try {
    prepare_clip(broken, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ProviderFailure);
    EXPECT_NE(std::string(e.what()).find(broken.clip_id), std::string::npos);
  }
}

TEST(Predict, OneSecondGivesThirtyFramesOfThirtyTwoChannels) {
  ModelConfig cfg;
  PmmTalkModel model(cfg, {"s01"});
  AudioClip audio;
  audio.samples = Eigen::VectorXd::Zero(16000);
  for (Eigen::Index i = 0; i < audio.samples.size(); ++i) audio.samples(i) = 0.3 * std::sin(0.05 * i);
  ClipRecord rec;
  rec.clip_id = "adhoc";
  const auto seq = predict_clip(model, rec, audio, ReferenceImage{}, "s01");
  EXPECT_EQ(seq.values.rows(), 30);
  EXPECT_EQ(seq.values.cols(), 32);
  EXPECT_EQ(seq.channel_names, default_articulation_channels());
  EXPECT_EQ(seq.fps, 30.0);
  EXPECT_EQ(kind_of([&] { predict_clip(model, rec, audio, ReferenceImage{}, "nobody"); }), ErrorKind::UnknownStyle);
}
