#include "fixtures.hpp"

#include "pmmtalk/config.hpp"
#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"

#include <gtest/gtest.h>

using namespace pmmtalk;

namespace {

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

TEST(RunConfig, Defaults) {
  const RunConfig c = parse_run_config("");
  EXPECT_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.batch_size, 1);
  EXPECT_EQ(c.train.weights.pos, 1.0);
  EXPECT_EQ(c.train.weights.mot, 10.0);
  EXPECT_EQ(c.train.weights.tem, 1e-4);
  EXPECT_EQ(c.train.weights.sem, 1e-5);
  EXPECT_EQ(c.model.features.fps, 30.0);
  EXPECT_EQ(c.model.channels.size(), 32u);
  EXPECT_EQ(c.model.decoder.output_dim, 32);
  EXPECT_EQ(c.model.decoder.ppe_period, 25);
  EXPECT_EQ(c.protocol, Protocol::CrossSubject);
  EXPECT_EQ(c.partition, "test");
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, ParsesSectionsCommentsAndSharedSizes) {
  const auto c = parse_run_config(R"(
# comment
[model]
d_model = 16
n_heads=2
; another
[train]
lambda3 = 0
epochs = 7
[eval]
protocol = cross_gender
[data]
channels = JawOpen, MouthClose
)");
  EXPECT_EQ(c.model.encoder.d_model, 16);
  EXPECT_EQ(c.model.decoder.d_model, 16);
  EXPECT_EQ(c.model.decoder.n_heads, 2);
  EXPECT_EQ(c.train.weights.tem, 0.0);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.protocol, Protocol::CrossGender);
  EXPECT_EQ(c.model.channels, (std::vector<std::string>{"JawOpen", "MouthClose"}));
  EXPECT_EQ(c.model.decoder.output_dim, 2);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, Errors) {
  EXPECT_EQ(kind_of([] { parse_run_config("[train]\nmomentum = 3\n"); }), ErrorKind::UnknownConfigKey);
  EXPECT_EQ(kind_of([] { parse_run_config("[gpu]\nid = 3\n"); }), ErrorKind::UnknownConfigKey);
  EXPECT_EQ(kind_of([] { parse_run_config("epochs = 3\n"); }), ErrorKind::UnknownConfigKey);
  EXPECT_EQ(kind_of([] { parse_run_config("[train]\nepochs = many\n"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([] { parse_run_config("[train]\nepochs\n"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([] { parse_run_config("[train\n"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([] { parse_run_config("[features]\nlatent_provider = magic\n"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([] { parse_run_config("[eval]\nprotocol = random\n"); }), ErrorKind::BadConfigValue);
  RunConfig c;
  c.partition = "train";
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([] { load_run_config("/nonexistent.ini"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([] { parse_run_config("[data]\nchannels = JawOpen, Tongue\n").validate(); }),
            ErrorKind::BadConfigValue);
}

TEST(RunConfig, OverridesWinOverTheFile) {
  const auto dir = fixtures::temp_dir("config");
  io::atomic_write(dir / "run.ini", "[train]\nepochs = 5\nlr = 0.01\n");
  const auto c = load_run_config(dir / "run.ini", {"train.epochs=9", " model.seed = 4 "});
  EXPECT_EQ(c.train.epochs, 9);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.model.seed, 4u);
  RunConfig r;
  EXPECT_EQ(kind_of([&] { apply_override(r, "epochs=3"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([&] { apply_override(r, "train.epochs"); }), ErrorKind::BadConfigValue);
  EXPECT_EQ(kind_of([&] { apply_override(r, "train.warmup=3"); }), ErrorKind::UnknownConfigKey);
}

TEST(RunConfig, FormatRoundTripsExactly) {
  RunConfig c;
  apply_override(c, "train.lr=0.000123456789012345");
  apply_override(c, "model.init_temperature=0.1");
  apply_override(c, "features.text_provider=file");
  apply_override(c, "eval.partition=val");
  apply_override(c, "data.root=/tmp/corpus");
  const std::string text = format_run_config(c);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(format_run_config(back), text);
  EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
  EXPECT_EQ(back.model.features.text_provider, ProviderKind::File);
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(to_json(c)["train"]["epochs"], "200");
}
