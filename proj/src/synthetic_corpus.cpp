#include "pmmtalk/synthetic_corpus.hpp"

#include "pmmtalk/dataset.hpp"
#include "pmmtalk/error.hpp"
#include "pmmtalk/io.hpp"
#include "pmmtalk/rng.hpp"
#include "pmmtalk/wav.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace pmmtalk {

namespace {

struct Vowel {
  char letter;
  double f1, f2;
};

constexpr std::array<Vowel, 5> kVowels = {{{'a', 730, 1090}, {'e', 530, 1840}, {'i', 270, 2290},
                                           {'o', 570, 840}, {'u', 300, 870}}};

// Fixed articulation pattern per vowel: about half the channels active.
Eigen::RowVectorXd vowel_pattern(std::size_t vowel) {
  Rng rng(derive_seed(2024, std::string("vowel-") + kVowels[vowel].letter));
  Eigen::RowVectorXd p = Eigen::RowVectorXd::Zero(kModeledChannelCount);
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (rng.uniform() < 0.5) p(j) = rng.uniform(0.1, 0.5);
  }
  return p;
}

double envelope(double t, double dur) {
  const double s = std::sin(std::numbers::pi * t / dur);
  return s * s;
}

}  // namespace

std::vector<SyntheticSubject> default_synthetic_subjects() {
  return {{"s01", "male", 1.0}, {"s02", "female", 0.92}, {"s03", "female", 1.08}};
}

void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusOptions& opts,
                            const std::vector<SyntheticSubject>& subjects) {
  if (opts.clips_per_subject < 1 || opts.syllables_per_clip < 1 || !(opts.syllable_seconds > 0.05) ||
      opts.sample_rate < 8000) {
    throw Error(ErrorKind::BadConfigValue, "synthetic corpus options out of range");
  }
  std::vector<Eigen::RowVectorXd> patterns;
  for (std::size_t v = 0; v < kVowels.size(); ++v) patterns.push_back(vowel_pattern(v));
  const double clip_seconds = opts.syllable_seconds * opts.syllables_per_clip;
  const auto n_samples = static_cast<Eigen::Index>(std::llround(clip_seconds * opts.sample_rate));
  const auto n_labels = static_cast<Eigen::Index>(std::llround(clip_seconds * kLivelinkRate)) + 1;

  for (const auto& subject : subjects) {
    const auto dir = root / subject.id;
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json meta;
    meta["gender"] = subject.gender;
    meta["transcripts"] = nlohmann::ordered_json::object();

    for (int c = 0; c < opts.clips_per_subject; ++c) {
      char stem[16];
      std::snprintf(stem, sizeof stem, "clip%02d", c + 1);
      Rng rng(derive_seed(opts.seed, subject.id + "/" + stem));
      // Cycle through shuffled rounds of all vowels so every clip covers each one.
      std::vector<std::size_t> syllables, round(kVowels.size());
      std::string transcript;
      for (int s = 0; s < opts.syllables_per_clip; ++s) {
        const auto r = static_cast<std::size_t>(s) % round.size();
        if (r == 0) {
          for (std::size_t v = 0; v < round.size(); ++v) round[v] = v;
          rng.shuffle(round);
        }
        syllables.push_back(round[r]);
        transcript += kVowels[syllables.back()].letter;
      }

      Eigen::VectorXd audio(n_samples);
      for (Eigen::Index k = 0; k < n_samples; ++k) {
        const double t = static_cast<double>(k) / opts.sample_rate;
        const auto s = std::min<std::size_t>(static_cast<std::size_t>(t / opts.syllable_seconds), syllables.size() - 1);
        const Vowel& v = kVowels[syllables[s]];
        const double local = t - static_cast<double>(s) * opts.syllable_seconds;
        const double tone = std::sin(2 * std::numbers::pi * v.f1 * t) + 0.5 * std::sin(2 * std::numbers::pi * v.f2 * t);
        audio(k) = 0.4 * envelope(local, opts.syllable_seconds) * tone;
      }
      wav::write(dir / (std::string(stem) + ".wav"), audio, opts.sample_rate);

      BlendshapeSequence labels;
      labels.fps = kLivelinkRate;
      labels.channel_names = default_articulation_channels();
      labels.values.resize(n_labels, kModeledChannelCount);
      for (Eigen::Index f = 0; f < n_labels; ++f) {
        const double t = static_cast<double>(f) / kLivelinkRate;
        const auto s = std::min<std::size_t>(static_cast<std::size_t>(t / opts.syllable_seconds), syllables.size() - 1);
        const double local = t - static_cast<double>(s) * opts.syllable_seconds;
        labels.values.row(f) =
            (subject.style_gain * envelope(local, opts.syllable_seconds) * patterns[syllables[s]]).cwiseMin(1.0);
      }
      export_blendshape_csv(labels, dir / (std::string(stem) + ".csv"));
      meta["transcripts"][stem] = transcript;
    }
    io::atomic_write(dir / "meta.json", meta.dump(2) + "\n");
  }
}

}  // namespace pmmtalk
