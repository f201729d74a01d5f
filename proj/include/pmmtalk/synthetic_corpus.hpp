#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pmmtalk {

// Deterministic toy corpus in the on-disk layout build_manifest expects:
// <root>/<subject>/{meta.json, clipNN.wav, clipNN.csv}. Each clip is a run of
// vowel syllables (two formant tones under a sin^2 envelope); the labels are
// a fixed per-vowel articulation pattern scaled by the same envelope and by a
// per-subject style gain.
struct SyntheticCorpusOptions {
  int clips_per_subject = 2;
  int syllables_per_clip = 5;
  double syllable_seconds = 0.4;
  int sample_rate = 48000;
  std::uint64_t seed = 0;
};

struct SyntheticSubject {
  std::string id;
  std::string gender;  // "male" / "female"
  double style_gain = 1.0;
};

/// s01 male, s02 and s03 female.
std::vector<SyntheticSubject> default_synthetic_subjects();

void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusOptions& opts = {},
                            const std::vector<SyntheticSubject>& subjects = default_synthetic_subjects());

}  // namespace pmmtalk
