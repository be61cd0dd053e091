#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slucl/rng.hpp"
#include "slucl/vocab.hpp"

namespace slucl {

// Row-major U x dim feature matrix standing in for an audio utterance.
struct FeatureSequence {
  int dim = 0;
  std::vector<double> frames;

  int length() const { return dim == 0 ? 0 : static_cast<int>(frames.size()) / dim; }
  double at(int u, int d) const { return frames[static_cast<std::size_t>(u) * dim + d]; }
};

struct PairedExample {
  int example_id = -1;
  int intent_id = -1;
  std::vector<int> word_ids;  // transcript words as vocabulary token ids
  FeatureSequence audio;
};

// Each intent owns a fixed template of 2..4 word slots: slot 0 is the
// intent's keyword, later slots draw from shared filler pools (slot s uses
// pool s-1). An example's audio is the concatenation of its words' prototype
// frame blocks plus i.i.d. gaussian noise. Everything is a pure function of
// the seed.
struct CorpusSpec {
  int num_intents = 30;
  int min_samples_per_intent = 40;   // log-uniform range when explicit
  int max_samples_per_intent = 120;  // counts are not given
  std::vector<int> samples_per_intent;
  int min_words = 2;
  int max_words = 4;
  int filler_pools = 3;
  int pool_size = 8;
  int d_in = 16;
  int frames_per_word = 4;
  double noise_std = 0.3;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

struct Corpus {
  CorpusSpec spec;
  Vocabulary vocab;
  std::vector<PairedExample> train;
  std::vector<PairedExample> test;
  std::vector<int> intent_train_counts;
  std::vector<int> intent_test_counts;
  int max_words = 0;

  std::vector<int> extended_transcript(const PairedExample& ex) const;
};

Corpus generate_corpus(const CorpusSpec& spec);

// Feature-space approximation of waveform SpecAug: with probability 0.5 zero
// up to 2 feature dimensions across all frames, and with an independent
// probability 0.5 zero up to 3 time chunks whose lengths are uniform in
// [0, 0.05*U] frames. The input is copied, never modified.
FeatureSequence spec_aug(const FeatureSequence& x, Rng& rng);

void save_corpus(const std::string& dir, const Corpus& corpus);
Corpus load_corpus(const std::string& dir);

}  // namespace slucl
