#pragma once

#include <optional>
#include <vector>

#include "slucl/losses.hpp"
#include "slucl/model.hpp"
#include "slucl/vocab.hpp"

namespace slucl {

// One training slot: augmented audio plus the target token sequence (the
// gold extended transcript, or a stored pseudo-transcript under S-KD).
struct BatchItem {
  int example_id = -1;
  int intent_id = -1;
  FeatureSequence audio;
  std::vector<int> target;
};

struct MiniBatch {
  std::vector<BatchItem> items;
  BatchIndexSets idx;

  std::vector<int> labels() const;
  int size() const { return static_cast<int>(items.size()); }
};

// -sum_j log p(target_j | target_<j, audio) for one sequence, scored over
// [BOS, y...] -> [y..., EOS] with PAD targets excluded.
Tensor sequence_nll(const Model& model, const Tensor& h_a, const std::vector<int>& target,
                    const Vocabulary& vocab);

// Teacher-forced cross-entropy, normalized by batch size:
//   -(1/|B|) sum_e sum_j log p(target_j | target_<j, audio)
// Rejects empty batches.
Tensor asr_cross_entropy(const MiniBatch& batch, const Model& model, const Vocabulary& vocab);

struct DecodeResult {
  std::vector<int> tokens;              // emitted sequence, EOS stripped
  std::vector<double> token_logprobs;   // per emitted token, incl. the EOS step
  double score = 0.0;                   // sum of token log-probabilities
  bool truncated = false;               // hit max length without EOS
};

// Beam search from BOS until EOS or max_len steps. Scores are summed token
// log-probabilities with no length normalization; ties break toward the
// lexicographically smaller token sequence (lower token id first). The greedy
// rollout always participates in the final selection, so widening the beam
// never returns a worse score than greedy. A finished hypothesis is always
// preferred over a truncated one.
DecodeResult decode(const Model& model, const FeatureSequence& x, int beam_width, int max_len,
                    int bos_id, int eos_id);

// Intent id encoded at position 0, or nullopt for malformed output. Total
// function: never throws.
std::optional<int> extract_intent(const Vocabulary& vocab, const std::vector<int>& tokens);

}  // namespace slucl
