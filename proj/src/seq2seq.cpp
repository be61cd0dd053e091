#include "slucl/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slucl {

std::vector<int> MiniBatch::labels() const {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.intent_id);
  return out;
}

Tensor sequence_nll(const Model& model, const Tensor& h_a, const std::vector<int>& target,
                    const Vocabulary& vocab) {
  if (target.empty()) throw std::invalid_argument("sequence_nll: empty target");
  std::vector<int> inputs;
  inputs.reserve(target.size() + 1);
  inputs.push_back(vocab.bos_id());
  inputs.insert(inputs.end(), target.begin(), target.end());
  std::vector<int> gold = target;
  gold.push_back(vocab.eos_id());

  Tensor logits = decoder_logits(model, h_a, inputs);  // [T x V]
  const std::size_t t = logits.rows(), v = logits.cols();
  std::vector<std::uint8_t> non_gold(t * v, 1);
  for (std::size_t j = 0; j < t; ++j) {
    if (gold[j] == vocab.pad_id()) continue;  // PAD rows fill to 1, log 0
    non_gold[j * v + static_cast<std::size_t>(gold[j])] = 0;
  }
  Tensor picked = masked_fill(row_softmax(logits), non_gold, 1.0);
  return neg(sum_all(log(picked)));
}

Tensor asr_cross_entropy(const MiniBatch& batch, const Model& model, const Vocabulary& vocab) {
  if (batch.items.empty()) throw std::invalid_argument("asr_cross_entropy: empty batch");

  Tensor total = Tensor::scalar(0.0);
  for (const auto& item : batch.items) {
    Tensor h_a = encode_audio(model, item.audio);
    total = add(total, sequence_nll(model, h_a, item.target, vocab));
  }
  return scale(total, 1.0 / static_cast<double>(batch.items.size()));
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;
  std::vector<double> logprobs;
  double score = 0.0;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

// Log-probabilities of the next token given the emitted prefix.
std::vector<double> next_logprobs(const Model& model, const Tensor& h_a,
                                  const std::vector<int>& prefix, int bos_id) {
  std::vector<int> inputs;
  inputs.reserve(prefix.size() + 1);
  inputs.push_back(bos_id);
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  Tensor logits = decoder_logits(model, h_a, inputs);
  const std::size_t v = logits.cols();
  const std::size_t last = (logits.rows() - 1) * v;
  std::vector<double> row(logits.values().begin() + static_cast<std::ptrdiff_t>(last),
                          logits.values().begin() + static_cast<std::ptrdiff_t>(last + v));
  double mx = row[0];
  for (double x : row) mx = std::max(mx, x);
  double denom = 0.0;
  for (double x : row) denom += std::exp(x - mx);
  const double lse = mx + std::log(denom);
  for (double& x : row) x -= lse;
  return row;
}

DecodeResult greedy_rollout(const Model& model, const Tensor& h_a, int max_len, int bos_id,
                            int eos_id) {
  DecodeResult result;
  for (int step = 0; step < max_len; ++step) {
    const std::vector<double> lp = next_logprobs(model, h_a, result.tokens, bos_id);
    int best = 0;
    for (int vtok = 1; vtok < static_cast<int>(lp.size()); ++vtok) {
      if (lp[static_cast<std::size_t>(vtok)] > lp[static_cast<std::size_t>(best)]) best = vtok;
    }
    result.score += lp[static_cast<std::size_t>(best)];
    result.token_logprobs.push_back(lp[static_cast<std::size_t>(best)]);
    if (best == eos_id) return result;
    result.tokens.push_back(best);
  }
  result.truncated = true;
  return result;
}

}  // namespace

DecodeResult decode(const Model& model, const FeatureSequence& x, int beam_width, int max_len,
                    int bos_id, int eos_id) {
  if (beam_width < 1) throw std::invalid_argument("decode: beam width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("decode: max length must be >= 1");

  NoGradScope no_grad;
  Tensor h_a = encode_audio(model, x);

  const DecodeResult greedy = greedy_rollout(model, h_a, max_len, bos_id, eos_id);
  if (beam_width == 1) return greedy;

  std::vector<Hypothesis> alive{Hypothesis{}};
  std::vector<Hypothesis> finished;
  if (!greedy.truncated) {
    Hypothesis g;
    g.tokens = greedy.tokens;
    g.logprobs = greedy.token_logprobs;
    g.score = greedy.score;
    finished.push_back(std::move(g));
  }

  for (int step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& hyp : alive) {
      const std::vector<double> lp = next_logprobs(model, h_a, hyp.tokens, bos_id);
      for (int vtok = 0; vtok < static_cast<int>(lp.size()); ++vtok) {
        Hypothesis ext = hyp;
        ext.tokens.push_back(vtok);
        ext.logprobs.push_back(lp[static_cast<std::size_t>(vtok)]);
        ext.score += lp[static_cast<std::size_t>(vtok)];
        candidates.push_back(std::move(ext));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (candidates.size() > static_cast<std::size_t>(beam_width)) {
      candidates.resize(static_cast<std::size_t>(beam_width));
    }
    alive.clear();
    for (Hypothesis& c : candidates) {
      if (c.tokens.back() == eos_id) {
        c.tokens.pop_back();  // score and logprobs keep the EOS step
        finished.push_back(std::move(c));
      } else {
        alive.push_back(std::move(c));
      }
    }
  }

  DecodeResult result;
  if (!finished.empty()) {
    const Hypothesis* best = &finished.front();
    for (const Hypothesis& h : finished) {
      if (better(h, *best)) best = &h;
    }
    result.tokens = best->tokens;
    result.token_logprobs = best->logprobs;
    result.score = best->score;
  } else if (!alive.empty()) {
    const Hypothesis* best = &alive.front();
    for (const Hypothesis& h : alive) {
      if (better(h, *best)) best = &h;
    }
    result.tokens = best->tokens;
    result.token_logprobs = best->logprobs;
    result.score = best->score;
    result.truncated = true;
  } else {
    result = greedy;  // greedy truncated and beam exhausted
  }
  return result;
}

std::optional<int> extract_intent(const Vocabulary& vocab, const std::vector<int>& tokens) {
  if (tokens.empty()) return std::nullopt;
  if (tokens[0] < 0 || tokens[0] >= vocab.size()) return std::nullopt;
  return vocab.intent_of_token(tokens[0]);
}

}  // namespace slucl
