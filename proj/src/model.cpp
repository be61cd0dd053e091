#include "slucl/model.hpp"

#include <cmath>
#include <stdexcept>

#include "slucl/rng.hpp"

namespace slucl {

namespace {

Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> values(rows * cols);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : values) v = rng.gauss(0.0, stddev);
  return Tensor::from({rows, cols}, std::move(values), /*requires_grad=*/true);
}

Tensor init_bias(std::size_t n) { return Tensor::zeros({n}, /*requires_grad=*/true); }

}  // namespace

Model Model::init(const ModelDims& dims, std::uint64_t seed, bool learnable_tau,
                  double tau_init) {
  if (dims.vocab < 5) throw std::invalid_argument("model: vocabulary too small");
  Model m;
  m.dims_ = dims;
  Rng rng(derive_seed(seed, "model-init"));
  auto add = [&](const std::string& name, Tensor t) { m.params_.emplace_back(name, std::move(t)); };

  const auto d_in = static_cast<std::size_t>(dims.d_in);
  const auto d_a = static_cast<std::size_t>(dims.d_a);
  const auto d_t = static_cast<std::size_t>(dims.d_t);
  const auto d_s = static_cast<std::size_t>(dims.d_s);
  const auto d_att = static_cast<std::size_t>(dims.d_att);
  const auto d_dec = static_cast<std::size_t>(dims.d_dec);
  const auto vocab = static_cast<std::size_t>(dims.vocab);

  add("audio_enc.w1", init_matrix(d_in, d_a, rng));
  add("audio_enc.b1", init_bias(d_a));
  add("audio_enc.w2", init_matrix(d_a, d_a, rng));
  add("audio_enc.b2", init_bias(d_a));
  add("text_enc.table", init_matrix(vocab, d_t, rng));
  add("proj_a.w", init_matrix(d_a, d_s, rng));
  add("proj_a.b", init_bias(d_s));
  add("proj_t.w", init_matrix(d_t, d_s, rng));
  add("proj_t.b", init_bias(d_s));
  add("dec.wq", init_matrix(d_t, d_att, rng));
  add("dec.bq", init_bias(d_att));
  // No key bias: softmax scores are invariant to a shift shared by all keys.
  add("dec.wk", init_matrix(d_a, d_att, rng));
  add("dec.wv", init_matrix(d_a, d_att, rng));
  add("dec.bv", init_bias(d_att));
  add("dec.wh", init_matrix(d_t + d_att, d_dec, rng));
  add("dec.bh", init_bias(d_dec));
  add("dec.wout", init_matrix(d_dec, vocab, rng));
  add("dec.bout", init_bias(vocab));
  if (learnable_tau) {
    if (!(tau_init > 0.0)) throw std::invalid_argument("model: tau_init must be positive");
    add("contrastive.log_tau", Tensor::scalar(std::log(tau_init), /*requires_grad=*/true));
  }
  return m;
}

Tensor Model::param(std::string_view name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw std::invalid_argument("model: no parameter named '" + std::string(name) + "'");
}

bool Model::has_log_tau() const {
  for (const auto& [n, t] : params_) {
    if (n == "contrastive.log_tau") return true;
  }
  return false;
}

Model Model::clone_frozen() const {
  Model copy;
  copy.dims_ = dims_;
  for (const auto& [name, t] : params_) {
    copy.params_.emplace_back(name, t.detached_copy(/*requires_grad=*/false));
  }
  return copy;
}

Tensor encode_audio(const Model& model, const FeatureSequence& x) {
  if (x.length() < 1) throw std::invalid_argument("encode_audio: empty feature sequence");
  if (x.dim != model.dims().d_in) {
    throw std::invalid_argument("encode_audio: frame dimension " + std::to_string(x.dim) +
                                " does not match d_in " + std::to_string(model.dims().d_in));
  }
  Tensor frames = Tensor::from({static_cast<std::size_t>(x.length()),
                                static_cast<std::size_t>(x.dim)},
                               x.frames);
  Tensor h1 = relu(affine(frames, model.param("audio_enc.w1"), model.param("audio_enc.b1")));
  return affine(h1, model.param("audio_enc.w2"), model.param("audio_enc.b2"));
}

Tensor encode_text(const Model& model, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw std::invalid_argument("encode_text: empty token sequence");
  for (int id : token_ids) {
    if (id < 0 || id >= model.dims().vocab) {
      throw std::invalid_argument("encode_text: token id " + std::to_string(id) +
                                  " outside vocabulary of " + std::to_string(model.dims().vocab));
    }
  }
  return embedding_lookup(model.param("text_enc.table"), token_ids);
}

ProjectedPair project_pair(const Model& model, const Tensor& h_a, const Tensor& h_t,
                           int cls_position, bool use_cls) {
  if (cls_position < 0 || static_cast<std::size_t>(cls_position) >= h_t.rows()) {
    throw std::invalid_argument("project_pair: cls position " + std::to_string(cls_position) +
                                " outside text sequence");
  }
  Tensor pooled_a = mean_over_axis(h_a, 0);
  Tensor text_vec;
  if (use_cls) {
    Tensor cls_row = gather_rows(h_t, {cls_position});  // [1 x d_t]
    text_vec = mean_over_axis(cls_row, 0);
  } else {
    text_vec = mean_over_axis(h_t, 0);
  }
  ProjectedPair pair;
  pair.a = l2_normalize_rows(affine(pooled_a, model.param("proj_a.w"), model.param("proj_a.b")));
  pair.t = l2_normalize_rows(affine(text_vec, model.param("proj_t.w"), model.param("proj_t.b")));
  return pair;
}

Tensor decoder_logits(const Model& model, const Tensor& h_a, const std::vector<int>& input_ids) {
  if (input_ids.empty()) throw std::invalid_argument("decoder_logits: empty input sequence");
  Tensor e = encode_text(model, input_ids);  // [T x d_t]
  Tensor q = affine(e, model.param("dec.wq"), model.param("dec.bq"));
  Tensor k = matmul(h_a, model.param("dec.wk"));
  Tensor v = affine(h_a, model.param("dec.wv"), model.param("dec.bv"));
  Tensor scores = scale(matmul(q, transpose(k)),
                        1.0 / std::sqrt(static_cast<double>(model.dims().d_att)));
  Tensor attn = row_softmax(scores);      // [T x U]
  Tensor context = matmul(attn, v);       // [T x d_att]
  Tensor h = relu(affine(concatenate({e, context}, 1), model.param("dec.wh"),
                         model.param("dec.bh")));
  return affine(h, model.param("dec.wout"), model.param("dec.bout"));
}

}  // namespace slucl
