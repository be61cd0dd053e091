#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "slucl/autodiff.hpp"
#include "slucl/corpus.hpp"
#include "slucl/ops.hpp"

namespace slucl {

// Toy dimensions; the real systems this mirrors use 768-dim encoders and a
// 512-dim shared space, which is far beyond desk scale. All of these are
// config-overridable.
struct ModelDims {
  int d_in = 16;    // audio feature dimension
  int d_a = 32;     // audio encoder output width
  int d_t = 32;     // text embedding width
  int d_s = 16;     // shared projection space
  int d_att = 32;   // decoder attention width
  int d_dec = 32;   // decoder hidden width
  int vocab = 0;
  int max_decode_len = 16;
};

// Parameter container: a per-frame two-layer perceptron audio encoder, a text
// embedding table (shared with the decoder input), the two projection heads
// into the shared space, and a single-head cross-attention decoder.
class Model {
 public:
  Model() = default;
  static Model init(const ModelDims& dims, std::uint64_t seed, bool learnable_tau = false,
                    double tau_init = 0.07);

  const ModelDims& dims() const { return dims_; }
  Tensor param(std::string_view name) const;
  const std::vector<NamedTensor>& named_params() const { return params_; }

  bool has_log_tau() const;
  Tensor log_tau() const { return param("contrastive.log_tau"); }

  // Deep value copy with requires_grad cleared on every parameter; the
  // substrate for teacher snapshots.
  Model clone_frozen() const;

 private:
  ModelDims dims_;
  std::vector<NamedTensor> params_;
};

// h_A: per-frame transform, no cross-frame mixing. Rejects empty input.
Tensor encode_audio(const Model& model, const FeatureSequence& x);

// h_T: row j is the embedding of token j. Rejects out-of-vocabulary ids.
Tensor encode_text(const Model& model, const std::vector<int>& token_ids);

struct ProjectedPair {
  Tensor a;  // unit-norm audio embedding in the shared space
  Tensor t;  // unit-norm text embedding in the shared space
};

// a = normalize(g_A(mean over frames of h_A));
// t = normalize(g_T(row cls_position of h_T)), or of the mean over rows when
// use_cls is false (the "CLS" ablation).
ProjectedPair project_pair(const Model& model, const Tensor& h_a, const Tensor& h_t,
                           int cls_position, bool use_cls = true);

// Teacher-forced decoder: logits[j] scores token j+1 given input token j and
// cross-attention over h_a. Inference never touches the projection heads.
Tensor decoder_logits(const Model& model, const Tensor& h_a, const std::vector<int>& input_ids);

}  // namespace slucl
