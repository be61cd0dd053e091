#pragma once

#include <string>
#include <vector>

#include "slucl/ops.hpp"

namespace slucl {

// Distillation-contrast variants. The default computes anchors and negatives
// with the student and positives with the teacher, over rehearsal anchors.
//   kNtpt:     positives and negatives both from the teacher
//   kNsptAa:   anchors extended from the rehearsal set to the whole batch
//   kNsptAn:   rehearsal negatives embedded by the teacher, current-task
//              negatives by the student
enum class NsptVariant { kNspt, kNtpt, kNsptAa, kNsptAn };

const char* nspt_variant_name(NsptVariant v);
NsptVariant nspt_variant_from_name(const std::string& name);

struct LossConfig {
  double tau = 0.1;
  bool learnable_tau = false;
  double tau_init = 0.07;  // initial value when learnable
  double lambda_mm = 0.1;
  double lambda_kd = 1.0;        // weight of the feature-distillation baselines
  double lambda_nspt_scale = 1.0;  // multiplier on the past/new class schedule
  NsptVariant nspt_variant = NsptVariant::kNspt;
  bool mm_use_cls_only = true;
  bool mm_exclude_rehearsal_anchors = true;
  bool include_self_in_denominator = true;
};

// Temperature handle: either a fixed positive value or a learnable log-tau
// parameter (tau = exp(log_tau) stays positive by construction).
struct Temperature {
  double fixed = 0.1;
  Tensor log_tau;

  bool learnable() const { return log_tau.defined(); }
  static Temperature fixed_value(double tau);
  static Temperature learnable_param(Tensor log_tau);
  // 1/tau as a graph scalar; gradients flow into log_tau when learnable.
  Tensor inverse() const;
  double current_tau() const;
};

Temperature make_temperature(const LossConfig& cfg, const Tensor& log_tau_param = Tensor());

// I_c / I_r index partition of a batch.
struct BatchIndexSets {
  std::vector<int> current;
  std::vector<int> rehearsal;

  void validate(int batch_size) const;  // disjoint and in range
  std::vector<int> all(int batch_size) const;
};

// P(k): indices sharing anchor k's label. Whether k itself belongs to P(k)
// is the caller's choice; the distillation losses include it (the anchor's
// own teacher counterpart is a positive), plain SCL conventionally excludes
// it.
struct PositiveMap {
  std::vector<std::vector<int>> positives;
  static PositiveMap from_labels(const std::vector<int>& labels, bool include_self);
};

// Supervised contrastive loss over one set of unit embeddings z [n x d_s]:
//   sum_k -1/|P(k)| sum_{p in P(k)} log( exp(z_k.z_p/tau) / sum_i exp(z_k.z_i/tau) )
// The denominator ranges over the whole batch, including i=k unless
// cfg.include_self_in_denominator is false. Anchors with empty P(k)
// contribute zero.
Tensor scl_loss(const Tensor& z, const std::vector<int>& labels, const PositiveMap& positives,
                const LossConfig& cfg, const Temperature& tau);

// Contrastive distillation over rehearsal anchors, audio and text terms
// summed. Teacher inputs are detached internally, so no gradient ever reaches
// them. Returns zero when the rehearsal set is empty and the variant anchors
// on it (the first-task contract).
Tensor nspt_loss(const Tensor& student_a, const Tensor& teacher_a, const Tensor& student_t,
                 const Tensor& teacher_t, const std::vector<int>& labels,
                 const BatchIndexSets& idx, const LossConfig& cfg, const Temperature& tau);

// Symmetric audio<->text alignment on current-task anchors
// (all anchors when cfg.mm_exclude_rehearsal_anchors is false):
//   sum_k -1/|P(k)| sum_p [ log softmax_i(a_k.t_i/tau)[p] + log softmax_i(t_k.a_i/tau)[p] ]
Tensor mm_loss(const Tensor& a_batch, const Tensor& t_batch, const std::vector<int>& labels,
               const BatchIndexSets& idx, const LossConfig& cfg, const Temperature& tau);

// Schedule weight L_p / (L_p + L_n) from past and new class counts.
double lambda_nspt(int past_classes, int new_classes);

// asr + lambda_mm * mm + lambda_nspt * nspt; undefined mm/nspt terms are
// omitted (how the first task drops its distillation term).
Tensor combined_loss(const Tensor& asr, const Tensor& mm, const Tensor& nspt, double lambda_mm,
                     double lambda_nspt);

// Feature distillation for the A-KD / T-KD baselines: mean over rehearsal
// samples of (1 - cosine similarity) between student and teacher pooled
// pre-projection features. Teacher vectors are detached internally.
Tensor feature_distillation_loss(const std::vector<Tensor>& student_feats,
                                 const std::vector<Tensor>& teacher_feats,
                                 const std::vector<int>& rehearsal_indices);

}  // namespace slucl
