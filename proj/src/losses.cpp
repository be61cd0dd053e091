#include "slucl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slucl {

namespace {

void require_finite(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": non-finite embedding value");
    }
  }
}

void require_batch(const Tensor& z, const char* what) {
  if (!z.defined() || z.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected [n x d] embedding batch");
  }
  require_finite(z, what);
}

// Log-sum-exp over selected columns of each row, returned as a rank-1 graph
// tensor. The per-row max shift is a value-time constant, so gradients flow
// only through the exp/log chain.
Tensor row_lse(const Tensor& scaled, const std::vector<std::uint8_t>& excluded) {
  const std::size_t n = scaled.rows();
  const std::size_t c = scaled.cols();
  std::vector<double> row_max(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -1e300;
    for (std::size_t j = 0; j < c; ++j) {
      if (!excluded.empty() && excluded[i * c + j]) continue;
      mx = std::max(mx, scaled.values()[i * c + j]);
    }
    if (mx == -1e300) {
      throw std::invalid_argument("contrastive loss: a denominator row is empty");
    }
    row_max[i] = mx;
  }
  std::vector<double> shift(n * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) shift[i * c + j] = row_max[i];
  Tensor shifted = subtract(scaled, Tensor::from({n, c}, std::move(shift)));
  Tensor e = exp(shifted);
  if (!excluded.empty()) e = masked_fill(e, excluded, 0.0);
  Tensor sums = scale(mean_over_axis(e, 1), static_cast<double>(c));  // [n]
  return add(log(sums), Tensor::from({n}, row_max));
}

// sum_k sum_{p in P(k)} -1/|P(k)| * (num_scaled[k,p] - lse_k) for k in
// anchors. Entries outside the support carry zero weight and cannot poison
// the sum because every term stays finite.
Tensor weighted_terms(const Tensor& num_scaled, const Tensor& lse,
                      const std::vector<int>& anchors, const PositiveMap& pmap) {
  const std::size_t n = num_scaled.rows();
  std::vector<double> weights(n * n, 0.0);
  for (int k : anchors) {
    const auto& pos = pmap.positives[static_cast<std::size_t>(k)];
    if (pos.empty()) continue;
    const double w = -1.0 / static_cast<double>(pos.size());
    for (int p : pos) weights[static_cast<std::size_t>(k) * n + static_cast<std::size_t>(p)] = w;
  }
  // term[k,p] = num_scaled[k,p] - lse[k], built with a per-row broadcast via
  // the transpose.
  Tensor term = transpose(add(transpose(num_scaled), neg(lse)));
  return sum_all(mul(Tensor::from({n, n}, std::move(weights)), term));
}

std::vector<std::uint8_t> diagonal_mask(std::size_t n) {
  std::vector<std::uint8_t> mask(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 1;
  return mask;
}

Tensor similarity(const Tensor& left, const Tensor& right, const Temperature& tau) {
  return mul(matmul(left, transpose(right)), tau.inverse());
}

void check_labels(const std::vector<int>& labels, std::size_t n, const char* what) {
  if (labels.size() != n) {
    throw std::invalid_argument(std::string(what) + ": label count does not match batch size");
  }
}

}  // namespace

const char* nspt_variant_name(NsptVariant v) {
  switch (v) {
    case NsptVariant::kNspt: return "NSPT";
    case NsptVariant::kNtpt: return "NTPT";
    case NsptVariant::kNsptAa: return "NSPT-AA";
    case NsptVariant::kNsptAn: return "NSPT-AN";
  }
  return "unknown";
}

NsptVariant nspt_variant_from_name(const std::string& name) {
  if (name == "NSPT" || name == "nspt") return NsptVariant::kNspt;
  if (name == "NTPT" || name == "ntpt") return NsptVariant::kNtpt;
  if (name == "NSPT-AA" || name == "nspt-aa") return NsptVariant::kNsptAa;
  if (name == "NSPT-AN" || name == "nspt-an") return NsptVariant::kNsptAn;
  throw std::invalid_argument("unknown NSPT variant '" + name + "'");
}

Temperature Temperature::fixed_value(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  Temperature t;
  t.fixed = tau;
  return t;
}

Temperature Temperature::learnable_param(Tensor log_tau) {
  if (!log_tau.defined() || log_tau.numel() != 1) {
    throw std::invalid_argument("learnable temperature must be a scalar log-tau tensor");
  }
  Temperature t;
  t.log_tau = std::move(log_tau);
  return t;
}

Tensor Temperature::inverse() const {
  if (learnable()) return exp(neg(log_tau));
  return Tensor::scalar(1.0 / fixed);
}

double Temperature::current_tau() const {
  if (learnable()) return std::exp(log_tau.item());
  return fixed;
}

Temperature make_temperature(const LossConfig& cfg, const Tensor& log_tau_param) {
  if (cfg.learnable_tau) {
    if (!log_tau_param.defined()) {
      throw std::invalid_argument("learnable tau requested but no log-tau parameter given");
    }
    return Temperature::learnable_param(log_tau_param);
  }
  return Temperature::fixed_value(cfg.tau);
}

void BatchIndexSets::validate(int batch_size) const {
  std::vector<char> seen(static_cast<std::size_t>(batch_size), 0);
  auto check = [&](const std::vector<int>& ids) {
    for (int i : ids) {
      if (i < 0 || i >= batch_size) {
        throw std::invalid_argument("batch index " + std::to_string(i) + " out of range");
      }
      if (seen[static_cast<std::size_t>(i)]) {
        throw std::invalid_argument("batch index sets overlap at " + std::to_string(i));
      }
      seen[static_cast<std::size_t>(i)] = 1;
    }
  };
  check(current);
  check(rehearsal);
}

std::vector<int> BatchIndexSets::all(int batch_size) const {
  validate(batch_size);
  std::vector<int> ids = current;
  ids.insert(ids.end(), rehearsal.begin(), rehearsal.end());
  std::sort(ids.begin(), ids.end());
  return ids;
}

PositiveMap PositiveMap::from_labels(const std::vector<int>& labels, bool include_self) {
  PositiveMap pmap;
  const int n = static_cast<int>(labels.size());
  pmap.positives.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(k)]) continue;
      if (i == k && !include_self) continue;
      pmap.positives[static_cast<std::size_t>(k)].push_back(i);
    }
  }
  return pmap;
}

Tensor scl_loss(const Tensor& z, const std::vector<int>& labels, const PositiveMap& positives,
                const LossConfig& cfg, const Temperature& tau) {
  require_batch(z, "scl_loss");
  const auto n = z.rows();
  check_labels(labels, n, "scl_loss");
  if (positives.positives.size() != n) {
    throw std::invalid_argument("scl_loss: positive map does not match batch size");
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (int p : positives.positives[k]) {
      if (p < 0 || static_cast<std::size_t>(p) >= n ||
          labels[static_cast<std::size_t>(p)] != labels[k]) {
        throw std::invalid_argument("scl_loss: positive map entry with mismatched label");
      }
    }
  }

  Tensor sims = similarity(z, z, tau);
  std::vector<std::uint8_t> excluded =
      cfg.include_self_in_denominator ? std::vector<std::uint8_t>{} : diagonal_mask(n);
  Tensor lse = row_lse(sims, excluded);
  std::vector<int> anchors(n);
  for (std::size_t k = 0; k < n; ++k) anchors[k] = static_cast<int>(k);
  return weighted_terms(sims, lse, anchors, positives);
}

Tensor nspt_loss(const Tensor& student_a, const Tensor& teacher_a, const Tensor& student_t,
                 const Tensor& teacher_t, const std::vector<int>& labels,
                 const BatchIndexSets& idx, const LossConfig& cfg, const Temperature& tau) {
  require_batch(student_a, "nspt_loss");
  require_batch(student_t, "nspt_loss");
  require_batch(teacher_a, "nspt_loss");
  require_batch(teacher_t, "nspt_loss");
  const auto n = student_a.rows();
  check_labels(labels, n, "nspt_loss");
  idx.validate(static_cast<int>(n));

  const bool anchors_on_rehearsal = cfg.nspt_variant != NsptVariant::kNsptAa;
  if (anchors_on_rehearsal && idx.rehearsal.empty()) {
    return Tensor::scalar(0.0);  // first task: no teacher, no distillation term
  }

  std::vector<int> anchors =
      anchors_on_rehearsal ? idx.rehearsal : idx.all(static_cast<int>(n));
  PositiveMap pmap = PositiveMap::from_labels(labels, /*include_self=*/true);
  std::vector<std::uint8_t> excluded =
      cfg.include_self_in_denominator ? std::vector<std::uint8_t>{} : diagonal_mask(n);

  auto modality_term = [&](const Tensor& student, const Tensor& teacher_raw) {
    Tensor teacher = teacher_raw.detached_copy();  // positives are constants
    Tensor sim_st = similarity(student, teacher, tau);  // student anchor x teacher
    Tensor num = sim_st;
    Tensor den;
    switch (cfg.nspt_variant) {
      case NsptVariant::kNspt:
      case NsptVariant::kNsptAa:
        den = similarity(student, student, tau);
        break;
      case NsptVariant::kNtpt:
        den = sim_st;
        break;
      case NsptVariant::kNsptAn: {
        // Student-student columns for current samples, student-teacher
        // columns for rehearsal samples.
        std::vector<double> cur_cols(n * n, 0.0), reh_cols(n * n, 0.0);
        for (int i : idx.current)
          for (std::size_t k = 0; k < n; ++k) cur_cols[k * n + static_cast<std::size_t>(i)] = 1.0;
        for (int h : idx.rehearsal)
          for (std::size_t k = 0; k < n; ++k) reh_cols[k * n + static_cast<std::size_t>(h)] = 1.0;
        Tensor sim_ss = similarity(student, student, tau);
        den = add(mul(sim_ss, Tensor::from({n, n}, std::move(cur_cols))),
                  mul(sim_st, Tensor::from({n, n}, std::move(reh_cols))));
        break;
      }
    }
    return weighted_terms(num, row_lse(den, excluded), anchors, pmap);
  };

  return add(modality_term(student_a, teacher_a), modality_term(student_t, teacher_t));
}

Tensor mm_loss(const Tensor& a_batch, const Tensor& t_batch, const std::vector<int>& labels,
               const BatchIndexSets& idx, const LossConfig& cfg, const Temperature& tau) {
  require_batch(a_batch, "mm_loss");
  require_batch(t_batch, "mm_loss");
  const auto n = a_batch.rows();
  if (t_batch.rows() != n) {
    throw std::invalid_argument("mm_loss: audio and text batches differ in size");
  }
  check_labels(labels, n, "mm_loss");
  idx.validate(static_cast<int>(n));

  std::vector<int> anchors =
      cfg.mm_exclude_rehearsal_anchors ? idx.current : idx.all(static_cast<int>(n));
  PositiveMap pmap = PositiveMap::from_labels(labels, /*include_self=*/true);
  std::vector<std::uint8_t> excluded =
      cfg.include_self_in_denominator ? std::vector<std::uint8_t>{} : diagonal_mask(n);

  Tensor sim_at = similarity(a_batch, t_batch, tau);
  Tensor sim_ta = similarity(t_batch, a_batch, tau);
  Tensor audio_to_text = weighted_terms(sim_at, row_lse(sim_at, excluded), anchors, pmap);
  Tensor text_to_audio = weighted_terms(sim_ta, row_lse(sim_ta, excluded), anchors, pmap);
  return add(audio_to_text, text_to_audio);
}

double lambda_nspt(int past_classes, int new_classes) {
  if (past_classes < 0 || new_classes < 1) {
    throw std::invalid_argument("lambda_nspt: need past >= 0 and new >= 1");
  }
  return static_cast<double>(past_classes) / static_cast<double>(past_classes + new_classes);
}

Tensor combined_loss(const Tensor& asr, const Tensor& mm, const Tensor& nspt, double lambda_mm,
                     double lambda_nspt_weight) {
  if (!asr.defined() || asr.numel() != 1 || !std::isfinite(asr.item())) {
    throw std::invalid_argument("combined_loss: asr term must be a finite scalar");
  }
  if (!std::isfinite(lambda_mm) || !std::isfinite(lambda_nspt_weight)) {
    throw std::invalid_argument("combined_loss: non-finite loss weight");
  }
  Tensor total = asr;
  if (mm.defined()) {
    if (!std::isfinite(mm.item())) throw std::invalid_argument("combined_loss: non-finite mm term");
    total = add(total, scale(mm, lambda_mm));
  }
  if (nspt.defined()) {
    if (!std::isfinite(nspt.item())) {
      throw std::invalid_argument("combined_loss: non-finite nspt term");
    }
    total = add(total, scale(nspt, lambda_nspt_weight));
  }
  return total;
}

Tensor feature_distillation_loss(const std::vector<Tensor>& student_feats,
                                 const std::vector<Tensor>& teacher_feats,
                                 const std::vector<int>& rehearsal_indices) {
  if (student_feats.size() != teacher_feats.size()) {
    throw std::invalid_argument("feature_distillation_loss: batch size mismatch");
  }
  if (rehearsal_indices.empty()) return Tensor::scalar(0.0);

  Tensor acc = Tensor::scalar(0.0);
  for (int i : rehearsal_indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= student_feats.size()) {
      throw std::invalid_argument("feature_distillation_loss: index out of range");
    }
    const auto k = static_cast<std::size_t>(i);
    Tensor s = l2_normalize_rows(student_feats[k]);
    Tensor t = l2_normalize_rows(teacher_feats[k].detached_copy());
    acc = add(acc, subtract(Tensor::scalar(1.0), dot(s, t)));
  }
  return scale(acc, 1.0 / static_cast<double>(rehearsal_indices.size()));
}

}  // namespace slucl
