#include "slucl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"
#include "slucl/checkpoint.hpp"

namespace slucl {

using nlohmann::json;

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kFinetune: return "finetune";
    case Strategy::kEr: return "er";
    case Strategy::kAkd: return "akd";
    case Strategy::kTkd: return "tkd";
    case Strategy::kSkd: return "skd";
    case Strategy::kCoconut: return "coconut";
    case Strategy::kCoconutSkd: return "coconut+skd";
  }
  return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::kFinetune, Strategy::kEr, Strategy::kAkd, Strategy::kTkd,
                     Strategy::kSkd, Strategy::kCoconut, Strategy::kCoconutSkd}) {
    if (name == strategy_name(s)) return s;
  }
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

const char* selection_name(Selection s) {
  return s == Selection::kRandom ? "random" : "herding";
}

Selection selection_from_name(const std::string& name) {
  if (name == "random") return Selection::kRandom;
  if (name == "herding") return Selection::kHerding;
  throw std::invalid_argument("unknown selection '" + name + "'");
}

namespace {

bool uses_replay(Strategy s) { return s != Strategy::kFinetune; }
bool uses_skd(Strategy s) { return s == Strategy::kSkd || s == Strategy::kCoconutSkd; }
bool uses_contrastive(Strategy s) {
  return s == Strategy::kCoconut || s == Strategy::kCoconutSkd;
}

struct SampleForward {
  Tensor h_a;        // [U x d_a]
  Tensor pooled_a;   // [d_a], pre-projection (A-KD operates here)
  Tensor cls_t;      // [d_t], pre-projection (T-KD operates here)
  Tensor proj_a;     // [d_s], unit norm
  Tensor proj_t;     // [d_s], unit norm
};

SampleForward forward_sample(const Model& model, const BatchItem& item, bool want_embeddings,
                             bool use_cls) {
  SampleForward f;
  f.h_a = encode_audio(model, item.audio);
  if (!want_embeddings) return f;
  Tensor h_t = encode_text(model, item.target);
  f.pooled_a = mean_over_axis(f.h_a, 0);
  f.cls_t = mean_over_axis(gather_rows(h_t, {0}), 0);
  ProjectedPair pair = project_pair(model, f.h_a, h_t, 0, use_cls);
  f.proj_a = pair.a;
  f.proj_t = pair.t;
  return f;
}

Tensor stack_rows(const std::vector<Tensor>& vectors) { return concatenate(vectors, 0); }

// Projected audio embedding used for herding selection, raw audio, no grad.
std::vector<double> herding_embedding(const Model& model, const PairedExample& ex) {
  NoGradScope no_grad;
  Tensor h_a = encode_audio(model, ex.audio);
  Tensor pooled = mean_over_axis(h_a, 0);
  Tensor a = l2_normalize_rows(affine(pooled, model.param("proj_a.w"), model.param("proj_a.b")));
  return a.values();
}

int intents_before_task(const TaskSpec& tasks, int task_index) {
  int count = 0;
  for (int t = 0; t < task_index; ++t) {
    count += static_cast<int>(tasks.tasks[static_cast<std::size_t>(t)].intents.size());
  }
  return count;
}

}  // namespace

int effective_exemplars_per_class(const Corpus& corpus, const StrategyConfig& cfg) {
  if (cfg.buffer_fraction > 0.0) {
    const double target = cfg.buffer_fraction * static_cast<double>(corpus.train.size());
    return std::max(1, static_cast<int>(std::llround(target / corpus.spec.num_intents)));
  }
  return cfg.exemplars_per_class;
}

std::string config_json(const RunConfig& config) {
  json j;
  j["strategy"] = strategy_name(config.strat.strategy);
  j["selection"] = selection_name(config.strat.selection);
  j["exemplars_per_class"] = config.strat.exemplars_per_class;
  j["buffer_fraction"] = config.strat.buffer_fraction;
  j["mix_ratio"] = config.strat.mix_ratio;
  j["batch_size"] = config.strat.batch_size;
  j["epochs"] = config.strat.epochs;
  j["first_task_epochs"] = config.strat.first_task_epochs;
  j["beam_width"] = config.strat.beam_width;
  j["seed"] = config.strat.seed;
  j["augment"] = config.strat.augment;
  j["lr"] = config.strat.optimizer.lr;
  j["beta1"] = config.strat.optimizer.beta1;
  j["beta2"] = config.strat.optimizer.beta2;
  j["eps"] = config.strat.optimizer.eps;
  j["weight_decay"] = config.strat.optimizer.weight_decay;
  j["tau"] = config.strat.loss.tau;
  j["learnable_tau"] = config.strat.loss.learnable_tau;
  j["tau_init"] = config.strat.loss.tau_init;
  j["lambda_mm"] = config.strat.loss.lambda_mm;
  j["lambda_kd"] = config.strat.loss.lambda_kd;
  j["lambda_nspt_scale"] = config.strat.loss.lambda_nspt_scale;
  j["nspt_variant"] = nspt_variant_name(config.strat.loss.nspt_variant);
  j["mm_use_cls_only"] = config.strat.loss.mm_use_cls_only;
  j["mm_exclude_rehearsal_anchors"] = config.strat.loss.mm_exclude_rehearsal_anchors;
  j["include_self_in_denominator"] = config.strat.loss.include_self_in_denominator;
  j["num_tasks"] = config.num_tasks;
  j["intents_per_task"] = config.intents_per_task;
  j["weighted_metrics"] = config.weighted_metrics;
  j["wer_include_prefix"] = config.wer_include_prefix;
  j["d_in"] = config.dims.d_in;
  j["d_a"] = config.dims.d_a;
  j["d_t"] = config.dims.d_t;
  j["d_s"] = config.dims.d_s;
  j["d_att"] = config.dims.d_att;
  j["d_dec"] = config.dims.d_dec;
  return j.dump();
}

std::string config_hash_hex(const RunConfig& config) {
  const std::string text = config_json(config);
  std::ostringstream out;
  out << std::hex << fnv1a(text.data(), text.size());
  return out.str();
}

std::string run_setting_string(const RunConfig& config, const Corpus& corpus) {
  return "N" + std::to_string(config.num_tasks) + "-m" +
         std::to_string(effective_exemplars_per_class(corpus, config.strat));
}

namespace {

struct RunState {
  Model model;
  RehearsalBuffer buffer;
  std::optional<ModelSnapshot> teacher;
  std::map<int, std::vector<int>> pseudo_targets;
  std::set<int> trained_intents;
};

TaskLog train_one_task(RunState& state, const Corpus& corpus, const TaskSpec& tasks,
                       int task_index, const RunConfig& config) {
  const StrategyConfig& cfg = config.strat;
  const auto& task = tasks.tasks[static_cast<std::size_t>(task_index)];
  const Strategy strategy = cfg.strategy;

  TaskLog log;
  log.task_index = task_index;
  log.mm_active = uses_contrastive(strategy);
  log.nspt_active = uses_contrastive(strategy) && task_index >= 1 && state.teacher.has_value();
  log.kd_active = (strategy == Strategy::kAkd || strategy == Strategy::kTkd) && task_index >= 1 &&
                  state.teacher.has_value();

  double lambda_nspt_weight = 0.0;
  if (log.nspt_active) {
    const int past = intents_before_task(tasks, task_index);
    const int fresh = static_cast<int>(task.intents.size());
    lambda_nspt_weight = lambda_nspt(past, fresh) * cfg.loss.lambda_nspt_scale;
  }
  log.lambda_nspt_value = lambda_nspt_weight;

  const std::uint64_t teacher_hash = state.teacher ? state.teacher->hash : 0;
  const bool want_embeddings = uses_contrastive(strategy) || log.kd_active;

  AdamW optimizer(state.model.named_params(), cfg.optimizer);  // fresh moments per task
  const int epochs = task_index == 0 ? cfg.first_task_epochs : cfg.epochs;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng batch_rng(derive_seed(cfg.seed, "batches",
                              static_cast<std::uint64_t>(task_index) * 100003 +
                                  static_cast<std::uint64_t>(epoch)));
    const auto batches = make_batches(
        corpus, task.train_ids, uses_replay(strategy) ? state.buffer : RehearsalBuffer{},
        cfg.batch_size, cfg.mix_ratio, batch_rng,
        uses_skd(strategy) ? &state.pseudo_targets : nullptr, cfg.augment);

    EpochLog epoch_log;
    for (const MiniBatch& batch : batches) {
      Graph graph;
      RecordScope record(graph);

      std::vector<SampleForward> student;
      student.reserve(batch.items.size());
      for (const auto& item : batch.items) {
        student.push_back(
            forward_sample(state.model, item, want_embeddings, cfg.loss.mm_use_cls_only));
      }

      Tensor ce = Tensor::scalar(0.0);
      for (std::size_t i = 0; i < batch.items.size(); ++i) {
        ce = add(ce, sequence_nll(state.model, student[i].h_a, batch.items[i].target,
                                  corpus.vocab));
      }
      ce = scale(ce, 1.0 / static_cast<double>(batch.items.size()));

      std::vector<SampleForward> teacher_fwd;
      if ((log.nspt_active || log.kd_active) && !batch.idx.rehearsal.empty()) {
        NoGradScope no_grad;
        teacher_fwd.reserve(batch.items.size());
        for (const auto& item : batch.items) {
          teacher_fwd.push_back(forward_sample(state.teacher->model, item, true,
                                               cfg.loss.mm_use_cls_only));
        }
      }

      Tensor total;
      Tensor mm_term, nspt_term, kd_term;
      if (uses_contrastive(strategy)) {
        const Temperature tau = make_temperature(
            cfg.loss, state.model.has_log_tau() ? state.model.log_tau() : Tensor());
        std::vector<Tensor> a_rows, t_rows;
        for (const auto& f : student) {
          a_rows.push_back(f.proj_a);
          t_rows.push_back(f.proj_t);
        }
        Tensor a_batch = stack_rows(a_rows);
        Tensor t_batch = stack_rows(t_rows);
        // The loss formulas sum over anchors; the lambda weights follow the
        // convention of supervised-contrastive implementations that average
        // over them, so the trainer normalizes by the anchor count.
        const int mm_anchors = cfg.loss.mm_exclude_rehearsal_anchors
                                   ? static_cast<int>(batch.idx.current.size())
                                   : batch.size();
        mm_term = scale(mm_loss(a_batch, t_batch, batch.labels(), batch.idx, cfg.loss, tau),
                        1.0 / std::max(1, mm_anchors));
        if (log.nspt_active && !teacher_fwd.empty()) {
          std::vector<Tensor> ta_rows, tt_rows;
          for (const auto& f : teacher_fwd) {
            ta_rows.push_back(f.proj_a);
            tt_rows.push_back(f.proj_t);
          }
          const int nspt_anchors = cfg.loss.nspt_variant == NsptVariant::kNsptAa
                                       ? batch.size()
                                       : static_cast<int>(batch.idx.rehearsal.size());
          nspt_term = scale(nspt_loss(a_batch, stack_rows(ta_rows), t_batch,
                                      stack_rows(tt_rows), batch.labels(), batch.idx, cfg.loss,
                                      tau),
                            1.0 / std::max(1, nspt_anchors));
        }
        total = combined_loss(ce, mm_term, nspt_term, cfg.loss.lambda_mm, lambda_nspt_weight);
      } else if (log.kd_active && !teacher_fwd.empty()) {
        std::vector<Tensor> s_feats, t_feats;
        for (std::size_t i = 0; i < student.size(); ++i) {
          if (strategy == Strategy::kAkd) {
            s_feats.push_back(student[i].pooled_a);
            t_feats.push_back(teacher_fwd[i].pooled_a);
          } else {
            s_feats.push_back(student[i].cls_t);
            t_feats.push_back(teacher_fwd[i].cls_t);
          }
        }
        kd_term = feature_distillation_loss(s_feats, t_feats, batch.idx.rehearsal);
        total = add(ce, scale(kd_term, cfg.loss.lambda_kd));
      } else {
        total = ce;
      }

      if (!std::isfinite(total.item())) {
        throw std::runtime_error("train_task: loss diverged at task " +
                                 std::to_string(task_index) + " epoch " + std::to_string(epoch));
      }

      optimizer.zero_grad();
      backward(total, graph);
      optimizer.step();

      epoch_log.asr += ce.item();
      if (mm_term.defined()) epoch_log.mm += mm_term.item();
      if (nspt_term.defined()) epoch_log.nspt += nspt_term.item();
      if (kd_term.defined()) epoch_log.kd += kd_term.item();
      epoch_log.total += total.item();
    }
    const double nb = static_cast<double>(std::max<std::size_t>(1, batches.size()));
    epoch_log.asr /= nb;
    epoch_log.mm /= nb;
    epoch_log.nspt /= nb;
    epoch_log.kd /= nb;
    epoch_log.total /= nb;
    log.epochs.push_back(epoch_log);
  }

  // The teacher must not have moved while this task trained.
  if (state.teacher && parameter_hash(state.teacher->model.named_params()) != teacher_hash) {
    throw std::runtime_error("protocol violation: teacher changed during task " +
                             std::to_string(task_index));
  }
  return log;
}

void refresh_buffer(RunState& state, const Corpus& corpus, const TaskSpec& tasks, int task_index,
                    const StrategyConfig& cfg, int exemplars_per_class) {
  if (!uses_replay(cfg.strategy)) return;
  const auto& task = tasks.tasks[static_cast<std::size_t>(task_index)];

  // Group this task's train ids per intent.
  std::map<int, std::vector<int>> per_class;
  for (int train_id : task.train_ids) {
    per_class[corpus.train[static_cast<std::size_t>(train_id)].intent_id].push_back(train_id);
  }
  for (const auto& [intent, ids] : per_class) {
    std::vector<int> chosen;
    if (cfg.selection == Selection::kRandom) {
      Rng rng(derive_seed(cfg.seed, "select", static_cast<std::uint64_t>(intent)));
      chosen = select_exemplars_random(ids, exemplars_per_class, rng);
    } else {
      std::vector<std::vector<double>> embeddings;
      embeddings.reserve(ids.size());
      for (int id : ids) {
        embeddings.push_back(
            herding_embedding(state.model, corpus.train[static_cast<std::size_t>(id)]));
      }
      chosen = select_exemplars_herding(ids, embeddings, exemplars_per_class);
    }
    state.buffer.add_class(intent, std::move(chosen));
  }
}

void prepare_pseudo_transcripts(RunState& state, const Corpus& corpus, int max_len,
                                const StrategyConfig& cfg, std::vector<std::string>* warnings) {
  state.pseudo_targets.clear();
  for (const auto& [intent, ids] : state.buffer.classes()) {
    for (int train_id : ids) {
      const PairedExample& ex = corpus.train[static_cast<std::size_t>(train_id)];
      DecodeResult dec = decode(state.model, ex.audio, cfg.beam_width, max_len,
                                corpus.vocab.bos_id(), corpus.vocab.eos_id());
      if (dec.tokens.empty()) {
        if (warnings) {
          warnings->push_back("pseudo-transcript empty for example " +
                              std::to_string(ex.example_id) + ", keeping gold");
        }
        state.pseudo_targets[ex.example_id] = corpus.extended_transcript(ex);
      } else {
        state.pseudo_targets[ex.example_id] = dec.tokens;
      }
    }
  }
}

void check_buffer_provenance(const RunState& state) {
  for (const auto& [intent, ids] : state.buffer.classes()) {
    if (!state.trained_intents.count(intent)) {
      throw std::runtime_error("protocol violation: buffer holds unseen class " +
                               std::to_string(intent));
    }
  }
}

void evaluate_after_task(const Model& model, const Corpus& corpus, const TaskSpec& tasks,
                         int task_index, const RunConfig& config, int max_len,
                         RunMetrics& metrics) {
  const auto& vocab = corpus.vocab;
  std::vector<double> row;
  long total_edits = 0, total_ref_len = 0;
  int cumulative_correct = 0, cumulative_count = 0;
  for (int j = 0; j <= task_index; ++j) {
    const auto& task = tasks.tasks[static_cast<std::size_t>(j)];
    int correct = 0;
    for (int test_id : task.test_ids) {
      const PairedExample& ex = corpus.test[static_cast<std::size_t>(test_id)];
      DecodeResult dec = decode(model, ex.audio, config.strat.beam_width, max_len, vocab.bos_id(),
                                vocab.eos_id());
      const auto pred = extract_intent(vocab, dec.tokens);
      if (pred && *pred == ex.intent_id) ++correct;

      std::vector<int> ref = corpus.extended_transcript(ex);
      std::vector<int> hyp = dec.tokens;
      if (!config.wer_include_prefix) {
        ref.erase(ref.begin(), ref.begin() + std::min<std::size_t>(2, ref.size()));
        hyp.erase(hyp.begin(), hyp.begin() + std::min<std::size_t>(2, hyp.size()));
      }
      total_edits += edit_distance(ref, hyp);
      total_ref_len += static_cast<long>(ref.size());
    }
    row.push_back(static_cast<double>(correct) /
                  static_cast<double>(task.test_ids.size()));
    cumulative_correct += correct;
    cumulative_count += static_cast<int>(task.test_ids.size());
  }
  metrics.acc.push_back(row);
  metrics.wer_after.push_back(static_cast<double>(total_edits) /
                              static_cast<double>(total_ref_len));

  // Consistency: cumulative accuracy equals the size-weighted mean of
  // per-task accuracies.
  double weighted = 0.0, weight = 0.0;
  for (int j = 0; j <= task_index; ++j) {
    const double w =
        static_cast<double>(tasks.tasks[static_cast<std::size_t>(j)].test_ids.size());
    weighted += w * row[static_cast<std::size_t>(j)];
    weight += w;
  }
  const double direct = static_cast<double>(cumulative_correct) /
                        static_cast<double>(cumulative_count);
  if (std::fabs(weighted / weight - direct) > 1e-9) {
    throw std::runtime_error("metrics inconsistency: cumulative accuracy mismatch");
  }
}

void write_buffer_manifest(const std::string& path, const RehearsalBuffer& buffer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "intent_id example_id rank\n";
  for (const auto& [intent, ids] : buffer.classes()) {
    for (std::size_t r = 0; r < ids.size(); ++r) {
      out << intent << " " << ids[r] << " " << r << "\n";
    }
  }
}

void write_pseudo_table(const std::string& path, const std::map<int, std::vector<int>>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [example_id, tokens] : table) {
    out << example_id;
    for (int t : tokens) out << " " << t;
    out << "\n";
  }
}

}  // namespace

RunResult run_experiment(const Corpus& corpus, const RunConfig& config_in,
                         const std::string& run_dir) {
  const auto start_time = std::chrono::steady_clock::now();

  RunConfig config = config_in;
  if (config.intents_per_task == 0) {
    if (corpus.spec.num_intents % config.num_tasks != 0) {
      throw std::invalid_argument("run_experiment: intents do not divide evenly into tasks");
    }
    config.intents_per_task = corpus.spec.num_intents / config.num_tasks;
  }
  config.dims.vocab = corpus.vocab.size();
  config.dims.max_decode_len = 2 + corpus.max_words + 1;

  const TaskSpec tasks = split_tasks(corpus, config.num_tasks, config.intents_per_task);
  const int exemplars = effective_exemplars_per_class(corpus, config.strat);
  const int max_len = config.dims.max_decode_len;

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    std::ofstream cfg_out(run_dir + "/config.json", std::ios::binary);
    cfg_out << config_json(config) << "\n";
    corpus.vocab.save(run_dir + "/vocab.txt");
  }

  RunState state;
  state.model = Model::init(config.dims, derive_seed(config.strat.seed, "model-seed"),
                            config.strat.loss.learnable_tau, config.strat.loss.tau_init);

  RunResult result;
  result.metrics.num_tasks = config.num_tasks;
  for (const auto& task : tasks.tasks) {
    result.metrics.test_sizes.push_back(static_cast<int>(task.test_ids.size()));
  }

  std::vector<std::string> warnings;
  for (int n = 0; n < config.num_tasks; ++n) {
    result.task_logs.push_back(train_one_task(state, corpus, tasks, n, config));
    for (int intent : tasks.tasks[static_cast<std::size_t>(n)].intents) {
      state.trained_intents.insert(intent);
    }

    refresh_buffer(state, corpus, tasks, n, config.strat, exemplars);
    check_buffer_provenance(state);

    state.teacher = snapshot_teacher(state.model, n);
    if (uses_skd(config.strat.strategy)) {
      prepare_pseudo_transcripts(state, corpus, max_len, config.strat, &warnings);
    }

    evaluate_after_task(state.model, corpus, tasks, n, config, max_len, result.metrics);

    if (!run_dir.empty()) {
      const std::string tag = run_dir + "/task" + std::to_string(n);
      save_checkpoint(tag + "_model", state.model.named_params());
      write_buffer_manifest(tag + "_buffer.txt", state.buffer);
      if (uses_skd(config.strat.strategy)) {
        write_pseudo_table(tag + "_pseudo.txt", state.pseudo_targets);
      }
    }
  }

  result.summary = summarize(result.metrics, config.weighted_metrics);
  result.record.strategy = strategy_name(config.strat.strategy);
  result.record.setting = run_setting_string(config, corpus);
  result.record.seed = config.strat.seed;
  result.record.config_hash = config_hash_hex(config);
  result.record.weighted = config.weighted_metrics;
  result.record.metrics = result.metrics;
  result.record.summary = result.summary;
  result.record.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();

  if (!run_dir.empty()) {
    write_metrics_json(run_dir + "/metrics.json", result.record);
    std::ofstream timing(run_dir + "/timing.txt", std::ios::binary);
    timing << result.record.wall_time_sec << "\n";
    if (!warnings.empty()) {
      std::ofstream warn(run_dir + "/warnings.txt", std::ios::binary);
      for (const auto& w : warnings) warn << w << "\n";
    }
  }
  return result;
}

}  // namespace slucl
