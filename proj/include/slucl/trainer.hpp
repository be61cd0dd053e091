#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slucl/corpus.hpp"
#include "slucl/losses.hpp"
#include "slucl/metrics.hpp"
#include "slucl/model.hpp"
#include "slucl/optim.hpp"
#include "slucl/seq2seq.hpp"
#include "slucl/tasks.hpp"

namespace slucl {

enum class Strategy { kFinetune, kEr, kAkd, kTkd, kSkd, kCoconut, kCoconutSkd };
enum class Selection { kRandom, kHerding };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
const char* selection_name(Selection s);
Selection selection_from_name(const std::string& name);

struct StrategyConfig {
  Strategy strategy = Strategy::kCoconut;
  Selection selection = Selection::kHerding;
  int exemplars_per_class = 8;
  double buffer_fraction = 0.0;  // > 0 derives exemplars_per_class from it
  LossConfig loss;
  double mix_ratio = 0.25;  // fraction of batch slots used for rehearsal
  int batch_size = 32;
  int epochs = 20;
  int first_task_epochs = 30;
  int beam_width = 3;
  AdamWConfig optimizer;
  std::uint64_t seed = 1;
  bool augment = true;
};

struct RunConfig {
  StrategyConfig strat;
  int num_tasks = 6;
  int intents_per_task = 0;  // 0: derived from the corpus
  bool weighted_metrics = true;
  bool wer_include_prefix = true;  // score WER on the full extended transcript
  ModelDims dims;                  // vocab/max_decode_len filled from the corpus
};

struct EpochLog {
  double asr = 0.0;
  double mm = 0.0;
  double nspt = 0.0;
  double kd = 0.0;
  double total = 0.0;
};

struct TaskLog {
  int task_index = -1;
  bool mm_active = false;
  bool nspt_active = false;
  bool kd_active = false;
  double lambda_nspt_value = 0.0;
  std::vector<EpochLog> epochs;
};

struct RunResult {
  RunMetrics metrics;
  Summary summary;
  std::vector<TaskLog> task_logs;
  ResultRecord record;
};

// Canonical JSON of the full run configuration; its FNV-1a hash keys runs.
std::string config_json(const RunConfig& config);
std::string config_hash_hex(const RunConfig& config);

// Full class-incremental run: split tasks, train each with the configured
// strategy, snapshot the teacher and refresh the rehearsal buffer at every
// task boundary, and evaluate on the cumulative test set after each task.
// Protocol invariants (buffer class provenance, teacher immutability while a
// task trains) are checked inline and throw on violation. When run_dir is
// non-empty, checkpoints, buffer manifests, pseudo-transcript tables, config,
// and metrics are written there.
RunResult run_experiment(const Corpus& corpus, const RunConfig& config,
                         const std::string& run_dir = "");

// Exemplars-per-class for this run (buffer_fraction-derived when set).
int effective_exemplars_per_class(const Corpus& corpus, const StrategyConfig& cfg);

std::string run_setting_string(const RunConfig& config, const Corpus& corpus);

}  // namespace slucl
