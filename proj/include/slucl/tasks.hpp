#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slucl/corpus.hpp"
#include "slucl/model.hpp"
#include "slucl/seq2seq.hpp"

namespace slucl {

// Class-incremental task layout: disjoint intent sets, one per task, with the
// corpus's train/test example indices routed to their task.
struct TaskSpec {
  struct Task {
    std::vector<int> intents;
    std::vector<int> train_ids;  // indices into corpus.train
    std::vector<int> test_ids;   // indices into corpus.test
  };
  std::vector<Task> tasks;

  int num_tasks() const { return static_cast<int>(tasks.size()); }
};

// Intents are ordered by descending train sample count (ties by intent id)
// and chunked into num_tasks consecutive groups, so larger classes are seen
// first. Rejects counts that do not divide evenly.
TaskSpec split_tasks(const Corpus& corpus, int num_tasks, int intents_per_task);

// Per-class exemplar id lists, ordered by selection priority. Ids refer to
// corpus.train. The buffer only ever contains classes from completed tasks
// and never evicts.
class RehearsalBuffer {
 public:
  void add_class(int intent_id, std::vector<int> exemplar_ids);
  bool empty() const { return total_ == 0; }
  int total() const { return total_; }
  const std::map<int, std::vector<int>>& classes() const { return per_class_; }
  std::vector<int> all_ids() const;

 private:
  std::map<int, std::vector<int>> per_class_;
  int total_ = 0;
};

// Uniform sample without replacement per class; m >= class size keeps the
// whole class. Deterministic given the rng state.
std::vector<int> select_exemplars_random(const std::vector<int>& class_example_ids, int m,
                                         Rng& rng);

// iCaRL-style herding. embeddings[i] is the representation of
// class_example_ids[i]; with class mean mu, step j greedily picks the
// candidate x minimizing || mu - (1/j)(sum chosen + x) ||, ties toward the
// lower example id, without replacement.
std::vector<int> select_exemplars_herding(const std::vector<int>& class_example_ids,
                                          const std::vector<std::vector<double>>& embeddings,
                                          int m);

// Immutable teacher: a frozen deep copy plus a hash for change detection.
struct ModelSnapshot {
  Model model;
  int task_index = -1;
  std::uint64_t hash = 0;
};

ModelSnapshot snapshot_teacher(const Model& model, int task_index);

// Replay-mixed batch stream for one epoch. Current-task slots walk a
// shuffled permutation of task_train_ids exactly once; floor(mix_ratio *
// batch_size) rehearsal slots are drawn uniformly from the buffer with
// replacement (none while the buffer is empty). Every sample's audio passes
// through spec_aug. pseudo_targets, when present, overrides rehearsal
// transcripts by example id (the S-KD hook).
std::vector<MiniBatch> make_batches(const Corpus& corpus, const std::vector<int>& task_train_ids,
                                    const RehearsalBuffer& buffer, int batch_size,
                                    double mix_ratio, Rng& rng,
                                    const std::map<int, std::vector<int>>* pseudo_targets = nullptr,
                                    bool augment = true);

}  // namespace slucl
