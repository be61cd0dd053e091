#include "slucl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slucl/checkpoint.hpp"

namespace slucl {

TaskSpec split_tasks(const Corpus& corpus, int num_tasks, int intents_per_task) {
  const int total = corpus.spec.num_intents;
  if (num_tasks < 1 || intents_per_task < 1 || num_tasks * intents_per_task != total) {
    throw std::invalid_argument("split_tasks: " + std::to_string(num_tasks) + " tasks x " +
                                std::to_string(intents_per_task) +
                                " intents do not cover " + std::to_string(total) + " classes");
  }

  // Largest classes first; ties by intent id.
  std::vector<int> order(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const int ca = corpus.intent_train_counts[static_cast<std::size_t>(a)];
    const int cb = corpus.intent_train_counts[static_cast<std::size_t>(b)];
    if (ca != cb) return ca > cb;
    return a < b;
  });

  TaskSpec spec;
  spec.tasks.resize(static_cast<std::size_t>(num_tasks));
  std::vector<int> task_of_intent(static_cast<std::size_t>(total));
  for (int t = 0; t < num_tasks; ++t) {
    auto& task = spec.tasks[static_cast<std::size_t>(t)];
    for (int j = 0; j < intents_per_task; ++j) {
      const int intent = order[static_cast<std::size_t>(t * intents_per_task + j)];
      task.intents.push_back(intent);
      task_of_intent[static_cast<std::size_t>(intent)] = t;
    }
  }
  for (std::size_t i = 0; i < corpus.train.size(); ++i) {
    const int t = task_of_intent[static_cast<std::size_t>(corpus.train[i].intent_id)];
    spec.tasks[static_cast<std::size_t>(t)].train_ids.push_back(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < corpus.test.size(); ++i) {
    const int t = task_of_intent[static_cast<std::size_t>(corpus.test[i].intent_id)];
    spec.tasks[static_cast<std::size_t>(t)].test_ids.push_back(static_cast<int>(i));
  }
  return spec;
}

void RehearsalBuffer::add_class(int intent_id, std::vector<int> exemplar_ids) {
  if (per_class_.count(intent_id)) {
    throw std::invalid_argument("rehearsal buffer: class " + std::to_string(intent_id) +
                                " already stored");
  }
  total_ += static_cast<int>(exemplar_ids.size());
  per_class_[intent_id] = std::move(exemplar_ids);
}

std::vector<int> RehearsalBuffer::all_ids() const {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(total_));
  for (const auto& [intent, list] : per_class_) ids.insert(ids.end(), list.begin(), list.end());
  return ids;
}

std::vector<int> select_exemplars_random(const std::vector<int>& class_example_ids, int m,
                                         Rng& rng) {
  if (m < 1) throw std::invalid_argument("select_exemplars_random: m must be >= 1");
  std::vector<int> pool = class_example_ids;
  if (m >= static_cast<int>(pool.size())) return pool;
  // Partial Fisher-Yates over the first m slots.
  for (int i = 0; i < m; ++i) {
    const int j = i + rng.below_int(static_cast<int>(pool.size()) - i);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(m));
  return pool;
}

std::vector<int> select_exemplars_herding(const std::vector<int>& class_example_ids,
                                          const std::vector<std::vector<double>>& embeddings,
                                          int m) {
  if (class_example_ids.empty()) return {};
  if (embeddings.size() != class_example_ids.size()) {
    throw std::invalid_argument("select_exemplars_herding: embedding count mismatch");
  }
  if (m < 1) throw std::invalid_argument("select_exemplars_herding: m must be >= 1");

  const std::size_t n = class_example_ids.size();
  const std::size_t d = embeddings[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != d) throw std::invalid_argument("select_exemplars_herding: ragged embeddings");
    for (std::size_t j = 0; j < d; ++j) mean[j] += e[j];
  }
  for (double& v : mean) v /= static_cast<double>(n);

  const int take = std::min<int>(m, static_cast<int>(n));
  std::vector<int> chosen;
  std::vector<char> used(n, 0);
  std::vector<double> running_sum(d, 0.0);
  for (int step = 1; step <= take; ++step) {
    int best = -1;
    double best_dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double coord = mean[j] - (running_sum[j] + embeddings[i][j]) / step;
        dist += coord * coord;
      }
      const bool wins =
          best < 0 || dist < best_dist ||
          (dist == best_dist &&
           class_example_ids[i] < class_example_ids[static_cast<std::size_t>(best)]);
      if (wins) {
        best = static_cast<int>(i);
        best_dist = dist;
      }
    }
    used[static_cast<std::size_t>(best)] = 1;
    for (std::size_t j = 0; j < d; ++j) running_sum[j] += embeddings[static_cast<std::size_t>(best)][j];
    chosen.push_back(class_example_ids[static_cast<std::size_t>(best)]);
  }
  return chosen;
}

ModelSnapshot snapshot_teacher(const Model& model, int task_index) {
  ModelSnapshot snap;
  snap.model = model.clone_frozen();
  snap.task_index = task_index;
  snap.hash = parameter_hash(snap.model.named_params());
  return snap;
}

std::vector<MiniBatch> make_batches(const Corpus& corpus, const std::vector<int>& task_train_ids,
                                    const RehearsalBuffer& buffer, int batch_size,
                                    double mix_ratio, Rng& rng,
                                    const std::map<int, std::vector<int>>* pseudo_targets,
                                    bool augment) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");
  if (mix_ratio < 0.0 || mix_ratio >= 1.0) {
    throw std::invalid_argument("make_batches: mix ratio must be in [0, 1)");
  }

  const int rehearsal_slots =
      buffer.empty() ? 0 : static_cast<int>(std::floor(mix_ratio * batch_size));
  const int current_slots = batch_size - rehearsal_slots;

  std::vector<int> order = task_train_ids;
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  const std::vector<int> buffer_ids = buffer.all_ids();

  auto make_item = [&](int train_id, bool rehearsal) {
    const PairedExample& ex = corpus.train[static_cast<std::size_t>(train_id)];
    BatchItem item;
    item.example_id = ex.example_id;
    item.intent_id = ex.intent_id;
    item.audio = augment ? spec_aug(ex.audio, rng) : ex.audio;
    if (rehearsal && pseudo_targets) {
      auto it = pseudo_targets->find(ex.example_id);
      if (it != pseudo_targets->end()) {
        item.target = it->second;
        return item;
      }
    }
    item.target = corpus.extended_transcript(ex);
    return item;
  };

  std::vector<MiniBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(current_slots)) {
    MiniBatch batch;
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(current_slots));
    for (std::size_t i = start; i < stop; ++i) {
      batch.idx.current.push_back(batch.size());
      batch.items.push_back(make_item(order[i], /*rehearsal=*/false));
    }
    for (int r = 0; r < rehearsal_slots; ++r) {
      const int pick = buffer_ids[rng.below(buffer_ids.size())];
      batch.idx.rehearsal.push_back(batch.size());
      batch.items.push_back(make_item(pick, /*rehearsal=*/true));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace slucl
