#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace slucl {

// Fraction of predictions matching gold; a missing prediction counts as
// wrong. Rejects empty input.
double intent_accuracy(const std::vector<std::optional<int>>& predictions,
                       const std::vector<int>& golds);

// Unit-cost Levenshtein distance.
int edit_distance(const std::vector<int>& a, const std::vector<int>& b);

// edit_distance(reference, hypothesis) / |reference|; rejects empty
// references.
double wer(const std::vector<int>& reference, const std::vector<int>& hypothesis);

// R[i][j]: intent accuracy on task j's test set after training task i
// (lower triangle only); wer_after[i]: corpus-level WER over the union of
// test sets 0..i after task i.
struct RunMetrics {
  int num_tasks = 0;
  std::vector<std::vector<double>> acc;
  std::vector<double> wer_after;
  std::vector<int> test_sizes;

  void validate() const;
  // Accuracy over the cumulative test set after task i: size-weighted mean
  // of R[i][0..i] (plain mean when weighted is false).
  double after_task_accuracy(int i, bool weighted = true) const;
};

struct Summary {
  double avg_acc = 0.0;
  double last_acc = 0.0;
  double avg_wer = 0.0;
};

Summary summarize(const RunMetrics& metrics, bool weighted = true);

struct ResultRecord {
  std::string strategy;
  std::string setting;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool weighted = true;
  RunMetrics metrics;
  Summary summary;
  double wall_time_sec = 0.0;  // kept out of the metrics file so reruns are
                               // byte-identical
};

void write_metrics_json(const std::string& path, const ResultRecord& record);
ResultRecord load_metrics_json(const std::string& path);

// Comparison table grouped by (strategy, setting): one CSV row each with
// population mean +/- std of the derived scalars across seeds.
void write_comparison_csv(const std::string& path, const std::vector<ResultRecord>& records);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace slucl
