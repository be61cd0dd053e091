#include "slucl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace slucl {

using nlohmann::json;

double intent_accuracy(const std::vector<std::optional<int>>& predictions,
                       const std::vector<int>& golds) {
  if (predictions.empty()) throw std::invalid_argument("intent_accuracy: empty evaluation set");
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("intent_accuracy: prediction/gold size mismatch");
  }
  int correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i] && *predictions[i] == golds[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

int edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double wer(const std::vector<int>& reference, const std::vector<int>& hypothesis) {
  if (reference.empty()) throw std::invalid_argument("wer: empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

void RunMetrics::validate() const {
  if (num_tasks < 1) throw std::invalid_argument("run metrics: no tasks");
  if (static_cast<int>(acc.size()) != num_tasks ||
      static_cast<int>(wer_after.size()) != num_tasks ||
      static_cast<int>(test_sizes.size()) != num_tasks) {
    throw std::invalid_argument("run metrics: incomplete matrix");
  }
  for (int i = 0; i < num_tasks; ++i) {
    if (static_cast<int>(acc[static_cast<std::size_t>(i)].size()) != i + 1) {
      throw std::invalid_argument("run metrics: row " + std::to_string(i) +
                                  " is not lower-triangular");
    }
    for (double v : acc[static_cast<std::size_t>(i)]) {
      if (v < 0.0 || v > 1.0) throw std::invalid_argument("run metrics: accuracy outside [0,1]");
    }
  }
}

double RunMetrics::after_task_accuracy(int i, bool weighted) const {
  double total = 0.0, weight = 0.0;
  for (int j = 0; j <= i; ++j) {
    const double w = weighted ? static_cast<double>(test_sizes[static_cast<std::size_t>(j)]) : 1.0;
    total += w * acc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    weight += w;
  }
  return total / weight;
}

Summary summarize(const RunMetrics& metrics, bool weighted) {
  metrics.validate();
  Summary s;
  for (int i = 0; i < metrics.num_tasks; ++i) {
    s.avg_acc += metrics.after_task_accuracy(i, weighted);
    s.avg_wer += metrics.wer_after[static_cast<std::size_t>(i)];
  }
  s.avg_acc /= static_cast<double>(metrics.num_tasks);
  s.avg_wer /= static_cast<double>(metrics.num_tasks);
  s.last_acc = metrics.after_task_accuracy(metrics.num_tasks - 1, weighted);
  return s;
}

void write_metrics_json(const std::string& path, const ResultRecord& record) {
  record.metrics.validate();
  json j;
  j["strategy"] = record.strategy;
  j["setting"] = record.setting;
  j["seed"] = record.seed;
  j["config_hash"] = record.config_hash;
  j["weighted"] = record.weighted;
  j["num_tasks"] = record.metrics.num_tasks;
  j["test_sizes"] = record.metrics.test_sizes;
  j["acc_matrix"] = record.metrics.acc;
  j["wer_after"] = record.metrics.wer_after;
  j["avg_acc"] = record.summary.avg_acc;
  j["last_acc"] = record.summary.last_acc;
  j["avg_wer"] = record.summary.avg_wer;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << j.dump(1) << "\n";
}

ResultRecord load_metrics_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("metrics: cannot read " + path);
  json j = json::parse(in);
  ResultRecord record;
  record.strategy = j.at("strategy").get<std::string>();
  record.setting = j.at("setting").get<std::string>();
  record.seed = j.at("seed").get<std::uint64_t>();
  record.config_hash = j.at("config_hash").get<std::string>();
  record.weighted = j.at("weighted").get<bool>();
  record.metrics.num_tasks = j.at("num_tasks").get<int>();
  record.metrics.test_sizes = j.at("test_sizes").get<std::vector<int>>();
  record.metrics.acc = j.at("acc_matrix").get<std::vector<std::vector<double>>>();
  record.metrics.wer_after = j.at("wer_after").get<std::vector<double>>();
  record.summary.avg_acc = j.at("avg_acc").get<double>();
  record.summary.last_acc = j.at("last_acc").get<double>();
  record.summary.avg_wer = j.at("avg_wer").get<double>();
  return record;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no values");
  MeanStd ms;
  for (double v : values) ms.mean += v;
  ms.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - ms.mean) * (v - ms.mean);
  ms.std = std::sqrt(var / static_cast<double>(values.size()));
  return ms;
}

void write_comparison_csv(const std::string& path, const std::vector<ResultRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<const ResultRecord*>> groups;
  for (const auto& r : records) groups[{r.strategy, r.setting}].push_back(&r);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << "strategy,setting,seeds,avg_acc_mean,avg_acc_std,last_acc_mean,last_acc_std,"
         "avg_wer_mean,avg_wer_std\n";
  out.precision(17);
  for (const auto& [key, group] : groups) {
    std::vector<double> avg, last, w;
    for (const ResultRecord* r : group) {
      avg.push_back(r->summary.avg_acc);
      last.push_back(r->summary.last_acc);
      w.push_back(r->summary.avg_wer);
    }
    const MeanStd a = mean_std(avg), l = mean_std(last), ww = mean_std(w);
    out << key.first << "," << key.second << "," << group.size() << "," << a.mean << ","
        << a.std << "," << l.mean << "," << l.std << "," << ww.mean << "," << ww.std << "\n";
  }
}

}  // namespace slucl
