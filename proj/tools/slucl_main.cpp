// Command-line driver: corpus generation, continual training runs, the
// ablation and memory-size grids, the finite-difference suite, and run-report
// aggregation.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "slucl/corpus.hpp"
#include "slucl/grad_suite.hpp"
#include "slucl/metrics.hpp"
#include "slucl/trainer.hpp"

namespace {

using namespace slucl;

struct TrainFlags {
  std::string corpus_dir;
  std::string out_dir;
  std::string strategy = "coconut";
  std::string selection = "herding";
  std::string nspt_variant = "NSPT";
  RunConfig config;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--corpus", flags.corpus_dir, "corpus directory")->required();
  cmd->add_option("--out", flags.out_dir, "output run directory");
  cmd->add_option("--strategy", flags.strategy,
                  "finetune|er|akd|tkd|skd|coconut|coconut+skd");
  cmd->add_option("--selection", flags.selection, "random|herding");
  cmd->add_option("--tasks", flags.config.num_tasks, "number of tasks");
  cmd->add_option("--intents-per-task", flags.config.intents_per_task,
                  "intents per task (0 = derived)");
  cmd->add_option("--exemplars-per-class", flags.config.strat.exemplars_per_class,
                  "rehearsal exemplars per class");
  cmd->add_option("--buffer-fraction", flags.config.strat.buffer_fraction,
                  "buffer size as a fraction of the training set (overrides exemplars)");
  cmd->add_option("--seed", flags.config.strat.seed, "run seed");
  cmd->add_option("--epochs", flags.config.strat.epochs, "epochs per task");
  cmd->add_option("--first-epochs", flags.config.strat.first_task_epochs,
                  "epochs for the first task");
  cmd->add_option("--batch-size", flags.config.strat.batch_size, "minibatch size");
  cmd->add_option("--mix-ratio", flags.config.strat.mix_ratio,
                  "fraction of batch slots reserved for rehearsal samples");
  cmd->add_option("--beam-width", flags.config.strat.beam_width, "decode beam width");
  cmd->add_option("--lr", flags.config.strat.optimizer.lr, "learning rate");
  cmd->add_option("--weight-decay", flags.config.strat.optimizer.weight_decay, "weight decay");
  cmd->add_option("--tau", flags.config.strat.loss.tau, "contrastive temperature");
  cmd->add_flag("--learnable-tau", flags.config.strat.loss.learnable_tau,
                "learn the temperature (log-parameterized)");
  cmd->add_option("--tau-init", flags.config.strat.loss.tau_init,
                  "initial temperature when learnable");
  cmd->add_option("--lambda-mm", flags.config.strat.loss.lambda_mm, "multimodal loss weight");
  cmd->add_option("--lambda-kd", flags.config.strat.loss.lambda_kd,
                  "feature-distillation weight (akd/tkd)");
  cmd->add_option("--lambda-nspt-scale", flags.config.strat.loss.lambda_nspt_scale,
                  "multiplier on the past/new class schedule");
  cmd->add_option("--nspt-variant", flags.nspt_variant, "NSPT|NTPT|NSPT-AA|NSPT-AN");
  cmd->add_option("--mm-cls-only", flags.config.strat.loss.mm_use_cls_only,
                  "project the class token only (0/1)");
  cmd->add_option("--mm-exclude-rehearsal-anchors",
                  flags.config.strat.loss.mm_exclude_rehearsal_anchors,
                  "rehearsal samples are never anchors in the MM loss (0/1)");
  cmd->add_option("--include-self-in-denominator",
                  flags.config.strat.loss.include_self_in_denominator,
                  "contrastive denominators include i=k (0/1)");
  cmd->add_option("--no-augment", [&flags](const std::vector<std::string>&) {
    flags.config.strat.augment = false;
    return true;
  }, "disable audio augmentation")->expected(0);
  cmd->add_option("--unweighted-metrics", [&flags](const std::vector<std::string>&) {
    flags.config.weighted_metrics = false;
    return true;
  }, "plain mean over per-task accuracies")->expected(0);
  cmd->add_option("--wer-words-only", [&flags](const std::vector<std::string>&) {
    flags.config.wer_include_prefix = false;
    return true;
  }, "score WER without the intent and separator tokens")->expected(0);
  cmd->set_config("--config", "", "config file mirroring these flags (flags override)");
}

RunConfig resolve(const TrainFlags& flags) {
  RunConfig config = flags.config;
  config.strat.strategy = strategy_from_name(flags.strategy);
  config.strat.selection = selection_from_name(flags.selection);
  config.strat.loss.nspt_variant = nspt_variant_from_name(flags.nspt_variant);
  return config;
}

RunResult run_and_report(const Corpus& corpus, const RunConfig& config,
                         const std::string& out_dir) {
  RunResult result = run_experiment(corpus, config, out_dir);
  std::printf("%-12s seed=%llu %s avg_acc=%.4f last_acc=%.4f avg_wer=%.4f (%.1fs)\n",
              result.record.strategy.c_str(),
              static_cast<unsigned long long>(result.record.seed),
              result.record.setting.c_str(), result.summary.avg_acc, result.summary.last_acc,
              result.summary.avg_wer, result.record.wall_time_sec);
  return result;
}

int cmd_generate_data(const CorpusSpec& spec, const std::string& out_dir) {
  Corpus corpus = generate_corpus(spec);
  save_corpus(out_dir, corpus);
  std::printf("corpus: %d intents, %zu train / %zu test examples, vocab %d -> %s\n",
              corpus.spec.num_intents, corpus.train.size(), corpus.test.size(),
              corpus.vocab.size(), out_dir.c_str());
  return 0;
}

int cmd_grad_check(int batches, double h, double tol) {
  GradSuiteResult suite = run_grad_suite(batches, h, tol);
  for (const auto& item : suite.items) {
    std::printf("%-22s max_rel_err=%.3e teacher_grad_absent=%s %s\n", item.name.c_str(),
                item.max_rel_error, item.teacher_grad_absent ? "yes" : "no",
                item.pass ? "[PASS]" : "[FAIL]");
  }
  std::printf("grad suite: %s in %.1fs (tol %.1e)\n", suite.all_pass() ? "PASS" : "FAIL",
              suite.seconds, suite.tolerance);
  return suite.all_pass() ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
  std::vector<ResultRecord> records;
  for (const auto& dir : run_dirs) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.path().filename() == "metrics.json") {
        records.push_back(load_metrics_json(entry.path().string()));
      }
    }
  }
  if (records.empty()) {
    std::fprintf(stderr, "report: no metrics.json found\n");
    return 1;
  }
  write_comparison_csv(out_csv, records);
  std::printf("report: %zu runs -> %s\n", records.size(), out_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual seq2seq spoken-language-understanding trainer"};
  app.require_subcommand(1);

  // generate-data
  CorpusSpec corpus_spec;
  std::string data_out;
  auto* gen = app.add_subcommand("generate-data", "generate a synthetic paired corpus");
  gen->add_option("--out", data_out, "output directory")->required();
  gen->add_option("--num-intents", corpus_spec.num_intents);
  gen->add_option("--min-samples", corpus_spec.min_samples_per_intent);
  gen->add_option("--max-samples", corpus_spec.max_samples_per_intent);
  gen->add_option("--min-words", corpus_spec.min_words);
  gen->add_option("--max-words", corpus_spec.max_words);
  gen->add_option("--filler-pools", corpus_spec.filler_pools);
  gen->add_option("--pool-size", corpus_spec.pool_size);
  gen->add_option("--d-in", corpus_spec.d_in);
  gen->add_option("--frames-per-word", corpus_spec.frames_per_word);
  gen->add_option("--noise-std", corpus_spec.noise_std);
  gen->add_option("--train-fraction", corpus_spec.train_fraction);
  gen->add_option("--seed", corpus_spec.seed);

  // train
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "run one continual-learning experiment");
  add_train_flags(train, train_flags);

  // ablate
  TrainFlags ablate_flags;
  std::vector<std::uint64_t> ablate_seeds{1};
  auto* ablate = app.add_subcommand(
      "ablate", "run the distillation-variant grid and the MM flag grid");
  add_train_flags(ablate, ablate_flags);
  ablate->add_option("--seeds", ablate_seeds, "seeds to sweep");

  // sweep-memory
  TrainFlags sweep_flags;
  std::vector<int> sweep_sizes{2, 4, 8, 30};
  std::vector<std::string> sweep_strategies{"er", "coconut"};
  std::vector<std::uint64_t> sweep_seeds{1};
  auto* sweep = app.add_subcommand("sweep-memory", "accuracy as a function of buffer size");
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--exemplars", sweep_sizes, "exemplars-per-class grid");
  sweep->add_option("--strategies", sweep_strategies, "strategies to sweep");
  sweep->add_option("--seeds", sweep_seeds, "seeds to sweep");

  // grad-check
  int gc_batches = 20;
  double gc_h = 1e-4, gc_tol = 1e-4;
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient suite");
  gc->add_option("--batches", gc_batches, "random batches per objective");
  gc->add_option("--step", gc_h, "finite-difference step");
  gc->add_option("--tol", gc_tol, "max relative error");

  // report
  std::vector<std::string> report_dirs;
  std::string report_out = "comparison.csv";
  auto* report = app.add_subcommand("report", "aggregate run directories into a table");
  report->add_option("--runs", report_dirs, "run directories to scan")->required();
  report->add_option("--out", report_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate_data(corpus_spec, data_out);
    if (gc->parsed()) return cmd_grad_check(gc_batches, gc_h, gc_tol);
    if (report->parsed()) return cmd_report(report_dirs, report_out);

    if (train->parsed()) {
      const Corpus corpus = load_corpus(train_flags.corpus_dir);
      run_and_report(corpus, resolve(train_flags), train_flags.out_dir);
      return 0;
    }

    if (ablate->parsed()) {
      const Corpus corpus = load_corpus(ablate_flags.corpus_dir);
      const RunConfig base = resolve(ablate_flags);
      std::vector<ResultRecord> records;
      auto run_variant = [&](const std::string& tag, RunConfig config, std::uint64_t seed) {
        config.strat.seed = seed;
        const std::string dir = ablate_flags.out_dir.empty()
                                    ? ""
                                    : ablate_flags.out_dir + "/" + tag + "-s" +
                                          std::to_string(seed);
        RunResult r = run_and_report(corpus, config, dir);
        r.record.strategy = tag;
        records.push_back(r.record);
      };
      for (std::uint64_t seed : ablate_seeds) {
        for (const char* variant : {"NSPT", "NTPT", "NSPT-AA", "NSPT-AN"}) {
          RunConfig config = base;
          config.strat.strategy = Strategy::kCoconut;
          config.strat.loss.nspt_variant = nspt_variant_from_name(variant);
          run_variant(std::string("mm+") + variant, config, seed);
        }
        for (const bool cls : {false, true}) {
          for (const bool anchor : {false, true}) {
            RunConfig config = base;
            config.strat.strategy = Strategy::kCoconut;
            config.strat.loss.lambda_nspt_scale = 0.0;  // MM term only
            config.strat.loss.mm_use_cls_only = cls;
            config.strat.loss.mm_exclude_rehearsal_anchors = anchor;
            run_variant(std::string("mm-cls") + (cls ? "1" : "0") + "-anchor" +
                            (anchor ? "1" : "0"),
                        config, seed);
          }
        }
      }
      if (!ablate_flags.out_dir.empty()) {
        write_comparison_csv(ablate_flags.out_dir + "/ablation.csv", records);
      }
      return 0;
    }

    if (sweep->parsed()) {
      const Corpus corpus = load_corpus(sweep_flags.corpus_dir);
      const RunConfig base = resolve(sweep_flags);
      std::vector<ResultRecord> records;
      for (const std::string& strat : sweep_strategies) {
        for (int m : sweep_sizes) {
          for (std::uint64_t seed : sweep_seeds) {
            RunConfig config = base;
            config.strat.strategy = strategy_from_name(strat);
            config.strat.exemplars_per_class = m;
            config.strat.buffer_fraction = 0.0;
            config.strat.seed = seed;
            const std::string dir =
                sweep_flags.out_dir.empty()
                    ? ""
                    : sweep_flags.out_dir + "/" + strat + "-m" + std::to_string(m) + "-s" +
                          std::to_string(seed);
            records.push_back(run_and_report(corpus, config, dir).record);
          }
        }
      }
      if (!sweep_flags.out_dir.empty()) {
        write_comparison_csv(sweep_flags.out_dir + "/sweep.csv", records);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
