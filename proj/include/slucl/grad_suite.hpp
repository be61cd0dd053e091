#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slucl {

// Finite-difference verification of every training objective: cross-entropy,
// SCL, the four distillation-contrast variants, the multimodal loss, the
// feature-distillation baselines, and the learnable-temperature path. Each
// objective is checked on `batches_per_loss` random batches against central
// differences at step h, and the distillation losses additionally assert
// that teacher-side inputs receive no gradient at all.
struct GradSuiteResult {
  struct Item {
    std::string name;
    double max_rel_error = 0.0;
    int batches = 0;
    bool teacher_grad_absent = true;
    bool pass = false;
  };
  std::vector<Item> items;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool all_pass() const;
};

GradSuiteResult run_grad_suite(int batches_per_loss = 20, double h = 1e-4, double tol = 1e-4,
                               std::uint64_t seed = 7);

}  // namespace slucl
