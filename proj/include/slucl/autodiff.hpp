#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "slucl/tensor.hpp"

namespace slucl {

// Reverse pass over a recorded graph. The loss must be a scalar; its grad is
// seeded with 1 and nodes run in strict reverse insertion order. Gradients
// accumulate additively, so callers zero parameter grads before each step.
void backward(const Tensor& loss, Graph& graph);

using NamedTensor = std::pair<std::string, Tensor>;

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_rel_error = 0.0;
  };
  std::vector<Entry> per_param;
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() <= tolerance; }
};

// Central finite differences (f(x+h) - f(x-h)) / 2h against the analytic
// gradient, entrywise, with max(|analytic|, |numeric|, 1e-8) as the relative
// denominator. loss_fn must be deterministic and is evaluated under the
// caller's parameters; probes perturb them in place and restore them.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<NamedTensor>& params, double h, double tol);

void zero_grads(const std::vector<NamedTensor>& params);

}  // namespace slucl
