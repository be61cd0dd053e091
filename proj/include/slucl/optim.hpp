#pragma once

#include <cstdint>
#include <vector>

#include "slucl/autodiff.hpp"

namespace slucl {

struct AdamWConfig {
  double lr = 2e-3;  // the 5e-4 used with pretrained encoders is too slow
                     // for this randomly initialized toy scale
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 0.1;
};

// AdamW with decoupled weight decay and bias-corrected moments. Moments are
// zero-initialized; one shared step counter increments per step() call.
// A missing grad counts as zero (weight decay still applies); a non-finite
// grad entry aborts with the parameter's name.
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, AdamWConfig config);

  void step();
  void zero_grad() { zero_grads(params_); }

  std::uint64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamWConfig config_;
  std::uint64_t step_ = 0;
};

}  // namespace slucl
