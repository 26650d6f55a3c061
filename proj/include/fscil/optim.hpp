#pragma once

#include <unordered_map>
#include <vector>

#include "fscil/autodiff.hpp"

namespace fscil {

// SGD with momentum and per-group learning rates. Velocity is keyed by
// parameter identity and persists across steps, so one optimizer instance
// must live for the whole training run it drives.
class SgdOptimizer {
 public:
  // velocity <- momentum * velocity + grad; value <- value - lr_group * velocity.
  // Frozen parameters are untouched. Gradients of stepped parameters are cleared.
  void step(const std::vector<Parameter*>& params, double lr_fast, double lr_slow,
            double momentum);

 private:
  std::unordered_map<const Parameter*, Tensor> velocity_;
};

}  // namespace fscil
