#pragma once

#include <vector>

#include "cropgan/tensor.hpp"

namespace cropgan {

// Adam with bias correction over a fixed parameter group. Moment buffers
// are laid out in parameter order and must be re-initialized if the group
// changes.
struct AdamState {
  double learning_rate = 0.005;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void init(const std::vector<Tensor*>& params);
};

// One update from the gradients currently accumulated in each parameter.
// Gradients are left untouched; callers zero them between steps.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

}  // namespace cropgan
