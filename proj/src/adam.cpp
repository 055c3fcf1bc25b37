#include "cropgan/adam.hpp"

#include <cmath>

namespace cropgan {

void AdamState::init(const std::vector<Tensor*>& params) {
  t = 0;
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.emplace_back(p->data.size(), 0.0);
    v.emplace_back(p->data.size(), 0.0);
  }
}

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  if (params.size() != state.m.size()) {
    throw UsageError("adam_step: state was initialized for a different parameter group");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.requires_grad) continue;
    std::vector<double>& mi = state.m[i];
    std::vector<double>& vi = state.v[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad[j];
      mi[j] = state.beta1 * mi[j] + (1.0 - state.beta1) * g;
      vi[j] = state.beta2 * vi[j] + (1.0 - state.beta2) * g * g;
      const double mhat = mi[j] / bc1;
      const double vhat = vi[j] / bc2;
      p.data[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace cropgan
