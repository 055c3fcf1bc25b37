#pragma once

#include <cmath>
#include <vector>

#include "cropgan/graph.hpp"
#include "cropgan/rng.hpp"
#include "cropgan/tensor.hpp"

namespace cropgan::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Random tensor with every component at least `margin` away from zero,
// for checking gradients of kinked activations.
inline Tensor random_tensor_offset(Shape shape, Rng& rng, double margin) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) {
    const double mag = margin + rng.uniform(0.0, 1.0);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

// Fixed projection weights turning a tensor-valued op into a scalar one,
// so every output component influences the checked gradient.
inline std::vector<double> projection_weights(long long n, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& v : w) v = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  return w;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace cropgan::test
