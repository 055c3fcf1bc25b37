#include "cropgan/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cropgan {

long long numel(const Shape& shape) {
  long long n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (numel(shape) != static_cast<long long>(data.size())) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape s) {
  const auto n = numel(s);
  return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(Shape s, double value) {
  const auto n = numel(s);
  return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), value));
}

void Tensor::set_requires_grad(bool on) {
  requires_grad = on;
  if (on) {
    grad.assign(data.size(), 0.0);
  } else {
    grad.clear();
  }
}

void Tensor::zero_grad() {
  if (requires_grad) grad.assign(data.size(), 0.0);
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
  if (!requires_grad) return;
  if (g.size() != grad.size()) throw DimensionError("gradient size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

BatchDims spatial_dims(const Shape& shape) {
  if (shape.size() == 3) return {1, shape[0], shape[1], shape[2], false};
  if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3], true};
  throw DimensionError("expected a rank-3 or rank-4 tensor, got " + shape_str(shape));
}

}  // namespace cropgan
