#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cropgan/errors.hpp"

namespace cropgan {

using Shape = std::vector<int>;

long long numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Dense row-major tensor of doubles. Gradients accumulate into `grad`
// when `requires_grad` is set; `zero_grad` resets them.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> values);

  static Tensor zeros(Shape s);
  static Tensor full(Shape s, double value);

  long long size() const { return static_cast<long long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  void set_requires_grad(bool on);
  void zero_grad();
  void accumulate_grad(const std::vector<double>& g);

  bool all_finite() const;
};

// Interprets rank-3 tensors as a single instance and rank-4 as a batch.
struct BatchDims {
  int n, h, w, c;
  bool batched;  // true when the source tensor was rank 4
};
BatchDims spatial_dims(const Shape& shape);

}  // namespace cropgan
