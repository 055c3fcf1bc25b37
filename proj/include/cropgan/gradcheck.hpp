#pragma once

#include <functional>

#include "cropgan/tensor.hpp"

namespace cropgan {

// Scalar-valued function of one tensor, evaluated without autodiff.
using ScalarFn = std::function<double(const Tensor&)>;
// Gradient of the same function with respect to the tensor, via autodiff.
using GradFn = std::function<std::vector<double>(const Tensor&)>;

// Compares autodiff gradients against central differences
// (f(x+eps) - f(x-eps)) / (2 eps), componentwise. Returns the maximum of
// |a - b| / max(1e-8, |a| + |b|) over components.
double finite_diff_check(const ScalarFn& forward, const GradFn& gradient, const Tensor& at,
                         double eps);

}  // namespace cropgan
