#include "cropgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cropgan {

double finite_diff_check(const ScalarFn& forward, const GradFn& gradient, const Tensor& at,
                         double eps) {
  const std::vector<double> analytic = gradient(at);
  Tensor probe = at;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.data.size(); ++i) {
    const double original = probe.data[i];
    probe.data[i] = original + eps;
    const double fp = forward(probe);
    probe.data[i] = original - eps;
    const double fm = forward(probe);
    probe.data[i] = original;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double a = analytic[i];
    const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace cropgan
