#pragma once

#include <cstdint>
#include <vector>

namespace cropgan {

// 2x2 counts with corn as the positive class.
struct ConfusionMatrix {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  long long total() const { return tp + fp + fn + tn; }
};

ConfusionMatrix confusion(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& truth);

double overall_accuracy(const ConfusionMatrix& cm);
// 2tp / (2tp + fp + fn); 0 by convention when no positives exist anywhere.
double f1(const ConfusionMatrix& cm);
// Chance-corrected agreement (po - pe) / (1 - pe); 0 when pe reaches 1.
double kappa(const ConfusionMatrix& cm);

}  // namespace cropgan
