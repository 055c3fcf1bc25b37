#include "cropgan/metrics.hpp"

#include "cropgan/errors.hpp"

namespace cropgan {

ConfusionMatrix confusion(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size()) {
    throw UsageError("confusion: prediction and truth lengths differ (" +
                     std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) throw UsageError("confusion: empty label vectors");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] > 1 || truth[i] > 1) throw UsageError("confusion: labels must be 0 or 1");
    if (truth[i] == 1) {
      (pred[i] == 1 ? cm.tp : cm.fn) += 1;
    } else {
      (pred[i] == 1 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  if (cm.total() < 1) throw UsageError("metrics require at least one counted item");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

double f1(const ConfusionMatrix& cm) {
  if (cm.total() < 1) throw UsageError("metrics require at least one counted item");
  const long long denom = 2 * cm.tp + cm.fp + cm.fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double kappa(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (cm.total() < 1) throw UsageError("metrics require at least one counted item");
  const double po = overall_accuracy(cm);
  const double pe = (static_cast<double>(cm.tp + cm.fp) * static_cast<double>(cm.tp + cm.fn) +
                     static_cast<double>(cm.fn + cm.tn) * static_cast<double>(cm.fp + cm.tn)) /
                    (total * total);
  if (pe == 1.0) return 0.0;
  return (po - pe) / (1.0 - pe);
}

}  // namespace cropgan
