#pragma once

#include <vector>

namespace irregts::metrics {

// rows are true classes, columns predicted
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<long> counts;  // row-major K x K

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int k) : num_classes(k), counts(static_cast<size_t>(k) * k, 0) {}

  long& at(int truth, int pred) {
    return counts[static_cast<size_t>(truth) * num_classes + pred];
  }
  long at(int truth, int pred) const {
    return counts[static_cast<size_t>(truth) * num_classes + pred];
  }
  long total() const;
  long trace() const;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels, int k);

double accuracy(const ConfusionMatrix& cm);

// unweighted mean of per-class F1 = 2TP / (2TP + FP + FN); classes with
// TP + FP + FN = 0 are excluded from the mean
double macro_f1(const ConfusionMatrix& cm);

struct EvalCounts {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix cm;
};

}  // namespace irregts::metrics
