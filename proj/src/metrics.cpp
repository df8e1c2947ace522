#include "irregts/metrics.hpp"

#include "irregts/errors.hpp"

namespace irregts::metrics {

long ConfusionMatrix::total() const {
  long n = 0;
  for (long c : counts) n += c;
  return n;
}

long ConfusionMatrix::trace() const {
  long n = 0;
  for (int k = 0; k < num_classes; ++k) n += at(k, k);
  return n;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels, int k) {
  if (preds.size() != labels.size())
    raise(ErrorKind::Input, "confusion: pred/label length mismatch");
  if (k < 1) raise(ErrorKind::Config, "confusion: need at least one class");
  ConfusionMatrix cm(k);
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= k || labels[i] < 0 || labels[i] >= k)
      raise(ErrorKind::Input, "confusion: class index out of range");
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const long n = cm.total();
  if (n == 0) raise(ErrorKind::Empty, "accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

double macro_f1(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int included = 0;
  for (int k = 0; k < cm.num_classes; ++k) {
    long tp = cm.at(k, k);
    long fn = 0, fp = 0;
    for (int j = 0; j < cm.num_classes; ++j) {
      if (j == k) continue;
      fn += cm.at(k, j);
      fp += cm.at(j, k);
    }
    if (tp + fp + fn == 0) continue;  // class absent and never predicted
    sum += (2.0 * tp) / static_cast<double>(2 * tp + fp + fn);
    ++included;
  }
  if (included == 0) raise(ErrorKind::Empty, "macro_f1: no classes to score");
  return sum / static_cast<double>(included);
}

}  // namespace irregts::metrics
