#pragma once

#include <map>
#include <string>
#include <vector>

#include "irregts/data.hpp"
#include "irregts/model.hpp"

namespace irregts::train {

using data::Dataset;
using data::TimeSeries;
using model::SequenceEncoder;
using tensor::Vec;

struct TrainConfig {
  double lr0 = 0.07;
  double decay = 0.9995;
  int batch_size = 0;  // 0: 500 when the ODE step is enabled, 300 otherwise
  int epochs = 12;
  long max_batches = 0;  // 0: no cap
  double keep_prob = 0.75;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  uint64_t seed = 1;
  bool bypass_subsample = false;  // skip the regularizer code path entirely

  int effective_batch_size(bool ode_enabled) const {
    if (batch_size > 0) return batch_size;
    return ode_enabled ? 500 : 300;
  }
  void validate() const;
};

// -ln(probs[label]) with probabilities floored at 1e-12
double cross_entropy(const Vec& probs, int label);

// keep each observation independently with probability p; redraw if none
// survive; p >= 1 returns the series untouched without consuming draws
TimeSeries subsample(const TimeSeries& s, double p, Rng& rng);

double lr_schedule(long batch_index, const TrainConfig& cfg);

class Adamax {
 public:
  explicit Adamax(const TrainConfig& cfg) : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps) {}
  Adamax(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(tensor::ParamStore& ps, double lr);
  long steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, std::pair<Vec, Vec>> state_;  // first moment, infinity norm
};

// Forward (and optionally backward) over a batch of raw series.
// Prediction/update alternation per series; pre-update batch norm is
// synchronized across the sub-batch of series observed at each timestamp
// when bn_train is set, and uses running statistics otherwise. Returns the
// mean cross-entropy; gradients are accumulated when want_grad is set.
double batch_forward_backward(SequenceEncoder& enc, const std::vector<const TimeSeries*>& batch,
                              bool want_grad, bool bn_train, bool update_running);

struct FitHistory {
  struct BatchRow {
    long batch;
    double lr, loss;
  };
  struct EpochRow {
    int epoch;
    double train_loss_mean;
    double val_accuracy, val_macro_f1;
  };
  std::vector<BatchRow> batches;
  std::vector<EpochRow> epochs;
  int best_epoch = -1;
  double best_val_macro_f1 = -1.0;
};

std::string history_csv(const FitHistory& h);
std::string history_summary_json(const FitHistory& h);

// Standard loop: seeded shuffling per epoch, per-batch subsampling with
// keep_prob, Adamax with the decayed schedule, per-epoch validation.
// Returns the parameters of the best validation macro-F1 epoch.
SequenceEncoder fit(const Dataset& train_set, const Dataset& val_set,
                    const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                    FitHistory* history = nullptr);

}  // namespace irregts::train
