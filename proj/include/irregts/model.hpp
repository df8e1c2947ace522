#pragma once

#include <optional>
#include <string>
#include <vector>

#include "irregts/cells.hpp"
#include "irregts/data.hpp"
#include "irregts/node.hpp"
#include "irregts/tensor.hpp"

namespace irregts::model {

using cells::CellType;
using data::TimeSeries;
using tensor::Vec;

enum class TimeFeatures { None, DeltaT, Pe };
TimeFeatures time_features_from_string(const std::string& s);
std::string to_string(TimeFeatures tf);

// behavior past the last observation for models without the ODE prediction
// step: hold the final state, or keep updating on channel-mean inputs
enum class Extrapolation { Hold, MeanInput };
Extrapolation extrapolation_from_string(const std::string& s);
std::string to_string(Extrapolation e);

struct ModelConfig {
  CellType cell = CellType::Gru;
  int hidden_dim = 80;
  int f_theta_units = 255;
  int f_theta_layers = 2;  // only 2 supported
  bool ode_enabled = true;
  TimeFeatures time_features = TimeFeatures::None;
  double pe_tau = 1000.0;
  int gating_depth = 1;
  int gating_width = 100;
  int num_classes = 0;
  int feature_dim = 0;
  node::SolveConfig solve;
  uint64_t seed = 1;
  double init_sigma = 1e-4;
  bool fth_time_input = false;
  Extrapolation extrapolation = Extrapolation::Hold;

  // feature dim seen by the cell (delta-t appends one input; PE is additive)
  int cell_input_dim() const {
    return feature_dim + (time_features == TimeFeatures::DeltaT ? 1 : 0);
  }
  void validate() const;
};

struct SequenceEncoder {
  ModelConfig cfg;
  tensor::ParamStore params;
  cells::CellParams cell;
  node::DynamicsNet fnet;  // present iff cfg.ode_enabled
  tensor::BatchNorm bn_update, bn_cls;
  tensor::Param cls_W, cls_b;
  Vec feature_means;  // channel means of the training data (MeanInput mode)

  SequenceEncoder() = default;
  SequenceEncoder(const SequenceEncoder&) = delete;
  SequenceEncoder& operator=(const SequenceEncoder&) = delete;
  SequenceEncoder(SequenceEncoder&&) = default;
  SequenceEncoder& operator=(SequenceEncoder&&) = default;
};

// Registers and initializes all parameters. Initialization streams are
// derived per tensor name, so models sharing cfg.seed draw identical values
// for the tensors they have in common (with or without the ODE part).
SequenceEncoder build_encoder(const ModelConfig& cfg);

Vec init_hidden(size_t hidden, double sigma, Rng& rng);

// deterministic per-series state-init stream
Rng series_rng(const SequenceEncoder& enc, const TimeSeries& s);

// time-feature augmentation; mode None returns the series unchanged
TimeSeries augment_inputs(const TimeSeries& s, TimeFeatures mode, double tau);

struct EncodeTrace {
  struct Span {
    long t0, t1;
    int steps;
  };
  std::vector<Span> solves;
  std::vector<long> update_times;
  std::vector<Vec> hidden_after_update;
};

// Alternating predict/update pass over one raw series; batch norm runs in
// eval mode. Returns the hidden state at the horizon (horizon_override < 0
// uses the series' own horizon).
Vec encode(const SequenceEncoder& enc, const TimeSeries& s, long horizon_override = -1,
           EncodeTrace* trace = nullptr);

Vec classify(const SequenceEncoder& enc, const Vec& h);

struct Prediction {
  int label;
  Vec probs;
};
// argmax of classify(encode(...)); ties break toward the lowest class index
Prediction predict(const SequenceEncoder& enc, const TimeSeries& s);

int argmax_lowest(const Vec& probs);

// ---- checkpoint -----------------------------------------------------------

std::string checkpoint_to_string(const SequenceEncoder& enc);
SequenceEncoder encoder_from_string(const std::string& text);
void save_checkpoint(const SequenceEncoder& enc, const std::string& path);
SequenceEncoder load_checkpoint(const std::string& path);

}  // namespace irregts::model
