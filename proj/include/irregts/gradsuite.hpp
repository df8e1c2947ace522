#pragma once

#include <string>
#include <vector>

#include "irregts/model.hpp"
#include "irregts/tensor.hpp"

namespace irregts::gradsuite {

struct SuiteCase {
  std::string name;
  tensor::GradCheckReport report;
};

// toy series used by the full-model checks: three observations with gaps
data::TimeSeries toy_series(int feature_dim, uint64_t seed);

// small-dimensioned encoder with non-trivial batch-norm statistics so
// gradients actually flow through the normalization scales
model::SequenceEncoder toy_encoder(model::ModelConfig cfg);

// one full-model check: d cross_entropy(classify(encode(series))) / d theta
// against central differences, batch norm in eval mode
tensor::GradCheckReport check_full_model(model::SequenceEncoder& enc,
                                         const data::TimeSeries& series, double tol);

// every cell type, ODE on/off, each time-feature mode, plus a depth-2
// gating variant
std::vector<SuiteCase> run_full_suite(double tol);

}  // namespace irregts::gradsuite
