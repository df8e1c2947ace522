#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irregts/rng.hpp"
#include "irregts/tensor.hpp"

namespace irregts::data {

using tensor::Vec;

// One labeled, irregularly sampled sequence. Timestamps are strictly
// increasing nonnegative integers; horizon is the nominal end of season
// (extrapolation target), never before the last observation.
struct TimeSeries {
  std::string id;
  std::vector<long> timestamps;
  std::vector<Vec> observations;
  int label = 0;
  long horizon = 0;

  size_t size() const { return timestamps.size(); }
};

void validate_series(const TimeSeries& s, int num_classes, int feature_dim);

struct Dataset {
  std::vector<TimeSeries> series;
  int num_classes = 0;
  int feature_dim = 0;
  long nominal_length = 0;
  double missing_rate = 0.0;
};

void validate_dataset(const Dataset& ds);

// Per-class latent curve: per-feature Gaussian bump
// amplitude[j] * exp(-(t - peak)^2 / (2 width^2)).
struct ClassTemplate {
  double peak = 0.0;
  double width = 1.0;
  Vec amplitude;
};

struct SynthSpec {
  int num_classes = 4;
  int feature_dim = 6;
  long length = 40;
  double missing_rate = 0.5;
  double noise_std = 0.3;
  int n_series = 2500;
  uint64_t seed = 7;
  std::vector<ClassTemplate> templates;  // filled by default_templates when empty
};

// deterministic class templates: peaks spread over the season, widths and
// per-feature amplitudes drawn from the spec seed
std::vector<ClassTemplate> default_templates(int num_classes, int feature_dim, long length,
                                             uint64_t seed);

double template_value(const ClassTemplate& tpl, long t, int feature);

Dataset generate(const SynthSpec& spec);

void save_jsonl(const Dataset& ds, const std::string& path);
Dataset load_jsonl(const std::string& path);

struct SplitFractions {
  double train = 0.64, val = 0.16, test = 0.20;
};

struct Splits {
  Dataset train, val, test;
};

Splits split(const Dataset& ds, const SplitFractions& fr, uint64_t seed);

// keep observations with timestamp < floor(fraction * T); horizon unchanged
TimeSeries truncate_leading(const TimeSeries& s, double fraction);

// keep round(fraction * count) observations chosen uniformly without
// replacement (at least one), order preserved, horizon unchanged
TimeSeries sparsify(const TimeSeries& s, double fraction, Rng& rng);

// seeded uniform subset of series (whole-series sampling)
Dataset subset(const Dataset& ds, double fraction, Rng& rng);

// per-feature mean over all observations in the dataset
Vec feature_means(const Dataset& ds);

}  // namespace irregts::data
