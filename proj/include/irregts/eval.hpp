#pragma once

#include <string>
#include <vector>

#include "irregts/data.hpp"
#include "irregts/metrics.hpp"
#include "irregts/model.hpp"
#include "irregts/train.hpp"

namespace irregts::eval {

using data::Dataset;
using metrics::ConfusionMatrix;

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix cm;
};

// deterministic full-set evaluation at full horizon, no subsampling
EvalResult run_eval(const model::SequenceEncoder& enc, const Dataset& test);

std::string metrics_json(const EvalResult& r);
std::string cm_csv(const ConfusionMatrix& cm);

enum class SweepKind { Early, Sparsity, Datasize, KeepProb };
SweepKind sweep_kind_from_string(const std::string& s);
std::string to_string(SweepKind k);
std::vector<double> default_grid(SweepKind k);

struct SweepModel {
  std::string name;
  model::ModelConfig cfg;
};

struct SweepRunRow {
  std::string model, condition;
  int seed_index = 0;
  double accuracy = 0.0, macro_f1 = 0.0;
};

struct SweepAggRow {
  std::string model, condition, metric;
  double mean = 0.0, stddev = 0.0;
  int n_seeds = 0;
};

struct SweepReport {
  std::string kind;
  std::vector<std::string> conditions;
  std::vector<SweepRunRow> runs;
  std::vector<SweepAggRow> rows;  // per-model aggregates plus difference rows
};

// Runs the requested experiment grid. Early classification truncates the
// test series per condition (models trained once per seed); sparsity
// sparsifies train/val/test jointly per condition and retrains; datasize
// subsamples whole training series and retrains; keepprob retrains with
// each keep probability. Seed i perturbs both model init and training
// stream. jobs > 1 fans training cells out to a thread pool.
SweepReport sweep(SweepKind kind, const std::vector<SweepModel>& models,
                  const std::vector<double>& grid, int n_seeds, const data::Splits& splits,
                  const train::TrainConfig& base_tcfg, int jobs = 1, uint64_t data_seed = 7);

std::string sweep_report_csv(const SweepReport& rep);
std::string sweep_runs_csv(const SweepReport& rep);

std::string format_condition(double v);

}  // namespace irregts::eval
