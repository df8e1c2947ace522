#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "irregts/errors.hpp"
#include "irregts/eval.hpp"
#include "irregts/train.hpp"

using namespace irregts;
using data::Dataset;
using data::TimeSeries;
using model::ModelConfig;
using tensor::Vec;

namespace {

ModelConfig small_model(int K, int d, bool ode = true) {
  ModelConfig cfg;
  cfg.cell = cells::CellType::Gru;
  cfg.hidden_dim = 8;
  cfg.f_theta_units = 10;
  cfg.ode_enabled = ode;
  cfg.num_classes = K;
  cfg.feature_dim = d;
  cfg.seed = 3;
  return cfg;
}

// two linearly separable classes, no missing observations
data::Splits separable_toy() {
  data::SynthSpec spec;
  spec.num_classes = 2;
  spec.feature_dim = 2;
  spec.length = 5;
  spec.missing_rate = 0.0;
  spec.noise_std = 0.05;
  spec.n_series = 300;
  spec.seed = 11;
  spec.templates.resize(2);
  spec.templates[0] = {2.0, 2.0, {1.0, -1.0}};
  spec.templates[1] = {2.0, 2.0, {-1.0, 1.0}};
  Dataset ds = data::generate(spec);
  return data::split(ds, {0.6, 0.2, 0.2}, 1);
}

TimeSeries long_series() {
  TimeSeries s;
  s.id = "sub";
  s.horizon = 25;
  for (long t = 0; t < 20; ++t) {
    s.timestamps.push_back(t);
    s.observations.push_back({static_cast<double>(t)});
  }
  return s;
}

}  // namespace

TEST_CASE("cross-entropy examples") {
  CHECK(train::cross_entropy({0.5, 0.5}, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(train::cross_entropy({0.0, 1.0, 0.0}, 1) == 0.0);
  CHECK(train::cross_entropy({0.25, 0.25, 0.5}, 2) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(train::cross_entropy({0.69315}, 0) == doctest::Approx(0.36651).epsilon(1e-4));
  CHECK_THROWS_AS(train::cross_entropy({0.5, 0.5}, 2), Error);
  // clamp keeps the loss finite on a zero probability
  CHECK(std::isfinite(train::cross_entropy({1.0, 0.0}, 1)));
}

TEST_CASE("subsample statistics and invariants") {
  TimeSeries s = long_series();
  Rng rng(2);
  // p = 1 returns the series untouched
  TimeSeries full = train::subsample(s, 1.0, rng);
  CHECK(full.timestamps == s.timestamps);

  double total = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    TimeSeries kept = train::subsample(s, 0.75, rng);
    CHECK(kept.size() >= 1);
    CHECK(kept.horizon == s.horizon);
    for (size_t i = 1; i < kept.size(); ++i)
      CHECK(kept.timestamps[i] > kept.timestamps[i - 1]);
    total += static_cast<double>(kept.size());
  }
  const double mean_kept = total / 10000.0;
  CHECK(mean_kept > 14.7);
  CHECK(mean_kept < 15.3);

  // tiny p still returns at least one observation
  TimeSeries one;
  one.id = "one";
  one.horizon = 3;
  one.timestamps = {1, 2};
  one.observations = {{0.0}, {0.0}};
  for (int trial = 0; trial < 200; ++trial) CHECK(train::subsample(one, 0.01, rng).size() >= 1);
}

TEST_CASE("adamax update rule") {
  train::TrainConfig tcfg;
  {
    // zero gradient leaves parameters untouched
    tensor::ParamStore ps;
    tensor::Param w = ps.add("w", 3);
    w.w[0] = 0.5;
    w.w[1] = -0.25;
    train::Adamax opt(tcfg);
    opt.step(ps, 0.07);
    CHECK(w.w[0] == 0.5);
    CHECK(w.w[1] == -0.25);
  }
  {
    // unit gradient: first step has magnitude lr (up to the eps guard),
    // and a second unit-gradient step moves by exactly the same amount
    tensor::ParamStore ps;
    tensor::Param w = ps.add("w", 1);
    train::Adamax opt(tcfg);
    w.g[0] = 1.0;
    opt.step(ps, 0.07);
    const double step1 = std::fabs(w.w[0]);
    CHECK(step1 == doctest::Approx(0.07).epsilon(1e-7));
    const double before = w.w[0];
    w.g[0] = 1.0;
    opt.step(ps, 0.07);
    const double step2 = std::fabs(w.w[0] - before);
    CHECK(step2 == doctest::Approx(step1).epsilon(1e-12));
  }
  {
    tensor::ParamStore ps;
    tensor::Param w = ps.add("w", 1);
    w.g[0] = std::numeric_limits<double>::quiet_NaN();
    train::Adamax opt(tcfg);
    CHECK_THROWS_AS(opt.step(ps, 0.07), Error);
  }
}

TEST_CASE("learning-rate schedule") {
  train::TrainConfig cfg;
  CHECK(train::lr_schedule(0, cfg) == 0.07);
  const double ratio = train::lr_schedule(1400, cfg) / train::lr_schedule(0, cfg);
  CHECK(ratio > 0.496);
  CHECK(ratio < 0.498);
  double prev = train::lr_schedule(0, cfg);
  for (long k = 1; k < 50; ++k) {
    const double lr = train::lr_schedule(k * 37, cfg);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("batch loss equals the mean of per-series losses") {
  data::Splits sp = separable_toy();
  model::SequenceEncoder enc = model::build_encoder(small_model(2, 2));
  std::vector<const TimeSeries*> batch;
  for (size_t i = 0; i < 8; ++i) batch.push_back(&sp.train.series[i]);
  const double batch_loss = train::batch_forward_backward(enc, batch, false, false, false);
  double total = 0;
  for (const TimeSeries* s : batch) {
    Vec probs = model::classify(enc, model::encode(enc, *s));
    total += train::cross_entropy(probs, s->label);
  }
  CHECK(batch_loss == doctest::Approx(total / 8.0).epsilon(1e-12));
}

TEST_CASE("train-mode batch forward/backward passes grad_check across coupled series") {
  // series observed at overlapping times: the batch-stat normalization
  // couples their gradients; a handful of series keeps the batch statistics
  // well conditioned for central differences
  data::Splits sp = separable_toy();
  for (cells::CellType cell : {cells::CellType::Gru, cells::CellType::Lstm}) {
    for (bool ode : {true, false}) {
      model::ModelConfig cfg = small_model(2, 2, ode);
      cfg.cell = cell;
      cfg.hidden_dim = 4;
      cfg.f_theta_units = 5;
      model::SequenceEncoder enc = model::build_encoder(cfg);
      std::vector<const TimeSeries*> batch;
      for (size_t i = 0; i < 8; ++i) batch.push_back(&sp.train.series[i]);
      auto loss_fn = [&](bool want_grad) {
        return train::batch_forward_backward(enc, batch, want_grad, true, false);
      };
      auto rep = tensor::grad_check(enc.params, loss_fn, 1e-4);
      INFO("cell ", cells::to_string(cell), " ode ", ode, " worst ", rep.worst_param, " err ",
           rep.max_rel_err);
      CHECK(rep.pass);
    }
  }
}

TEST_CASE("adjoint-mode training gradients approximate discrete ones") {
  data::Splits sp = separable_toy();
  model::ModelConfig cfg = small_model(2, 2, true);
  cfg.solve.gradient_mode = node::GradMode::Adjoint;
  model::SequenceEncoder enc = model::build_encoder(cfg);
  std::vector<const TimeSeries*> batch = {&sp.train.series[0], &sp.train.series[1]};
  enc.params.zero_grads();
  train::batch_forward_backward(enc, batch, true, true, false);
  std::map<std::string, Vec> adjoint_grads;
  for (const auto& [name, e] : enc.params.entries()) adjoint_grads[name] = e.g;

  enc.cfg.solve.gradient_mode = node::GradMode::Discrete;
  enc.params.zero_grads();
  train::batch_forward_backward(enc, batch, true, true, false);
  double max_gap = 0;
  for (const auto& [name, e] : enc.params.entries()) {
    for (size_t i = 0; i < e.g.size(); ++i) {
      const double denom = std::max({1.0, std::fabs(e.g[i]), std::fabs(adjoint_grads[name][i])});
      max_gap = std::max(max_gap, std::fabs(e.g[i] - adjoint_grads[name][i]) / denom);
    }
  }
  CHECK(max_gap < 0.05);  // same direction, first-order discretization gap
  CHECK(max_gap > 0.0);
}

TEST_CASE("fit learns a separable toy problem") {
  data::Splits sp = separable_toy();
  model::ModelConfig mcfg = small_model(2, 2);
  train::TrainConfig tcfg;
  tcfg.batch_size = 30;
  tcfg.epochs = 40;
  tcfg.max_batches = 200;
  tcfg.lr0 = 0.05;
  tcfg.keep_prob = 1.0;
  tcfg.seed = 7;

  train::FitHistory hist;
  model::SequenceEncoder enc = train::fit(sp.train, sp.val, mcfg, tcfg, &hist);
  CHECK(hist.best_val_macro_f1 > 0.9);
  eval::EvalResult r = eval::run_eval(enc, sp.val);
  CHECK(r.accuracy >= 0.95);

  // loss trends down between the first and last recorded batches
  REQUIRE(hist.batches.size() >= 50);
  CHECK(hist.batches.back().loss < hist.batches.front().loss);

  // a noiseless template series of class 1 lands on label 1
  data::SynthSpec spec;
  spec.templates.resize(2);
  spec.templates[0] = {2.0, 2.0, {1.0, -1.0}};
  spec.templates[1] = {2.0, 2.0, {-1.0, 1.0}};
  TimeSeries clean;
  clean.id = "template-1";
  clean.label = 1;
  clean.horizon = 4;
  for (long t = 0; t < 5; ++t) {
    clean.timestamps.push_back(t);
    clean.observations.push_back({data::template_value(spec.templates[1], t, 0),
                                  data::template_value(spec.templates[1], t, 1)});
  }
  CHECK(model::predict(enc, clean).label == 1);
}

TEST_CASE("fit is deterministic and the p=1 path matches the bypass") {
  data::Splits sp = separable_toy();
  model::ModelConfig mcfg = small_model(2, 2);
  train::TrainConfig tcfg;
  tcfg.batch_size = 40;
  tcfg.epochs = 2;
  tcfg.keep_prob = 1.0;
  tcfg.seed = 5;

  train::FitHistory h1, h2, h3;
  train::fit(sp.train, sp.val, mcfg, tcfg, &h1);
  train::fit(sp.train, sp.val, mcfg, tcfg, &h2);
  REQUIRE(h1.batches.size() == h2.batches.size());
  for (size_t i = 0; i < h1.batches.size(); ++i) {
    CHECK(h1.batches[i].loss == h2.batches[i].loss);
    CHECK(h1.batches[i].lr == h2.batches[i].lr);
  }

  train::TrainConfig bypass = tcfg;
  bypass.bypass_subsample = true;
  train::fit(sp.train, sp.val, mcfg, bypass, &h3);
  REQUIRE(h1.batches.size() == h3.batches.size());
  for (size_t i = 0; i < h1.batches.size(); ++i) CHECK(h1.batches[i].loss == h3.batches[i].loss);
}

TEST_CASE("a zero learning rate leaves parameters bit-identical") {
  data::Splits sp = separable_toy();
  model::ModelConfig mcfg = small_model(2, 2);
  model::SequenceEncoder enc = model::build_encoder(mcfg);
  std::map<std::string, Vec> before;
  for (const auto& [name, e] : enc.params.entries()) before[name] = e.w;

  std::vector<const TimeSeries*> batch;
  for (size_t i = 0; i < 10; ++i) batch.push_back(&sp.train.series[i]);
  enc.params.zero_grads();
  train::batch_forward_backward(enc, batch, true, true, true);
  train::Adamax opt(train::TrainConfig{});
  opt.step(enc.params, 0.0);

  for (const auto& [name, e] : enc.params.entries()) {
    REQUIRE(before[name].size() == e.w.size());
    for (size_t i = 0; i < e.w.size(); ++i) CHECK(before[name][i] == e.w[i]);
  }
}

TEST_CASE("history csv shape") {
  train::FitHistory h;
  h.batches.push_back({0, 0.07, 1.5});
  h.batches.push_back({1, 0.069965, 1.25});
  const std::string csv = train::history_csv(h);
  CHECK(csv.rfind("batch,lr,loss\n", 0) == 0);
  CHECK(csv.find("0,0.07") != std::string::npos);
}
