#include "irregts/gradsuite.hpp"

#include "irregts/train.hpp"

namespace irregts::gradsuite {

data::TimeSeries toy_series(int feature_dim, uint64_t seed) {
  Rng rng(seed_mix(seed, "toy-series"));
  data::TimeSeries s;
  s.id = "toy";
  s.timestamps = {0, 2, 5};
  s.horizon = 7;
  s.label = 1;
  for (size_t i = 0; i < 3; ++i) {
    tensor::Vec x(static_cast<size_t>(feature_dim));
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    s.observations.push_back(std::move(x));
  }
  return s;
}

model::SequenceEncoder toy_encoder(model::ModelConfig cfg) {
  model::SequenceEncoder enc = model::build_encoder(cfg);
  Rng rng(seed_mix(cfg.seed, "toy-bn"));
  for (tensor::BatchNorm* bn : {&enc.bn_update, &enc.bn_cls}) {
    for (size_t j = 0; j < bn->dim(); ++j) {
      bn->running_mean[j] = rng.uniform(-0.2, 0.2);
      bn->running_var[j] = rng.uniform(0.5, 1.5);
      bn->gamma.w[j] = rng.uniform(0.8, 1.2);
      bn->beta.w[j] = rng.uniform(-0.1, 0.1);
    }
  }
  return enc;
}

tensor::GradCheckReport check_full_model(model::SequenceEncoder& enc,
                                         const data::TimeSeries& series, double tol) {
  const data::TimeSeries* ptr = &series;
  auto loss_fn = [&](bool want_grad) {
    return train::batch_forward_backward(enc, {ptr}, want_grad, false, false);
  };
  return tensor::grad_check(enc.params, loss_fn, tol);
}

std::vector<SuiteCase> run_full_suite(double tol) {
  std::vector<SuiteCase> cases;
  const data::TimeSeries series = toy_series(3, 11);

  for (cells::CellType cell : {cells::CellType::Tanh, cells::CellType::Lstm, cells::CellType::Gru}) {
    for (bool ode : {true, false}) {
      for (model::TimeFeatures tf :
           {model::TimeFeatures::None, model::TimeFeatures::DeltaT, model::TimeFeatures::Pe}) {
        model::ModelConfig cfg;
        cfg.cell = cell;
        cfg.hidden_dim = 5;
        cfg.f_theta_units = 6;
        cfg.ode_enabled = ode;
        cfg.time_features = tf;
        cfg.pe_tau = 1000.0;
        cfg.num_classes = 3;
        cfg.feature_dim = 3;
        cfg.init_sigma = 1e-4;
        cfg.seed = 17;
        model::SequenceEncoder enc = toy_encoder(cfg);
        SuiteCase sc;
        sc.name = cells::to_string(cell) + (ode ? "/ode" : "/no-ode") + "/" + to_string(tf);
        sc.report = check_full_model(enc, series, tol);
        cases.push_back(std::move(sc));
      }
    }
  }

  // depth-2 gating variant
  {
    model::ModelConfig cfg;
    cfg.cell = cells::CellType::Gru;
    cfg.hidden_dim = 4;
    cfg.f_theta_units = 5;
    cfg.ode_enabled = true;
    cfg.gating_depth = 2;
    cfg.gating_width = 6;
    cfg.num_classes = 3;
    cfg.feature_dim = 3;
    cfg.seed = 19;
    model::SequenceEncoder enc = toy_encoder(cfg);
    SuiteCase sc;
    sc.name = "gru/ode/none/depth2";
    sc.report = check_full_model(enc, series, tol);
    cases.push_back(std::move(sc));
  }
  return cases;
}

}  // namespace irregts::gradsuite
