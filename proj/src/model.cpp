#include "irregts/model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "irregts/errors.hpp"
#include "json.hpp"

namespace irregts::model {

using nlohmann::json;

TimeFeatures time_features_from_string(const std::string& s) {
  if (s == "none") return TimeFeatures::None;
  if (s == "delta_t" || s == "dt") return TimeFeatures::DeltaT;
  if (s == "pe") return TimeFeatures::Pe;
  raise(ErrorKind::Config, "unknown time-feature mode '" + s + "'");
}

std::string to_string(TimeFeatures tf) {
  switch (tf) {
    case TimeFeatures::None: return "none";
    case TimeFeatures::DeltaT: return "delta_t";
    case TimeFeatures::Pe: return "pe";
  }
  return "?";
}

Extrapolation extrapolation_from_string(const std::string& s) {
  if (s == "hold") return Extrapolation::Hold;
  if (s == "mean_input") return Extrapolation::MeanInput;
  raise(ErrorKind::Config, "unknown extrapolation mode '" + s + "'");
}

std::string to_string(Extrapolation e) {
  return e == Extrapolation::Hold ? "hold" : "mean_input";
}

void ModelConfig::validate() const {
  if (hidden_dim < 1 || f_theta_units < 1) raise(ErrorKind::Config, "model dims must be positive");
  if (f_theta_layers != 2) raise(ErrorKind::Config, "only a 2-layer dynamics net is supported");
  if (num_classes < 2) raise(ErrorKind::Config, "need at least two classes");
  if (feature_dim < 1) raise(ErrorKind::Config, "need at least one input feature");
  if (pe_tau <= 0.0) raise(ErrorKind::Config, "pe_tau must be positive");
  if (gating_depth != 1 && gating_depth != 2) raise(ErrorKind::Config, "gating depth must be 1 or 2");
  if (gating_depth == 2 && gating_width < 1) raise(ErrorKind::Config, "gating width must be positive");
  if (init_sigma < 0.0) raise(ErrorKind::Config, "init_sigma must be nonnegative");
  if (solve.steps_multiplier < 1) raise(ErrorKind::Config, "steps_multiplier must be >= 1");
}

SequenceEncoder build_encoder(const ModelConfig& cfg) {
  cfg.validate();
  SequenceEncoder enc;
  enc.cfg = cfg;
  const size_t H = static_cast<size_t>(cfg.hidden_dim);
  const size_t K = static_cast<size_t>(cfg.num_classes);

  enc.cell = cells::make_cell_params(enc.params, "cell", cfg.cell, H,
                                     static_cast<size_t>(cfg.cell_input_dim()), cfg.gating_depth,
                                     static_cast<size_t>(cfg.gating_width));
  cells::init_cell_params(enc.cell, cfg.seed);

  if (cfg.ode_enabled) {
    enc.fnet = node::make_dynamics_net(enc.params, "fth", H,
                                       static_cast<size_t>(cfg.f_theta_units), cfg.fth_time_input);
    node::init_dynamics_net(enc.fnet, cfg.seed);
  }

  enc.bn_update = tensor::make_batchnorm(enc.params, "bn_up", H);
  enc.bn_cls = tensor::make_batchnorm(enc.params, "bn_cls", H);

  enc.cls_W = enc.params.add("cls.W", K, H);
  enc.cls_b = enc.params.add("cls.b", K);
  Rng rcls(seed_mix(cfg.seed, "cls.W"));
  tensor::init_uniform(enc.cls_W, rcls);

  enc.feature_means.assign(static_cast<size_t>(cfg.feature_dim), 0.0);
  return enc;
}

Vec init_hidden(size_t hidden, double sigma, Rng& rng) {
  if (sigma < 0.0) raise(ErrorKind::Config, "init_hidden: sigma must be nonnegative");
  Vec h(hidden);
  for (double& v : h) v = sigma * rng.normal();
  return h;
}

Rng series_rng(const SequenceEncoder& enc, const TimeSeries& s) {
  return Rng(seed_mix(enc.cfg.seed, "h0", fnv1a64(s.id)));
}

TimeSeries augment_inputs(const TimeSeries& s, TimeFeatures mode, double tau) {
  switch (mode) {
    case TimeFeatures::None:
      return s;
    case TimeFeatures::DeltaT: {
      TimeSeries out = s;
      for (size_t i = 0; i < out.size(); ++i) {
        const double gap =
            i == 0 ? 0.0 : static_cast<double>(out.timestamps[i] - out.timestamps[i - 1]);
        out.observations[i].push_back(gap);
      }
      return out;
    }
    case TimeFeatures::Pe: {
      TimeSeries out = s;
      const size_t d = out.observations.empty() ? 0 : out.observations[0].size();
      const long t_first = out.timestamps.empty() ? 0 : out.timestamps.front();
      for (size_t k = 0; k < out.size(); ++k) {
        const double day = static_cast<double>(out.timestamps[k] - t_first);
        for (size_t i = 0; i < d; ++i) {
          const double scale = std::pow(tau, 2.0 * static_cast<double>(i) / static_cast<double>(d));
          const double phase = (i % 2 == 1) ? 1.5707963267948966 : 0.0;
          out.observations[k][i] += std::sin(day / scale + phase);
        }
      }
      return out;
    }
  }
  raise(ErrorKind::Config, "unknown time-feature mode");
}

namespace {

// pseudo-observation input for MeanInput extrapolation at time t
Vec mean_input_vector(const SequenceEncoder& enc, long t, long t_prev, long t_first) {
  Vec x = enc.feature_means;
  if (enc.cfg.time_features == TimeFeatures::DeltaT) {
    x.push_back(static_cast<double>(t - t_prev));
  } else if (enc.cfg.time_features == TimeFeatures::Pe) {
    const size_t d = x.size();
    const double day = static_cast<double>(t - t_first);
    for (size_t i = 0; i < d; ++i) {
      const double scale =
          std::pow(enc.cfg.pe_tau, 2.0 * static_cast<double>(i) / static_cast<double>(d));
      const double phase = (i % 2 == 1) ? 1.5707963267948966 : 0.0;
      x[i] += std::sin(day / scale + phase);
    }
  }
  return x;
}

}  // namespace

Vec encode(const SequenceEncoder& enc, const TimeSeries& s, long horizon_override,
           EncodeTrace* trace) {
  if (s.timestamps.empty()) raise(ErrorKind::Empty, "encode: empty series");
  if (static_cast<int>(s.observations.front().size()) != enc.cfg.feature_dim)
    raise(ErrorKind::Dimension, "encode: feature dim mismatch");
  const long horizon = horizon_override >= 0 ? horizon_override : s.horizon;
  if (horizon < s.timestamps.back())
    raise(ErrorKind::Validation, "encode: horizon before last observation");

  const TimeSeries aug = augment_inputs(s, enc.cfg.time_features, enc.cfg.pe_tau);
  const size_t H = static_cast<size_t>(enc.cfg.hidden_dim);

  Rng rng = series_rng(enc, s);
  cells::CellState state;
  state.h = init_hidden(H, enc.cfg.init_sigma, rng);
  if (enc.cfg.cell == CellType::Lstm) state.c = init_hidden(H, enc.cfg.init_sigma, rng);

  long t_prev = 0;
  for (size_t i = 0; i < aug.size(); ++i) {
    const long t_i = aug.timestamps[i];
    if (enc.cfg.ode_enabled && t_i > t_prev) {
      const int n = node::steps_for_gap(t_prev, t_i, enc.cfg.solve);
      state.h = node::euler_solve(enc.fnet, state.h, static_cast<double>(t_prev),
                                  static_cast<double>(t_i), n);
      if (trace) trace->solves.push_back({t_prev, t_i, n});
    }
    Vec hb = tensor::bn_eval_forward(enc.bn_update, state.h, nullptr);
    cells::CellState in{std::move(hb), state.c};
    state = cells::cell_forward(enc.cell, aug.observations[i], in, nullptr);
    if (trace) {
      trace->update_times.push_back(t_i);
      trace->hidden_after_update.push_back(state.h);
    }
    t_prev = t_i;
  }

  if (horizon > t_prev) {
    if (enc.cfg.ode_enabled) {
      const int n = node::steps_for_gap(t_prev, horizon, enc.cfg.solve);
      state.h = node::euler_solve(enc.fnet, state.h, static_cast<double>(t_prev),
                                  static_cast<double>(horizon), n);
      if (trace) trace->solves.push_back({t_prev, horizon, n});
    } else if (enc.cfg.extrapolation == Extrapolation::MeanInput) {
      const long t_first = aug.timestamps.front();
      for (long t = t_prev + 1; t <= horizon; ++t) {
        Vec x = mean_input_vector(enc, t, t_prev, t_first);
        Vec hb = tensor::bn_eval_forward(enc.bn_update, state.h, nullptr);
        cells::CellState in{std::move(hb), state.c};
        state = cells::cell_forward(enc.cell, x, in, nullptr);
        if (trace) {
          trace->update_times.push_back(t);
          trace->hidden_after_update.push_back(state.h);
        }
        t_prev = t;
      }
    }
    // Hold: state unchanged past the last update
  }
  return state.h;
}

Vec classify(const SequenceEncoder& enc, const Vec& h) {
  if (!tensor::all_finite(h)) raise(ErrorKind::Numeric, "classify: non-finite state");
  Vec hb = tensor::bn_eval_forward(enc.bn_cls, h, nullptr);
  Vec logits = tensor::affine(enc.cls_W, hb, enc.cls_b);
  return tensor::softmax(logits);
}

int argmax_lowest(const Vec& probs) {
  int best = 0;
  for (size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

Prediction predict(const SequenceEncoder& enc, const TimeSeries& s) {
  Vec probs = classify(enc, encode(enc, s));
  return Prediction{argmax_lowest(probs), std::move(probs)};
}

// ---- checkpoint -----------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& c) {
  json j;
  j["cell"] = cells::to_string(c.cell);
  j["hidden_dim"] = c.hidden_dim;
  j["f_theta_units"] = c.f_theta_units;
  j["f_theta_layers"] = c.f_theta_layers;
  j["ode_enabled"] = c.ode_enabled;
  j["time_features"] = to_string(c.time_features);
  j["pe_tau"] = c.pe_tau;
  j["gating_depth"] = c.gating_depth;
  j["gating_width"] = c.gating_width;
  j["num_classes"] = c.num_classes;
  j["feature_dim"] = c.feature_dim;
  j["steps_multiplier"] = c.solve.steps_multiplier;
  j["gradient_mode"] = node::to_string(c.solve.gradient_mode);
  j["seed"] = c.seed;
  j["init_sigma"] = c.init_sigma;
  j["fth_time_input"] = c.fth_time_input;
  j["extrapolation"] = to_string(c.extrapolation);
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.cell = cells::cell_type_from_string(j.at("cell").get<std::string>());
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.f_theta_units = j.at("f_theta_units").get<int>();
  c.f_theta_layers = j.at("f_theta_layers").get<int>();
  c.ode_enabled = j.at("ode_enabled").get<bool>();
  c.time_features = time_features_from_string(j.at("time_features").get<std::string>());
  c.pe_tau = j.at("pe_tau").get<double>();
  c.gating_depth = j.at("gating_depth").get<int>();
  c.gating_width = j.at("gating_width").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  c.solve.steps_multiplier = j.at("steps_multiplier").get<int>();
  c.solve.gradient_mode = node::grad_mode_from_string(j.at("gradient_mode").get<std::string>());
  c.seed = j.at("seed").get<uint64_t>();
  c.init_sigma = j.at("init_sigma").get<double>();
  c.fth_time_input = j.at("fth_time_input").get<bool>();
  c.extrapolation = extrapolation_from_string(j.at("extrapolation").get<std::string>());
  return c;
}

}  // namespace

std::string checkpoint_to_string(const SequenceEncoder& enc) {
  json j;
  j["format_version"] = 1;
  j["model"] = config_to_json(enc.cfg);
  json params = json::object();
  for (const auto& [name, e] : enc.params.entries()) {
    json p;
    p["shape"] = {e.rows, e.cols};
    p["values"] = e.w;
    params[name] = std::move(p);
  }
  j["params"] = std::move(params);
  j["batchnorm"] = {
      {"bn_up",
       {{"running_mean", enc.bn_update.running_mean}, {"running_var", enc.bn_update.running_var}}},
      {"bn_cls",
       {{"running_mean", enc.bn_cls.running_mean}, {"running_var", enc.bn_cls.running_var}}}};
  j["feature_means"] = enc.feature_means;
  return j.dump();
}

SequenceEncoder encoder_from_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(ErrorKind::Parse, "checkpoint: malformed JSON");
  try {
    if (j.at("format_version").get<int>() != 1)
      raise(ErrorKind::Parse, "checkpoint: unsupported format version");
    SequenceEncoder enc = build_encoder(config_from_json(j.at("model")));
    const json& params = j.at("params");
    for (auto& [name, e] : enc.params.entries()) {
      if (!params.contains(name))
        raise(ErrorKind::Validation, "checkpoint: missing parameter '" + name + "'");
      const json& p = params.at(name);
      const auto shape = p.at("shape").get<std::vector<size_t>>();
      if (shape.size() != 2 || shape[0] != e.rows || shape[1] != e.cols)
        raise(ErrorKind::Validation, "checkpoint: shape mismatch for '" + name + "'");
      const Vec vals = p.at("values").get<Vec>();
      if (vals.size() != e.rows * e.cols)
        raise(ErrorKind::Validation, "checkpoint: value count mismatch for '" + name + "'");
      // copy in place: Param views hold pointers into the existing buffers
      std::copy(vals.begin(), vals.end(), e.w.begin());
    }
    if (params.size() != enc.params.entries().size())
      raise(ErrorKind::Validation, "checkpoint: unexpected extra parameters");
    const json& bn = j.at("batchnorm");
    const auto restore_stats = [](Vec& dst, const json& src, const char* what) {
      const Vec vals = src.get<Vec>();
      if (vals.size() != dst.size())
        raise(ErrorKind::Validation, std::string("checkpoint: size mismatch for ") + what);
      dst = vals;
    };
    restore_stats(enc.bn_update.running_mean, bn.at("bn_up").at("running_mean"), "bn_up mean");
    restore_stats(enc.bn_update.running_var, bn.at("bn_up").at("running_var"), "bn_up var");
    restore_stats(enc.bn_cls.running_mean, bn.at("bn_cls").at("running_mean"), "bn_cls mean");
    restore_stats(enc.bn_cls.running_var, bn.at("bn_cls").at("running_var"), "bn_cls var");
    restore_stats(enc.feature_means, j.at("feature_means"), "feature means");
    enc.params.check_finite();
    return enc;
  } catch (const json::exception& e) {
    raise(ErrorKind::Parse, std::string("checkpoint: bad structure (") + e.what() + ")");
  }
}

void save_checkpoint(const SequenceEncoder& enc, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorKind::Io, "cannot write '" + tmp + "'");
    f << checkpoint_to_string(enc) << "\n";
    if (!f) raise(ErrorKind::Io, "write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

SequenceEncoder load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::Io, "cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return encoder_from_string(text);
}

}  // namespace irregts::model
