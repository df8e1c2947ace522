#include "irregts/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "irregts/data.hpp"
#include "irregts/errors.hpp"
#include "irregts/eval.hpp"
#include "irregts/gradsuite.hpp"
#include "irregts/kernels.hpp"
#include "irregts/model.hpp"
#include "irregts/plot.hpp"
#include "irregts/train.hpp"

namespace irregts::cli {

namespace {

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorKind::Io, "cannot write '" + tmp + "'");
    f << content;
    if (!f) raise(ErrorKind::Io, "write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) raise(ErrorKind::Io, "cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::string env_name(const std::string& flag) {
  std::string out = "IRREGTS_";
  for (char c : flag) out += (c == '-') ? '_' : static_cast<char>(std::toupper(c));
  return out;
}

template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
  return app->add_option("--" + flag, value, help)
      ->envname(env_name(flag))
      ->capture_default_str();
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      raise(ErrorKind::Config, "bad grid value '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::string> parse_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

data::SplitFractions parse_fracs(const std::string& csv) {
  const std::vector<double> v = parse_grid(csv);
  if (v.size() != 3) raise(ErrorKind::Config, "split-fracs needs three values");
  return data::SplitFractions{v[0], v[1], v[2]};
}

// shared model/training options across train and sweep
struct ModelFlags {
  std::string cell = "gru";
  std::string ode = "on";
  std::string time_features = "none";
  int hidden = 80;
  int units = 255;
  int gating_depth = 1;
  int gating_width = 100;
  double pe_tau = 1000.0;
  int steps_multiplier = 1;
  std::string grad_mode = "discrete";
  bool fth_time_input = false;
  std::string extrapolation = "hold";
  double init_sigma = 1e-4;
  uint64_t seed = 1;

  void attach(CLI::App* app) {
    opt(app, "cell", cell, "recurrent cell: tanh|lstm|gru")
        ->check(CLI::IsMember({"tanh", "rnn", "lstm", "gru"}));
    opt(app, "ode", ode, "prediction step between observations: on|off")
        ->check(CLI::IsMember({"on", "off"}));
    opt(app, "time-features", time_features, "input time features: none|dt|pe")
        ->check(CLI::IsMember({"none", "dt", "delta_t", "pe"}));
    opt(app, "hidden", hidden, "hidden state size");
    opt(app, "units", units, "dynamics net units per layer");
    opt(app, "gating-depth", gating_depth, "gate pre-activation layers (1 or 2)");
    opt(app, "gating-width", gating_width, "inner width for gating depth 2");
    opt(app, "pe-tau", pe_tau, "positional-encoding scale tau");
    opt(app, "steps-multiplier", steps_multiplier, "Euler steps per unit timestamp gap");
    opt(app, "grad-mode", grad_mode, "gradients through the solver: discrete|adjoint")
        ->check(CLI::IsMember({"discrete", "adjoint"}));
    opt(app, "fth-time-input", fth_time_input, "feed normalized time into the dynamics net");
    opt(app, "extrapolation", extrapolation, "non-ODE behavior past last update: hold|mean_input")
        ->check(CLI::IsMember({"hold", "mean_input"}));
    opt(app, "init-sigma", init_sigma, "stddev of the hidden state initialization");
    opt(app, "seed", seed, "model / training seed");
  }

  model::ModelConfig to_config(int num_classes, int feature_dim) const {
    model::ModelConfig cfg;
    cfg.cell = cells::cell_type_from_string(cell);
    cfg.hidden_dim = hidden;
    cfg.f_theta_units = units;
    cfg.ode_enabled = (ode == "on");
    cfg.time_features = model::time_features_from_string(time_features);
    cfg.pe_tau = pe_tau;
    cfg.gating_depth = gating_depth;
    cfg.gating_width = gating_width;
    cfg.num_classes = num_classes;
    cfg.feature_dim = feature_dim;
    cfg.solve.steps_multiplier = steps_multiplier;
    cfg.solve.gradient_mode = node::grad_mode_from_string(grad_mode);
    cfg.seed = seed;
    cfg.init_sigma = init_sigma;
    cfg.fth_time_input = fth_time_input;
    cfg.extrapolation = model::extrapolation_from_string(extrapolation);
    return cfg;
  }
};

struct TrainFlags {
  double lr = 0.07;
  double decay = 0.9995;
  int batch = 0;
  int epochs = 12;
  long max_batches = 0;
  double p = 0.75;
  bool no_subsample = false;

  void attach(CLI::App* app) {
    opt(app, "lr", lr, "initial learning rate");
    opt(app, "decay", decay, "per-batch learning-rate decay factor");
    opt(app, "batch", batch, "mini-batch size (0: 500 with ODE, 300 without)");
    opt(app, "epochs", epochs, "training epochs");
    opt(app, "max-batches", max_batches, "stop after this many batches (0: no cap)");
    opt(app, "p", p, "keep probability of the subsampling regularizer");
    app->add_flag("--no-subsample", no_subsample, "bypass the regularizer code path entirely")
        ->envname(env_name("no-subsample"));
  }

  train::TrainConfig to_config(uint64_t seed) const {
    train::TrainConfig t;
    t.lr0 = lr;
    t.decay = decay;
    t.batch_size = batch;
    t.epochs = epochs;
    t.max_batches = max_batches;
    t.keep_prob = p;
    t.seed = seed;
    t.bypass_subsample = no_subsample;
    return t;
  }
};

struct PresetSpec {
  std::string cell;
  bool ode;
  std::string tf;
};

PresetSpec model_preset(const std::string& name) {
  static const std::map<std::string, PresetSpec> presets = {
      {"ode-gru", {"gru", true, "none"}},   {"ode-lstm", {"lstm", true, "none"}},
      {"ode-rnn", {"tanh", true, "none"}},  {"gru", {"gru", false, "none"}},
      {"lstm", {"lstm", false, "none"}},    {"rnn", {"tanh", false, "none"}},
      {"gru-dt", {"gru", false, "dt"}},     {"lstm-dt", {"lstm", false, "dt"}},
      {"rnn-dt", {"tanh", false, "dt"}},    {"gru-pe", {"gru", false, "pe"}},
      {"lstm-pe", {"lstm", false, "pe"}},   {"rnn-pe", {"tanh", false, "pe"}},
  };
  auto it = presets.find(name);
  if (it == presets.end()) raise(ErrorKind::Config, "unknown model preset '" + name + "'");
  return it->second;
}

using data::Dataset;

Dataset pick_split(const data::Dataset& ds, const std::string& which,
                   const data::SplitFractions& fr, uint64_t split_seed) {
  if (which == "all") return ds;
  data::Splits sp = data::split(ds, fr, split_seed);
  if (which == "train") return std::move(sp.train);
  if (which == "val") return std::move(sp.val);
  if (which == "test") return std::move(sp.test);
  raise(ErrorKind::Config, "unknown split '" + which + "'");
}

// ---- subcommand bodies ------------------------------------------------------

int cmd_generate(int classes, int dim, long length, double missing, double noise, int n,
                 uint64_t seed, const std::string& out) {
  data::SynthSpec spec;
  spec.num_classes = classes;
  spec.feature_dim = dim;
  spec.length = length;
  spec.missing_rate = missing;
  spec.noise_std = noise;
  spec.n_series = n;
  spec.seed = seed;
  Dataset ds = data::generate(spec);
  data::save_jsonl(ds, out);
  std::cout << "wrote " << ds.series.size() << " series (K=" << ds.num_classes
            << ", d=" << ds.feature_dim << ", T=" << ds.nominal_length << ") to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& out, std::string history_path,
              std::string summary_path, const ModelFlags& mf, const TrainFlags& tf,
              uint64_t split_seed, const std::string& split_fracs) {
  Dataset ds = data::load_jsonl(data_path);
  data::Splits sp = data::split(ds, parse_fracs(split_fracs), split_seed);
  if (sp.train.series.empty() || sp.val.series.empty())
    raise(ErrorKind::Config, "train: split produced an empty train or val set");

  model::ModelConfig mcfg = mf.to_config(ds.num_classes, ds.feature_dim);
  train::TrainConfig tcfg = tf.to_config(mf.seed);

  train::FitHistory hist;
  model::SequenceEncoder enc = train::fit(sp.train, sp.val, mcfg, tcfg, &hist);
  model::save_checkpoint(enc, out);
  if (history_path.empty()) history_path = out + ".history.csv";
  if (summary_path.empty()) summary_path = out + ".summary.json";
  write_file_atomic(history_path, train::history_csv(hist));
  write_file_atomic(summary_path, train::history_summary_json(hist));
  std::cout << "wrote " << out << " (best epoch " << hist.best_epoch << ", val macro-F1 "
            << hist.best_val_macro_f1 << ")\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& which,
             uint64_t split_seed, const std::string& split_fracs, const std::string& out,
             const std::string& cm_out) {
  model::SequenceEncoder enc = model::load_checkpoint(model_path);
  Dataset ds = data::load_jsonl(data_path);
  Dataset split_ds = pick_split(ds, which, parse_fracs(split_fracs), split_seed);
  if (split_ds.series.empty()) raise(ErrorKind::Empty, "eval: selected split is empty");
  eval::EvalResult r = eval::run_eval(enc, split_ds);
  const std::string json_text = eval::metrics_json(r);
  if (!out.empty()) {
    write_file_atomic(out, json_text + "\n");
    std::cout << "wrote " << out << " (accuracy " << r.accuracy << ", macro-F1 " << r.macro_f1
              << ")\n";
  } else {
    std::cout << json_text << "\n";
  }
  if (!cm_out.empty()) write_file_atomic(cm_out, eval::cm_csv(r.cm));
  return 0;
}

int cmd_sweep(const std::string& data_path, const std::string& kind_name, std::string grid_csv,
              const std::string& models_csv, int seeds, const std::string& out_dir,
              const ModelFlags& mf, const TrainFlags& tf, uint64_t split_seed,
              const std::string& split_fracs, uint64_t data_seed, int jobs) {
  const eval::SweepKind kind = eval::sweep_kind_from_string(kind_name);
  Dataset ds = data::load_jsonl(data_path);
  data::Splits sp = data::split(ds, parse_fracs(split_fracs), split_seed);

  std::vector<double> grid =
      grid_csv.empty() ? eval::default_grid(kind) : parse_grid(grid_csv);
  std::vector<eval::SweepModel> models;
  for (const std::string& name : parse_list(models_csv)) {
    PresetSpec ps = model_preset(name);
    ModelFlags flags = mf;
    flags.cell = ps.cell;
    flags.ode = ps.ode ? "on" : "off";
    flags.time_features = ps.tf;
    models.push_back({name, flags.to_config(ds.num_classes, ds.feature_dim)});
  }
  if (models.empty()) raise(ErrorKind::Config, "sweep: no models given");

  train::TrainConfig tcfg = tf.to_config(mf.seed);
  eval::SweepReport rep = eval::sweep(kind, models, grid, seeds, sp, tcfg, jobs, data_seed);

  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir + "/report.csv", eval::sweep_report_csv(rep));
  write_file_atomic(out_dir + "/runs.csv", eval::sweep_runs_csv(rep));
  std::cout << "wrote " << out_dir << "/report.csv and runs.csv (" << rep.rows.size()
            << " aggregate rows)\n";
  return 0;
}

int cmd_plot(const std::string& sweep_path, const std::string& cm_path,
             const std::string& out_dir) {
  if (sweep_path.empty() && cm_path.empty())
    raise(ErrorKind::Config, "plot: need --sweep and/or --cm input");
  std::filesystem::create_directories(out_dir);
  if (!sweep_path.empty()) {
    plot::CsvTable t = plot::parse_csv(read_file(sweep_path));
    for (const std::string metric : {"accuracy", "macro_f1"}) {
      write_file_atomic(out_dir + "/" + metric + ".svg", plot::render_sweep_svg(t, metric));
      std::cout << "wrote " << out_dir << "/" << metric << ".svg\n";
    }
  }
  if (!cm_path.empty()) {
    plot::CsvTable t = plot::parse_csv(read_file(cm_path));
    write_file_atomic(out_dir + "/cm.svg", plot::render_cm_svg(t));
    std::cout << "wrote " << out_dir << "/cm.svg\n";
  }
  return 0;
}

int cmd_gradcheck(double tol) {
  const std::vector<gradsuite::SuiteCase> cases = gradsuite::run_full_suite(tol);
  bool all_pass = true;
  for (const gradsuite::SuiteCase& c : cases) {
    std::printf("[%s] %-24s max_rel_err=%.3e\n", c.report.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.report.max_rel_err);
    all_pass = all_pass && c.report.pass;
  }
  std::printf("%zu/%zu gradient checks passed at tol %g\n",
              static_cast<size_t>(std::count_if(cases.begin(), cases.end(),
                                                [](const auto& c) { return c.report.pass; })),
              cases.size(), tol);
  return all_pass ? 0 : 1;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"continuous-time classification of irregularly sampled series"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file (sections per subcommand)");
  app.allow_config_extras(false);

  std::string kernels = "auto";
  app.add_option("--kernels", kernels, "arithmetic backend: auto|scalar|avx2")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
      ->capture_default_str();

  // generate
  auto* g = app.add_subcommand("generate", "write a synthetic dataset as JSONL");
  int g_classes = 4, g_dim = 6, g_n = 2500;
  long g_length = 40;
  double g_missing = 0.5, g_noise = 0.3;
  uint64_t g_seed = 7;
  std::string g_out;
  opt(g, "classes", g_classes, "number of classes");
  opt(g, "dim", g_dim, "features per observation");
  opt(g, "length", g_length, "nominal season length T");
  opt(g, "missing", g_missing, "per-timestep missing probability");
  opt(g, "noise", g_noise, "observation noise stddev");
  opt(g, "n", g_n, "number of series");
  opt(g, "seed", g_seed, "generator seed");
  opt(g, "out", g_out, "output JSONL path")->required();

  // train
  auto* t = app.add_subcommand("train", "fit a model and write a checkpoint");
  std::string t_data, t_out, t_history, t_summary, t_fracs = "0.64,0.16,0.2";
  uint64_t t_split_seed = 42;
  ModelFlags t_mf;
  TrainFlags t_tf;
  opt(t, "data", t_data, "dataset JSONL")->required();
  opt(t, "out", t_out, "checkpoint output path")->required();
  opt(t, "history", t_history, "training history CSV (default <out>.history.csv)");
  opt(t, "summary", t_summary, "training summary JSON (default <out>.summary.json)");
  t_mf.attach(t);
  t_tf.attach(t);
  opt(t, "split-seed", t_split_seed, "seed of the train/val/test split");
  opt(t, "split-fracs", t_fracs, "train,val,test fractions");

  // eval
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_model, e_data, e_split = "test", e_out, e_cm, e_fracs = "0.64,0.16,0.2";
  uint64_t e_split_seed = 42;
  opt(e, "model", e_model, "checkpoint path")->required();
  opt(e, "data", e_data, "dataset JSONL")->required();
  opt(e, "split", e_split, "which split to score: train|val|test|all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  opt(e, "split-seed", e_split_seed, "seed of the train/val/test split");
  opt(e, "split-fracs", e_fracs, "train,val,test fractions");
  opt(e, "out", e_out, "metrics JSON output path");
  opt(e, "cm", e_cm, "confusion matrix CSV output path");

  // sweep
  auto* w = app.add_subcommand("sweep", "run an experiment grid");
  std::string w_data, w_kind, w_grid, w_models = "ode-gru,gru-dt", w_out_dir,
              w_fracs = "0.64,0.16,0.2";
  int w_seeds = 3, w_jobs = 1;
  uint64_t w_split_seed = 42, w_data_seed = 7;
  ModelFlags w_mf;
  TrainFlags w_tf;
  opt(w, "data", w_data, "dataset JSONL")->required();
  opt(w, "kind", w_kind, "sweep kind: early|sparsity|datasize|keepprob")
      ->required()
      ->check(CLI::IsMember({"early", "sparsity", "datasize", "keepprob"}));
  opt(w, "grid", w_grid, "comma-separated condition grid (default per kind)");
  opt(w, "models", w_models, "comma-separated model presets");
  opt(w, "seeds", w_seeds, "number of seeds per cell");
  opt(w, "out-dir", w_out_dir, "output directory")->required();
  w_mf.attach(w);
  w_tf.attach(w);
  opt(w, "split-seed", w_split_seed, "seed of the train/val/test split");
  opt(w, "split-fracs", w_fracs, "train,val,test fractions");
  opt(w, "data-seed", w_data_seed, "seed of condition transforms (sparsify/subset)");
  opt(w, "jobs", w_jobs, "parallel training cells");

  // plot
  auto* p = app.add_subcommand("plot", "render sweep/confusion CSVs to SVG");
  std::string p_sweep, p_cm, p_out_dir = ".";
  opt(p, "sweep", p_sweep, "sweep report.csv to chart");
  opt(p, "cm", p_cm, "confusion matrix CSV to render");
  opt(p, "out-dir", p_out_dir, "output directory");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of all model gradients");
  double gc_tol = 1e-4;
  opt(gc, "tol", gc_tol, "max relative error tolerance");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (kernels != "auto") kernels::force_backend(kernels);
    if (app.got_subcommand(g))
      return cmd_generate(g_classes, g_dim, g_length, g_missing, g_noise, g_n, g_seed, g_out);
    if (app.got_subcommand(t))
      return cmd_train(t_data, t_out, t_history, t_summary, t_mf, t_tf, t_split_seed, t_fracs);
    if (app.got_subcommand(e))
      return cmd_eval(e_model, e_data, e_split, e_split_seed, e_fracs, e_out, e_cm);
    if (app.got_subcommand(w))
      return cmd_sweep(w_data, w_kind, w_grid, w_models, w_seeds, w_out_dir, w_mf, w_tf,
                       w_split_seed, w_fracs, w_data_seed, w_jobs);
    if (app.got_subcommand(p)) return cmd_plot(p_sweep, p_cm, p_out_dir);
    if (app.got_subcommand(gc)) return cmd_gradcheck(gc_tol);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args);
}

}  // namespace irregts::cli
