#include "irregts/eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>

#include "irregts/errors.hpp"
#include "json.hpp"

namespace irregts::eval {

EvalResult run_eval(const model::SequenceEncoder& enc, const Dataset& test) {
  if (test.series.empty()) raise(ErrorKind::Empty, "run_eval: empty dataset");
  if (test.feature_dim != enc.cfg.feature_dim || test.num_classes != enc.cfg.num_classes)
    raise(ErrorKind::Dimension, "run_eval: dataset and model dims disagree");
  std::vector<int> preds, labels;
  preds.reserve(test.series.size());
  labels.reserve(test.series.size());
  for (const data::TimeSeries& s : test.series) {
    preds.push_back(model::predict(enc, s).label);
    labels.push_back(s.label);
  }
  EvalResult r;
  r.cm = metrics::confusion(preds, labels, enc.cfg.num_classes);
  r.accuracy = metrics::accuracy(r.cm);
  r.macro_f1 = metrics::macro_f1(r.cm);
  return r;
}

std::string metrics_json(const EvalResult& r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["num_classes"] = r.cm.num_classes;
  j["n"] = r.cm.total();
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < r.cm.num_classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < r.cm.num_classes; ++p) row.push_back(r.cm.at(t, p));
    rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(rows);
  return j.dump(2);
}

std::string cm_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (int p = 0; p < cm.num_classes; ++p) out += "," + std::to_string(p);
  out += '\n';
  for (int t = 0; t < cm.num_classes; ++t) {
    out += std::to_string(t);
    for (int p = 0; p < cm.num_classes; ++p) out += "," + std::to_string(cm.at(t, p));
    out += '\n';
  }
  return out;
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "early") return SweepKind::Early;
  if (s == "sparsity") return SweepKind::Sparsity;
  if (s == "datasize") return SweepKind::Datasize;
  if (s == "keepprob") return SweepKind::KeepProb;
  raise(ErrorKind::Config, "unknown sweep kind '" + s + "'");
}

std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::Early: return "early";
    case SweepKind::Sparsity: return "sparsity";
    case SweepKind::Datasize: return "datasize";
    case SweepKind::KeepProb: return "keepprob";
  }
  return "?";
}

std::vector<double> default_grid(SweepKind k) {
  switch (k) {
    case SweepKind::Early: return {1.0, 0.75, 0.5};
    case SweepKind::Sparsity: return {1.0, 0.75, 0.5, 0.25};
    case SweepKind::Datasize: return {1.0, 0.1, 0.01};
    case SweepKind::KeepProb: return {0.5, 0.65, 0.75, 0.9, 1.0};
  }
  return {};
}

std::string format_condition(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

namespace {

Dataset sparsify_dataset(const Dataset& ds, double fraction, uint64_t seed) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.feature_dim = ds.feature_dim;
  out.nominal_length = ds.nominal_length;
  out.missing_rate = ds.missing_rate;
  out.series.reserve(ds.series.size());
  for (size_t i = 0; i < ds.series.size(); ++i) {
    Rng rng(seed_mix(seed, ds.series[i].id));
    out.series.push_back(data::sparsify(ds.series[i], fraction, rng));
  }
  return out;
}

Dataset truncate_dataset(const Dataset& ds, double fraction) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.feature_dim = ds.feature_dim;
  out.nominal_length = ds.nominal_length;
  out.missing_rate = ds.missing_rate;
  out.series.reserve(ds.series.size());
  for (const data::TimeSeries& s : ds.series)
    out.series.push_back(data::truncate_leading(s, fraction));
  return out;
}

void run_pool(std::vector<std::function<void()>>& tasks, int jobs) {
  if (jobs <= 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      tasks[i]();
    }
  };
  std::vector<std::thread> threads;
  const int n = std::min<int>(jobs, static_cast<int>(tasks.size()));
  threads.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

struct CellKey {
  size_t model, cond, seed;
};

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return xs.empty() ? 0.0 : m / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(xs.size()));
}

}  // namespace

SweepReport sweep(SweepKind kind, const std::vector<SweepModel>& models,
                  const std::vector<double>& grid, int n_seeds, const data::Splits& splits,
                  const train::TrainConfig& base_tcfg, int jobs, uint64_t data_seed) {
  if (grid.empty()) raise(ErrorKind::Config, "sweep: empty grid");
  if (n_seeds < 1) raise(ErrorKind::Config, "sweep: need at least one seed");
  if (models.empty()) raise(ErrorKind::Config, "sweep: no models given");
  for (double g : grid) {
    const bool ok = (kind == SweepKind::KeepProb) ? (g > 0.0 && g <= 1.0) : (g > 0.0 && g <= 1.0);
    if (!ok) raise(ErrorKind::Config, "sweep: grid value out of range: " + format_condition(g));
  }

  const size_t M = models.size(), C = grid.size(), S = static_cast<size_t>(n_seeds);

  // condition-transformed data, shared across models and seeds (matched)
  std::vector<data::Splits> cond_data;
  if (kind == SweepKind::Sparsity) {
    for (size_t c = 0; c < C; ++c) {
      data::Splits d;
      const uint64_t s = seed_mix(data_seed, "sparsity", c);
      d.train = sparsify_dataset(splits.train, grid[c], seed_mix(s, "train"));
      d.val = sparsify_dataset(splits.val, grid[c], seed_mix(s, "val"));
      d.test = sparsify_dataset(splits.test, grid[c], seed_mix(s, "test"));
      cond_data.push_back(std::move(d));
    }
  } else if (kind == SweepKind::Datasize) {
    for (size_t c = 0; c < C; ++c) {
      data::Splits d;
      Rng rng(seed_mix(data_seed, "datasize", c));
      d.train = data::subset(splits.train, grid[c], rng);
      d.val = splits.val;
      d.test = splits.test;
      cond_data.push_back(std::move(d));
    }
  }

  SweepReport rep;
  rep.kind = to_string(kind);
  for (double g : grid) rep.conditions.push_back(format_condition(g));

  // results indexed [model][cond][seed]
  std::vector<std::vector<std::vector<EvalResult>>> results(
      M, std::vector<std::vector<EvalResult>>(C, std::vector<EvalResult>(S)));

  std::vector<std::function<void()>> tasks;
  std::vector<Dataset> test_cond;  // outlives the task closures
  if (kind == SweepKind::Early) {
    // one training per (model, seed); evaluated against each truncation
    for (size_t c = 0; c < C; ++c) test_cond.push_back(truncate_dataset(splits.test, grid[c]));
    for (size_t m = 0; m < M; ++m)
      for (size_t s = 0; s < S; ++s)
        tasks.push_back([&, m, s]() {
          model::ModelConfig mcfg = models[m].cfg;
          mcfg.seed = mcfg.seed + s;
          train::TrainConfig tcfg = base_tcfg;
          tcfg.seed = tcfg.seed + s;
          model::SequenceEncoder enc = train::fit(splits.train, splits.val, mcfg, tcfg);
          for (size_t c = 0; c < C; ++c) results[m][c][s] = run_eval(enc, test_cond[c]);
        });
  } else {
    for (size_t m = 0; m < M; ++m)
      for (size_t c = 0; c < C; ++c)
        for (size_t s = 0; s < S; ++s)
          tasks.push_back([&, m, c, s]() {
            model::ModelConfig mcfg = models[m].cfg;
            mcfg.seed = mcfg.seed + s;
            train::TrainConfig tcfg = base_tcfg;
            tcfg.seed = tcfg.seed + s;
            const data::Splits* d = &splits;
            if (kind == SweepKind::Sparsity || kind == SweepKind::Datasize) d = &cond_data[c];
            if (kind == SweepKind::KeepProb) tcfg.keep_prob = grid[c];
            model::SequenceEncoder enc = train::fit(d->train, d->val, mcfg, tcfg);
            results[m][c][s] = run_eval(enc, d->test);
          });
  }
  run_pool(tasks, jobs);

  // deterministic assembly keyed by (model, condition, seed)
  for (size_t m = 0; m < M; ++m)
    for (size_t c = 0; c < C; ++c)
      for (size_t s = 0; s < S; ++s) {
        const EvalResult& r = results[m][c][s];
        rep.runs.push_back({models[m].name, rep.conditions[c], static_cast<int>(s), r.accuracy,
                            r.macro_f1});
      }

  const char* metric_names[2] = {"accuracy", "macro_f1"};
  for (size_t m = 0; m < M; ++m)
    for (size_t c = 0; c < C; ++c)
      for (int metric = 0; metric < 2; ++metric) {
        std::vector<double> xs;
        for (size_t s = 0; s < S; ++s)
          xs.push_back(metric == 0 ? results[m][c][s].accuracy : results[m][c][s].macro_f1);
        rep.rows.push_back({models[m].name, rep.conditions[c], metric_names[metric], mean_of(xs),
                            std_of(xs), n_seeds});
      }

  // paired difference rows for adjacent model pairs
  for (size_t m = 0; m + 1 < M; ++m)
    for (size_t c = 0; c < C; ++c)
      for (int metric = 0; metric < 2; ++metric) {
        std::vector<double> diff;
        for (size_t s = 0; s < S; ++s) {
          const double a = metric == 0 ? results[m][c][s].accuracy : results[m][c][s].macro_f1;
          const double b =
              metric == 0 ? results[m + 1][c][s].accuracy : results[m + 1][c][s].macro_f1;
          diff.push_back(a - b);
        }
        rep.rows.push_back({"diff(" + models[m].name + "-" + models[m + 1].name + ")",
                            rep.conditions[c], metric_names[metric], mean_of(diff), std_of(diff),
                            n_seeds});
      }
  return rep;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string sweep_report_csv(const SweepReport& rep) {
  std::string out = "kind,condition,model,metric,mean,std,n_seeds\n";
  for (const SweepAggRow& r : rep.rows) {
    out += rep.kind + "," + r.condition + "," + r.model + "," + r.metric + ",";
    append_double(out, r.mean);
    out += ',';
    append_double(out, r.stddev);
    out += ',' + std::to_string(r.n_seeds);
    out += '\n';
  }
  return out;
}

std::string sweep_runs_csv(const SweepReport& rep) {
  std::string out = "kind,condition,model,seed,accuracy,macro_f1\n";
  for (const SweepRunRow& r : rep.runs) {
    out += rep.kind + "," + r.condition + "," + r.model + "," + std::to_string(r.seed_index) + ",";
    append_double(out, r.accuracy);
    out += ',';
    append_double(out, r.macro_f1);
    out += '\n';
  }
  return out;
}

}  // namespace irregts::eval
