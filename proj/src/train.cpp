#include "irregts/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "irregts/errors.hpp"
#include "irregts/metrics.hpp"
#include "json.hpp"

namespace irregts::train {

using model::TimeFeatures;

void TrainConfig::validate() const {
  if (lr0 <= 0.0) raise(ErrorKind::Config, "lr0 must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) raise(ErrorKind::Config, "decay must be in (0,1]");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) raise(ErrorKind::Config, "keep_prob must be in (0,1]");
  if (epochs < 1 && max_batches < 1) raise(ErrorKind::Config, "need epochs or max_batches");
  if (batch_size < 0) raise(ErrorKind::Config, "batch_size must be nonnegative");
}

double cross_entropy(const Vec& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.size()))
    raise(ErrorKind::Label, "cross_entropy: label out of range");
  const double p = std::max(probs[static_cast<size_t>(label)], 1e-12);
  return -std::log(p);
}

TimeSeries subsample(const TimeSeries& s, double p, Rng& rng) {
  if (!(p > 0.0 && p <= 1.0)) raise(ErrorKind::Config, "subsample: p must be in (0,1]");
  if (p >= 1.0) return s;
  std::vector<char> keep(s.size());
  for (;;) {
    bool any = false;
    for (size_t i = 0; i < s.size(); ++i) {
      keep[i] = rng.bernoulli(p);
      any = any || keep[i];
    }
    if (any) break;
  }
  TimeSeries out;
  out.id = s.id;
  out.label = s.label;
  out.horizon = s.horizon;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!keep[i]) continue;
    out.timestamps.push_back(s.timestamps[i]);
    out.observations.push_back(s.observations[i]);
  }
  return out;
}

double lr_schedule(long batch_index, const TrainConfig& cfg) {
  if (batch_index < 0) raise(ErrorKind::Config, "lr_schedule: negative batch index");
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(batch_index));
}

void Adamax::step(tensor::ParamStore& ps, double lr) {
  ++t_;
  const double bias = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  for (auto& [name, e] : ps.entries()) {
    auto& [m, u] = state_[name];
    if (m.empty()) {
      m.assign(e.w.size(), 0.0);
      u.assign(e.w.size(), 0.0);
    }
    for (size_t i = 0; i < e.w.size(); ++i) {
      const double g = e.g[i];
      if (!std::isfinite(g)) raise(ErrorKind::Numeric, "adamax: non-finite gradient in '" + name + "'");
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      u[i] = std::max(beta2_ * u[i], std::fabs(g));
      e.w[i] -= (lr / bias) * m[i] / (u[i] + eps_);
    }
  }
}

// ---- batched forward/backward ----------------------------------------------

namespace {

using cells::CellCache;
using cells::CellState;
using node::OdeTape;

struct MemberRec {
  int series;
  bool has_solve = false;
  OdeTape solve;
  CellCache cell;
  Vec bn_xhat;  // eval-mode cache
};

struct SyncRec {
  long t;
  std::vector<MemberRec> members;
  tensor::BnTrainCache bn;
};

}  // namespace

double batch_forward_backward(SequenceEncoder& enc, const std::vector<const TimeSeries*>& batch,
                              bool want_grad, bool bn_train, bool update_running) {
  if (batch.empty()) raise(ErrorKind::Empty, "batch_forward_backward: empty batch");
  const size_t B = batch.size();
  const size_t H = static_cast<size_t>(enc.cfg.hidden_dim);
  const bool lstm = enc.cfg.cell == cells::CellType::Lstm;
  const node::GradMode gmode = enc.cfg.solve.gradient_mode;

  // per-series running state
  std::vector<TimeSeries> aug(B);
  std::vector<Vec> h(B), c(B);
  std::vector<size_t> next_obs(B, 0);
  std::vector<long> t_prev(B, 0);
  std::vector<long> horizons(B);

  for (size_t s = 0; s < B; ++s) {
    const TimeSeries& raw = *batch[s];
    if (raw.timestamps.empty()) raise(ErrorKind::Empty, "batch: empty series '" + raw.id + "'");
    if (static_cast<int>(raw.observations.front().size()) != enc.cfg.feature_dim)
      raise(ErrorKind::Dimension, "batch: feature dim mismatch in '" + raw.id + "'");
    aug[s] = model::augment_inputs(raw, enc.cfg.time_features, enc.cfg.pe_tau);
    Rng rng = model::series_rng(enc, raw);
    h[s] = model::init_hidden(H, enc.cfg.init_sigma, rng);
    if (lstm) c[s] = model::init_hidden(H, enc.cfg.init_sigma, rng);
    horizons[s] = raw.horizon;
  }

  // global timeline of observation times
  std::vector<long> times;
  for (size_t s = 0; s < B; ++s)
    times.insert(times.end(), aug[s].timestamps.begin(), aug[s].timestamps.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<SyncRec> syncs;
  syncs.reserve(times.size());

  for (long t : times) {
    SyncRec sync;
    sync.t = t;
    for (size_t s = 0; s < B; ++s) {
      if (next_obs[s] >= aug[s].size() || aug[s].timestamps[next_obs[s]] != t) continue;
      MemberRec m;
      m.series = static_cast<int>(s);
      if (enc.cfg.ode_enabled && t > t_prev[s]) {
        const int n = node::steps_for_gap(t_prev[s], t, enc.cfg.solve);
        h[s] = node::euler_solve(enc.fnet, h[s], static_cast<double>(t_prev[s]),
                                 static_cast<double>(t), n, gmode, want_grad ? &m.solve : nullptr);
        m.has_solve = want_grad;
      }
      sync.members.push_back(std::move(m));
    }
    if (sync.members.empty()) continue;

    // pre-update batch norm across the series observed at this timestamp
    if (bn_train) {
      std::vector<Vec> xs;
      xs.reserve(sync.members.size());
      for (const MemberRec& m : sync.members) xs.push_back(h[static_cast<size_t>(m.series)]);
      std::vector<Vec> ys =
          tensor::bn_train_forward(enc.bn_update, xs, want_grad ? &sync.bn : nullptr, update_running);
      for (size_t k = 0; k < sync.members.size(); ++k) {
        MemberRec& m = sync.members[k];
        const size_t s = static_cast<size_t>(m.series);
        CellState in{std::move(ys[k]), lstm ? std::optional<Vec>(c[s]) : std::nullopt};
        CellState out = cells::cell_forward(enc.cell, aug[s].observations[next_obs[s]], in,
                                            want_grad ? &m.cell : nullptr);
        h[s] = std::move(out.h);
        if (lstm) c[s] = std::move(*out.c);
        t_prev[s] = sync.t;
        ++next_obs[s];
      }
    } else {
      for (MemberRec& m : sync.members) {
        const size_t s = static_cast<size_t>(m.series);
        Vec hb = tensor::bn_eval_forward(enc.bn_update, h[s], want_grad ? &m.bn_xhat : nullptr);
        CellState in{std::move(hb), lstm ? std::optional<Vec>(c[s]) : std::nullopt};
        CellState out = cells::cell_forward(enc.cell, aug[s].observations[next_obs[s]], in,
                                            want_grad ? &m.cell : nullptr);
        h[s] = std::move(out.h);
        if (lstm) c[s] = std::move(*out.c);
        t_prev[s] = sync.t;
        ++next_obs[s];
      }
    }
    syncs.push_back(std::move(sync));
  }

  // extrapolate to each series' horizon
  std::vector<OdeTape> tail(B);
  std::vector<char> has_tail(B, 0);
  for (size_t s = 0; s < B; ++s) {
    if (enc.cfg.ode_enabled && horizons[s] > t_prev[s]) {
      const int n = node::steps_for_gap(t_prev[s], horizons[s], enc.cfg.solve);
      h[s] = node::euler_solve(enc.fnet, h[s], static_cast<double>(t_prev[s]),
                               static_cast<double>(horizons[s]), n, gmode,
                               want_grad ? &tail[s] : nullptr);
      has_tail[s] = want_grad ? 1 : 0;
    }
  }

  // classifier head: pre-classifier batch norm, affine, softmax, mean CE
  tensor::BnTrainCache cls_bn_cache;
  std::vector<Vec> hb(B);
  std::vector<Vec> cls_xhat(B);
  if (bn_train) {
    std::vector<Vec> ys =
        tensor::bn_train_forward(enc.bn_cls, h, want_grad ? &cls_bn_cache : nullptr, update_running);
    hb = std::move(ys);
  } else {
    for (size_t s = 0; s < B; ++s)
      hb[s] = tensor::bn_eval_forward(enc.bn_cls, h[s], want_grad ? &cls_xhat[s] : nullptr);
  }

  double loss = 0.0;
  std::vector<Vec> probs(B);
  for (size_t s = 0; s < B; ++s) {
    Vec logits = tensor::affine(enc.cls_W, hb[s], enc.cls_b);
    probs[s] = tensor::softmax(logits);
    loss += cross_entropy(probs[s], batch[s]->label);
  }
  loss /= static_cast<double>(B);
  if (!want_grad) return loss;

  // ---- backward ----

  const double inv_b = 1.0 / static_cast<double>(B);
  std::vector<Vec> dh(B), dc(B);
  {
    std::vector<Vec> dhb(B);
    for (size_t s = 0; s < B; ++s) {
      // fused softmax + cross-entropy
      Vec dlogits = probs[s];
      dlogits[static_cast<size_t>(batch[s]->label)] -= 1.0;
      for (double& v : dlogits) v *= inv_b;
      dhb[s].assign(H, 0.0);
      tensor::affine_backward(enc.cls_W, enc.cls_b, hb[s], dlogits, dhb[s]);
    }
    if (bn_train) {
      dh = tensor::bn_train_backward(enc.bn_cls, cls_bn_cache, dhb);
    } else {
      for (size_t s = 0; s < B; ++s) dh[s] = tensor::bn_eval_backward(enc.bn_cls, cls_xhat[s], dhb[s]);
    }
    for (size_t s = 0; s < B; ++s) dc[s].assign(H, 0.0);
  }

  for (size_t s = 0; s < B; ++s)
    if (has_tail[s]) dh[s] = node::ode_backward(enc.fnet, tail[s], dh[s], gmode);

  for (auto it = syncs.rbegin(); it != syncs.rend(); ++it) {
    SyncRec& sync = *it;
    for (MemberRec& m : sync.members) {
      const size_t s = static_cast<size_t>(m.series);
      cells::cell_backward(enc.cell, m.cell, dh[s], dc[s], nullptr);
      // dh[s] now holds the gradient w.r.t. the batchnorm output
    }
    if (bn_train) {
      std::vector<Vec> dys;
      dys.reserve(sync.members.size());
      for (const MemberRec& m : sync.members) dys.push_back(dh[static_cast<size_t>(m.series)]);
      std::vector<Vec> dxs = tensor::bn_train_backward(enc.bn_update, sync.bn, dys);
      for (size_t k = 0; k < sync.members.size(); ++k)
        dh[static_cast<size_t>(sync.members[k].series)] = std::move(dxs[k]);
    } else {
      for (MemberRec& m : sync.members) {
        const size_t s = static_cast<size_t>(m.series);
        dh[s] = tensor::bn_eval_backward(enc.bn_update, m.bn_xhat, dh[s]);
      }
    }
    for (MemberRec& m : sync.members) {
      if (!m.has_solve) continue;
      const size_t s = static_cast<size_t>(m.series);
      dh[s] = node::ode_backward(enc.fnet, m.solve, dh[s], gmode);
    }
  }
  // gradients w.r.t. the noise initialization are discarded
  return loss;
}

// ---- history + fit ----------------------------------------------------------

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string history_csv(const FitHistory& h) {
  std::string out = "batch,lr,loss\n";
  for (const auto& row : h.batches) {
    out += std::to_string(row.batch);
    out += ',';
    append_double(out, row.lr);
    out += ',';
    append_double(out, row.loss);
    out += '\n';
  }
  return out;
}

std::string history_summary_json(const FitHistory& h) {
  nlohmann::json j;
  j["n_batches"] = h.batches.size();
  j["best_epoch"] = h.best_epoch;
  j["best_val_macro_f1"] = h.best_val_macro_f1;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss_mean", e.train_loss_mean},
                      {"val_accuracy", e.val_accuracy},
                      {"val_macro_f1", e.val_macro_f1}});
  }
  j["epochs"] = std::move(epochs);
  return j.dump(2);
}

namespace {

metrics::EvalCounts evaluate_split(const SequenceEncoder& enc, const Dataset& ds) {
  std::vector<int> preds, labels;
  preds.reserve(ds.series.size());
  labels.reserve(ds.series.size());
  for (const TimeSeries& s : ds.series) {
    preds.push_back(model::predict(enc, s).label);
    labels.push_back(s.label);
  }
  metrics::ConfusionMatrix cm = metrics::confusion(preds, labels, enc.cfg.num_classes);
  return metrics::EvalCounts{metrics::accuracy(cm), metrics::macro_f1(cm), std::move(cm)};
}

}  // namespace

SequenceEncoder fit(const Dataset& train_set, const Dataset& val_set,
                    const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                    FitHistory* history) {
  tcfg.validate();
  if (train_set.series.empty()) raise(ErrorKind::Empty, "fit: empty training set");
  if (val_set.series.empty()) raise(ErrorKind::Empty, "fit: empty validation set");
  if (train_set.feature_dim != mcfg.feature_dim || train_set.num_classes != mcfg.num_classes)
    raise(ErrorKind::Dimension, "fit: dataset and model dims disagree");

  SequenceEncoder enc = model::build_encoder(mcfg);
  enc.feature_means = data::feature_means(train_set);

  Adamax opt(tcfg);
  FitHistory local;
  FitHistory& hist = history ? *history : local;

  const int B = tcfg.effective_batch_size(mcfg.ode_enabled);
  long batch_index = 0;
  bool stop = false;
  std::string best_snapshot;

  std::vector<size_t> order(train_set.series.size());
  std::iota(order.begin(), order.end(), size_t{0});

  const int epochs = tcfg.epochs >= 1 ? tcfg.epochs : 1;
  for (int epoch = 0; epoch < epochs && !stop; ++epoch) {
    Rng shuffle_rng(seed_mix(tcfg.seed, "shuffle", static_cast<uint64_t>(epoch)));
    shuffle(order, shuffle_rng);

    double epoch_loss = 0.0;
    long epoch_batches = 0;
    for (size_t start = 0; start < order.size() && !stop; start += static_cast<size_t>(B)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(B));

      Rng sub_rng(seed_mix(tcfg.seed, "subsample", static_cast<uint64_t>(batch_index)));
      std::vector<TimeSeries> holder;
      holder.reserve(end - start);
      std::vector<const TimeSeries*> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        const TimeSeries& raw = train_set.series[order[i]];
        if (tcfg.bypass_subsample) {
          batch.push_back(&raw);
        } else {
          holder.push_back(subsample(raw, tcfg.keep_prob, sub_rng));
          batch.push_back(&holder.back());
        }
      }

      enc.params.zero_grads();
      const double loss = batch_forward_backward(enc, batch, true, true, true);
      if (!std::isfinite(loss))
        raise(ErrorKind::Diverged,
              "fit: loss diverged at batch " + std::to_string(batch_index));
      const double lr = lr_schedule(batch_index, tcfg);
      opt.step(enc.params, lr);

      hist.batches.push_back({batch_index, lr, loss});
      epoch_loss += loss;
      ++epoch_batches;
      ++batch_index;
      if (tcfg.max_batches > 0 && batch_index >= tcfg.max_batches) stop = true;
    }

    metrics::EvalCounts val = evaluate_split(enc, val_set);
    hist.epochs.push_back({epoch, epoch_batches ? epoch_loss / static_cast<double>(epoch_batches) : 0.0,
                           val.accuracy, val.macro_f1});
    if (val.macro_f1 > hist.best_val_macro_f1) {
      hist.best_val_macro_f1 = val.macro_f1;
      hist.best_epoch = epoch;
      best_snapshot = model::checkpoint_to_string(enc);
    }
  }

  if (!best_snapshot.empty()) return model::encoder_from_string(best_snapshot);
  return enc;
}

}  // namespace irregts::train
