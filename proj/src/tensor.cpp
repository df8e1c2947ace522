#include "irregts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "irregts/errors.hpp"

namespace irregts::tensor {

namespace {
const kernels::Ops& K() { return kernels::active(); }
}  // namespace

Param ParamStore::add(const std::string& name, size_t rows, size_t cols) {
  if (entries_.count(name)) raise(ErrorKind::Config, "duplicate parameter name '" + name + "'");
  Entry e{rows, cols, Vec(rows * cols, 0.0), Vec(rows * cols, 0.0)};
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  Entry& ref = it->second;
  return Param{ref.w.data(), ref.g.data(), rows, cols};
}

Param ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) raise(ErrorKind::Config, "unknown parameter '" + name + "'");
  Entry& ref = it->second;
  return Param{ref.w.data(), ref.g.data(), ref.rows, ref.cols};
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) std::fill(e.g.begin(), e.g.end(), 0.0);
}

size_t ParamStore::total_params() const {
  size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.w.size();
  return n;
}

void ParamStore::check_finite() const {
  for (const auto& [name, e] : entries_)
    for (double v : e.w)
      if (!std::isfinite(v)) raise(ErrorKind::Numeric, "non-finite value in parameter '" + name + "'");
}

void init_uniform(Param p, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(p.cols));
  for (size_t i = 0; i < p.size(); ++i) p.w[i] = rng.uniform(-s, s);
}

Vec affine(const Param& W, const Vec& x, const Param& b) {
  if (x.size() != W.cols || (b.w && b.rows != W.rows))
    raise(ErrorKind::Dimension, "affine: shape mismatch");
  if (W.rows == 0 || W.cols == 0) raise(ErrorKind::Dimension, "affine: empty operand");
  Vec y(W.rows);
  K().affine(y.data(), W.w, x.data(), b.w, W.rows, W.cols);
  return y;
}

void affine_backward(const Param& W, const Param& b, const Vec& x, const Vec& dy, Vec& dx) {
  if (dy.size() != W.rows || x.size() != W.cols || dx.size() != W.cols)
    raise(ErrorKind::Dimension, "affine_backward: shape mismatch");
  K().ger_acc(W.g, dy.data(), x.data(), W.rows, W.cols);
  if (b.g) K().axpy(b.g, 1.0, dy.data(), W.rows);
  K().matvec_t_acc(dx.data(), W.w, dy.data(), W.rows, W.cols);
}

void tanh_inplace(Vec& v) {
  for (double& x : v) x = std::tanh(x);
}

void sigmoid_inplace(Vec& v) {
  for (double& x : v) {
    if (x >= 0.0) {
      x = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      x = e / (1.0 + e);
    }
  }
}

Vec tanh_backward(const Vec& y, const Vec& dy) {
  Vec d(y.size());
  for (size_t i = 0; i < y.size(); ++i) d[i] = dy[i] * (1.0 - y[i] * y[i]);
  return d;
}

Vec sigmoid_backward(const Vec& y, const Vec& dy) {
  Vec d(y.size());
  for (size_t i = 0; i < y.size(); ++i) d[i] = dy[i] * y[i] * (1.0 - y[i]);
  return d;
}

Vec softmax(const Vec& z) {
  if (z.empty()) raise(ErrorKind::Dimension, "softmax: empty input");
  const double m = *std::max_element(z.begin(), z.end());
  Vec p(z.size());
  double total = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

BatchNorm make_batchnorm(ParamStore& ps, const std::string& prefix, size_t dim, double eps,
                         double momentum) {
  if (eps < 0.0) raise(ErrorKind::Config, "batchnorm: eps must be >= 0");
  BatchNorm bn;
  bn.gamma = ps.add(prefix + ".gamma", dim);
  bn.beta = ps.add(prefix + ".beta", dim);
  std::fill(bn.gamma.w, bn.gamma.w + dim, 1.0);
  bn.running_mean.assign(dim, 0.0);
  bn.running_var.assign(dim, 1.0);
  bn.eps = eps;
  bn.momentum = momentum;
  return bn;
}

std::vector<Vec> bn_train_forward(BatchNorm& bn, const std::vector<Vec>& xs, BnTrainCache* cache,
                                  bool update_running) {
  if (xs.empty()) raise(ErrorKind::Empty, "batchnorm: empty batch in train mode");
  const size_t H = bn.dim();
  const double B = static_cast<double>(xs.size());
  Vec mean(H, 0.0), var(H, 0.0);
  for (const Vec& x : xs) {
    if (x.size() != H) raise(ErrorKind::Dimension, "batchnorm: feature dim mismatch");
    for (size_t j = 0; j < H; ++j) mean[j] += x[j];
  }
  for (size_t j = 0; j < H; ++j) mean[j] /= B;
  for (const Vec& x : xs)
    for (size_t j = 0; j < H; ++j) {
      const double d = x[j] - mean[j];
      var[j] += d * d;
    }
  for (size_t j = 0; j < H; ++j) var[j] /= B;

  Vec inv_std(H);
  for (size_t j = 0; j < H; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + bn.eps);

  std::vector<Vec> ys(xs.size(), Vec(H));
  std::vector<Vec> xhat(xs.size(), Vec(H));
  for (size_t b = 0; b < xs.size(); ++b)
    for (size_t j = 0; j < H; ++j) {
      xhat[b][j] = (xs[b][j] - mean[j]) * inv_std[j];
      ys[b][j] = bn.gamma.w[j] * xhat[b][j] + bn.beta.w[j];
    }

  if (update_running) {
    for (size_t j = 0; j < H; ++j) {
      bn.running_mean[j] = (1.0 - bn.momentum) * bn.running_mean[j] + bn.momentum * mean[j];
      bn.running_var[j] = (1.0 - bn.momentum) * bn.running_var[j] + bn.momentum * var[j];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return ys;
}

std::vector<Vec> bn_train_backward(const BatchNorm& bn, const BnTrainCache& cache,
                                   const std::vector<Vec>& dys) {
  const size_t H = bn.dim();
  const size_t B = dys.size();
  if (B != cache.xhat.size()) raise(ErrorKind::State, "batchnorm: cache/batch size mismatch");
  Vec sum_dxhat(H, 0.0), sum_dxhat_xhat(H, 0.0);
  std::vector<Vec> dxhat(B, Vec(H));
  for (size_t b = 0; b < B; ++b)
    for (size_t j = 0; j < H; ++j) {
      dxhat[b][j] = dys[b][j] * bn.gamma.w[j];
      sum_dxhat[j] += dxhat[b][j];
      sum_dxhat_xhat[j] += dxhat[b][j] * cache.xhat[b][j];
      bn.gamma.g[j] += dys[b][j] * cache.xhat[b][j];
      bn.beta.g[j] += dys[b][j];
    }
  std::vector<Vec> dxs(B, Vec(H));
  const double invB = 1.0 / static_cast<double>(B);
  for (size_t b = 0; b < B; ++b)
    for (size_t j = 0; j < H; ++j)
      dxs[b][j] = cache.inv_std[j] * invB *
                  (static_cast<double>(B) * dxhat[b][j] - sum_dxhat[j] -
                   cache.xhat[b][j] * sum_dxhat_xhat[j]);
  return dxs;
}

Vec bn_eval_forward(const BatchNorm& bn, const Vec& x, Vec* xhat_cache) {
  const size_t H = bn.dim();
  if (x.size() != H) raise(ErrorKind::Dimension, "batchnorm: feature dim mismatch");
  Vec y(H);
  Vec xhat(H);
  for (size_t j = 0; j < H; ++j) {
    xhat[j] = (x[j] - bn.running_mean[j]) / std::sqrt(bn.running_var[j] + bn.eps);
    y[j] = bn.gamma.w[j] * xhat[j] + bn.beta.w[j];
  }
  if (xhat_cache) *xhat_cache = std::move(xhat);
  return y;
}

Vec bn_eval_backward(const BatchNorm& bn, const Vec& xhat, const Vec& dy) {
  const size_t H = bn.dim();
  Vec dx(H);
  for (size_t j = 0; j < H; ++j) {
    bn.gamma.g[j] += dy[j] * xhat[j];
    bn.beta.g[j] += dy[j];
    dx[j] = dy[j] * bn.gamma.w[j] / std::sqrt(bn.running_var[j] + bn.eps);
  }
  return dx;
}

GradCheckReport grad_check(ParamStore& ps, const std::function<double(bool)>& loss_fn,
                           double tol) {
  if (tol <= 0.0) raise(ErrorKind::Config, "grad_check: tol must be positive");
  ps.zero_grads();
  const double base = loss_fn(true);
  if (!std::isfinite(base)) raise(ErrorKind::Numeric, "grad_check: non-finite loss");

  // snapshot analytic gradients before perturbing
  std::map<std::string, Vec> analytic;
  for (const auto& [name, e] : ps.entries()) analytic[name] = e.g;

  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  GradCheckReport rep;
  for (auto& [name, e] : ps.entries()) {
    const Vec& ga = analytic[name];
    for (size_t i = 0; i < e.w.size(); ++i) {
      const double saved = e.w[i];
      const double h = h0 * std::max(1.0, std::fabs(saved));
      e.w[i] = saved + h;
      const double lp = loss_fn(false);
      e.w[i] = saved - h;
      const double lm = loss_fn(false);
      e.w[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        raise(ErrorKind::Numeric, "grad_check: non-finite loss at '" + name + "'");
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = ga[i];
      const double rel = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = i;
      }
    }
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace irregts::tensor
