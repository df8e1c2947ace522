#include "irregts/cells.hpp"

#include <cmath>

#include "irregts/errors.hpp"

namespace irregts::cells {

using tensor::affine;
using tensor::affine_backward;
using tensor::sigmoid_backward;
using tensor::sigmoid_inplace;
using tensor::tanh_backward;
using tensor::tanh_inplace;

CellType cell_type_from_string(const std::string& s) {
  if (s == "tanh" || s == "rnn") return CellType::Tanh;
  if (s == "lstm") return CellType::Lstm;
  if (s == "gru") return CellType::Gru;
  raise(ErrorKind::Config, "unknown cell type '" + s + "'");
}

std::string to_string(CellType t) {
  switch (t) {
    case CellType::Tanh: return "tanh";
    case CellType::Lstm: return "lstm";
    case CellType::Gru: return "gru";
  }
  return "?";
}

namespace {

std::vector<std::string> gate_suffixes(CellType t) {
  switch (t) {
    case CellType::Tanh: return {""};
    case CellType::Lstm: return {"i", "f", "o", "z"};
    case CellType::Gru: return {"f", "r", "z"};
  }
  return {};
}

// pre-activation of one gate, caching the depth-2 inner output
Vec gate_pre(const GatePath& g, const Vec& x, const Vec& h, Vec* inner_out) {
  Vec a = affine(g.Wx, x, g.b);
  tensor::Vec hterm(a.size());
  kernels::active().affine(hterm.data(), g.Wh.w, h.data(), nullptr, g.Wh.rows, g.Wh.cols);
  for (size_t i = 0; i < a.size(); ++i) a[i] += hterm[i];
  if (!g.V.w) {
    if (inner_out) inner_out->clear();
    return a;
  }
  tanh_inplace(a);
  if (inner_out) *inner_out = a;
  return affine(g.V, a, g.c);
}

// backward of gate_pre given d(pre); accumulates parameter grads and adds
// contributions into dx (nullable) and dh_prev
void gate_pre_backward(const GatePath& g, const CellCache& cache, const Vec& inner,
                       const Vec& dpre, Vec* dx, Vec& dh_prev) {
  const Vec* dinner = &dpre;
  Vec tmp;
  if (g.V.w) {
    Vec dq(inner.size(), 0.0);
    affine_backward(g.V, g.c, inner, dpre, dq);
    tmp = tanh_backward(inner, dq);
    dinner = &tmp;
  }
  // Wx x + Wh h + b with upstream *dinner
  kernels::active().ger_acc(g.Wx.g, dinner->data(), cache.x.data(), g.Wx.rows, g.Wx.cols);
  kernels::active().ger_acc(g.Wh.g, dinner->data(), cache.h_prev.data(), g.Wh.rows, g.Wh.cols);
  kernels::active().axpy(g.b.g, 1.0, dinner->data(), g.b.rows);
  if (dx) kernels::active().matvec_t_acc(dx->data(), g.Wx.w, dinner->data(), g.Wx.rows, g.Wx.cols);
  kernels::active().matvec_t_acc(dh_prev.data(), g.Wh.w, dinner->data(), g.Wh.rows, g.Wh.cols);
}

// gru candidate uses r .* h_prev in the hidden term, so it needs its own pair
Vec gate_pre_gru_z(const GatePath& g, const Vec& x, const Vec& rh, Vec* inner_out) {
  Vec a = affine(g.Wx, x, g.b);
  Vec hterm(a.size());
  kernels::active().affine(hterm.data(), g.Wh.w, rh.data(), nullptr, g.Wh.rows, g.Wh.cols);
  for (size_t i = 0; i < a.size(); ++i) a[i] += hterm[i];
  if (!g.V.w) {
    if (inner_out) inner_out->clear();
    return a;
  }
  tanh_inplace(a);
  if (inner_out) *inner_out = a;
  return affine(g.V, a, g.c);
}

void gate_pre_gru_z_backward(const GatePath& g, const CellCache& cache, const Vec& inner,
                             const Vec& dpre, Vec* dx, Vec& drh) {
  const Vec* dinner = &dpre;
  Vec tmp;
  if (g.V.w) {
    Vec dq(inner.size(), 0.0);
    affine_backward(g.V, g.c, inner, dpre, dq);
    tmp = tanh_backward(inner, dq);
    dinner = &tmp;
  }
  kernels::active().ger_acc(g.Wx.g, dinner->data(), cache.x.data(), g.Wx.rows, g.Wx.cols);
  kernels::active().ger_acc(g.Wh.g, dinner->data(), cache.rh.data(), g.Wh.rows, g.Wh.cols);
  kernels::active().axpy(g.b.g, 1.0, dinner->data(), g.b.rows);
  if (dx) kernels::active().matvec_t_acc(dx->data(), g.Wx.w, dinner->data(), g.Wx.rows, g.Wx.cols);
  kernels::active().matvec_t_acc(drh.data(), g.Wh.w, dinner->data(), g.Wh.rows, g.Wh.cols);
}

}  // namespace

CellParams make_cell_params(ParamStore& ps, const std::string& prefix, CellType type,
                            size_t hidden, size_t input, int gating_depth, size_t gating_width) {
  if (hidden == 0 || input == 0) raise(ErrorKind::Config, "cell dims must be positive");
  if (gating_depth != 1 && gating_depth != 2)
    raise(ErrorKind::Config, "gating depth must be 1 or 2");
  if (gating_depth == 2 && gating_width == 0)
    raise(ErrorKind::Config, "gating width required for depth 2");

  CellParams p;
  p.type = type;
  p.hidden = hidden;
  p.input = input;
  p.gating_depth = gating_depth;
  p.gating_width = gating_width;
  const size_t out = (gating_depth == 2) ? gating_width : hidden;
  for (const std::string& s : gate_suffixes(type)) {
    const std::string us = s.empty() ? "" : "_" + s;
    GatePath g;
    g.Wx = ps.add(prefix + ".W_x" + s, out, input);
    g.Wh = ps.add(prefix + ".W_h" + s, out, hidden);
    g.b = ps.add(prefix + ".b" + us, out);
    if (gating_depth == 2) {
      g.V = ps.add(prefix + ".V" + us, hidden, gating_width);
      g.c = ps.add(prefix + ".c" + us, hidden);
    }
    p.gates.push_back(g);
  }
  return p;
}

void init_cell_params(const CellParams& p, uint64_t seed) {
  int gi = 0;
  for (const GatePath& g : p.gates) {
    Rng rx(seed_mix(seed, "cell.Wx", gi));
    tensor::init_uniform(g.Wx, rx);
    Rng rh(seed_mix(seed, "cell.Wh", gi));
    tensor::init_uniform(g.Wh, rh);
    if (g.V.w) {
      Rng rv(seed_mix(seed, "cell.V", gi));
      tensor::init_uniform(g.V, rv);
    }
    ++gi;
  }
}

CellState cell_forward(const CellParams& p, const Vec& x, const CellState& prev,
                       CellCache* cache) {
  if (x.size() != p.input) raise(ErrorKind::Dimension, "cell: input dim mismatch");
  if (prev.h.size() != p.hidden) raise(ErrorKind::Dimension, "cell: hidden dim mismatch");
  if (p.type == CellType::Lstm && !prev.c)
    raise(ErrorKind::State, "lstm: missing cell state c");

  CellCache local;
  CellCache& cc = cache ? *cache : local;
  cc.x = x;
  cc.h_prev = prev.h;
  cc.inner.assign(p.gates.size(), Vec{});
  cc.act.assign(p.gates.size(), Vec{});

  const size_t H = p.hidden;
  CellState out;

  switch (p.type) {
    case CellType::Tanh: {
      Vec a = gate_pre(p.gates[0], x, prev.h, &cc.inner[0]);
      tanh_inplace(a);
      cc.act[0] = a;
      out.h = std::move(a);
      break;
    }
    case CellType::Gru: {
      Vec f = gate_pre(p.gates[0], x, prev.h, &cc.inner[0]);
      sigmoid_inplace(f);
      Vec r = gate_pre(p.gates[1], x, prev.h, &cc.inner[1]);
      sigmoid_inplace(r);
      cc.rh.resize(H);
      kernels::active().mul(cc.rh.data(), r.data(), prev.h.data(), H);
      Vec z = gate_pre_gru_z(p.gates[2], x, cc.rh, &cc.inner[2]);
      tanh_inplace(z);
      out.h.resize(H);
      for (size_t i = 0; i < H; ++i) out.h[i] = f[i] * prev.h[i] + (1.0 - f[i]) * z[i];
      cc.act[0] = std::move(f);
      cc.act[1] = std::move(r);
      cc.act[2] = std::move(z);
      break;
    }
    case CellType::Lstm: {
      cc.c_prev = *prev.c;
      Vec i = gate_pre(p.gates[0], x, prev.h, &cc.inner[0]);
      sigmoid_inplace(i);
      Vec f = gate_pre(p.gates[1], x, prev.h, &cc.inner[1]);
      sigmoid_inplace(f);
      Vec o = gate_pre(p.gates[2], x, prev.h, &cc.inner[2]);
      sigmoid_inplace(o);
      Vec z = gate_pre(p.gates[3], x, prev.h, &cc.inner[3]);
      tanh_inplace(z);
      cc.c_new.resize(H);
      for (size_t k = 0; k < H; ++k) cc.c_new[k] = f[k] * cc.c_prev[k] + i[k] * z[k];
      cc.tanh_c = cc.c_new;
      tanh_inplace(cc.tanh_c);
      out.h.resize(H);
      for (size_t k = 0; k < H; ++k) out.h[k] = o[k] * cc.tanh_c[k];
      out.c = cc.c_new;
      cc.act[0] = std::move(i);
      cc.act[1] = std::move(f);
      cc.act[2] = std::move(o);
      cc.act[3] = std::move(z);
      break;
    }
  }
  return out;
}

void cell_backward(const CellParams& p, const CellCache& cache, Vec& dh, Vec& dc, Vec* dx) {
  const size_t H = p.hidden;
  if (dh.size() != H) raise(ErrorKind::Dimension, "cell_backward: dh dim mismatch");
  Vec dh_prev(H, 0.0);
  if (dx) dx->assign(p.input, 0.0);

  switch (p.type) {
    case CellType::Tanh: {
      Vec da = tanh_backward(cache.act[0], dh);
      gate_pre_backward(p.gates[0], cache, cache.inner[0], da, dx, dh_prev);
      break;
    }
    case CellType::Gru: {
      const Vec& f = cache.act[0];
      const Vec& r = cache.act[1];
      const Vec& z = cache.act[2];
      Vec df(H), dz(H);
      for (size_t i = 0; i < H; ++i) {
        df[i] = dh[i] * (cache.h_prev[i] - z[i]);
        dz[i] = dh[i] * (1.0 - f[i]);
        dh_prev[i] += dh[i] * f[i];
      }
      Vec daz = tanh_backward(z, dz);
      Vec drh(H, 0.0);
      gate_pre_gru_z_backward(p.gates[2], cache, cache.inner[2], daz, dx, drh);
      Vec dr(H);
      for (size_t i = 0; i < H; ++i) {
        dr[i] = drh[i] * cache.h_prev[i];
        dh_prev[i] += drh[i] * r[i];
      }
      Vec dar = sigmoid_backward(r, dr);
      gate_pre_backward(p.gates[1], cache, cache.inner[1], dar, dx, dh_prev);
      Vec daf = sigmoid_backward(f, df);
      gate_pre_backward(p.gates[0], cache, cache.inner[0], daf, dx, dh_prev);
      break;
    }
    case CellType::Lstm: {
      const Vec& i = cache.act[0];
      const Vec& f = cache.act[1];
      const Vec& o = cache.act[2];
      const Vec& z = cache.act[3];
      if (dc.size() != H) dc.assign(H, 0.0);
      Vec do_(H), dc_total(H);
      for (size_t k = 0; k < H; ++k) {
        do_[k] = dh[k] * cache.tanh_c[k];
        dc_total[k] = dc[k] + dh[k] * o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
      }
      Vec di(H), df(H), dz(H), dc_prev(H);
      for (size_t k = 0; k < H; ++k) {
        df[k] = dc_total[k] * cache.c_prev[k];
        di[k] = dc_total[k] * z[k];
        dz[k] = dc_total[k] * i[k];
        dc_prev[k] = dc_total[k] * f[k];
      }
      Vec dai = sigmoid_backward(i, di);
      gate_pre_backward(p.gates[0], cache, cache.inner[0], dai, dx, dh_prev);
      Vec daf = sigmoid_backward(f, df);
      gate_pre_backward(p.gates[1], cache, cache.inner[1], daf, dx, dh_prev);
      Vec dao = sigmoid_backward(o, do_);
      gate_pre_backward(p.gates[2], cache, cache.inner[2], dao, dx, dh_prev);
      Vec daz = tanh_backward(z, dz);
      gate_pre_backward(p.gates[3], cache, cache.inner[3], daz, dx, dh_prev);
      dc = std::move(dc_prev);
      break;
    }
  }
  dh = std::move(dh_prev);
}

}  // namespace irregts::cells
