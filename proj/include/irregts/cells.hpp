#pragma once

#include <optional>
#include <string>
#include <vector>

#include "irregts/tensor.hpp"

namespace irregts::cells {

using tensor::Param;
using tensor::ParamStore;
using tensor::Vec;

enum class CellType { Tanh, Lstm, Gru };

CellType cell_type_from_string(const std::string& s);
std::string to_string(CellType t);

// One gate pre-activation. With depth 1 this is Wx x + Wh h + b. With
// depth 2 an inner affine+tanh of the configured width is inserted:
// V tanh(Wx x + Wh h + b) + c.
struct GatePath {
  Param Wx, Wh, b;
  Param V, c;  // second layer, present only when depth == 2
};

struct CellParams {
  CellType type = CellType::Gru;
  size_t hidden = 0;
  size_t input = 0;
  int gating_depth = 1;
  size_t gating_width = 0;
  // tanh: {a}; gru: {f, r, z}; lstm: {i, f, o, z}
  std::vector<GatePath> gates;
};

// Registers all gate tensors in `ps` under `prefix` with the conventional
// suffixes (W_xf, W_hf, b_f, ...). Weights start at zero; call
// init_cell_params to randomize.
CellParams make_cell_params(ParamStore& ps, const std::string& prefix, CellType type,
                            size_t hidden, size_t input, int gating_depth = 1,
                            size_t gating_width = 0);
void init_cell_params(const CellParams& p, uint64_t seed);

struct CellState {
  Vec h;
  std::optional<Vec> c;  // present iff LSTM
};

struct CellCache {
  Vec x, h_prev, c_prev;
  std::vector<Vec> inner;  // depth-2 inner tanh outputs, one per gate
  std::vector<Vec> act;    // gate activations in gate order
  Vec rh;                  // gru: r .* h_prev
  Vec c_new, tanh_c;       // lstm
};

// Forward one step. `cache` may be null for inference.
CellState cell_forward(const CellParams& p, const Vec& x, const CellState& prev,
                       CellCache* cache);

// Backward one step. dh/dc are gradients w.r.t. the step outputs; on return
// dh and dc hold gradients w.r.t. the step inputs (h_prev, c_prev).
// Parameter gradients are accumulated. dx, when non-null, receives the
// input gradient (overwritten).
void cell_backward(const CellParams& p, const CellCache& cache, Vec& dh, Vec& dc, Vec* dx);

}  // namespace irregts::cells
