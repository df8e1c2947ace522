#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "irregts/kernels.hpp"
#include "irregts/rng.hpp"

namespace irregts::tensor {

using Vec = std::vector<double>;

// View into one named tensor of a ParamStore: weights plus the paired
// gradient buffer. Vectors are stored as rows x 1.
struct Param {
  double* w = nullptr;
  double* g = nullptr;
  size_t rows = 0;
  size_t cols = 0;
  size_t size() const { return rows * cols; }
};

class ParamStore {
 public:
  struct Entry {
    size_t rows, cols;
    Vec w, g;
  };

  Param add(const std::string& name, size_t rows, size_t cols = 1);
  Param get(const std::string& name);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  void zero_grads();
  size_t total_params() const;

  // deterministic iteration (lexicographic by name)
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  void check_finite() const;

 private:
  std::map<std::string, Entry> entries_;
};

// uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)]; fan_in is the column count
void init_uniform(Param p, Rng& rng);

// ---- vector helpers -------------------------------------------------------

Vec affine(const Param& W, const Vec& x, const Param& b);
// accumulates dW, db; adds W^T dy into dx
void affine_backward(const Param& W, const Param& b, const Vec& x, const Vec& dy, Vec& dx);

void tanh_inplace(Vec& v);
void sigmoid_inplace(Vec& v);
// given activation outputs y and upstream dy, return dy * f'(pre)
Vec tanh_backward(const Vec& y, const Vec& dy);
Vec sigmoid_backward(const Vec& y, const Vec& dy);

Vec softmax(const Vec& z);

bool all_finite(const Vec& v);

// ---- batch normalization --------------------------------------------------

struct BatchNorm {
  Param gamma, beta;  // trainable, live in a ParamStore
  Vec running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  size_t dim() const { return gamma.rows; }
};

BatchNorm make_batchnorm(ParamStore& ps, const std::string& prefix, size_t dim, double eps = 1e-5,
                         double momentum = 0.1);

struct BnTrainCache {
  std::vector<Vec> xhat;
  Vec inv_std;
};

// Train mode: normalize with batch statistics (population variance), then
// scale/shift; optionally fold batch stats into the running estimates.
std::vector<Vec> bn_train_forward(BatchNorm& bn, const std::vector<Vec>& xs, BnTrainCache* cache,
                                  bool update_running);
// returns dxs; accumulates dgamma/dbeta
std::vector<Vec> bn_train_backward(const BatchNorm& bn, const BnTrainCache& cache,
                                   const std::vector<Vec>& dys);

Vec bn_eval_forward(const BatchNorm& bn, const Vec& x, Vec* xhat_cache);
Vec bn_eval_backward(const BatchNorm& bn, const Vec& xhat, const Vec& dy);

// ---- gradient checking ----------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_param;
  size_t worst_index = 0;
};

// loss_fn(want_grad): evaluates the loss at the current parameter values;
// when want_grad is true it must also leave analytic gradients in the
// store's gradient buffers (after a zero_grads done by grad_check).
// Central differences use h = cbrt(machine eps) * max(1, |value|).
GradCheckReport grad_check(ParamStore& ps, const std::function<double(bool)>& loss_fn, double tol);

}  // namespace irregts::tensor
