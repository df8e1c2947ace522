#pragma once

#include <functional>
#include <string>
#include <vector>

#include "irregts/tensor.hpp"

namespace irregts::node {

using tensor::Param;
using tensor::ParamStore;
using tensor::Vec;

enum class GradMode { Discrete, Adjoint };

GradMode grad_mode_from_string(const std::string& s);
std::string to_string(GradMode m);

struct SolveConfig {
  int steps_multiplier = 1;
  GradMode gradient_mode = GradMode::Discrete;
};

// Two-layer MLP hidden-state dynamics: out = W2 tanh(W1 in + b1) + b2.
// The input is h, optionally extended by t / time_scale.
struct DynamicsNet {
  Param l1W, l1b, l2W, l2b;
  size_t hidden = 0;  // state dim H
  size_t units = 0;   // inner width U
  bool time_input = false;
  double time_scale = 1.0;
};

DynamicsNet make_dynamics_net(ParamStore& ps, const std::string& prefix, size_t hidden,
                              size_t units, bool time_input = false, double time_scale = 1.0);
void init_dynamics_net(const DynamicsNet& net, uint64_t seed);

Vec f_theta(const DynamicsNet& net, const Vec& h, double t = 0.0);
// accumulates net parameter grads and adds (df/dh)^T d_out into dh_acc
void f_theta_vjp(const DynamicsNet& net, const Vec& h, double t, const Vec& d_out, Vec& dh_acc);

// number of Euler steps across a timestamp gap
int steps_for_gap(long t_prev, long t_next, const SolveConfig& cfg);

// generic explicit Euler; states (when non-null) receives h_0..h_n
using Field = std::function<Vec(const Vec&, double)>;
Vec euler_solve_field(const Field& f, const Vec& h0, double t0, double t1, int n,
                      std::vector<Vec>* states);

struct OdeTape {
  double t0 = 0, t1 = 0;
  int n = 0;
  std::vector<Vec> states;  // discrete mode: h_0..h_n
  Vec h1;                   // adjoint mode: final state only
  bool discrete = true;
};

Vec euler_solve(const DynamicsNet& net, const Vec& h0, double t0, double t1, int n,
                GradMode mode = GradMode::Discrete, OdeTape* tape = nullptr);

// Gradients through an Euler solve. Discrete mode replays the stored states
// with the exact chain rule; adjoint mode integrates the augmented adjoint
// system backward with the same step count, reconstructing states by
// reverse Euler from h(t1). Returns dL/dh0; net parameter gradients are
// accumulated into the store.
Vec ode_backward(const DynamicsNet& net, const OdeTape& tape, const Vec& dL_dh1, GradMode mode);

}  // namespace irregts::node
