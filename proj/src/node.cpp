#include "irregts/node.hpp"

#include <cmath>

#include "irregts/errors.hpp"

namespace irregts::node {

GradMode grad_mode_from_string(const std::string& s) {
  if (s == "discrete") return GradMode::Discrete;
  if (s == "adjoint") return GradMode::Adjoint;
  raise(ErrorKind::Config, "unknown gradient mode '" + s + "'");
}

std::string to_string(GradMode m) { return m == GradMode::Discrete ? "discrete" : "adjoint"; }

DynamicsNet make_dynamics_net(ParamStore& ps, const std::string& prefix, size_t hidden,
                              size_t units, bool time_input, double time_scale) {
  if (hidden == 0 || units == 0) raise(ErrorKind::Config, "dynamics net dims must be positive");
  DynamicsNet net;
  net.hidden = hidden;
  net.units = units;
  net.time_input = time_input;
  net.time_scale = time_scale > 0 ? time_scale : 1.0;
  const size_t in = hidden + (time_input ? 1 : 0);
  net.l1W = ps.add(prefix + ".l1.W", units, in);
  net.l1b = ps.add(prefix + ".l1.b", units);
  net.l2W = ps.add(prefix + ".l2.W", hidden, units);
  net.l2b = ps.add(prefix + ".l2.b", hidden);
  return net;
}

void init_dynamics_net(const DynamicsNet& net, uint64_t seed) {
  Rng r1(seed_mix(seed, "fth.l1"));
  tensor::init_uniform(net.l1W, r1);
  Rng r2(seed_mix(seed, "fth.l2"));
  tensor::init_uniform(net.l2W, r2);
}

namespace {

Vec net_input(const DynamicsNet& net, const Vec& h, double t) {
  if (!net.time_input) return h;
  Vec in(h);
  in.push_back(t / net.time_scale);
  return in;
}

}  // namespace

Vec f_theta(const DynamicsNet& net, const Vec& h, double t) {
  if (h.size() != net.hidden) raise(ErrorKind::Dimension, "f_theta: state dim mismatch");
  Vec in = net_input(net, h, t);
  Vec u = tensor::affine(net.l1W, in, net.l1b);
  tensor::tanh_inplace(u);
  return tensor::affine(net.l2W, u, net.l2b);
}

void f_theta_vjp(const DynamicsNet& net, const Vec& h, double t, const Vec& d_out, Vec& dh_acc) {
  Vec in = net_input(net, h, t);
  Vec u = tensor::affine(net.l1W, in, net.l1b);
  tensor::tanh_inplace(u);

  Vec du(net.units, 0.0);
  tensor::affine_backward(net.l2W, net.l2b, u, d_out, du);
  Vec da = tensor::tanh_backward(u, du);
  Vec din(in.size(), 0.0);
  tensor::affine_backward(net.l1W, net.l1b, in, da, din);
  for (size_t i = 0; i < net.hidden; ++i) dh_acc[i] += din[i];
}

int steps_for_gap(long t_prev, long t_next, const SolveConfig& cfg) {
  if (t_next <= t_prev) raise(ErrorKind::Ordering, "steps_for_gap: timestamps must increase");
  if (cfg.steps_multiplier < 1) raise(ErrorKind::Config, "steps_multiplier must be >= 1");
  return static_cast<int>(t_next - t_prev) * cfg.steps_multiplier;
}

namespace {

void check_state(const Vec& h) {
  for (double v : h) {
    if (!std::isfinite(v) || std::fabs(v) > 1e6)
      raise(ErrorKind::Numeric, "euler_solve: state diverged");
  }
}

}  // namespace

Vec euler_solve_field(const Field& f, const Vec& h0, double t0, double t1, int n,
                      std::vector<Vec>* states) {
  if (n < 1) raise(ErrorKind::Config, "euler_solve: need at least one step");
  if (!(t1 > t0)) raise(ErrorKind::Ordering, "euler_solve: t1 must exceed t0");
  const double dt = (t1 - t0) / static_cast<double>(n);
  Vec h = h0;
  if (states) {
    states->clear();
    states->reserve(static_cast<size_t>(n) + 1);
    states->push_back(h);
  }
  for (int k = 0; k < n; ++k) {
    const double t = t0 + dt * k;
    Vec dh = f(h, t);
    kernels::active().axpy(h.data(), dt, dh.data(), h.size());
    check_state(h);
    if (states) states->push_back(h);
  }
  return h;
}

Vec euler_solve(const DynamicsNet& net, const Vec& h0, double t0, double t1, int n, GradMode mode,
                OdeTape* tape) {
  std::vector<Vec> states;
  const bool keep = tape && mode == GradMode::Discrete;
  Vec h = euler_solve_field([&net](const Vec& x, double t) { return f_theta(net, x, t); }, h0, t0,
                            t1, n, keep ? &states : nullptr);
  if (tape) {
    tape->t0 = t0;
    tape->t1 = t1;
    tape->n = n;
    tape->discrete = (mode == GradMode::Discrete);
    if (keep) {
      tape->states = std::move(states);
    } else {
      tape->h1 = h;
    }
  }
  return h;
}

Vec ode_backward(const DynamicsNet& net, const OdeTape& tape, const Vec& dL_dh1, GradMode mode) {
  const double dt = (tape.t1 - tape.t0) / static_cast<double>(tape.n);
  if (mode == GradMode::Discrete) {
    if (!tape.discrete || tape.states.size() != static_cast<size_t>(tape.n) + 1)
      raise(ErrorKind::State, "ode_backward: no stored forward pass for discrete mode");
    // h_{k+1} = h_k + dt f(h_k):  dh_k = dh_{k+1} + dt (df/dh|h_k)^T dh_{k+1}
    Vec dh = dL_dh1;
    for (int k = tape.n - 1; k >= 0; --k) {
      const double t = tape.t0 + dt * k;
      Vec scaled(dh.size());
      for (size_t i = 0; i < dh.size(); ++i) scaled[i] = dt * dh[i];
      f_theta_vjp(net, tape.states[static_cast<size_t>(k)], t, scaled, dh);
    }
    return dh;
  }

  // Adjoint: augmented state (h, a) marched backward with the same n.
  // da/dt = -(df/dh)^T a, so one reverse Euler step adds dt (df/dh)^T a;
  // dL/dtheta accumulates dt (df/dtheta)^T a along the way.
  if (tape.h1.empty()) raise(ErrorKind::State, "ode_backward: missing final state for adjoint");
  Vec h = tape.h1;
  Vec a = dL_dh1;
  for (int k = tape.n; k >= 1; --k) {
    const double t = tape.t1 - dt * (tape.n - k);  // time of the state we hold
    Vec scaled(a.size());
    for (size_t i = 0; i < a.size(); ++i) scaled[i] = dt * a[i];
    // single VJP feeds both the adjoint update and the theta accumulation
    f_theta_vjp(net, h, t, scaled, a);
    Vec dh = f_theta(net, h, t);
    kernels::active().axpy(h.data(), -dt, dh.data(), h.size());
  }
  return a;
}

}  // namespace irregts::node
