#pragma once

#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ptopt/ctcs.hpp"
#include "ptopt/smallmat.hpp"
#include "ptopt/trajectory.hpp"

namespace ptopt {

struct PropagationDiverged : std::runtime_error {
  int interval;
  explicit PropagationDiverged(int k)
      : std::runtime_error("propagation diverged on interval " + std::to_string(k)),
        interval(k) {}
};

/// First-order-hold interpolation of a node-pair control.
template <int Cap>
Vec<Cap> foh_interp(const Vec<Cap>& u_k, const Vec<Cap>& u_k1, double tau, double tau_k,
                    double tau_k1) {
  if (!(tau_k < tau_k1)) throw std::invalid_argument("foh_interp: empty interval");
  const double span = tau_k1 - tau_k;
  if (tau < tau_k - 1e-12 * span || tau > tau_k1 + 1e-12 * span)
    throw std::invalid_argument("foh_interp: tau outside interval");
  if (u_k.n != u_k1.n) throw std::invalid_argument("foh_interp: node length mismatch");
  const double lam_right = (tau - tau_k) / span;
  const double lam_left = (tau_k1 - tau) / span;
  Vec<Cap> u(u_k.n);
  for (int i = 0; i < u.n; ++i) u[i] = lam_left * u_k[i] + lam_right * u_k1[i];
  return u;
}

/// Per-interval linearization of the discretized dynamics
///   x_{k+1} = A x_k + B_minus u_k + B_plus u_{k+1} + w
/// together with the endpoint of the nonlinear propagation.
template <int NX, int NU>
struct IntervalBlocks {
  Mat<NX, NX> A;
  Mat<NX, NU> B_minus;
  Mat<NX, NU> B_plus;
  Vec<NX> w;
  Vec<NX> x_end;
};

template <class Model>
using BlocksOf = IntervalBlocks<Augmented<Model>::state_dim, Augmented<Model>::control_dim>;

namespace detail {

template <class Model>
struct SensitivityBundle {
  using Aug = Augmented<Model>;
  typename Aug::State x;
  Mat<Aug::state_dim, Aug::state_dim> phi_x;
  Mat<Aug::state_dim, Aug::control_dim> phi_u_minus;
  Mat<Aug::state_dim, Aug::control_dim> phi_u_plus;

  void add_scaled(double c, const SensitivityBundle& d) {
    for (int i = 0; i < x.n; ++i) x[i] += c * d.x[i];
    for (int i = 0; i < phi_x.rows * phi_x.cols; ++i)
      phi_x.a[static_cast<std::size_t>(i)] += c * d.phi_x.a[static_cast<std::size_t>(i)];
    for (int i = 0; i < phi_u_minus.rows * phi_u_minus.cols; ++i) {
      phi_u_minus.a[static_cast<std::size_t>(i)] += c * d.phi_u_minus.a[static_cast<std::size_t>(i)];
      phi_u_plus.a[static_cast<std::size_t>(i)] += c * d.phi_u_plus.a[static_cast<std::size_t>(i)];
    }
  }
};

}  // namespace detail

/// Joint fixed-step RK4 integration of the augmented state and the three
/// sensitivity IVPs over one grid interval. Deterministic cost, no adaptive
/// stepping, no matrix exponentials.
template <class Model>
BlocksOf<Model> propagate_interval(const Model& m, const Vec<Augmented<Model>::state_dim>& x_k,
                                   const Vec<Augmented<Model>::control_dim>& u_k,
                                   const Vec<Augmented<Model>::control_dim>& u_k1,
                                   double tau_k, double tau_k1, int steps, int interval_index = 0) {
  using Aug = Augmented<Model>;
  if (steps < 1) throw std::invalid_argument("propagate_interval: steps must be >= 1");
  if (!all_finite(x_k)) throw PropagationDiverged(interval_index);

  const double span = tau_k1 - tau_k;
  detail::SensitivityBundle<Model> s;
  s.x = x_k;
  s.phi_x.set_identity();
  s.phi_u_minus.set_zero();
  s.phi_u_plus.set_zero();

  auto deriv = [&](double tau, const detail::SensitivityBundle<Model>& in) {
    detail::SensitivityBundle<Model> d;
    const auto u = foh_interp(u_k, u_k1, tau, tau_k, tau_k1);
    d.x = Aug::dynamics(m, in.x, u);
    Mat<Aug::state_dim, Aug::state_dim> A;
    Mat<Aug::state_dim, Aug::control_dim> B;
    Aug::jacobians(m, in.x, u, A, B);
    d.phi_x = mat_mat(A, in.phi_x);
    d.phi_u_minus = mat_mat(A, in.phi_u_minus);
    d.phi_u_plus = mat_mat(A, in.phi_u_plus);
    const double lam_right = (tau - tau_k) / span;
    const double lam_left = (tau_k1 - tau) / span;
    for (int i = 0; i < Aug::state_dim; ++i)
      for (int j = 0; j < Aug::control_dim; ++j) {
        d.phi_u_minus(i, j) += lam_left * B(i, j);
        d.phi_u_plus(i, j) += lam_right * B(i, j);
      }
    return d;
  };

  const double h = span / steps;
  for (int step = 0; step < steps; ++step) {
    const double t0 = tau_k + h * step;
    const double t_end = (step + 1 == steps) ? tau_k1 : t0 + h;
    const auto k1 = deriv(t0, s);
    auto mid = s;
    mid.add_scaled(0.5 * h, k1);
    const auto k2 = deriv(t0 + 0.5 * h, mid);
    mid = s;
    mid.add_scaled(0.5 * h, k2);
    const auto k3 = deriv(t0 + 0.5 * h, mid);
    auto full = s;
    full.add_scaled(h, k3);
    const auto k4 = deriv(t_end, full);
    s.add_scaled(h / 6.0, k1);
    s.add_scaled(h / 3.0, k2);
    s.add_scaled(h / 3.0, k3);
    s.add_scaled(h / 6.0, k4);
    if (!all_finite(s.x)) throw PropagationDiverged(interval_index);
  }

  BlocksOf<Model> blocks;
  blocks.A = s.phi_x;
  blocks.B_minus = s.phi_u_minus;
  blocks.B_plus = s.phi_u_plus;
  blocks.x_end = s.x;
  blocks.w = s.x;
  add_scaled(blocks.w, -1.0, mat_vec(blocks.A, x_k));
  add_scaled(blocks.w, -1.0, mat_vec(blocks.B_minus, u_k));
  add_scaled(blocks.w, -1.0, mat_vec(blocks.B_plus, u_k1));
  return blocks;
}

/// State-only fixed-step RK4 propagation over one interval (no sensitivities,
/// no Jacobian evaluations).
template <class Model>
typename Augmented<Model>::State propagate_state(
    const Model& m, const typename Augmented<Model>::State& x_k,
    const Vec<Augmented<Model>::control_dim>& u_k, const Vec<Augmented<Model>::control_dim>& u_k1,
    double tau_k, double tau_k1, int steps,
    const std::function<void(double, const typename Augmented<Model>::State&)>& on_sample = {}) {
  using Aug = Augmented<Model>;
  if (steps < 1) throw std::invalid_argument("propagate_state: steps must be >= 1");
  auto x = x_k;
  const double h = (tau_k1 - tau_k) / steps;
  if (on_sample) on_sample(tau_k, x);
  auto f = [&](double tau, const typename Aug::State& in) {
    return Aug::dynamics(m, in, foh_interp(u_k, u_k1, tau, tau_k, tau_k1));
  };
  for (int step = 0; step < steps; ++step) {
    const double t0 = tau_k + h * step;
    const double t_end = (step + 1 == steps) ? tau_k1 : t0 + h;
    const auto k1 = f(t0, x);
    auto tmp = x;
    add_scaled(tmp, 0.5 * h, k1);
    const auto k2 = f(t0 + 0.5 * h, tmp);
    tmp = x;
    add_scaled(tmp, 0.5 * h, k2);
    const auto k3 = f(t0 + 0.5 * h, tmp);
    tmp = x;
    add_scaled(tmp, h, k3);
    const auto k4 = f(t_end, tmp);
    add_scaled(x, h / 6.0, k1);
    add_scaled(x, h / 3.0, k2);
    add_scaled(x, h / 3.0, k3);
    add_scaled(x, h / 6.0, k4);
    if (on_sample) on_sample(t_end, x);
  }
  return x;
}

/// Multiple-shooting linearization of every interval about the iterate.
/// Intervals are independent; results do not depend on scheduling.
template <class Model>
std::vector<BlocksOf<Model>> linearize_all(
    const Model& m, const Trajectory<Augmented<Model>::state_dim, Augmented<Model>::control_dim>& z,
    const Grid& grid, int steps, int workers = 1) {
  const int intervals = grid.intervals();
  if (z.nodes() != grid.size())
    throw std::invalid_argument("linearize_all: iterate and grid node counts differ");
  std::vector<BlocksOf<Model>> blocks(static_cast<std::size_t>(intervals));

  auto run_range = [&](int begin, int end) {
    for (int k = begin; k < end; ++k)
      blocks[static_cast<std::size_t>(k)] = propagate_interval(
          m, z.x[static_cast<std::size_t>(k)], z.u[static_cast<std::size_t>(k)],
          z.u[static_cast<std::size_t>(k + 1)], grid.nodes[static_cast<std::size_t>(k)],
          grid.nodes[static_cast<std::size_t>(k + 1)], steps, k);
  };

  if (workers <= 1 || intervals <= 1) {
    run_range(0, intervals);
    return blocks;
  }

  const int pool = std::min(workers, intervals);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(pool));
  const int chunk = (intervals + pool - 1) / pool;
  for (int t = 0; t < pool; ++t) {
    const int begin = t * chunk;
    const int end = std::min(intervals, begin + chunk);
    threads.emplace_back([&, t, begin, end] {
      try {
        run_range(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return blocks;
}

struct AuditSample {
  int interval = 0;
  double tau = 0.0;
  std::vector<double> g;
  double g_max = 0.0;
};

struct AuditResult {
  double max_pointwise_g = 0.0;
  double total_y_increase = 0.0;
  std::vector<double> interval_y_increase;
};

/// Densely re-propagates a trajectory and reports the worst pointwise path
/// constraint value plus the accumulated growth of the violation integrator.
template <class Model>
AuditResult dense_violation_audit(
    const Model& m, const Trajectory<Augmented<Model>::state_dim, Augmented<Model>::control_dim>& z,
    const Grid& grid, int substeps, std::vector<AuditSample>* samples = nullptr) {
  using Aug = Augmented<Model>;
  if (substeps < 1) throw std::invalid_argument("dense_violation_audit: substeps must be >= 1");
  AuditResult result;
  result.max_pointwise_g = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.intervals(); ++k) {
    const auto& u_k = z.u[static_cast<std::size_t>(k)];
    const auto& u_k1 = z.u[static_cast<std::size_t>(k + 1)];
    const double tau_k = grid.nodes[static_cast<std::size_t>(k)];
    const double tau_k1 = grid.nodes[static_cast<std::size_t>(k + 1)];
    auto record = [&](double tau, const typename Aug::State& x) {
      const auto zeta = Aug::model_control(foh_interp(u_k, u_k1, tau, tau_k, tau_k1));
      const auto g = m.path_ineq(Aug::model_state(x), zeta);
      double gmax = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < Model::ineq_dim; ++i) gmax = std::max(gmax, g[i]);
      result.max_pointwise_g = std::max(result.max_pointwise_g, gmax);
      if (samples) {
        AuditSample s;
        s.interval = k;
        s.tau = tau;
        s.g.resize(static_cast<std::size_t>(Model::ineq_dim));
        for (int i = 0; i < Model::ineq_dim; ++i) s.g[static_cast<std::size_t>(i)] = g[i];
        s.g_max = gmax;
        samples->push_back(std::move(s));
      }
    };
    const auto x_end = propagate_state(m, z.x[static_cast<std::size_t>(k)], u_k, u_k1, tau_k,
                                       tau_k1, substeps, record);
    const double dy = x_end[Aug::y_index] - z.x[static_cast<std::size_t>(k)][Aug::y_index];
    result.interval_y_increase.push_back(dy);
    result.total_y_increase += dy;
  }
  return result;
}

}  // namespace ptopt
