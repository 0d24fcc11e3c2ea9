#pragma once

// Small analytic models and random-instance generators shared by the suites.

#include <random>

#include "ptopt/pipg.hpp"
#include "ptopt/rocket6dof.hpp"
#include "ptopt/smallmat.hpp"

namespace tmodels {

using ptopt::Mat;
using ptopt::Vec;

/// F == 0 with one always-satisfied path constraint.
struct ZeroModel {
  static constexpr int state_dim = 2;
  static constexpr int control_dim = 1;
  static constexpr int ineq_dim = 1;
  static constexpr int eq_dim = 0;

  Vec<2> dynamics(const Vec<2>&, const Vec<1>&) const { return Vec<2>(); }
  Vec<1> path_ineq(const Vec<2>&, const Vec<1>&) const {
    Vec<1> g;
    g[0] = -1.0;
    return g;
  }
  void dynamics_jacobians(const Vec<2>&, const Vec<1>&, Mat<2, 2>& A, Mat<2, 1>& B) const {
    A.set_zero();
    B.set_zero();
  }
  void path_ineq_jacobians(const Vec<2>&, const Vec<1>&, Mat<1, 2>& dgx, Mat<1, 1>& dgu) const {
    dgx.set_zero();
    dgu.set_zero();
  }
};

/// xdot = a x + b u, unconstrained.
struct ScalarLti {
  static constexpr int state_dim = 1;
  static constexpr int control_dim = 1;
  static constexpr int ineq_dim = 0;
  static constexpr int eq_dim = 0;
  double a = -1.0;
  double b = 1.0;

  Vec<1> dynamics(const Vec<1>& x, const Vec<1>& u) const {
    Vec<1> f;
    f[0] = a * x[0] + b * u[0];
    return f;
  }
  void dynamics_jacobians(const Vec<1>&, const Vec<1>&, Mat<1, 1>& A, Mat<1, 1>& B) const {
    A(0, 0) = a;
    B(0, 0) = b;
  }
};

/// rdot = v, vdot = u, unconstrained.
struct DoubleIntegrator {
  static constexpr int state_dim = 2;
  static constexpr int control_dim = 1;
  static constexpr int ineq_dim = 0;
  static constexpr int eq_dim = 0;

  Vec<2> dynamics(const Vec<2>& x, const Vec<1>& u) const {
    Vec<2> f;
    f[0] = x[1];
    f[1] = u[0];
    return f;
  }
  void dynamics_jacobians(const Vec<2>&, const Vec<1>&, Mat<2, 2>& A, Mat<2, 1>& B) const {
    A.set_zero();
    A(0, 1) = 1.0;
    B.set_zero();
    B(1, 0) = 1.0;
  }
};

/// Nonlinear model with both inequality and equality path constraints, for
/// exercising the augmentation layer away from the rocket.
struct ToyConstrained {
  static constexpr int state_dim = 2;
  static constexpr int control_dim = 2;
  static constexpr int ineq_dim = 2;
  static constexpr int eq_dim = 1;

  Vec<2> dynamics(const Vec<2>& x, const Vec<2>& u) const {
    Vec<2> f;
    f[0] = -x[0] + 0.5 * x[1] * u[0];
    f[1] = x[0] * x[1] - u[1];
    return f;
  }
  Vec<2> path_ineq(const Vec<2>& x, const Vec<2>& u) const {
    Vec<2> g;
    g[0] = x[0] * x[0] + 0.3 * u[0] - 1.0;
    g[1] = x[1] - 0.25 * u[1] * u[1];
    return g;
  }
  Vec<1> path_eq(const Vec<2>& x, const Vec<2>& u) const {
    Vec<1> h;
    h[0] = 0.5 * x[0] + u[0] * u[1];
    return h;
  }
  void dynamics_jacobians(const Vec<2>& x, const Vec<2>& u, Mat<2, 2>& A, Mat<2, 2>& B) const {
    A(0, 0) = -1.0;
    A(0, 1) = 0.5 * u[0];
    A(1, 0) = x[1];
    A(1, 1) = x[0];
    B(0, 0) = 0.5 * x[1];
    B(0, 1) = 0.0;
    B(1, 0) = 0.0;
    B(1, 1) = -1.0;
  }
  void path_ineq_jacobians(const Vec<2>& x, const Vec<2>& u, Mat<2, 2>& dgx,
                           Mat<2, 2>& dgu) const {
    dgx(0, 0) = 2.0 * x[0];
    dgx(0, 1) = 0.0;
    dgx(1, 0) = 0.0;
    dgx(1, 1) = 1.0;
    dgu(0, 0) = 0.3;
    dgu(0, 1) = 0.0;
    dgu(1, 0) = 0.0;
    dgu(1, 1) = -0.5 * u[1];
  }
  void path_eq_jacobians(const Vec<2>&, const Vec<2>& u, Mat<1, 2>& dhx, Mat<1, 2>& dhu) const {
    dhx(0, 0) = 0.5;
    dhx(0, 1) = 0.0;
    dhu(0, 0) = u[1];
    dhu(0, 1) = u[0];
  }
};

inline ptopt::rocket::VehicleParams test_params() {
  ptopt::rocket::VehicleParams p;
  p.alpha_mdot = 0.05;
  p.g_inertial = {-1.0, 0.0, 0.0};
  p.inertia = Mat<3, 3>(3, 3);
  p.inertia.set_zero();
  p.inertia(0, 0) = 0.1;
  p.inertia(1, 1) = 0.25;
  p.inertia(2, 2) = 0.25;
  p.r_thrust = {-0.5, 0.0, 0.0};
  p.m_dry = 1.0;
  p.v_max = 3.0;
  p.theta_max = 1.0471975511965976;
  p.omega_max = 1.0;
  p.delta_max = 0.3490658503988659;
  p.T_min = 1.0;
  p.T_max = 6.0;
  p.gamma_max = 0.3;
  return p;
}

/// Random vehicle state/control away from constraint kinks and the thrust
/// singularity, for Jacobian checks.
struct RandomRocketPoint {
  ptopt::rocket::VehicleState xi;
  ptopt::rocket::VehicleControl zeta;
};

inline RandomRocketPoint random_rocket_point(std::mt19937_64& rng,
                                             const ptopt::rocket::VehicleParams& p) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    RandomRocketPoint pt;
    pt.xi.m = 1.2 + 0.6 * std::abs(u(rng));
    for (int i = 0; i < 3; ++i) {
      pt.xi.r[i] = 4.0 * u(rng);
      pt.xi.v[i] = 1.5 * u(rng);
      pt.xi.w[i] = 0.6 * u(rng);
    }
    double nq = 0.0;
    for (int i = 0; i < 4; ++i) {
      pt.xi.q[i] = u(rng) + (i == 3 ? 1.5 : 0.0);
      nq += pt.xi.q[i] * pt.xi.q[i];
    }
    nq = std::sqrt(nq);
    for (auto& c : pt.xi.q) c /= nq;
    for (int i = 0; i < 3; ++i) {
      pt.zeta.thrust_body[i] = 1.5 * u(rng) + (i == 0 ? 2.5 : 0.0);
      pt.zeta.torque_body[i] = 0.2 * u(rng);
    }

    const auto Tn = std::sqrt(pt.zeta.thrust_body[0] * pt.zeta.thrust_body[0] +
                              pt.zeta.thrust_body[1] * pt.zeta.thrust_body[1] +
                              pt.zeta.thrust_body[2] * pt.zeta.thrust_body[2]);
    if (Tn < 0.5) continue;
    const ptopt::rocket::Rocket6DoF model(p);
    const auto g = model.eval_constraints(pt.xi, pt.zeta);
    bool near_kink = false;
    for (int i = 0; i < ptopt::rocket::kIneqDim; ++i)
      if (std::abs(g[i]) < 1e-3) near_kink = true;
    if (near_kink) continue;
    return pt;
  }
}

/// Random small scaled subproblem with the structural A_plus = -I and a box
/// on the last control slot only, mirroring the assembled form.
inline ptopt::pipg::Subproblem<4, 3> random_subproblem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nx_d(2, 4), nu_d(1, 3), n_d(2, 5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ptopt::pipg::Subproblem<4, 3> sp;
  const int nx = nx_d(rng), nu = nu_d(rng), n = n_d(rng);
  sp.resize(nx, nu, n);
  sp.w_prox = 0.5 + 2.5 * std::abs(u(rng));
  sp.w_ep = 0.5 + 1.5 * std::abs(u(rng));
  sp.w_cost = std::abs(u(rng));
  for (int k = 0; k < n - 1; ++k) {
    auto& Am = sp.A_minus[static_cast<std::size_t>(k)];
    auto& Ap = sp.A_plus[static_cast<std::size_t>(k)];
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nx; ++j) Am(i, j) = 0.8 * u(rng) + (i == j ? 1.0 : 0.0);
      Ap(i, i) = -1.0;
      for (int j = 0; j < nu; ++j) {
        sp.B_minus[static_cast<std::size_t>(k)](i, j) = 0.5 * u(rng);
        sp.B_plus[static_cast<std::size_t>(k)](i, j) = 0.5 * u(rng);
      }
      sp.w[static_cast<std::size_t>(k)][i] = 0.5 * u(rng);
    }
    sp.eps_relax[static_cast<std::size_t>(k)] = 0.15 + 0.1 * u(rng);
  }
  sp.e_y.set_zero();
  sp.e_y[nx - 1] = 1.0;
  for (int k = 0; k < n; ++k) {
    sp.u_min[static_cast<std::size_t>(k)][nu - 1] = -0.2 - 0.6 * std::abs(u(rng));
    sp.u_max[static_cast<std::size_t>(k)][nu - 1] = 0.2 + 0.6 * std::abs(u(rng));
  }
  for (int i = 0; i < nx; ++i) {
    sp.init_fix_idx.push_back(i);
    sp.init_fix_val.push_back(0.4 * u(rng));
  }
  for (int i = 0; i < nx; ++i)
    if (u(rng) > 0.0) {
      sp.final_fix_idx.push_back(i);
      sp.final_fix_val.push_back(0.4 * u(rng));
    }
  for (int i = 0; i < nx; ++i) sp.e_cost[i] = u(rng);
  return sp;
}

}  // namespace tmodels
