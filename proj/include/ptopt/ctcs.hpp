#pragma once

#include <cmath>
#include <stdexcept>

#include "ptopt/smallmat.hpp"

namespace ptopt {

// A model plugged into the augmentation layer exposes:
//   static constexpr int state_dim, control_dim, ineq_dim, eq_dim;
//   Vec<state_dim>  dynamics(xi, zeta)
//   Vec<ineq_dim>   path_ineq(xi, zeta)
//   Vec<eq_dim>     path_eq(xi, zeta)                    (only if eq_dim > 0)
//   void dynamics_jacobians(xi, zeta, dF_dx, dF_du)
//   void path_ineq_jacobians(xi, zeta, dg_dx, dg_du)
//   void path_eq_jacobians(xi, zeta, dh_dx, dh_du)       (only if eq_dim > 0)

/// Fixed-final-time augmented system: state gains a constraint-violation
/// integrator y, control gains the dilation factor s, and the whole rate is
/// scaled by s. Bounding the per-interval increase of y enforces the path
/// constraints between discretization nodes.
template <class Model>
struct Augmented {
  static constexpr int state_dim = Model::state_dim + 1;
  static constexpr int control_dim = Model::control_dim + 1;
  static constexpr int y_index = Model::state_dim;
  static constexpr int s_index = Model::control_dim;

  using State = Vec<state_dim>;
  using Control = Vec<control_dim>;

  static Vec<Model::state_dim> model_state(const State& x) {
    Vec<Model::state_dim> xi;
    for (int i = 0; i < Model::state_dim; ++i) xi[i] = x[i];
    return xi;
  }

  static Vec<Model::control_dim> model_control(const Control& u) {
    Vec<Model::control_dim> zeta;
    for (int i = 0; i < Model::control_dim; ++i) zeta[i] = u[i];
    return zeta;
  }

  /// Sum of squared clipped inequality violations plus squared equality
  /// residuals (the undilated integrand of y).
  static double violation_integrand(const Model& m, const Vec<Model::state_dim>& xi,
                                    const Vec<Model::control_dim>& zeta) {
    double acc = 0.0;
    if constexpr (Model::ineq_dim > 0) {
      const auto g = m.path_ineq(xi, zeta);
      for (int i = 0; i < Model::ineq_dim; ++i) {
        const double v = g[i] > 0.0 ? g[i] : 0.0;
        acc += v * v;
      }
    }
    if constexpr (Model::eq_dim > 0) {
      const auto h = m.path_eq(xi, zeta);
      for (int i = 0; i < Model::eq_dim; ++i) acc += h[i] * h[i];
    }
    return acc;
  }

  static State dynamics(const Model& m, const State& x, const Control& u) {
    const double s = u[s_index];
    if (!(s > 0.0)) throw std::domain_error("augmented dynamics: dilation factor must be positive");
    const auto xi = model_state(x);
    const auto zeta = model_control(u);
    const auto F = m.dynamics(xi, zeta);
    State dx;
    for (int i = 0; i < Model::state_dim; ++i) dx[i] = s * F[i];
    dx[y_index] = s * violation_integrand(m, xi, zeta);
    return dx;
  }

  /// A = df/dx and B = df/du of the dilated, augmented system. The y-row uses
  /// the one-sided derivative of |g|+^2 (zero at the kink); the s-column is
  /// the undilated rate.
  static void jacobians(const Model& m, const State& x, const Control& u,
                        Mat<state_dim, state_dim>& A, Mat<state_dim, control_dim>& B) {
    const double s = u[s_index];
    if (!(s > 0.0)) throw std::domain_error("augmented jacobians: dilation factor must be positive");
    const auto xi = model_state(x);
    const auto zeta = model_control(u);

    A = Mat<state_dim, state_dim>(state_dim, state_dim);
    B = Mat<state_dim, control_dim>(state_dim, control_dim);
    A.set_zero();
    B.set_zero();

    Mat<Model::state_dim, Model::state_dim> dF_dx;
    Mat<Model::state_dim, Model::control_dim> dF_du;
    m.dynamics_jacobians(xi, zeta, dF_dx, dF_du);
    const auto F = m.dynamics(xi, zeta);

    for (int i = 0; i < Model::state_dim; ++i) {
      for (int j = 0; j < Model::state_dim; ++j) A(i, j) = s * dF_dx(i, j);
      for (int j = 0; j < Model::control_dim; ++j) B(i, j) = s * dF_du(i, j);
      B(i, s_index) = F[i];
    }

    double integrand = 0.0;
    if constexpr (Model::ineq_dim > 0) {
      const auto g = m.path_ineq(xi, zeta);
      Mat<Model::ineq_dim, Model::state_dim> dg_dx;
      Mat<Model::ineq_dim, Model::control_dim> dg_du;
      m.path_ineq_jacobians(xi, zeta, dg_dx, dg_du);
      for (int i = 0; i < Model::ineq_dim; ++i) {
        const double gp = g[i] > 0.0 ? g[i] : 0.0;
        integrand += gp * gp;
        if (gp > 0.0) {
          for (int j = 0; j < Model::state_dim; ++j) A(y_index, j) += 2.0 * s * gp * dg_dx(i, j);
          for (int j = 0; j < Model::control_dim; ++j) B(y_index, j) += 2.0 * s * gp * dg_du(i, j);
        }
      }
    }
    if constexpr (Model::eq_dim > 0) {
      const auto h = m.path_eq(xi, zeta);
      Mat<Model::eq_dim, Model::state_dim> dh_dx;
      Mat<Model::eq_dim, Model::control_dim> dh_du;
      m.path_eq_jacobians(xi, zeta, dh_dx, dh_du);
      for (int i = 0; i < Model::eq_dim; ++i) {
        integrand += h[i] * h[i];
        for (int j = 0; j < Model::state_dim; ++j) A(y_index, j) += 2.0 * s * h[i] * dh_dx(i, j);
        for (int j = 0; j < Model::control_dim; ++j) B(y_index, j) += 2.0 * s * h[i] * dh_du(i, j);
      }
    }
    B(y_index, s_index) = integrand;
  }
};

}  // namespace ptopt
