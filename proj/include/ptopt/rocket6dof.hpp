#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "ptopt/smallmat.hpp"

namespace ptopt::rocket {

// State layout: (m, r, v, q, w) with q scalar-last (x, y, z, w), body-to-inertial.
// The first position/thrust component is the vertical axis.
inline constexpr int kStateDim = 14;
inline constexpr int kControlDim = 6;
inline constexpr int kIneqDim = 9;

inline constexpr int kMass = 0;
inline constexpr int kPos = 1;
inline constexpr int kVel = 4;
inline constexpr int kAtt = 7;
inline constexpr int kRate = 11;
inline constexpr int kThrust = 0;
inline constexpr int kTorque = 3;

struct VehicleState {
  double m = 0.0;
  std::array<double, 3> r{};
  std::array<double, 3> v{};
  std::array<double, 4> q{0.0, 0.0, 0.0, 1.0};
  std::array<double, 3> w{};

  static VehicleState from_vec(const Vec<kStateDim>& x) {
    VehicleState s;
    s.m = x[kMass];
    for (int i = 0; i < 3; ++i) s.r[i] = x[kPos + i];
    for (int i = 0; i < 3; ++i) s.v[i] = x[kVel + i];
    for (int i = 0; i < 4; ++i) s.q[i] = x[kAtt + i];
    for (int i = 0; i < 3; ++i) s.w[i] = x[kRate + i];
    return s;
  }

  Vec<kStateDim> to_vec() const {
    Vec<kStateDim> x;
    x[kMass] = m;
    for (int i = 0; i < 3; ++i) x[kPos + i] = r[i];
    for (int i = 0; i < 3; ++i) x[kVel + i] = v[i];
    for (int i = 0; i < 4; ++i) x[kAtt + i] = q[i];
    for (int i = 0; i < 3; ++i) x[kRate + i] = w[i];
    return x;
  }

  double quat_norm() const {
    return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  }

  void normalize_quat() {
    const double nq = quat_norm();
    if (nq > 0.0)
      for (auto& c : q) c /= nq;
  }
};

/// The rate of change of a VehicleState shares its layout.
using VehicleRate = VehicleState;

struct VehicleControl {
  std::array<double, 3> thrust_body{};
  std::array<double, 3> torque_body{};

  static VehicleControl from_vec(const Vec<kControlDim>& u) {
    VehicleControl c;
    for (int i = 0; i < 3; ++i) c.thrust_body[i] = u[kThrust + i];
    for (int i = 0; i < 3; ++i) c.torque_body[i] = u[kTorque + i];
    return c;
  }

  Vec<kControlDim> to_vec() const {
    Vec<kControlDim> u;
    for (int i = 0; i < 3; ++i) u[kThrust + i] = thrust_body[i];
    for (int i = 0; i < 3; ++i) u[kTorque + i] = torque_body[i];
    return u;
  }
};

struct VehicleParams {
  double alpha_mdot = 0.0;
  std::array<double, 3> g_inertial{};
  Mat<3, 3> inertia;
  std::array<double, 3> r_thrust{};
  Mat<2, 4> H_theta = tilt_selector();

  double m_dry = 0.0;
  double v_max = 0.0;
  double theta_max = 0.0;
  double omega_max = 0.0;
  double delta_max = 0.0;
  double T_min = 0.0;
  double T_max = 0.0;
  double gamma_max = 0.0;

  /// Selects the two quaternion components orthogonal to the vertical axis
  /// (scalar-last layout, vertical = first axis).
  static Mat<2, 4> tilt_selector() {
    Mat<2, 4> H(2, 4);
    H.set_zero();
    H(0, 1) = 1.0;
    H(1, 2) = 1.0;
    return H;
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw std::invalid_argument(std::string("vehicle.") + name + " must be > 0");
    };
    positive(alpha_mdot, "alpha_mdot");
    positive(m_dry, "m_dry");
    positive(v_max, "v_max");
    positive(theta_max, "theta_max");
    positive(omega_max, "omega_max");
    positive(T_min, "T_min");
    positive(T_max, "T_max");
    positive(gamma_max, "gamma_max");
    if (!(T_min < T_max))
      throw std::invalid_argument("vehicle.T_min must be strictly below vehicle.T_max");
    if (!(delta_max > 0.0 && delta_max < 1.5707963267948966))
      throw std::invalid_argument("vehicle.delta_max must lie in (0, pi/2)");
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (std::abs(inertia(i, j) - inertia(j, i)) > 1e-12)
          throw std::invalid_argument("vehicle.inertia must be symmetric");
    // Sylvester's criterion for positive definiteness.
    const double d1 = inertia(0, 0);
    const double d2 = inertia(0, 0) * inertia(1, 1) - inertia(0, 1) * inertia(1, 0);
    const double d3 = det3(inertia);
    if (!(d1 > 0.0 && d2 > 0.0 && d3 > 0.0))
      throw std::invalid_argument("vehicle.inertia must be positive definite");
  }

  static double det3(const Mat<3, 3>& J) {
    return J(0, 0) * (J(1, 1) * J(2, 2) - J(1, 2) * J(2, 1)) -
           J(0, 1) * (J(1, 0) * J(2, 2) - J(1, 2) * J(2, 0)) +
           J(0, 2) * (J(1, 0) * J(2, 1) - J(1, 1) * J(2, 0));
  }
};

struct RocketJacobians {
  Mat<kStateDim, kStateDim> dF_dxi;
  Mat<kStateDim, kControlDim> dF_dzeta;
  Mat<kIneqDim, kStateDim> dg_dxi;
  Mat<kIneqDim, kControlDim> dg_dzeta;
};

namespace detail {

inline std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Mat<3, 3> skew(const std::array<double, 3>& a) {
  Mat<3, 3> S(3, 3);
  S.set_zero();
  S(0, 1) = -a[2];
  S(0, 2) = a[1];
  S(1, 0) = a[2];
  S(1, 2) = -a[0];
  S(2, 0) = -a[1];
  S(2, 1) = a[0];
  return S;
}

inline double norm3(const std::array<double, 3>& a) {
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

/// Body-to-inertial direction cosine matrix for a scalar-last quaternion.
inline Mat<3, 3> dcm(const std::array<double, 4>& q) {
  const double qw = q[3];
  const double s = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
  Mat<3, 3> C(3, 3);
  C.set_zero();
  for (int i = 0; i < 3; ++i) C(i, i) = qw * qw - s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) C(i, j) += 2.0 * q[i] * q[j];
  const Mat<3, 3> K = skew({q[0], q[1], q[2]});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) C(i, j) += 2.0 * qw * K(i, j);
  return C;
}

/// d(C(q) t)/dq as a 3x4 block, scalar-last quaternion.
inline Mat<3, 4> dcm_times_vec_jac(const std::array<double, 4>& q, const std::array<double, 3>& t) {
  const double qw = q[3];
  const std::array<double, 3> qv = {q[0], q[1], q[2]};
  const double qv_dot_t = qv[0] * t[0] + qv[1] * t[1] + qv[2] * t[2];
  Mat<3, 4> D(3, 4);
  D.set_zero();
  const Mat<3, 3> Tk = skew(t);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = -2.0 * t[i] * qv[j] + 2.0 * qv[i] * t[j] - 2.0 * qw * Tk(i, j);
      if (i == j) v += 2.0 * qv_dot_t;
      D(i, j) = v;
    }
  const std::array<double, 3> qv_x_t = cross(qv, t);
  for (int i = 0; i < 3; ++i) D(i, 3) = 2.0 * qw * t[i] + 2.0 * qv_x_t[i];
  return D;
}

/// Explicit inverse of a 3x3 matrix by cofactor expansion.
inline Mat<3, 3> inverse3(const Mat<3, 3>& J) {
  const double det = VehicleParams::det3(J);
  if (det == 0.0) throw std::domain_error("inverse3: singular matrix");
  Mat<3, 3> inv(3, 3);
  inv(0, 0) = (J(1, 1) * J(2, 2) - J(1, 2) * J(2, 1)) / det;
  inv(0, 1) = (J(0, 2) * J(2, 1) - J(0, 1) * J(2, 2)) / det;
  inv(0, 2) = (J(0, 1) * J(1, 2) - J(0, 2) * J(1, 1)) / det;
  inv(1, 0) = (J(1, 2) * J(2, 0) - J(1, 0) * J(2, 2)) / det;
  inv(1, 1) = (J(0, 0) * J(2, 2) - J(0, 2) * J(2, 0)) / det;
  inv(1, 2) = (J(0, 2) * J(1, 0) - J(0, 0) * J(1, 2)) / det;
  inv(2, 0) = (J(1, 0) * J(2, 1) - J(1, 1) * J(2, 0)) / det;
  inv(2, 1) = (J(0, 1) * J(2, 0) - J(0, 0) * J(2, 1)) / det;
  inv(2, 2) = (J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0)) / det;
  return inv;
}

}  // namespace detail

/// 6-DoF powered-descent vehicle: dynamics, path inequality constraints, and
/// their analytic Jacobians. The inertia inverse is computed once per
/// parameter set; no factorizations happen per evaluation.
class Rocket6DoF {
 public:
  static constexpr int state_dim = kStateDim;
  static constexpr int control_dim = kControlDim;
  static constexpr int ineq_dim = kIneqDim;
  static constexpr int eq_dim = 0;

  static constexpr double kThrustSingularTol = 1e-9;

  explicit Rocket6DoF(const VehicleParams& p)
      : p_(p), inertia_inv_(detail::inverse3(p.inertia)) {}

  const VehicleParams& params() const { return p_; }

  VehicleRate eval_dynamics(const VehicleState& xi, const VehicleControl& zeta) const {
    if (!(xi.m > 0.0)) throw std::domain_error("rocket dynamics: nonpositive mass");
    const auto& T = zeta.thrust_body;
    VehicleRate d;
    d.m = -p_.alpha_mdot * detail::norm3(T);
    d.r = xi.v;
    const Mat<3, 3> C = detail::dcm(xi.q);
    for (int i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 3; ++j) acc += C(i, j) * T[j];
      d.v[i] = acc / xi.m + p_.g_inertial[i];
    }
    const std::array<double, 3> qv = {xi.q[0], xi.q[1], xi.q[2]};
    const double qw = xi.q[3];
    const std::array<double, 3> qv_x_w = detail::cross(qv, xi.w);
    for (int i = 0; i < 3; ++i) d.q[i] = 0.5 * (qw * xi.w[i] + qv_x_w[i]);
    d.q[3] = -0.5 * (qv[0] * xi.w[0] + qv[1] * xi.w[1] + qv[2] * xi.w[2]);
    std::array<double, 3> Jw{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) Jw[i] += p_.inertia(i, j) * xi.w[j];
    const std::array<double, 3> lever = detail::cross(p_.r_thrust, T);
    const std::array<double, 3> gyro = detail::cross(xi.w, Jw);
    for (int i = 0; i < 3; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 3; ++j)
        acc += inertia_inv_(i, j) * (lever[j] - gyro[j] + zeta.torque_body[j]);
      d.w[i] = acc;
    }
    return d;
  }

  /// Entries in order: dry mass, altitude, speed, tilt, angular rate,
  /// gimbal cone, thrust upper, thrust lower, torque. Positive = violated.
  Vec<kIneqDim> eval_constraints(const VehicleState& xi, const VehicleControl& zeta) const {
    Vec<kIneqDim> g;
    const auto& T = zeta.thrust_body;
    const double Tn = detail::norm3(T);
    const double sec_delta = 1.0 / std::cos(p_.delta_max);
    g[0] = p_.m_dry - xi.m;
    g[1] = -xi.r[0];
    g[2] = xi.v[0] * xi.v[0] + xi.v[1] * xi.v[1] + xi.v[2] * xi.v[2] - p_.v_max * p_.v_max;
    double hq_sq = 0.0;
    for (int i = 0; i < 2; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 4; ++j) acc += p_.H_theta(i, j) * xi.q[j];
      hq_sq += acc * acc;
    }
    const double c = 1.0 - std::cos(p_.theta_max);
    g[3] = 4.0 * hq_sq - c * c;
    g[4] = xi.w[0] * xi.w[0] + xi.w[1] * xi.w[1] + xi.w[2] * xi.w[2] - p_.omega_max * p_.omega_max;
    g[5] = Tn - T[0] * sec_delta;
    g[6] = Tn - p_.T_max;
    g[7] = -Tn + p_.T_min;
    g[8] = zeta.torque_body[0] * zeta.torque_body[0] + zeta.torque_body[1] * zeta.torque_body[1] +
           zeta.torque_body[2] * zeta.torque_body[2] - p_.gamma_max * p_.gamma_max;
    return g;
  }

  RocketJacobians eval_jacobians(const VehicleState& xi, const VehicleControl& zeta) const {
    const auto& T = zeta.thrust_body;
    const double Tn = detail::norm3(T);
    if (Tn < kThrustSingularTol)
      throw std::domain_error("rocket jacobians: thrust magnitude below singular-point tolerance");
    if (!(xi.m > 0.0)) throw std::domain_error("rocket jacobians: nonpositive mass");

    RocketJacobians J;
    J.dF_dxi = Mat<kStateDim, kStateDim>(kStateDim, kStateDim);
    J.dF_dzeta = Mat<kStateDim, kControlDim>(kStateDim, kControlDim);
    J.dg_dxi = Mat<kIneqDim, kStateDim>(kIneqDim, kStateDim);
    J.dg_dzeta = Mat<kIneqDim, kControlDim>(kIneqDim, kControlDim);
    J.dF_dxi.set_zero();
    J.dF_dzeta.set_zero();
    J.dg_dxi.set_zero();
    J.dg_dzeta.set_zero();

    const Mat<3, 3> C = detail::dcm(xi.q);
    std::array<double, 3> CT{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CT[i] += C(i, j) * T[j];

    // dr/dv
    for (int i = 0; i < 3; ++i) J.dF_dxi(kPos + i, kVel + i) = 1.0;

    // dv/dm, dv/dq, dv/dT
    for (int i = 0; i < 3; ++i) J.dF_dxi(kVel + i, kMass) = -CT[i] / (xi.m * xi.m);
    const Mat<3, 4> dCTdq = detail::dcm_times_vec_jac(xi.q, T);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) J.dF_dxi(kVel + i, kAtt + j) = dCTdq(i, j) / xi.m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) J.dF_dzeta(kVel + i, kThrust + j) = C(i, j) / xi.m;

    // dq/dq = 0.5 * Omega(w), dq/dw
    const std::array<double, 3> qv = {xi.q[0], xi.q[1], xi.q[2]};
    const double qw = xi.q[3];
    const Mat<3, 3> Wk = detail::skew(xi.w);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) J.dF_dxi(kAtt + i, kAtt + j) = -0.5 * Wk(i, j);
      J.dF_dxi(kAtt + i, kAtt + 3) = 0.5 * xi.w[i];
      J.dF_dxi(kAtt + 3, kAtt + i) = -0.5 * xi.w[i];
    }
    const Mat<3, 3> Qk = detail::skew(qv);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j)
        J.dF_dxi(kAtt + i, kRate + j) = 0.5 * ((i == j ? qw : 0.0) + Qk(i, j));
      J.dF_dxi(kAtt + 3, kRate + i) = -0.5 * qv[i];
    }

    // dw/dw = Jinv * ([Jw]x - [w]x J), dw/dT = Jinv [r_T]x, dw/dgamma = Jinv
    std::array<double, 3> Jw{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) Jw[i] += p_.inertia(i, j) * xi.w[j];
    const Mat<3, 3> JWk = detail::skew(Jw);
    Mat<3, 3> M(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = JWk(i, j);
        for (int k = 0; k < 3; ++k) acc -= Wk(i, k) * p_.inertia(k, j);
        M(i, j) = acc;
      }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += inertia_inv_(i, k) * M(k, j);
        J.dF_dxi(kRate + i, kRate + j) = acc;
      }
    const Mat<3, 3> Rk = detail::skew(p_.r_thrust);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += inertia_inv_(i, k) * Rk(k, j);
        J.dF_dzeta(kRate + i, kThrust + j) = acc;
        J.dF_dzeta(kRate + i, kTorque + j) = inertia_inv_(i, j);
      }

    // dm/dT
    for (int j = 0; j < 3; ++j) J.dF_dzeta(kMass, kThrust + j) = -p_.alpha_mdot * T[j] / Tn;

    // Constraint rows.
    J.dg_dxi(0, kMass) = -1.0;
    J.dg_dxi(1, kPos) = -1.0;
    for (int j = 0; j < 3; ++j) J.dg_dxi(2, kVel + j) = 2.0 * xi.v[j];
    std::array<double, 2> Hq{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) Hq[i] += p_.H_theta(i, j) * xi.q[j];
    for (int j = 0; j < 4; ++j)
      J.dg_dxi(3, kAtt + j) = 8.0 * (Hq[0] * p_.H_theta(0, j) + Hq[1] * p_.H_theta(1, j));
    for (int j = 0; j < 3; ++j) J.dg_dxi(4, kRate + j) = 2.0 * xi.w[j];

    const double sec_delta = 1.0 / std::cos(p_.delta_max);
    for (int j = 0; j < 3; ++j) {
      const double that = T[j] / Tn;
      J.dg_dzeta(5, kThrust + j) = that - (j == 0 ? sec_delta : 0.0);
      J.dg_dzeta(6, kThrust + j) = that;
      J.dg_dzeta(7, kThrust + j) = -that;
      J.dg_dzeta(8, kTorque + j) = 2.0 * zeta.torque_body[j];
    }
    return J;
  }

  // Flat hooks used by the constraint-augmentation and discretization layers.
  Vec<state_dim> dynamics(const Vec<state_dim>& xi, const Vec<control_dim>& zeta) const {
    return eval_dynamics(VehicleState::from_vec(xi), VehicleControl::from_vec(zeta)).to_vec();
  }

  Vec<ineq_dim> path_ineq(const Vec<state_dim>& xi, const Vec<control_dim>& zeta) const {
    return eval_constraints(VehicleState::from_vec(xi), VehicleControl::from_vec(zeta));
  }

  void dynamics_jacobians(const Vec<state_dim>& xi, const Vec<control_dim>& zeta,
                          Mat<state_dim, state_dim>& dF_dx,
                          Mat<state_dim, control_dim>& dF_du) const {
    const RocketJacobians J =
        eval_jacobians(VehicleState::from_vec(xi), VehicleControl::from_vec(zeta));
    dF_dx = J.dF_dxi;
    dF_du = J.dF_dzeta;
  }

  void path_ineq_jacobians(const Vec<state_dim>& xi, const Vec<control_dim>& zeta,
                           Mat<ineq_dim, state_dim>& dg_dx,
                           Mat<ineq_dim, control_dim>& dg_du) const {
    const RocketJacobians J =
        eval_jacobians(VehicleState::from_vec(xi), VehicleControl::from_vec(zeta));
    dg_dx = J.dg_dxi;
    dg_du = J.dg_dzeta;
  }

 private:
  VehicleParams p_;
  Mat<3, 3> inertia_inv_;
};

}  // namespace ptopt::rocket
