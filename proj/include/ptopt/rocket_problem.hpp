#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "ptopt/ctcs.hpp"
#include "ptopt/rocket6dof.hpp"
#include "ptopt/scp.hpp"
#include "ptopt/trajectory.hpp"

namespace ptopt {

using RocketAug = Augmented<rocket::Rocket6DoF>;
using RocketProblem = ScpProblem<rocket::Rocket6DoF>;
using RocketTrajectory = Trajectory<RocketAug::state_dim, RocketAug::control_dim>;

/// Per-quantity spans used to build the diagonal scaling; each span is
/// rounded to the nearest power of two.
struct ScalingRanges {
  double mass = 1.0;
  double position = 1.0;
  double velocity = 1.0;
  double quaternion = 1.0;
  double omega = 1.0;
  double y = 1.0;
  double thrust = 1.0;
  double torque = 1.0;
  double dilation = 1.0;
};

inline ScalingPair<RocketAug::state_dim, RocketAug::control_dim> rocket_scaling(
    const ScalingRanges& r) {
  Vec<RocketAug::state_dim> xr;
  Vec<RocketAug::control_dim> ur;
  xr[rocket::kMass] = r.mass;
  for (int i = 0; i < 3; ++i) xr[rocket::kPos + i] = r.position;
  for (int i = 0; i < 3; ++i) xr[rocket::kVel + i] = r.velocity;
  for (int i = 0; i < 4; ++i) xr[rocket::kAtt + i] = r.quaternion;
  for (int i = 0; i < 3; ++i) xr[rocket::kRate + i] = r.omega;
  xr[RocketAug::y_index] = r.y;
  for (int i = 0; i < 3; ++i) ur[rocket::kThrust + i] = r.thrust;
  for (int i = 0; i < 3; ++i) ur[rocket::kTorque + i] = r.torque;
  ur[RocketAug::s_index] = r.dilation;
  return ScalingPair<RocketAug::state_dim, RocketAug::control_dim>::from_ranges(xr, ur);
}

/// Terminal boundary conditions: position, velocity, attitude, and angular
/// rate are pinned; mass and the violation integrator stay free.
struct RocketBoundary {
  rocket::VehicleState initial;
  std::array<double, 3> r_final{};
  std::array<double, 3> v_final{};
  std::array<double, 4> q_final{0.0, 0.0, 0.0, 1.0};
  std::array<double, 3> w_final{};
};

inline RocketProblem make_rocket_problem(const rocket::VehicleParams& params,
                                         const RocketBoundary& bc, const Grid& grid) {
  RocketProblem pb{rocket::Rocket6DoF(params)};
  pb.grid = grid;
  pb.init_state = bc.initial.to_vec();

  for (int i = 0; i < 3; ++i) {
    pb.final_fix_idx.push_back(rocket::kPos + i);
    pb.final_fix_val.push_back(bc.r_final[i]);
  }
  for (int i = 0; i < 3; ++i) {
    pb.final_fix_idx.push_back(rocket::kVel + i);
    pb.final_fix_val.push_back(bc.v_final[i]);
  }
  for (int i = 0; i < 4; ++i) {
    pb.final_fix_idx.push_back(rocket::kAtt + i);
    pb.final_fix_val.push_back(bc.q_final[i]);
  }
  for (int i = 0; i < 3; ++i) {
    pb.final_fix_idx.push_back(rocket::kRate + i);
    pb.final_fix_val.push_back(bc.w_final[i]);
  }

  // Maximize terminal mass.
  pb.e_cost.set_zero();
  pb.e_cost[rocket::kMass] = -1.0;

  pb.state_post_update = [](Vec<RocketAug::state_dim>& x) {
    double nq = 0.0;
    for (int i = 0; i < 4; ++i) nq += x[rocket::kAtt + i] * x[rocket::kAtt + i];
    nq = std::sqrt(nq);
    if (nq > 0.0)
      for (int i = 0; i < 4; ++i) x[rocket::kAtt + i] /= nq;
  };
  return pb;
}

namespace detail {

inline std::array<double, 4> slerp(const std::array<double, 4>& qa, std::array<double, 4> qb,
                                   double t) {
  double d = qa[0] * qb[0] + qa[1] * qb[1] + qa[2] * qb[2] + qa[3] * qb[3];
  if (d < 0.0) {
    for (auto& c : qb) c = -c;
    d = -d;
  }
  std::array<double, 4> q{};
  if (d > 1.0 - 1e-10) {
    for (int i = 0; i < 4; ++i) q[i] = (1.0 - t) * qa[i] + t * qb[i];
  } else {
    const double ang = std::acos(std::min(1.0, d));
    const double sa = std::sin(ang);
    const double ca = std::sin((1.0 - t) * ang) / sa;
    const double cb = std::sin(t * ang) / sa;
    for (int i = 0; i < 4; ++i) q[i] = ca * qa[i] + cb * qb[i];
  }
  double nq = 0.0;
  for (double c : q) nq += c * c;
  nq = std::sqrt(nq);
  for (auto& c : q) c /= nq;
  return q;
}

}  // namespace detail

/// Straight-line state interpolation with a gravity-cancelling thrust
/// profile. The thrust is nonzero at every node, keeping the model away from
/// its Jacobian singularity.
inline RocketTrajectory initial_guess(const RocketProblem& pb, const RocketBoundary& bc) {
  const int n = pb.grid.size();
  RocketTrajectory z(n);
  const auto& p = pb.model.params();
  const double g_norm = std::sqrt(p.g_inertial[0] * p.g_inertial[0] +
                                  p.g_inertial[1] * p.g_inertial[1] +
                                  p.g_inertial[2] * p.g_inertial[2]);

  // Hover-like burn estimate keeps the mass profile between wet and dry.
  const double m_end =
      std::max(p.m_dry, bc.initial.m * std::exp(-p.alpha_mdot * g_norm * pb.t_f_guess));

  for (int k = 0; k < n; ++k) {
    const double t = pb.grid.nodes[static_cast<std::size_t>(k)];
    rocket::VehicleState s;
    s.m = (1.0 - t) * bc.initial.m + t * m_end;
    for (int i = 0; i < 3; ++i) {
      s.r[i] = (1.0 - t) * bc.initial.r[i] + t * bc.r_final[i];
      s.v[i] = (1.0 - t) * bc.initial.v[i] + t * bc.v_final[i];
      s.w[i] = (1.0 - t) * bc.initial.w[i] + t * bc.w_final[i];
    }
    s.q = detail::slerp(bc.initial.q, bc.q_final, t);

    auto& x = z.x[static_cast<std::size_t>(k)];
    const auto xv = s.to_vec();
    for (int i = 0; i < rocket::kStateDim; ++i) x[i] = xv[i];
    x[RocketAug::y_index] = 0.0;

    auto& u = z.u[static_cast<std::size_t>(k)];
    for (int i = 0; i < 3; ++i) {
      u[rocket::kThrust + i] = -s.m * p.g_inertial[i];
      u[rocket::kTorque + i] = 0.0;
    }
    u[RocketAug::s_index] = pb.t_f_guess;
  }
  return z;
}

/// Trapezoidal physical time at each node from the dilation profile.
inline std::vector<double> node_times(const RocketTrajectory& z, const Grid& grid) {
  std::vector<double> t(static_cast<std::size_t>(grid.size()), 0.0);
  for (int k = 1; k < grid.size(); ++k) {
    const double dt = grid.nodes[static_cast<std::size_t>(k)] -
                      grid.nodes[static_cast<std::size_t>(k - 1)];
    const double s0 = z.u[static_cast<std::size_t>(k - 1)][RocketAug::s_index];
    const double s1 = z.u[static_cast<std::size_t>(k)][RocketAug::s_index];
    t[static_cast<std::size_t>(k)] = t[static_cast<std::size_t>(k - 1)] + 0.5 * (s0 + s1) * dt;
  }
  return t;
}

}  // namespace ptopt
