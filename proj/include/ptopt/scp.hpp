#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ptopt/ctcs.hpp"
#include "ptopt/discretizer.hpp"
#include "ptopt/pipg.hpp"
#include "ptopt/smallmat.hpp"
#include "ptopt/trajectory.hpp"

namespace ptopt {

struct ScpWeights {
  double w_cost = 1.0;
  double w_prox = 1.0;
  double w_ep = 100.0;        // exact-penalty weight on linearized defects
  double epsilon_relax = 1e-4;  // per-interval bound on the violation integrator

  void validate() const {
    if (!(w_cost >= 0.0)) throw std::invalid_argument("scp.w_cost must be >= 0");
    if (!(w_prox > 0.0)) throw std::invalid_argument("scp.w_prox must be > 0");
    if (!(w_ep > 0.0)) throw std::invalid_argument("scp.w_ep must be > 0");
    if (!(epsilon_relax > 0.0)) throw std::invalid_argument("scp.epsilon_relax must be > 0");
  }
};

/// Diagonal variable scaling with exactly representable reciprocals: entries
/// are rounded to powers of two so that scale/unscale round-trips are exact.
template <int NX, int NU>
struct ScalingPair {
  Vec<NX> px, px_inv;
  Vec<NU> pu, pu_inv;

  static double pow2_near(double v) {
    if (!(v > 0.0)) throw std::invalid_argument("scaling ranges must be positive");
    return std::exp2(std::round(std::log2(v)));
  }

  static ScalingPair from_ranges(const Vec<NX>& x_ranges, const Vec<NU>& u_ranges) {
    ScalingPair s;
    s.px = Vec<NX>(x_ranges.n);
    s.px_inv = Vec<NX>(x_ranges.n);
    s.pu = Vec<NU>(u_ranges.n);
    s.pu_inv = Vec<NU>(u_ranges.n);
    for (int i = 0; i < x_ranges.n; ++i) {
      s.px[i] = pow2_near(x_ranges[i]);
      s.px_inv[i] = 1.0 / s.px[i];
    }
    for (int i = 0; i < u_ranges.n; ++i) {
      s.pu[i] = pow2_near(u_ranges[i]);
      s.pu_inv[i] = 1.0 / s.pu[i];
    }
    return s;
  }

  static ScalingPair identity(int nx, int nu) {
    Vec<NX> xr(nx);
    Vec<NU> ur(nu);
    for (int i = 0; i < nx; ++i) xr[i] = 1.0;
    for (int i = 0; i < nu; ++i) ur[i] = 1.0;
    return from_ranges(xr, ur);
  }
};

/// Everything one SCP solve needs: the model, grid, boundary data, weights,
/// scaling, and solver settings. The final-state selector lists model-state
/// indices that are pinned at the last node.
template <class Model>
struct ScpProblem {
  using Aug = Augmented<Model>;
  static constexpr int NX = Aug::state_dim;
  static constexpr int NU = Aug::control_dim;

  Model model;
  Grid grid = Grid::uniform(2);
  int integrator_steps = 16;
  int linearize_workers = 1;

  Vec<Model::state_dim> init_state;
  std::vector<int> final_fix_idx;
  std::vector<double> final_fix_val;

  Vec<NX> e_cost;  // terminal cost direction in the augmented layout
  double s_min = 0.1;
  double s_max = 10.0;
  double t_f_guess = 1.0;

  ScpWeights weights;
  ScalingPair<NX, NU> scaling = ScalingPair<NX, NU>::identity(NX, NU);
  pipg::PipgConfig pipg_cfg;
  int power_j_max = 10000;
  double power_eps_abs = 1e-12;
  double power_eps_rel = 1e-12;

  double tol_feas = 1e-6;  // scaled defect infinity norm
  double tol_step = 1e-5;  // scaled step infinity norm
  int max_iters = 25;
  std::uint64_t rng_seed = 0;

  // Optional fixup applied to each state after an accepted update
  // (quaternion renormalization for the rocket model).
  std::function<void(Vec<NX>&)> state_post_update;

  explicit ScpProblem(Model m) : model(std::move(m)) {}

  void validate() const {
    weights.validate();
    pipg_cfg.validate();
    if (!(s_min > 0.0) || !(s_min <= s_max))
      throw std::invalid_argument("scp: need 0 < s_min <= s_max");
    if (max_iters < 1) throw std::invalid_argument("scp.max_iters must be >= 1");
    if (integrator_steps < 1) throw std::invalid_argument("grid.integrator_substeps must be >= 1");
    if (final_fix_idx.size() != final_fix_val.size())
      throw std::invalid_argument("scp: final boundary index/value size mismatch");
  }
};

/// Exact-penalty objective of an iterate: terminal cost plus the weighted
/// l1-norm of the multiple-shooting defects.
template <class Model>
double penalized_cost(const ScpProblem<Model>& pb,
                      const Trajectory<ScpProblem<Model>::NX, ScpProblem<Model>::NU>& z) {
  const auto blocks = linearize_all(pb.model, z, pb.grid, pb.integrator_steps);
  double penalty = 0.0;
  for (int k = 0; k < pb.grid.intervals(); ++k) {
    const auto& xe = blocks[static_cast<std::size_t>(k)].x_end;
    const auto& xn = z.x[static_cast<std::size_t>(k + 1)];
    for (int i = 0; i < xe.n; ++i) penalty += std::abs(xe[i] - xn[i]);
  }
  return pb.weights.w_cost * dot(z.x.back(), pb.e_cost) + pb.weights.w_ep * penalty;
}

/// Builds the scaled subproblem about the iterate from its linearization.
template <class Model>
pipg::Subproblem<ScpProblem<Model>::NX, ScpProblem<Model>::NU> assemble_subproblem(
    const ScpProblem<Model>& pb,
    const Trajectory<ScpProblem<Model>::NX, ScpProblem<Model>::NU>& zbar,
    const std::vector<BlocksOf<Model>>& blocks) {
  using Aug = typename ScpProblem<Model>::Aug;
  constexpr int NX = ScpProblem<Model>::NX;
  constexpr int NU = ScpProblem<Model>::NU;
  const int n = pb.grid.size();
  if (static_cast<int>(blocks.size()) != n - 1)
    throw std::invalid_argument("assemble_subproblem: block count mismatch");

  const auto& px = pb.scaling.px;
  const auto& px_inv = pb.scaling.px_inv;
  const auto& pu = pb.scaling.pu;
  const auto& pu_inv = pb.scaling.pu_inv;
  for (int i = 0; i < NX; ++i)
    if (!(px[i] > 0.0)) throw std::invalid_argument("assemble_subproblem: nonpositive state scale");
  for (int i = 0; i < NU; ++i)
    if (!(pu[i] > 0.0)) throw std::invalid_argument("assemble_subproblem: nonpositive control scale");

  pipg::Subproblem<NX, NU> sp;
  sp.resize(NX, NU, n);
  sp.w_cost = pb.weights.w_cost;
  sp.w_prox = pb.weights.w_prox;
  sp.w_ep = pb.weights.w_ep;

  for (int k = 0; k < n - 1; ++k) {
    const auto& bl = blocks[static_cast<std::size_t>(k)];
    auto& Am = sp.A_minus[static_cast<std::size_t>(k)];
    auto& Ap = sp.A_plus[static_cast<std::size_t>(k)];
    auto& Bm = sp.B_minus[static_cast<std::size_t>(k)];
    auto& Bp = sp.B_plus[static_cast<std::size_t>(k)];
    for (int i = 0; i < NX; ++i) {
      for (int j = 0; j < NX; ++j) Am(i, j) = px_inv[i] * bl.A(i, j) * px[j];
      for (int j = 0; j < NU; ++j) {
        Bm(i, j) = px_inv[i] * bl.B_minus(i, j) * pu[j];
        Bp(i, j) = px_inv[i] * bl.B_plus(i, j) * pu[j];
      }
    }
    Ap.set_zero();
    for (int i = 0; i < NX; ++i) Ap(i, i) = -1.0;

    auto& w = sp.w[static_cast<std::size_t>(k)];
    for (int i = 0; i < NX; ++i)
      w[i] = px_inv[i] * (bl.x_end[i] - zbar.x[static_cast<std::size_t>(k + 1)][i]);

    const double dy = zbar.x[static_cast<std::size_t>(k + 1)][Aug::y_index] -
                      zbar.x[static_cast<std::size_t>(k)][Aug::y_index];
    sp.eps_relax[static_cast<std::size_t>(k)] =
        pb.weights.epsilon_relax * px_inv[Aug::y_index] - px_inv[Aug::y_index] * dy;
  }

  sp.e_y.set_zero();
  sp.e_y[Aug::y_index] = 1.0;

  // Control box: imposed on the dilation factor only.
  for (int k = 0; k < n; ++k) {
    const double s_bar = zbar.u[static_cast<std::size_t>(k)][Aug::s_index];
    sp.u_min[static_cast<std::size_t>(k)][Aug::s_index] = pu_inv[Aug::s_index] * (pb.s_min - s_bar);
    sp.u_max[static_cast<std::size_t>(k)][Aug::s_index] = pu_inv[Aug::s_index] * (pb.s_max - s_bar);
  }

  // Boundary rows: full augmented initial state (y starts at zero), selected
  // model-state components at the final node.
  for (int i = 0; i < NX; ++i) {
    const double target = i < Model::state_dim ? pb.init_state[i] : 0.0;
    sp.init_fix_idx.push_back(i);
    sp.init_fix_val.push_back(px_inv[i] * (target - zbar.x.front()[i]));
  }
  for (std::size_t i = 0; i < pb.final_fix_idx.size(); ++i) {
    const int idx = pb.final_fix_idx[i];
    sp.final_fix_idx.push_back(idx);
    sp.final_fix_val.push_back(px_inv[idx] * (pb.final_fix_val[i] - zbar.x.back()[idx]));
  }

  for (int i = 0; i < NX; ++i) sp.e_cost[i] = px[i] * pb.e_cost[i];
  return sp;
}

template <int NX, int NU>
struct ScpHistoryEntry {
  double defect_inf = 0.0;
  double step_inf = 0.0;
  double penalized_cost = 0.0;
  int pipg_iterations = 0;
  double sigma = 0.0;
};

template <class Model>
struct ScpResult {
  Trajectory<ScpProblem<Model>::NX, ScpProblem<Model>::NU> iterate;
  int iterations = 0;
  bool converged = false;
  double final_defect_inf = std::numeric_limits<double>::infinity();
  std::vector<ScpHistoryEntry<ScpProblem<Model>::NX, ScpProblem<Model>::NU>> history;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Prox-linear SCP: linearize, assemble the scaled subproblem, solve it with
/// the customized first-order method (warm started), unscale, repeat.
/// Non-convergence within the iteration budget is reported, not thrown.
template <class Model>
ScpResult<Model> scp_solve(const ScpProblem<Model>& pb,
                           const Trajectory<ScpProblem<Model>::NX, ScpProblem<Model>::NU>& guess) {
  using Aug = typename ScpProblem<Model>::Aug;
  constexpr int NX = ScpProblem<Model>::NX;
  constexpr int NU = ScpProblem<Model>::NU;
  pb.validate();
  const int n = pb.grid.size();
  if (guess.nodes() != n) throw std::invalid_argument("scp_solve: guess does not match grid");

  ScpResult<Model> result;
  auto z = guess;
  z.iteration = 0;

  pipg::Workspace<NX, NU> ws;
  ws.init(NX, NU, n);

  double last_step = std::numeric_limits<double>::infinity();
  int solves = 0;

  for (;;) {
    const auto blocks =
        linearize_all(pb.model, z, pb.grid, pb.integrator_steps, pb.linearize_workers);

    double defect_inf = 0.0;
    double defect_l1 = 0.0;
    for (int k = 0; k < n - 1; ++k) {
      const auto& xe = blocks[static_cast<std::size_t>(k)].x_end;
      const auto& xn = z.x[static_cast<std::size_t>(k + 1)];
      for (int i = 0; i < NX; ++i) {
        defect_inf = std::max(defect_inf, pb.scaling.px_inv[i] * std::abs(xe[i] - xn[i]));
        defect_l1 += std::abs(xe[i] - xn[i]);
      }
    }
    result.final_defect_inf = defect_inf;
    const double iterate_cost =
        pb.weights.w_cost * dot(z.x.back(), pb.e_cost) + pb.weights.w_ep * defect_l1;

    if (defect_inf <= pb.tol_feas && last_step <= pb.tol_step) {
      result.converged = true;
      break;
    }
    if (solves == pb.max_iters) break;

    auto sp = assemble_subproblem(pb, z, blocks);

    double sigma;
    if (ws.primal_all_zero()) {
      // Deterministic pseudo-random unit seed derived from the run seed.
      auto seed_x = ws.x;
      auto seed_u = ws.u;
      std::uint64_t state = pb.rng_seed ^ 0x5bf03635d78b41adull;
      double norm_sq = 0.0;
      for (auto& vk : seed_x)
        for (int i = 0; i < vk.n; ++i) {
          vk[i] = 2.0 * detail::unit_interval(detail::splitmix64(state)) - 1.0;
          norm_sq += vk[i] * vk[i];
        }
      for (auto& vk : seed_u)
        for (int i = 0; i < vk.n; ++i) {
          vk[i] = 2.0 * detail::unit_interval(detail::splitmix64(state)) - 1.0;
          norm_sq += vk[i] * vk[i];
        }
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (auto& vk : seed_x) scale(vk, inv);
      for (auto& vk : seed_u) scale(vk, inv);
      sigma = pipg::power_iteration_custom(sp, seed_x, seed_u, ws.vc_pos, ws.vc_neg,
                                           pb.power_eps_abs, pb.power_eps_rel,
                                           pb.pipg_cfg.eps_buff, pb.power_j_max);
    } else {
      sigma = pipg::power_iteration_custom(sp, ws.x, ws.u, ws.vc_pos, ws.vc_neg,
                                           pb.power_eps_abs, pb.power_eps_rel,
                                           pb.pipg_cfg.eps_buff, pb.power_j_max);
    }
    ws.sigma = sigma;

    const auto pr = pipg::pipg_custom(sp, pb.pipg_cfg, ws);

    double step = 0.0;
    for (int k = 0; k < n; ++k) {
      step = std::max(step, inf_norm(ws.x[static_cast<std::size_t>(k)]));
      step = std::max(step, inf_norm(ws.u[static_cast<std::size_t>(k)]));
    }

    for (int k = 0; k < n; ++k) {
      auto& xk = z.x[static_cast<std::size_t>(k)];
      auto& uk = z.u[static_cast<std::size_t>(k)];
      for (int i = 0; i < NX; ++i)
        xk[i] += pb.scaling.px[i] * ws.x[static_cast<std::size_t>(k)][i];
      for (int i = 0; i < NU; ++i)
        uk[i] += pb.scaling.pu[i] * ws.u[static_cast<std::size_t>(k)][i];
      if (pb.state_post_update) pb.state_post_update(xk);
    }
    z.iteration = ++solves;
    last_step = step;

    ScpHistoryEntry<NX, NU> entry;
    entry.defect_inf = defect_inf;
    entry.step_inf = step;
    entry.penalized_cost = iterate_cost;
    entry.pipg_iterations = pr.iterations;
    entry.sigma = sigma;
    result.history.push_back(entry);
  }

  result.iterate = z;
  result.iterations = solves;
  return result;
}

}  // namespace ptopt
