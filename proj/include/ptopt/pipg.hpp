#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ptopt/smallmat.hpp"

namespace ptopt::pipg {

struct SolverDiverged : std::runtime_error {
  int iteration;
  explicit SolverDiverged(int j)
      : std::runtime_error("pipg diverged at iteration " + std::to_string(j)), iteration(j) {}
};

struct PipgConfig {
  double omega = 100.0;     // dual/primal step-size ratio
  double rho = 1.6;         // extrapolation, [1.5, 1.9]
  int j_max = 2500;         // iteration cap per subproblem
  int j_check = 25;         // stopping-check period
  double eps_abs = 1e-11;
  double eps_rel = 1e-11;
  double eps_buff = 0.05;   // spectral-estimate buffer fraction

  void validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("pipg.omega must be > 0");
    if (!(rho > 0.0 && rho < 2.0)) throw std::invalid_argument("pipg.rho must lie in (0, 2)");
    if (j_check < 1) throw std::invalid_argument("pipg.j_check must be >= 1");
    if (j_max < 1) throw std::invalid_argument("pipg.j_max must be >= 1");
    if (!(eps_buff >= 0.0)) throw std::invalid_argument("pipg.eps_buff must be >= 0");
  }
};

/// Scaled convex subproblem in the node-wise form consumed by the customized
/// solver. A_plus is -I whenever the subproblem comes from the SCP assembly;
/// it is stored explicitly so small synthetic instances can vary it.
template <int NX, int NU>
struct Subproblem {
  int n_x = 0;
  int n_u = 0;
  int nodes = 0;

  std::vector<Mat<NX, NX>> A_minus, A_plus;
  std::vector<Mat<NX, NU>> B_minus, B_plus;
  std::vector<Vec<NX>> w;
  std::vector<double> eps_relax;
  Vec<NX> e_y;

  std::vector<Vec<NU>> u_min, u_max;

  std::vector<int> init_fix_idx;
  std::vector<double> init_fix_val;
  std::vector<int> final_fix_idx;
  std::vector<double> final_fix_val;

  Vec<NX> e_cost;
  double w_cost = 0.0;
  double w_prox = 0.0;
  double w_ep = 0.0;

  int intervals() const { return nodes - 1; }

  void resize(int nx, int nu, int n) {
    if (nx < 1 || nx > NX || nu < 1 || nu > NU || n < 2)
      throw std::invalid_argument("subproblem: bad dimensions");
    n_x = nx;
    n_u = nu;
    nodes = n;
    const auto m = static_cast<std::size_t>(n - 1);
    A_minus.assign(m, Mat<NX, NX>(nx, nx));
    A_plus.assign(m, Mat<NX, NX>(nx, nx));
    B_minus.assign(m, Mat<NX, NU>(nx, nu));
    B_plus.assign(m, Mat<NX, NU>(nx, nu));
    w.assign(m, Vec<NX>(nx));
    eps_relax.assign(m, 0.0);
    e_y = Vec<NX>(nx);
    const double inf = std::numeric_limits<double>::infinity();
    u_min.assign(static_cast<std::size_t>(n), Vec<NU>(nu));
    u_max.assign(static_cast<std::size_t>(n), Vec<NU>(nu));
    for (auto& b : u_min)
      for (int i = 0; i < nu; ++i) b[i] = -inf;
    for (auto& b : u_max)
      for (int i = 0; i < nu; ++i) b[i] = inf;
    init_fix_idx.clear();
    init_fix_val.clear();
    final_fix_idx.clear();
    final_fix_val.clear();
    e_cost = Vec<NX>(nx);
  }
};

/// Primal-dual state persisted across SCP iterations for warm starting,
/// plus the iteration buffers of the solver. All storage is sized once.
template <int NX, int NU>
struct Workspace {
  int n_x = 0;
  int n_u = 0;
  int nodes = 0;
  double sigma = 0.0;

  // Warm-start / solution buffers.
  std::vector<Vec<NX>> x;
  std::vector<Vec<NU>> u;
  std::vector<Vec<NX>> vc_pos, vc_neg;
  std::vector<Vec<NX>> dyn_dual;
  std::vector<double> relax_dual;

  // Iteration buffers: current, previous, extrapolated.
  std::vector<Vec<NX>> x_cur, x_prev, x_ex;
  std::vector<Vec<NU>> u_cur, u_prev, u_ex;
  std::vector<Vec<NX>> vcp_cur, vcp_prev, vcp_ex;
  std::vector<Vec<NX>> vcn_cur, vcn_prev, vcn_ex;
  std::vector<Vec<NX>> phi_cur, phi_prev, phi_ex;
  std::vector<double> th_cur, th_prev, th_ex;

  void init(int nx, int nu, int n) {
    n_x = nx;
    n_u = nu;
    nodes = n;
    sigma = 0.0;
    const auto nn = static_cast<std::size_t>(n);
    const auto m = static_cast<std::size_t>(n - 1);
    x.assign(nn, Vec<NX>(nx));
    u.assign(nn, Vec<NU>(nu));
    vc_pos.assign(m, Vec<NX>(nx));
    vc_neg.assign(m, Vec<NX>(nx));
    dyn_dual.assign(m, Vec<NX>(nx));
    relax_dual.assign(m, 0.0);
    x_cur = x_prev = x_ex = x;
    u_cur = u_prev = u_ex = u;
    vcp_cur = vcp_prev = vcp_ex = vc_pos;
    vcn_cur = vcn_prev = vcn_ex = vc_neg;
    phi_cur = phi_prev = phi_ex = dyn_dual;
    th_cur = th_prev = th_ex = relax_dual;
  }

  bool primal_all_zero() const {
    auto any = [](const auto& group) {
      for (const auto& v : group)
        for (int i = 0; i < v.n; ++i)
          if (v[i] != 0.0) return true;
      return false;
    };
    return !(any(x) || any(u) || any(vc_pos) || any(vc_neg));
  }
};

namespace detail {

template <class VecGroup>
double group_sq_norm(const VecGroup& g) {
  double acc = 0.0;
  for (const auto& v : g)
    for (int i = 0; i < v.n; ++i) acc += v[i] * v[i];
  return acc;
}

template <class VecGroup>
double group_inf(const VecGroup& g) {
  double m = 0.0;
  for (const auto& v : g)
    for (int i = 0; i < v.n; ++i) m = std::max(m, std::abs(v[i]));
  return m;
}

template <class VecGroup>
double group_inf_diff(const VecGroup& a, const VecGroup& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int i = 0; i < a[k].n; ++i) m = std::max(m, std::abs(a[k][i] - b[k][i]));
  return m;
}

inline double scalar_inf(const std::vector<double>& v) {
  double m = 0.0;
  for (double s : v) m = std::max(m, std::abs(s));
  return m;
}

inline double scalar_inf_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class VecGroup>
bool group_finite(const VecGroup& g) {
  for (const auto& v : g)
    for (int i = 0; i < v.n; ++i)
      if (!std::isfinite(v[i])) return false;
  return true;
}

}  // namespace detail

/// Estimates the squared maximum singular value of the stacked constraint
/// operator by normalized power iteration on its Gram map, then buffers the
/// estimate. The seed is the caller-supplied primal point and must not be
/// identically zero.
template <int NX, int NU>
double power_iteration_custom(const Subproblem<NX, NU>& sp, const std::vector<Vec<NX>>& seed_x,
                              const std::vector<Vec<NU>>& seed_u,
                              const std::vector<Vec<NX>>& seed_vcp,
                              const std::vector<Vec<NX>>& seed_vcn, double eps_abs,
                              double eps_rel, double eps_buff, int j_max) {
  const int n = sp.nodes;
  const int m = sp.intervals();
  auto x = seed_x;
  auto u = seed_u;
  auto vcp = seed_vcp;
  auto vcn = seed_vcn;
  if (static_cast<int>(x.size()) != n || static_cast<int>(u.size()) != n ||
      static_cast<int>(vcp.size()) != m || static_cast<int>(vcn.size()) != m)
    throw std::invalid_argument("power iteration: seed size mismatch");

  double sigma = detail::group_sq_norm(x) + detail::group_sq_norm(u) +
                 detail::group_sq_norm(vcp) + detail::group_sq_norm(vcn);
  if (sigma == 0.0)
    throw std::invalid_argument("power iteration: seed point must not be all zero");
  sigma = std::sqrt(sigma);

  std::vector<Vec<NX>> phi(static_cast<std::size_t>(m), Vec<NX>(sp.n_x));
  std::vector<double> theta(static_cast<std::size_t>(m), 0.0);
  double sigma_star = sigma;

  for (int j = 1; j <= j_max; ++j) {
    // Forward map scaled by 1/sigma.
    for (int k = 0; k < m; ++k) {
      auto r = mat_vec(sp.A_minus[static_cast<std::size_t>(k)], x[static_cast<std::size_t>(k)]);
      add_scaled(r, 1.0, mat_vec(sp.A_plus[static_cast<std::size_t>(k)], x[static_cast<std::size_t>(k + 1)]));
      add_scaled(r, 1.0, mat_vec(sp.B_minus[static_cast<std::size_t>(k)], u[static_cast<std::size_t>(k)]));
      add_scaled(r, 1.0, mat_vec(sp.B_plus[static_cast<std::size_t>(k)], u[static_cast<std::size_t>(k + 1)]));
      add_scaled(r, 1.0, vcp[static_cast<std::size_t>(k)]);
      add_scaled(r, -1.0, vcn[static_cast<std::size_t>(k)]);
      scale(r, 1.0 / sigma);
      phi[static_cast<std::size_t>(k)].assign(r);
      theta[static_cast<std::size_t>(k)] =
          (dot(sp.e_y, x[static_cast<std::size_t>(k + 1)]) - dot(sp.e_y, x[static_cast<std::size_t>(k)])) / sigma;
    }
    // Adjoint map.
    {
      auto r = mat_vec(sp.A_minus[0], phi[0], true);
      add_scaled(r, -theta[0], sp.e_y);
      x[0].assign(r);
      u[0].assign(mat_vec(sp.B_minus[0], phi[0], true));
      vcp[0] = phi[0];
      vcn[0] = phi[0];
      scale(vcn[0], -1.0);
    }
    for (int k = 1; k < m; ++k) {
      auto r = mat_vec(sp.A_minus[static_cast<std::size_t>(k)], phi[static_cast<std::size_t>(k)], true);
      add_scaled(r, 1.0, mat_vec(sp.A_plus[static_cast<std::size_t>(k - 1)], phi[static_cast<std::size_t>(k - 1)], true));
      add_scaled(r, -theta[static_cast<std::size_t>(k)], sp.e_y);
      add_scaled(r, theta[static_cast<std::size_t>(k - 1)], sp.e_y);
      x[static_cast<std::size_t>(k)].assign(r);
      auto ru = mat_vec(sp.B_minus[static_cast<std::size_t>(k)], phi[static_cast<std::size_t>(k)], true);
      add_scaled(ru, 1.0, mat_vec(sp.B_plus[static_cast<std::size_t>(k - 1)], phi[static_cast<std::size_t>(k - 1)], true));
      u[static_cast<std::size_t>(k)].assign(ru);
      vcp[static_cast<std::size_t>(k)] = phi[static_cast<std::size_t>(k)];
      vcn[static_cast<std::size_t>(k)] = phi[static_cast<std::size_t>(k)];
      scale(vcn[static_cast<std::size_t>(k)], -1.0);
    }
    {
      auto r = mat_vec(sp.A_plus[static_cast<std::size_t>(m - 1)], phi[static_cast<std::size_t>(m - 1)], true);
      add_scaled(r, theta[static_cast<std::size_t>(m - 1)], sp.e_y);
      x[static_cast<std::size_t>(n - 1)].assign(r);
      u[static_cast<std::size_t>(n - 1)].assign(
          mat_vec(sp.B_plus[static_cast<std::size_t>(m - 1)], phi[static_cast<std::size_t>(m - 1)], true));
    }

    sigma_star = detail::group_sq_norm(x) + detail::group_sq_norm(u) +
                 detail::group_sq_norm(vcp) + detail::group_sq_norm(vcn);
    sigma_star = std::sqrt(sigma_star);
    if (sigma_star == 0.0) {
      // Seed lies in the null space; the operator contribution is zero.
      sigma = 0.0;
      break;
    }
    if (std::abs(sigma_star - sigma) <= eps_abs + eps_rel * std::max(sigma_star, sigma)) {
      sigma = sigma_star;
      break;
    }
    sigma = sigma_star;
  }
  return (1.0 + eps_buff) * sigma;
}

/// View of one primal-dual iterate used by the stopping test.
template <int NX, int NU>
struct IterateView {
  const std::vector<Vec<NX>>* x;
  const std::vector<Vec<NU>>* u;
  const std::vector<Vec<NX>>* vc_pos;
  const std::vector<Vec<NX>>* vc_neg;
  const std::vector<Vec<NX>>* dyn_dual;
  const std::vector<double>* relax_dual;
};

/// Relative-change termination test over the primal and dual groups.
/// Thresholds are inclusive.
template <int NX, int NU>
bool stopping_custom(const IterateView<NX, NU>& cur, const IterateView<NX, NU>& prev,
                     double eps_abs, double eps_rel) {
  using detail::group_inf;
  using detail::group_inf_diff;
  const double z_cur = std::max(std::max(group_inf(*cur.x), group_inf(*cur.u)),
                                std::max(group_inf(*cur.vc_pos), group_inf(*cur.vc_neg)));
  const double z_prev = std::max(std::max(group_inf(*prev.x), group_inf(*prev.u)),
                                 std::max(group_inf(*prev.vc_pos), group_inf(*prev.vc_neg)));
  const double z_delta =
      std::max(std::max(group_inf_diff(*cur.x, *prev.x), group_inf_diff(*cur.u, *prev.u)),
               std::max(group_inf_diff(*cur.vc_pos, *prev.vc_pos),
                        group_inf_diff(*cur.vc_neg, *prev.vc_neg)));
  const double r_cur = std::max(group_inf(*cur.dyn_dual), detail::scalar_inf(*cur.relax_dual));
  const double r_prev = std::max(group_inf(*prev.dyn_dual), detail::scalar_inf(*prev.relax_dual));
  const double r_delta = std::max(group_inf_diff(*cur.dyn_dual, *prev.dyn_dual),
                                  detail::scalar_inf_diff(*cur.relax_dual, *prev.relax_dual));
  return z_delta <= eps_abs + eps_rel * std::max(z_cur, z_prev) &&
         r_delta <= eps_abs + eps_rel * std::max(r_cur, r_prev);
}

struct StepSizes {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Primal/dual step sizes from the quadratic-term bound and the buffered
/// spectral estimate; beta = omega * alpha.
inline StepSizes step_sizes(double lambda, double omega, double sigma) {
  StepSizes s;
  s.alpha = 2.0 / (lambda + std::sqrt(lambda * lambda + 4.0 * omega * sigma));
  s.beta = omega * s.alpha;
  return s;
}

struct PipgResult {
  int iterations = 0;
  bool converged = false;
};

/// Matrix-free customized PIPG with extrapolation. The workspace carries the
/// warm start in (x, u, vc_pos, vc_neg, dyn_dual, relax_dual) and sigma; on
/// return those buffers hold the solution.
template <int NX, int NU>
PipgResult pipg_custom(const Subproblem<NX, NU>& sp, const PipgConfig& cfg,
                       Workspace<NX, NU>& ws) {
  cfg.validate();
  const int n = sp.nodes;
  const int m = sp.intervals();
  if (ws.nodes != n || ws.n_x != sp.n_x || ws.n_u != sp.n_u)
    throw std::invalid_argument("pipg_custom: workspace does not match subproblem dimensions");

  const auto [alpha, beta] = step_sizes(sp.w_prox, cfg.omega, ws.sigma);
  const double rho = cfg.rho;

  // Initialize extrapolated, current, and previous buffers from the warm start.
  ws.x_ex = ws.x;
  ws.u_ex = ws.u;
  ws.vcp_ex = ws.vc_pos;
  ws.vcn_ex = ws.vc_neg;
  ws.phi_ex = ws.dyn_dual;
  ws.th_ex = ws.relax_dual;
  ws.x_cur = ws.x;
  ws.u_cur = ws.u;
  ws.vcp_cur = ws.vc_pos;
  ws.vcn_cur = ws.vc_neg;
  ws.phi_cur = ws.dyn_dual;
  ws.th_cur = ws.relax_dual;

  PipgResult result;
  auto kth = [](auto& v, int k) -> auto& { return v[static_cast<std::size_t>(k)]; };

  for (int j = 1; j <= cfg.j_max; ++j) {
    std::swap(ws.x_cur, ws.x_prev);
    std::swap(ws.u_cur, ws.u_prev);
    std::swap(ws.vcp_cur, ws.vcp_prev);
    std::swap(ws.vcn_cur, ws.vcn_prev);
    std::swap(ws.phi_cur, ws.phi_prev);
    std::swap(ws.th_cur, ws.th_prev);

    // Projected gradient step on the primal variables.
    for (int k = 0; k < n; ++k) {
      Vec<NX> grad = kth(ws.x_ex, k);
      scale(grad, sp.w_prox);
      Vec<NU> grad_u = kth(ws.u_ex, k);
      scale(grad_u, sp.w_prox);
      if (k < m) {
        add_scaled(grad, 1.0, mat_vec(kth(sp.A_minus, k), kth(ws.phi_ex, k), true));
        add_scaled(grad, -kth(ws.th_ex, k), sp.e_y);
        add_scaled(grad_u, 1.0, mat_vec(kth(sp.B_minus, k), kth(ws.phi_ex, k), true));
      }
      if (k > 0) {
        add_scaled(grad, 1.0, mat_vec(kth(sp.A_plus, k - 1), kth(ws.phi_ex, k - 1), true));
        add_scaled(grad, kth(ws.th_ex, k - 1), sp.e_y);
        add_scaled(grad_u, 1.0, mat_vec(kth(sp.B_plus, k - 1), kth(ws.phi_ex, k - 1), true));
      }
      if (k == n - 1) add_scaled(grad, sp.w_cost, sp.e_cost);

      auto& xk = kth(ws.x_cur, k);
      xk = kth(ws.x_ex, k);
      add_scaled(xk, -alpha, grad);
      if (k == 0)
        for (std::size_t i = 0; i < sp.init_fix_idx.size(); ++i)
          xk[sp.init_fix_idx[i]] = sp.init_fix_val[i];
      if (k == n - 1)
        for (std::size_t i = 0; i < sp.final_fix_idx.size(); ++i)
          xk[sp.final_fix_idx[i]] = sp.final_fix_val[i];

      auto& uk = kth(ws.u_cur, k);
      uk = kth(ws.u_ex, k);
      add_scaled(uk, -alpha, grad_u);
      for (int i = 0; i < sp.n_u; ++i)
        uk[i] = std::max(kth(sp.u_min, k)[i], std::min(kth(sp.u_max, k)[i], uk[i]));
    }

    // Virtual-control slack updates (clamped nonnegative).
    for (int k = 0; k < m; ++k) {
      auto& vp = kth(ws.vcp_cur, k);
      auto& vn = kth(ws.vcn_cur, k);
      for (int i = 0; i < sp.n_x; ++i) {
        vp[i] = std::max(0.0, kth(ws.vcp_ex, k)[i] - alpha * (sp.w_ep + kth(ws.phi_ex, k)[i]));
        vn[i] = std::max(0.0, kth(ws.vcn_ex, k)[i] - alpha * (sp.w_ep - kth(ws.phi_ex, k)[i]));
      }
    }

    // PI feedback of constraint violation (dual updates).
    for (int k = 0; k < m; ++k) {
      Vec<NX> rx(sp.n_x), rx1(sp.n_x);
      Vec<NU> ru(sp.n_u), ru1(sp.n_u);
      for (int i = 0; i < sp.n_x; ++i) {
        rx[i] = 2.0 * kth(ws.x_cur, k)[i] - kth(ws.x_ex, k)[i];
        rx1[i] = 2.0 * kth(ws.x_cur, k + 1)[i] - kth(ws.x_ex, k + 1)[i];
      }
      for (int i = 0; i < sp.n_u; ++i) {
        ru[i] = 2.0 * kth(ws.u_cur, k)[i] - kth(ws.u_ex, k)[i];
        ru1[i] = 2.0 * kth(ws.u_cur, k + 1)[i] - kth(ws.u_ex, k + 1)[i];
      }
      Vec<NX> resid = mat_vec(kth(sp.A_minus, k), rx);
      add_scaled(resid, 1.0, mat_vec(kth(sp.A_plus, k), rx1));
      add_scaled(resid, 1.0, mat_vec(kth(sp.B_minus, k), ru));
      add_scaled(resid, 1.0, mat_vec(kth(sp.B_plus, k), ru1));
      for (int i = 0; i < sp.n_x; ++i) {
        resid[i] += (2.0 * kth(ws.vcp_cur, k)[i] - kth(ws.vcp_ex, k)[i]) -
                    (2.0 * kth(ws.vcn_cur, k)[i] - kth(ws.vcn_ex, k)[i]) + kth(sp.w, k)[i];
      }
      auto& ph = kth(ws.phi_cur, k);
      ph = kth(ws.phi_ex, k);
      add_scaled(ph, beta, resid);

      const double drift = dot(sp.e_y, rx1) - dot(sp.e_y, rx) - kth(sp.eps_relax, k);
      kth(ws.th_cur, k) = std::max(0.0, kth(ws.th_ex, k) + beta * drift);
    }

    // Extrapolation.
    auto mix_group = [rho](auto& ex, const auto& cur) {
      for (std::size_t k = 0; k < ex.size(); ++k)
        for (int i = 0; i < ex[k].n; ++i)
          ex[k][i] = (1.0 - rho) * ex[k][i] + rho * cur[k][i];
    };
    mix_group(ws.x_ex, ws.x_cur);
    mix_group(ws.u_ex, ws.u_cur);
    mix_group(ws.vcp_ex, ws.vcp_cur);
    mix_group(ws.vcn_ex, ws.vcn_cur);
    mix_group(ws.phi_ex, ws.phi_cur);
    for (std::size_t k = 0; k < ws.th_ex.size(); ++k)
      ws.th_ex[k] = (1.0 - rho) * ws.th_ex[k] + rho * ws.th_cur[k];

    result.iterations = j;
    if (j % cfg.j_check == 0) {
      if (!detail::group_finite(ws.x_cur) || !detail::group_finite(ws.u_cur) ||
          !detail::group_finite(ws.phi_cur))
        throw SolverDiverged(j);
      IterateView<NX, NU> cur{&ws.x_cur, &ws.u_cur, &ws.vcp_cur,
                              &ws.vcn_cur, &ws.phi_cur, &ws.th_cur};
      IterateView<NX, NU> prev{&ws.x_prev, &ws.u_prev, &ws.vcp_prev,
                               &ws.vcn_prev, &ws.phi_prev, &ws.th_prev};
      if (stopping_custom(cur, prev, cfg.eps_abs, cfg.eps_rel)) {
        result.converged = true;
        break;
      }
    }
  }

  ws.x = ws.x_cur;
  ws.u = ws.u_cur;
  ws.vc_pos = ws.vcp_cur;
  ws.vc_neg = ws.vcn_cur;
  ws.dyn_dual = ws.phi_cur;
  ws.relax_dual = ws.th_cur;
  return result;
}

// ---------------------------------------------------------------------------
// Generic reference form: the same QP with explicitly materialized matrices.
// It exists to cross-check the customized solver and is not a hot path.
// ---------------------------------------------------------------------------

struct DynMat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  DynMat() = default;
  DynMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
    for (int i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < cols; ++j) acc += at(i, j) * x[static_cast<std::size_t>(j)];
      y[static_cast<std::size_t>(i)] = acc;
    }
    return y;
  }

  void apply_transpose_accum(const std::vector<double>& y, std::vector<double>& out) const {
    for (int i = 0; i < rows; ++i) {
      const double yi = y[static_cast<std::size_t>(i)];
      if (yi == 0.0) continue;
      for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(j)] += at(i, j) * yi;
    }
  }
};

/// Canonical-form QP data plus a description of the projection set.
struct GenericQp {
  int dim = 0;
  std::vector<double> quad_diag;  // diagonal quadratic term
  std::vector<double> lin;        // linear term
  DynMat G;
  std::vector<double> g;
  DynMat H;
  std::vector<double> h;
  std::vector<std::pair<int, double>> fixed;              // direct-assignment entries
  std::vector<std::tuple<int, double, double>> box;       // clamped entries
  int nonneg_begin = 0, nonneg_end = 0;                   // clamped nonnegative range
};

template <int NX, int NU>
struct GenericLayout {
  int n_x, n_u, nodes, dim;
  int x_off(int k) const { return k * n_x; }
  int u_off(int k) const { return nodes * n_x + k * n_u; }
  int vcn_off(int k) const { return nodes * (n_x + n_u) + k * n_x; }
  int vcp_off(int k) const { return nodes * (n_x + n_u) + (nodes - 1) * n_x + k * n_x; }
};

template <int NX, int NU>
GenericLayout<NX, NU> generic_layout(const Subproblem<NX, NU>& sp) {
  GenericLayout<NX, NU> lay{sp.n_x, sp.n_u, sp.nodes, 0};
  lay.dim = sp.nodes * (sp.n_x + sp.n_u) + 2 * (sp.nodes - 1) * sp.n_x;
  return lay;
}

template <int NX, int NU>
GenericQp build_generic_qp(const Subproblem<NX, NU>& sp) {
  const auto lay = generic_layout(sp);
  const int m = sp.intervals();
  GenericQp qp;
  qp.dim = lay.dim;
  qp.quad_diag.assign(static_cast<std::size_t>(qp.dim), 0.0);
  qp.lin.assign(static_cast<std::size_t>(qp.dim), 0.0);
  for (int k = 0; k < sp.nodes; ++k) {
    for (int i = 0; i < sp.n_x; ++i)
      qp.quad_diag[static_cast<std::size_t>(lay.x_off(k) + i)] = sp.w_prox;
    for (int i = 0; i < sp.n_u; ++i)
      qp.quad_diag[static_cast<std::size_t>(lay.u_off(k) + i)] = sp.w_prox;
  }
  for (int i = 0; i < sp.n_x; ++i)
    qp.lin[static_cast<std::size_t>(lay.x_off(sp.nodes - 1) + i)] = sp.w_cost * sp.e_cost[i];
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < sp.n_x; ++i) {
      qp.lin[static_cast<std::size_t>(lay.vcn_off(k) + i)] = sp.w_ep;
      qp.lin[static_cast<std::size_t>(lay.vcp_off(k) + i)] = sp.w_ep;
    }

  qp.G = DynMat(m * sp.n_x, qp.dim);
  qp.g.assign(static_cast<std::size_t>(m * sp.n_x), 0.0);
  for (int k = 0; k < m; ++k) {
    const auto& Am = sp.A_minus[static_cast<std::size_t>(k)];
    const auto& Ap = sp.A_plus[static_cast<std::size_t>(k)];
    const auto& Bm = sp.B_minus[static_cast<std::size_t>(k)];
    const auto& Bp = sp.B_plus[static_cast<std::size_t>(k)];
    for (int i = 0; i < sp.n_x; ++i) {
      const int row = k * sp.n_x + i;
      for (int j = 0; j < sp.n_x; ++j) {
        qp.G.at(row, lay.x_off(k) + j) = Am(i, j);
        qp.G.at(row, lay.x_off(k + 1) + j) = Ap(i, j);
      }
      for (int j = 0; j < sp.n_u; ++j) {
        qp.G.at(row, lay.u_off(k) + j) = Bm(i, j);
        qp.G.at(row, lay.u_off(k + 1) + j) = Bp(i, j);
      }
      qp.G.at(row, lay.vcp_off(k) + i) = 1.0;
      qp.G.at(row, lay.vcn_off(k) + i) = -1.0;
      qp.g[static_cast<std::size_t>(row)] = -sp.w[static_cast<std::size_t>(k)][i];
    }
  }

  qp.H = DynMat(m, qp.dim);
  qp.h.assign(static_cast<std::size_t>(m), 0.0);
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < sp.n_x; ++j) {
      qp.H.at(k, lay.x_off(k) + j) = -sp.e_y[j];
      qp.H.at(k, lay.x_off(k + 1) + j) = sp.e_y[j];
    }
    qp.h[static_cast<std::size_t>(k)] = sp.eps_relax[static_cast<std::size_t>(k)];
  }

  for (std::size_t i = 0; i < sp.init_fix_idx.size(); ++i)
    qp.fixed.emplace_back(lay.x_off(0) + sp.init_fix_idx[i], sp.init_fix_val[i]);
  for (std::size_t i = 0; i < sp.final_fix_idx.size(); ++i)
    qp.fixed.emplace_back(lay.x_off(sp.nodes - 1) + sp.final_fix_idx[i], sp.final_fix_val[i]);
  for (int k = 0; k < sp.nodes; ++k)
    for (int i = 0; i < sp.n_u; ++i) {
      const double lo = sp.u_min[static_cast<std::size_t>(k)][i];
      const double hi = sp.u_max[static_cast<std::size_t>(k)][i];
      if (std::isfinite(lo) || std::isfinite(hi)) qp.box.emplace_back(lay.u_off(k) + i, lo, hi);
    }
  qp.nonneg_begin = lay.vcn_off(0);
  qp.nonneg_end = qp.dim;
  return qp;
}

struct GenericResult {
  std::vector<double> z;
  std::vector<double> eq_dual;
  std::vector<double> ineq_dual;
  int iterations = 0;
  bool converged = false;
};

/// Reference PIPG on the materialized QP. Used as the testing counterpart of
/// the customized loop; identical step sizes require passing the same sigma.
inline GenericResult pipg_generic(const GenericQp& qp, const PipgConfig& cfg, double sigma,
                                  std::vector<double> z0 = {}, std::vector<double> eta0 = {},
                                  std::vector<double> chi0 = {}) {
  cfg.validate();
  const auto dim = static_cast<std::size_t>(qp.dim);
  const auto ne = static_cast<std::size_t>(qp.G.rows);
  const auto ni = static_cast<std::size_t>(qp.H.rows);
  if (z0.empty()) z0.assign(dim, 0.0);
  if (eta0.empty()) eta0.assign(ne, 0.0);
  if (chi0.empty()) chi0.assign(ni, 0.0);
  if (z0.size() != dim || eta0.size() != ne || chi0.size() != ni)
    throw std::invalid_argument("pipg_generic: bad initial point size");

  double lambda = 0.0;
  for (double v : qp.quad_diag) lambda = std::max(lambda, v);
  const auto [alpha, beta] = step_sizes(lambda, cfg.omega, sigma);

  auto project = [&](std::vector<double>& z) {
    for (const auto& [idx, val] : qp.fixed) z[static_cast<std::size_t>(idx)] = val;
    for (const auto& [idx, lo, hi] : qp.box)
      z[static_cast<std::size_t>(idx)] = std::max(lo, std::min(hi, z[static_cast<std::size_t>(idx)]));
    for (int i = qp.nonneg_begin; i < qp.nonneg_end; ++i)
      z[static_cast<std::size_t>(i)] = std::max(0.0, z[static_cast<std::size_t>(i)]);
  };

  std::vector<double> z_ex = z0, eta_ex = eta0, chi_ex = chi0;
  std::vector<double> z = z0, eta = eta0, chi = chi0;
  std::vector<double> z_prev, eta_prev, chi_prev;
  std::vector<double> grad(dim), refl(dim);

  GenericResult out;
  for (int j = 1; j <= cfg.j_max; ++j) {
    z_prev = z;
    eta_prev = eta;
    chi_prev = chi;

    for (std::size_t i = 0; i < dim; ++i)
      grad[i] = qp.quad_diag[i] * z_ex[i] + qp.lin[i];
    qp.G.apply_transpose_accum(eta_ex, grad);
    qp.H.apply_transpose_accum(chi_ex, grad);
    for (std::size_t i = 0; i < dim; ++i) z[i] = z_ex[i] - alpha * grad[i];
    project(z);

    for (std::size_t i = 0; i < dim; ++i) refl[i] = 2.0 * z[i] - z_ex[i];
    const auto Gr = qp.G.apply(refl);
    for (std::size_t i = 0; i < ne; ++i) eta[i] = eta_ex[i] + beta * (Gr[i] - qp.g[i]);
    const auto Hr = qp.H.apply(refl);
    for (std::size_t i = 0; i < ni; ++i)
      chi[i] = std::max(0.0, chi_ex[i] + beta * (Hr[i] - qp.h[i]));

    for (std::size_t i = 0; i < dim; ++i) z_ex[i] = (1.0 - cfg.rho) * z_ex[i] + cfg.rho * z[i];
    for (std::size_t i = 0; i < ne; ++i) eta_ex[i] = (1.0 - cfg.rho) * eta_ex[i] + cfg.rho * eta[i];
    for (std::size_t i = 0; i < ni; ++i) chi_ex[i] = (1.0 - cfg.rho) * chi_ex[i] + cfg.rho * chi[i];

    out.iterations = j;
    if (j % cfg.j_check == 0) {
      double z_cur_inf = 0.0, z_prev_inf = 0.0, z_delta = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        z_cur_inf = std::max(z_cur_inf, std::abs(z[i]));
        z_prev_inf = std::max(z_prev_inf, std::abs(z_prev[i]));
        z_delta = std::max(z_delta, std::abs(z[i] - z_prev[i]));
      }
      double r_cur = 0.0, r_prev = 0.0, r_delta = 0.0;
      for (std::size_t i = 0; i < ne; ++i) {
        r_cur = std::max(r_cur, std::abs(eta[i]));
        r_prev = std::max(r_prev, std::abs(eta_prev[i]));
        r_delta = std::max(r_delta, std::abs(eta[i] - eta_prev[i]));
      }
      for (std::size_t i = 0; i < ni; ++i) {
        r_cur = std::max(r_cur, std::abs(chi[i]));
        r_prev = std::max(r_prev, std::abs(chi_prev[i]));
        r_delta = std::max(r_delta, std::abs(chi[i] - chi_prev[i]));
      }
      if (!std::isfinite(z_cur_inf + r_cur)) throw SolverDiverged(j);
      if (z_delta <= cfg.eps_abs + cfg.eps_rel * std::max(z_cur_inf, z_prev_inf) &&
          r_delta <= cfg.eps_abs + cfg.eps_rel * std::max(r_cur, r_prev)) {
        out.converged = true;
        break;
      }
    }
  }
  out.z = std::move(z);
  out.eq_dual = std::move(eta);
  out.ineq_dual = std::move(chi);
  return out;
}

/// Packs workspace primal/dual groups into the generic-form layout.
template <int NX, int NU>
std::vector<double> pack_primal(const Subproblem<NX, NU>& sp, const std::vector<Vec<NX>>& x,
                                const std::vector<Vec<NU>>& u, const std::vector<Vec<NX>>& vcp,
                                const std::vector<Vec<NX>>& vcn) {
  const auto lay = generic_layout(sp);
  std::vector<double> z(static_cast<std::size_t>(lay.dim), 0.0);
  for (int k = 0; k < sp.nodes; ++k) {
    for (int i = 0; i < sp.n_x; ++i)
      z[static_cast<std::size_t>(lay.x_off(k) + i)] = x[static_cast<std::size_t>(k)][i];
    for (int i = 0; i < sp.n_u; ++i)
      z[static_cast<std::size_t>(lay.u_off(k) + i)] = u[static_cast<std::size_t>(k)][i];
  }
  for (int k = 0; k < sp.intervals(); ++k)
    for (int i = 0; i < sp.n_x; ++i) {
      z[static_cast<std::size_t>(lay.vcp_off(k) + i)] = vcp[static_cast<std::size_t>(k)][i];
      z[static_cast<std::size_t>(lay.vcn_off(k) + i)] = vcn[static_cast<std::size_t>(k)][i];
    }
  return z;
}

}  // namespace ptopt::pipg
