#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "ptopt/ctcs.hpp"
#include "support/oracles.hpp"
#include "support/test_models.hpp"

using namespace ptopt;

namespace {

/// Constraint values injected directly, to pin the integrand arithmetic.
struct ConstIneqModel {
  static constexpr int state_dim = 1;
  static constexpr int control_dim = 1;
  static constexpr int ineq_dim = 3;
  static constexpr int eq_dim = 0;
  std::array<double, 3> g_values{-1.0, -1.0, -1.0};

  Vec<1> dynamics(const Vec<1>&, const Vec<1>&) const { return Vec<1>(); }
  Vec<3> path_ineq(const Vec<1>&, const Vec<1>&) const {
    Vec<3> g;
    for (int i = 0; i < 3; ++i) g[i] = g_values[static_cast<std::size_t>(i)];
    return g;
  }
  void dynamics_jacobians(const Vec<1>&, const Vec<1>&, Mat<1, 1>& A, Mat<1, 1>& B) const {
    A.set_zero();
    B.set_zero();
  }
  void path_ineq_jacobians(const Vec<1>&, const Vec<1>&, Mat<3, 1>& dgx, Mat<3, 1>& dgu) const {
    dgx.set_zero();
    dgu.set_zero();
  }
};

}  // namespace

TEST_CASE("satisfied constraints integrate nothing") {
  using Aug = Augmented<ConstIneqModel>;
  ConstIneqModel m;
  Aug::State x;
  Aug::Control u;
  u[Aug::s_index] = 1.0;
  const auto dx = Aug::dynamics(m, x, u);
  CHECK(dx[Aug::y_index] == 0.0);
}

TEST_CASE("single violated constraint contributes its squared value") {
  using Aug = Augmented<ConstIneqModel>;
  ConstIneqModel m;
  m.g_values = {0.5, -1.0, -2.0};
  Aug::State x;
  Aug::Control u;
  u[Aug::s_index] = 1.0;
  const auto dx = Aug::dynamics(m, x, u);
  CHECK(dx[Aug::y_index] == Catch::Approx(0.25));
}

TEST_CASE("rate is exactly linear in the dilation factor") {
  using Aug = Augmented<tmodels::ToyConstrained>;
  tmodels::ToyConstrained m;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Aug::State x;
    Aug::Control u;
    for (int i = 0; i < 2; ++i) x[i] = d(rng);
    x[Aug::y_index] = std::abs(d(rng));
    for (int i = 0; i < 2; ++i) u[i] = d(rng);
    u[Aug::s_index] = 1.0;
    const auto base = Aug::dynamics(m, x, u);
    auto u2 = u;
    u2[Aug::s_index] = 2.0;
    const auto doubled = Aug::dynamics(m, x, u2);
    for (int i = 0; i < Aug::state_dim; ++i) CHECK(doubled[i] == 2.0 * base[i]);

    const double s = 0.25 + std::abs(d(rng)) * 3.0;
    auto us = u;
    us[Aug::s_index] = s;
    const auto scaled = Aug::dynamics(m, x, us);
    for (int i = 0; i < Aug::state_dim; ++i) CHECK(scaled[i] == s * base[i]);
  }
}

TEST_CASE("violation integrand is never negative") {
  using Aug = Augmented<tmodels::ToyConstrained>;
  tmodels::ToyConstrained m;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    Aug::State x;
    Aug::Control u;
    for (int i = 0; i < 2; ++i) x[i] = d(rng);
    for (int i = 0; i < 2; ++i) u[i] = d(rng);
    u[Aug::s_index] = 0.01 + std::abs(d(rng));
    const auto dx = Aug::dynamics(m, x, u);
    CHECK(dx[Aug::y_index] >= 0.0);
  }
}

TEST_CASE("nonpositive dilation rejected") {
  using Aug = Augmented<tmodels::ToyConstrained>;
  tmodels::ToyConstrained m;
  Aug::State x;
  Aug::Control u;
  u[Aug::s_index] = 0.0;
  CHECK_THROWS_AS(Aug::dynamics(m, x, u), std::domain_error);
  Mat<Aug::state_dim, Aug::state_dim> A;
  Mat<Aug::state_dim, Aug::control_dim> B;
  u[Aug::s_index] = -1.0;
  CHECK_THROWS_AS(Aug::jacobians(m, x, u, A, B), std::domain_error);
}

TEST_CASE("dilation column of B is the undilated rate") {
  using Aug = Augmented<tmodels::ToyConstrained>;
  tmodels::ToyConstrained m;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Aug::State x;
    Aug::Control u;
    for (int i = 0; i < 2; ++i) x[i] = d(rng);
    for (int i = 0; i < 2; ++i) u[i] = d(rng);
    u[Aug::s_index] = 0.5 + std::abs(d(rng)) * 2.0;
    Mat<Aug::state_dim, Aug::state_dim> A;
    Mat<Aug::state_dim, Aug::control_dim> B;
    Aug::jacobians(m, x, u, A, B);
    auto u1 = u;
    u1[Aug::s_index] = 1.0;
    const auto rate1 = Aug::dynamics(m, x, u1);
    for (int i = 0; i < Aug::state_dim; ++i)
      CHECK(B(i, Aug::s_index) == Catch::Approx(rate1[i]).margin(1e-14));
  }
}

TEST_CASE("augmented jacobians match central differences away from kinks") {
  using Aug = Augmented<tmodels::ToyConstrained>;
  tmodels::ToyConstrained m;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-1.2, 1.2);
  int accepted = 0;
  while (accepted < 100) {
    Aug::State x;
    Aug::Control u;
    for (int i = 0; i < 2; ++i) x[i] = d(rng);
    x[Aug::y_index] = 0.1 * std::abs(d(rng));
    for (int i = 0; i < 2; ++i) u[i] = d(rng);
    u[Aug::s_index] = 0.4 + std::abs(d(rng));
    const auto g = m.path_ineq(Aug::model_state(x), Aug::model_control(u));
    bool kink = false;
    for (int i = 0; i < tmodels::ToyConstrained::ineq_dim; ++i)
      if (std::abs(g[i]) < 5e-3) kink = true;
    if (kink) continue;
    ++accepted;

    Mat<Aug::state_dim, Aug::state_dim> A;
    Mat<Aug::state_dim, Aug::control_dim> B;
    Aug::jacobians(m, x, u, A, B);

    const auto fd_A = oracles::fd_jacobian<Aug::state_dim, Aug::state_dim>(
        [&](const Aug::State& xx) { return Aug::dynamics(m, xx, u); }, x, Aug::state_dim);
    const auto fd_B = oracles::fd_jacobian<Aug::state_dim, Aug::control_dim>(
        [&](const Aug::Control& uu) { return Aug::dynamics(m, x, uu); }, u, Aug::state_dim);
    CHECK(oracles::rel_err_inf(A, fd_A) < 1e-5);
    CHECK(oracles::rel_err_inf(B, fd_B) < 1e-5);
  }
}

TEST_CASE("violation row vanishes when strictly feasible") {
  using Aug = Augmented<ConstIneqModel>;
  ConstIneqModel m;
  Aug::State x;
  Aug::Control u;
  u[Aug::s_index] = 2.0;
  Mat<Aug::state_dim, Aug::state_dim> A;
  Mat<Aug::state_dim, Aug::control_dim> B;
  Aug::jacobians(m, x, u, A, B);
  for (int j = 0; j < Aug::state_dim; ++j) CHECK(A(Aug::y_index, j) == 0.0);
  // df/dy is identically zero.
  for (int i = 0; i < Aug::state_dim; ++i) CHECK(A(i, Aug::y_index) == 0.0);
}
