#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ptopt/rocket_problem.hpp"

namespace ptopt::mc {

/// Per-axis uniform dispersion of the initial position, drawn with a
/// counter-based generator keyed on (seed, run_id): draws are reproducible
/// and independent of worker count and completion order.
struct DispersionSpec {
  std::array<double, 3> r_low{};
  std::array<double, 3> r_high{};
  std::uint64_t seed = 0;

  void validate() const {
    for (int i = 0; i < 3; ++i)
      if (!(r_low[i] <= r_high[i]))
        throw std::invalid_argument("montecarlo.dispersion: low > high on axis " +
                                    std::to_string(i + 1));
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Stateless draw: uniform in [0, 1) as a pure function of (seed, run, slot).
inline double counter_uniform(std::uint64_t seed, std::uint64_t run, std::uint64_t slot) {
  const std::uint64_t key = splitmix64(seed ^ splitmix64(run + 1));
  return static_cast<double>(splitmix64(key + slot) >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Full run seed handed to a single solve (power-iteration seeding).
inline std::uint64_t run_seed(std::uint64_t batch_seed, int run_id) {
  return detail::splitmix64(batch_seed ^ detail::splitmix64(static_cast<std::uint64_t>(run_id)));
}

inline RocketBoundary disperse(const RocketBoundary& nominal, const DispersionSpec& spec,
                               int run_id) {
  spec.validate();
  RocketBoundary bc = nominal;
  for (int i = 0; i < 3; ++i) {
    const double u = detail::counter_uniform(spec.seed, static_cast<std::uint64_t>(run_id),
                                             static_cast<std::uint64_t>(i));
    bc.initial.r[i] = spec.r_low[i] + (spec.r_high[i] - spec.r_low[i]) * u;
  }
  return bc;
}

struct RunRecord {
  int run_id = 0;
  std::array<double, 3> initial_position{};
  bool converged = false;
  int scp_iterations = 0;
  double propellant_used = 0.0;
  double final_defect_inf = 0.0;
  double max_pointwise_g = 0.0;
  double max_node_y_increase = 0.0;
  std::string failure;     // nonempty when the solve threw
  double wall_time = 0.0;  // seconds; excluded from determinism comparisons
};

struct BatchResult {
  std::vector<RunRecord> records;
  std::vector<RocketTrajectory> trajectories;  // populated when requested
  double total_wall_time = 0.0;
  int workers = 0;
};

struct Summary {
  int batch_size = 0;
  double converged_fraction = 0.0;
  std::vector<int> iteration_histogram;  // bins 1..max_iters
  double propellant_min = 0.0;
  double propellant_mean = 0.0;
  double propellant_max = 0.0;
  double total_wall_time = 0.0;
  int workers = 0;
};

/// Solves one dispersed instance; never throws. Wall time covers the solve
/// only, not instance generation or output.
inline RunRecord solve_instance(const RocketProblem& nominal, const RocketBoundary& nominal_bc,
                                const DispersionSpec& spec, int run_id, int audit_substeps,
                                RocketTrajectory* trajectory_out = nullptr) {
  RunRecord rec;
  rec.run_id = run_id;
  const RocketBoundary bc = disperse(nominal_bc, spec, run_id);
  rec.initial_position = bc.initial.r;

  RocketProblem pb = nominal;
  pb.init_state = bc.initial.to_vec();
  pb.rng_seed = run_seed(spec.seed, run_id);
  const auto guess = initial_guess(pb, bc);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto res = scp_solve(pb, guess);
    rec.converged = res.converged;
    rec.scp_iterations = res.iterations;
    rec.final_defect_inf = res.final_defect_inf;
    rec.propellant_used = bc.initial.m - res.iterate.x.back()[rocket::kMass];
    const auto audit =
        dense_violation_audit(pb.model, res.iterate, pb.grid, audit_substeps);
    rec.max_pointwise_g = audit.max_pointwise_g;
    double dy_max = 0.0;
    for (int k = 0; k + 1 < pb.grid.size(); ++k)
      dy_max = std::max(dy_max, res.iterate.x[static_cast<std::size_t>(k + 1)][RocketAug::y_index] -
                                    res.iterate.x[static_cast<std::size_t>(k)][RocketAug::y_index]);
    rec.max_node_y_increase = dy_max;
    if (trajectory_out) *trajectory_out = res.iterate;
  } catch (const std::exception& e) {
    rec.converged = false;
    rec.failure = e.what();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Instances are materialized up front and handed to a pool of independent
/// workers; records land in slots indexed by run_id, so the output is ordered
/// and identical for any worker count.
inline BatchResult run_batch(const RocketProblem& nominal, const RocketBoundary& nominal_bc,
                             const DispersionSpec& spec, int batch_size, int workers,
                             int audit_substeps = 64, bool keep_trajectories = false) {
  if (batch_size < 1) throw std::invalid_argument("montecarlo.batch_size must be >= 1");
  if (workers < 1) throw std::invalid_argument("montecarlo.workers must be >= 1");
  spec.validate();

  BatchResult out;
  out.workers = workers;
  out.records.resize(static_cast<std::size_t>(batch_size));
  if (keep_trajectories) out.trajectories.resize(static_cast<std::size_t>(batch_size));

  const auto t0 = std::chrono::steady_clock::now();
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      const int id = next.fetch_add(1);
      if (id >= batch_size) return;
      out.records[static_cast<std::size_t>(id)] = solve_instance(
          nominal, nominal_bc, spec, id, audit_substeps,
          keep_trajectories ? &out.trajectories[static_cast<std::size_t>(id)] : nullptr);
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  out.total_wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline Summary aggregate(const std::vector<RunRecord>& records, int max_iters = 0,
                         double total_wall_time = 0.0, int workers = 0) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  Summary s;
  s.batch_size = static_cast<int>(records.size());
  s.total_wall_time = total_wall_time;
  s.workers = workers;

  int bins = max_iters;
  for (const auto& r : records) bins = std::max(bins, r.scp_iterations);
  s.iteration_histogram.assign(static_cast<std::size_t>(bins), 0);

  int converged = 0;
  bool have_prop = false;
  double prop_sum = 0.0;
  for (const auto& r : records) {
    if (r.scp_iterations >= 1)
      ++s.iteration_histogram[static_cast<std::size_t>(r.scp_iterations - 1)];
    if (!r.converged) continue;
    ++converged;
    prop_sum += r.propellant_used;
    if (!have_prop) {
      s.propellant_min = s.propellant_max = r.propellant_used;
      have_prop = true;
    } else {
      s.propellant_min = std::min(s.propellant_min, r.propellant_used);
      s.propellant_max = std::max(s.propellant_max, r.propellant_used);
    }
  }
  s.converged_fraction = static_cast<double>(converged) / s.batch_size;
  s.propellant_mean = converged > 0 ? prop_sum / converged : 0.0;
  return s;
}

}  // namespace ptopt::mc
