#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptopt/discretizer.hpp"
#include "ptopt/montecarlo.hpp"
#include "ptopt/rocket_problem.hpp"

namespace ptopt::csvio {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Round-trippable decimal float.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline void write_trajectory(const std::string& path, const RocketTrajectory& z,
                             const Grid& grid) {
  auto out = open_out(path);
  out << "tau,t,m,rx,ry,rz,vx,vy,vz,qx,qy,qz,qw,wx,wy,wz,y,Tx,Ty,Tz,gx,gy,gz,s\n";
  const auto t = node_times(z, grid);
  for (int k = 0; k < grid.size(); ++k) {
    const auto& x = z.x[static_cast<std::size_t>(k)];
    const auto& u = z.u[static_cast<std::size_t>(k)];
    out << fmt(grid.nodes[static_cast<std::size_t>(k)]) << "," << fmt(t[static_cast<std::size_t>(k)]);
    for (int i = 0; i < RocketAug::state_dim; ++i) out << "," << fmt(x[i]);
    for (int i = 0; i < RocketAug::control_dim; ++i) out << "," << fmt(u[i]);
    out << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

inline void write_dense_audit(const std::string& path, const std::vector<AuditSample>& samples) {
  auto out = open_out(path);
  out << "interval,tau";
  const std::size_t ng = samples.empty() ? 0 : samples.front().g.size();
  for (std::size_t i = 0; i < ng; ++i) out << ",g" << (i + 1);
  out << ",g_max\n";
  for (const auto& s : samples) {
    out << s.interval << "," << fmt(s.tau);
    for (double g : s.g) out << "," << fmt(g);
    out << "," << fmt(s.g_max) << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

inline std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

// wall_time stays in the last column so byte comparisons can strip it.
inline void write_runs(const std::string& path, const std::vector<mc::RunRecord>& records) {
  auto out = open_out(path);
  out << "run_id,r0_1,r0_2,r0_3,converged,scp_iterations,propellant_used,"
         "final_defect_inf,max_pointwise_g,max_node_y_increase,failure,wall_time\n";
  for (const auto& r : records) {
    out << r.run_id << "," << fmt(r.initial_position[0]) << "," << fmt(r.initial_position[1])
        << "," << fmt(r.initial_position[2]) << "," << (r.converged ? 1 : 0) << ","
        << r.scp_iterations << "," << fmt(r.propellant_used) << "," << fmt(r.final_defect_inf)
        << "," << fmt(r.max_pointwise_g) << "," << fmt(r.max_node_y_increase) << ","
        << sanitize(r.failure) << "," << fmt(r.wall_time) << "\n";
  }
  if (!out) throw IoError("failed while writing " + path);
}

inline void write_summary(const std::string& path, const mc::Summary& s) {
  auto out = open_out(path);
  out << "key,value\n";
  out << "batch_size," << s.batch_size << "\n";
  out << "converged_fraction," << fmt(s.converged_fraction) << "\n";
  out << "propellant_min," << fmt(s.propellant_min) << "\n";
  out << "propellant_mean," << fmt(s.propellant_mean) << "\n";
  out << "propellant_max," << fmt(s.propellant_max) << "\n";
  out << "total_wall_time," << fmt(s.total_wall_time) << "\n";
  out << "workers," << s.workers << "\n";
  for (std::size_t i = 0; i < s.iteration_histogram.size(); ++i)
    out << "iterations_" << (i + 1) << "," << s.iteration_histogram[i] << "\n";
  if (!out) throw IoError("failed while writing " + path);
}

}  // namespace ptopt::csvio
