#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "ptopt/montecarlo.hpp"
#include "ptopt/rocket_problem.hpp"

namespace ptopt {

/// File unreadable or not valid JSON.
struct ConfigParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Well-formed JSON carrying invalid values; the message names the key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigSchema = 1;

struct RunConfig {
  rocket::VehicleParams vehicle;
  RocketBoundary boundary;

  int grid_nodes = 15;
  int integrator_substeps = 16;
  int audit_substeps = 64;

  double t_f_guess = 5.0;
  double s_min = 1.0;
  double s_max = 15.0;

  ScpWeights weights;
  double tol_feas = 1e-6;
  double tol_step = 1e-5;
  int max_iters = 25;

  ScalingRanges scaling;
  pipg::PipgConfig pipg_cfg;
  int power_j_max = 10000;
  double power_eps_abs = 1e-12;
  double power_eps_rel = 1e-12;

  mc::DispersionSpec dispersion;
  int batch_size = 256;
  int workers = 1;
  double converged_floor = 0.95;

  std::string output_dir = "out";

  void validate() const {
    if (grid_nodes < 2) throw ConfigError("grid.N must be >= 2");
    if (integrator_substeps < 1) throw ConfigError("grid.integrator_substeps must be >= 1");
    if (audit_substeps < 1) throw ConfigError("grid.audit_substeps must be >= 1");
    try {
      vehicle.validate();
      weights.validate();
      pipg_cfg.validate();
      dispersion.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!(s_min > 0.0 && s_min <= s_max)) throw ConfigError("time: need 0 < s_min <= s_max");
    if (!(t_f_guess > 0.0)) throw ConfigError("time.t_f_guess must be > 0");
    if (max_iters < 1) throw ConfigError("scp.max_iters must be >= 1");
    if (batch_size < 1) throw ConfigError("montecarlo.batch_size must be >= 1");
    if (workers < 1) throw ConfigError("montecarlo.workers must be >= 1");
    if (!(converged_floor >= 0.0 && converged_floor <= 1.0))
      throw ConfigError("montecarlo.converged_floor must lie in [0, 1]");
    if (power_j_max < 1) throw ConfigError("pipg.power_j_max must be >= 1");
  }

  RocketProblem problem() const {
    auto pb = make_rocket_problem(vehicle, boundary, Grid::uniform(grid_nodes));
    pb.integrator_steps = integrator_substeps;
    pb.t_f_guess = t_f_guess;
    pb.s_min = s_min;
    pb.s_max = s_max;
    pb.weights = weights;
    pb.scaling = rocket_scaling(scaling);
    pb.pipg_cfg = pipg_cfg;
    pb.power_j_max = power_j_max;
    pb.power_eps_abs = power_eps_abs;
    pb.power_eps_rel = power_eps_rel;
    pb.tol_feas = tol_feas;
    pb.tol_step = tol_step;
    pb.max_iters = max_iters;
    pb.rng_seed = dispersion.seed;
    return pb;
  }
};

namespace cfgdetail {

using nlohmann::json;

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for key '" + key + "'");
  }
}

inline std::array<double, 3> get_vec3(const json& j, const std::string& key,
                                      std::array<double, 3> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw ConfigError("'" + key + "' must be a 3-vector");
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number())
      throw ConfigError("'" + key + "' must contain numbers");
    out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

inline std::array<double, 4> get_vec4(const json& j, const std::string& key,
                                      std::array<double, 4> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 4) throw ConfigError("'" + key + "' must be a 4-vector");
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)].get<double>();
  return out;
}

inline Mat<3, 3> get_mat3(const json& j, const std::string& key, const Mat<3, 3>& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw ConfigError("'" + key + "' must be a 3x3 matrix");
  Mat<3, 3> out(3, 3);
  for (int i = 0; i < 3; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != 3) throw ConfigError("'" + key + "' must be a 3x3 matrix");
    for (int c = 0; c < 3; ++c) out(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

}  // namespace cfgdetail

/// The shipped nondimensional landing scenario. These values were chosen so
/// the nominal case and the dispersed batch converge; they are project
/// defaults, not data from an external baseline.
inline RunConfig default_config() {
  RunConfig c;
  c.vehicle.alpha_mdot = 0.05;
  c.vehicle.g_inertial = {-1.0, 0.0, 0.0};
  c.vehicle.inertia = Mat<3, 3>(3, 3);
  c.vehicle.inertia.set_zero();
  c.vehicle.inertia(0, 0) = 0.1;
  c.vehicle.inertia(1, 1) = 0.25;
  c.vehicle.inertia(2, 2) = 0.25;
  c.vehicle.r_thrust = {-0.5, 0.0, 0.0};
  c.vehicle.m_dry = 1.0;
  c.vehicle.v_max = 3.0;
  c.vehicle.theta_max = 1.0471975511965976;  // 60 deg
  c.vehicle.omega_max = 1.0;
  c.vehicle.delta_max = 0.3490658503988659;  // 20 deg
  c.vehicle.T_min = 1.0;
  c.vehicle.T_max = 6.0;
  c.vehicle.gamma_max = 0.3;

  c.boundary.initial.m = 2.0;
  c.boundary.initial.r = {7.5, 4.5, 1.5};
  c.boundary.initial.v = {-1.0, -0.5, -0.2};
  c.boundary.initial.q = {0.0, 0.0, 0.0, 1.0};
  c.boundary.initial.w = {0.0, 0.0, 0.0};

  c.scaling.mass = 1.0;
  c.scaling.position = 8.0;
  c.scaling.velocity = 3.0;
  c.scaling.quaternion = 1.0;
  c.scaling.omega = 1.0;
  c.scaling.y = 1.0;
  c.scaling.thrust = 6.0;
  c.scaling.torque = 0.3;
  c.scaling.dilation = 5.0;

  c.dispersion.r_low = {6.0, 3.0, 1.0};
  c.dispersion.r_high = {9.0, 6.0, 2.0};
  c.dispersion.seed = 20260810ull;

  c.batch_size = 256;
  c.workers = 2;
  return c;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using cfgdetail::get_mat3;
  using cfgdetail::get_or;
  using cfgdetail::get_vec3;
  using cfgdetail::get_vec4;

  RunConfig c = default_config();
  const int schema = get_or(j, "schema", kConfigSchema);
  if (schema != kConfigSchema)
    throw ConfigError("schema: unsupported version " + std::to_string(schema));

  if (j.contains("vehicle")) {
    const auto& v = j.at("vehicle");
    c.vehicle.alpha_mdot = get_or(v, "alpha_mdot", c.vehicle.alpha_mdot);
    c.vehicle.g_inertial = get_vec3(v, "g_inertial", c.vehicle.g_inertial);
    c.vehicle.inertia = get_mat3(v, "inertia", c.vehicle.inertia);
    c.vehicle.r_thrust = get_vec3(v, "r_thrust", c.vehicle.r_thrust);
    c.vehicle.m_dry = get_or(v, "m_dry", c.vehicle.m_dry);
    c.vehicle.v_max = get_or(v, "v_max", c.vehicle.v_max);
    c.vehicle.theta_max = get_or(v, "theta_max", c.vehicle.theta_max);
    c.vehicle.omega_max = get_or(v, "omega_max", c.vehicle.omega_max);
    c.vehicle.delta_max = get_or(v, "delta_max", c.vehicle.delta_max);
    c.vehicle.T_min = get_or(v, "T_min", c.vehicle.T_min);
    c.vehicle.T_max = get_or(v, "T_max", c.vehicle.T_max);
    c.vehicle.gamma_max = get_or(v, "gamma_max", c.vehicle.gamma_max);
  }
  if (j.contains("boundary")) {
    const auto& b = j.at("boundary");
    c.boundary.initial.m = get_or(b, "m_init", c.boundary.initial.m);
    c.boundary.initial.r = get_vec3(b, "r_init", c.boundary.initial.r);
    c.boundary.initial.v = get_vec3(b, "v_init", c.boundary.initial.v);
    c.boundary.initial.q = get_vec4(b, "q_init", c.boundary.initial.q);
    c.boundary.initial.w = get_vec3(b, "w_init", c.boundary.initial.w);
    c.boundary.r_final = get_vec3(b, "r_final", c.boundary.r_final);
    c.boundary.v_final = get_vec3(b, "v_final", c.boundary.v_final);
    c.boundary.q_final = get_vec4(b, "q_final", c.boundary.q_final);
    c.boundary.w_final = get_vec3(b, "w_final", c.boundary.w_final);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.grid_nodes = get_or(g, "N", c.grid_nodes);
    c.integrator_substeps = get_or(g, "integrator_substeps", c.integrator_substeps);
    c.audit_substeps = get_or(g, "audit_substeps", c.audit_substeps);
  }
  if (j.contains("time")) {
    const auto& t = j.at("time");
    c.t_f_guess = get_or(t, "t_f_guess", c.t_f_guess);
    c.s_min = get_or(t, "s_min", c.s_min);
    c.s_max = get_or(t, "s_max", c.s_max);
  }
  if (j.contains("scp")) {
    const auto& s = j.at("scp");
    c.weights.w_cost = get_or(s, "w_cost", c.weights.w_cost);
    c.weights.w_prox = get_or(s, "w_prox", c.weights.w_prox);
    c.weights.w_ep = get_or(s, "w_ep", c.weights.w_ep);
    c.weights.epsilon_relax = get_or(s, "epsilon_relax", c.weights.epsilon_relax);
    c.tol_feas = get_or(s, "tol_feas", c.tol_feas);
    c.tol_step = get_or(s, "tol_step", c.tol_step);
    c.max_iters = get_or(s, "max_iters", c.max_iters);
  }
  if (j.contains("scaling")) {
    const auto& s = j.at("scaling");
    c.scaling.mass = get_or(s, "mass", c.scaling.mass);
    c.scaling.position = get_or(s, "position", c.scaling.position);
    c.scaling.velocity = get_or(s, "velocity", c.scaling.velocity);
    c.scaling.quaternion = get_or(s, "quaternion", c.scaling.quaternion);
    c.scaling.omega = get_or(s, "omega", c.scaling.omega);
    c.scaling.y = get_or(s, "y", c.scaling.y);
    c.scaling.thrust = get_or(s, "thrust", c.scaling.thrust);
    c.scaling.torque = get_or(s, "torque", c.scaling.torque);
    c.scaling.dilation = get_or(s, "dilation", c.scaling.dilation);
  }
  if (j.contains("pipg")) {
    const auto& p = j.at("pipg");
    c.pipg_cfg.omega = get_or(p, "omega", c.pipg_cfg.omega);
    c.pipg_cfg.rho = get_or(p, "rho", c.pipg_cfg.rho);
    c.pipg_cfg.j_max = get_or(p, "j_max", c.pipg_cfg.j_max);
    c.pipg_cfg.j_check = get_or(p, "j_check", c.pipg_cfg.j_check);
    c.pipg_cfg.eps_abs = get_or(p, "eps_abs", c.pipg_cfg.eps_abs);
    c.pipg_cfg.eps_rel = get_or(p, "eps_rel", c.pipg_cfg.eps_rel);
    c.pipg_cfg.eps_buff = get_or(p, "eps_buff", c.pipg_cfg.eps_buff);
    c.power_j_max = get_or(p, "power_j_max", c.power_j_max);
    c.power_eps_abs = get_or(p, "power_eps_abs", c.power_eps_abs);
    c.power_eps_rel = get_or(p, "power_eps_rel", c.power_eps_rel);
  }
  if (j.contains("montecarlo")) {
    const auto& m = j.at("montecarlo");
    c.batch_size = get_or(m, "batch_size", c.batch_size);
    c.workers = get_or(m, "workers", c.workers);
    c.dispersion.seed = get_or(m, "seed", c.dispersion.seed);
    c.dispersion.r_low = get_vec3(m, "dispersion_low", c.dispersion.r_low);
    c.dispersion.r_high = get_vec3(m, "dispersion_high", c.dispersion.r_high);
    c.converged_floor = get_or(m, "converged_floor", c.converged_floor);
  }
  c.output_dir = get_or(j, "output_dir", c.output_dir);

  c.validate();
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["schema"] = kConfigSchema;
  j["vehicle"] = {
      {"alpha_mdot", c.vehicle.alpha_mdot},
      {"g_inertial", c.vehicle.g_inertial},
      {"inertia",
       {{c.vehicle.inertia(0, 0), c.vehicle.inertia(0, 1), c.vehicle.inertia(0, 2)},
        {c.vehicle.inertia(1, 0), c.vehicle.inertia(1, 1), c.vehicle.inertia(1, 2)},
        {c.vehicle.inertia(2, 0), c.vehicle.inertia(2, 1), c.vehicle.inertia(2, 2)}}},
      {"r_thrust", c.vehicle.r_thrust},
      {"m_dry", c.vehicle.m_dry},
      {"v_max", c.vehicle.v_max},
      {"theta_max", c.vehicle.theta_max},
      {"omega_max", c.vehicle.omega_max},
      {"delta_max", c.vehicle.delta_max},
      {"T_min", c.vehicle.T_min},
      {"T_max", c.vehicle.T_max},
      {"gamma_max", c.vehicle.gamma_max}};
  j["boundary"] = {{"m_init", c.boundary.initial.m},   {"r_init", c.boundary.initial.r},
                   {"v_init", c.boundary.initial.v},   {"q_init", c.boundary.initial.q},
                   {"w_init", c.boundary.initial.w},   {"r_final", c.boundary.r_final},
                   {"v_final", c.boundary.v_final},    {"q_final", c.boundary.q_final},
                   {"w_final", c.boundary.w_final}};
  j["grid"] = {{"N", c.grid_nodes},
               {"integrator_substeps", c.integrator_substeps},
               {"audit_substeps", c.audit_substeps}};
  j["time"] = {{"t_f_guess", c.t_f_guess}, {"s_min", c.s_min}, {"s_max", c.s_max}};
  j["scp"] = {{"w_cost", c.weights.w_cost},
              {"w_prox", c.weights.w_prox},
              {"w_ep", c.weights.w_ep},
              {"epsilon_relax", c.weights.epsilon_relax},
              {"tol_feas", c.tol_feas},
              {"tol_step", c.tol_step},
              {"max_iters", c.max_iters}};
  j["scaling"] = {{"mass", c.scaling.mass},       {"position", c.scaling.position},
                  {"velocity", c.scaling.velocity}, {"quaternion", c.scaling.quaternion},
                  {"omega", c.scaling.omega},     {"y", c.scaling.y},
                  {"thrust", c.scaling.thrust},   {"torque", c.scaling.torque},
                  {"dilation", c.scaling.dilation}};
  j["pipg"] = {{"omega", c.pipg_cfg.omega},
               {"rho", c.pipg_cfg.rho},
               {"j_max", c.pipg_cfg.j_max},
               {"j_check", c.pipg_cfg.j_check},
               {"eps_abs", c.pipg_cfg.eps_abs},
               {"eps_rel", c.pipg_cfg.eps_rel},
               {"eps_buff", c.pipg_cfg.eps_buff},
               {"power_j_max", c.power_j_max},
               {"power_eps_abs", c.power_eps_abs},
               {"power_eps_rel", c.power_eps_rel}};
  j["montecarlo"] = {{"batch_size", c.batch_size},
                     {"workers", c.workers},
                     {"seed", c.dispersion.seed},
                     {"dispersion_low", c.dispersion.r_low},
                     {"dispersion_high", c.dispersion.r_high},
                     {"converged_floor", c.converged_floor}};
  j["output_dir"] = c.output_dir;
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigParseError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigParseError("cannot write config file: " + path);
  out << to_json(c).dump(2) << "\n";
}

}  // namespace ptopt
