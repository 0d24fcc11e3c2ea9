#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "ptopt/ptopt.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
};

int load_and_validate(const CommonArgs& args, ptopt::RunConfig& cfg) {
  try {
    cfg = ptopt::load_config(args.config_path);
  } catch (const ptopt::ConfigParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const ptopt::ConfigError& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kExitUsage;
  }
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  return kExitOk;
}

int prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::fprintf(stderr, "error: cannot create output directory %s: %s\n", dir.c_str(),
                 ec.message().c_str());
    return kExitIo;
  }
  return kExitOk;
}

int cmd_solve(const CommonArgs& args) {
  ptopt::RunConfig cfg;
  if (int rc = load_and_validate(args, cfg)) return rc;
  if (int rc = prepare_out_dir(cfg.output_dir)) return rc;

  auto pb = cfg.problem();
  const auto guess = ptopt::initial_guess(pb, cfg.boundary);

  ptopt::ScpResult<ptopt::rocket::Rocket6DoF> res;
  try {
    res = ptopt::scp_solve(pb, guess);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "solve failed: %s\n", e.what());
    return kExitNotConverged;
  }

  try {
    std::vector<ptopt::AuditSample> samples;
    const auto audit =
        ptopt::dense_violation_audit(pb.model, res.iterate, pb.grid, cfg.audit_substeps, &samples);
    ptopt::csvio::write_trajectory(cfg.output_dir + "/trajectory.csv", res.iterate, pb.grid);
    ptopt::csvio::write_dense_audit(cfg.output_dir + "/dense_audit.csv", samples);

    const auto t = ptopt::node_times(res.iterate, pb.grid);
    std::printf("converged=%d iterations=%d final_defect=%.3e t_f=%.6f mass_final=%.6f "
                "max_pointwise_g=%.3e\n",
                res.converged ? 1 : 0, res.iterations, res.final_defect_inf, t.back(),
                res.iterate.x.back()[ptopt::rocket::kMass], audit.max_pointwise_g);

    if (!res.converged) {
      std::ofstream diag(cfg.output_dir + "/diagnostics.txt");
      diag << "non-convergence diagnostics\n";
      diag << "iterations " << res.iterations << "\n";
      diag << "final_defect_inf " << res.final_defect_inf << "\n";
      diag << "iter defect_inf step_inf penalized_cost pipg_iterations sigma\n";
      for (std::size_t i = 0; i < res.history.size(); ++i) {
        const auto& h = res.history[i];
        diag << (i + 1) << " " << h.defect_inf << " " << h.step_inf << " " << h.penalized_cost
             << " " << h.pipg_iterations << " " << h.sigma << "\n";
      }
      return kExitNotConverged;
    }
  } catch (const ptopt::csvio::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}

struct McArgs : CommonArgs {
  int runs = -1;
  int workers = -1;
  long long seed = -1;
  bool dump_trajectories = false;
};

int cmd_montecarlo(const McArgs& args) {
  ptopt::RunConfig cfg;
  if (int rc = load_and_validate(static_cast<const CommonArgs&>(args), cfg)) return rc;
  if (args.runs > 0) cfg.batch_size = args.runs;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.seed >= 0) cfg.dispersion.seed = static_cast<std::uint64_t>(args.seed);
  try {
    cfg.validate();
  } catch (const ptopt::ConfigError& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kExitUsage;
  }
  if (int rc = prepare_out_dir(cfg.output_dir)) return rc;

  const auto pb = cfg.problem();
  const auto batch = ptopt::mc::run_batch(pb, cfg.boundary, cfg.dispersion, cfg.batch_size,
                                          cfg.workers, cfg.audit_substeps, args.dump_trajectories);
  const auto summary = ptopt::mc::aggregate(batch.records, cfg.max_iters, batch.total_wall_time,
                                            batch.workers);

  try {
    ptopt::csvio::write_runs(cfg.output_dir + "/runs.csv", batch.records);
    ptopt::csvio::write_summary(cfg.output_dir + "/summary.csv", summary);
    if (args.dump_trajectories) {
      char name[64];
      for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
        std::snprintf(name, sizeof(name), "/trajectory_%04zu.csv", i);
        ptopt::csvio::write_trajectory(cfg.output_dir + name, batch.trajectories[i], pb.grid);
      }
    }
  } catch (const ptopt::csvio::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }

  std::printf("runs=%d converged_fraction=%.4f wall=%.2fs workers=%d\n", summary.batch_size,
              summary.converged_fraction, summary.total_wall_time, summary.workers);
  return summary.converged_fraction >= cfg.converged_floor ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory optimization via prox-linear SCP with a customized "
               "first-order conic solver"};
  app.require_subcommand(1);

  CommonArgs solve_args;
  auto* solve = app.add_subcommand("solve", "Solve the nominal problem from a config file");
  solve->add_option("--config", solve_args.config_path, "JSON config path")->required();
  solve->add_option("--out", solve_args.out_dir, "Output directory (overrides config)");

  McArgs mc_args;
  auto* mc = app.add_subcommand("montecarlo", "Run a dispersed batch on a worker pool");
  mc->add_option("--config", mc_args.config_path, "JSON config path")->required();
  mc->add_option("--runs", mc_args.runs, "Batch size (overrides config)");
  mc->add_option("--workers", mc_args.workers, "Worker count (overrides config)");
  mc->add_option("--seed", mc_args.seed, "Dispersion seed (overrides config)");
  mc->add_flag("--dump-trajectories", mc_args.dump_trajectories, "Write per-run trajectory files");
  mc->add_option("--out", mc_args.out_dir, "Output directory (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (solve->parsed()) return cmd_solve(solve_args);
  if (mc->parsed()) return cmd_montecarlo(mc_args);
  return kExitUsage;
}
