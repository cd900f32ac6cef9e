#include "ioncrystal/io.hpp"
#include "ioncrystal/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace ioncrystal;

namespace {

struct CommonOptions {
  std::string config;
  std::string recipe;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> sets;

  ExperimentConfig load() const {
    std::vector<KeyOverride> overrides;
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
      }
      overrides.push_back({s.substr(0, eq), s.substr(eq + 1)});
    }
    if (seed) {
      overrides.push_back({"run.seed", std::to_string(*seed)});
    }
    return load_experiment(recipe, config, overrides);
  }
};

void add_common(CLI::App *cmd, CommonOptions &o) {
  cmd->add_option("--config", o.config, "JSON config file (merge patch)");
  cmd->add_option("--recipe", o.recipe, "built-in recipe name");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "run seed (overrides run.seed)");
  cmd->add_option("--jobs", o.jobs, "scan worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", o.sets, "override KEY=VALUE (dotted key path)");
}

OutputHeader header_for(const std::string &command,
                        const ExperimentConfig &cfg,
                        std::optional<RunSeeds> seeds = {}) {
  return {command, to_json(cfg), seeds};
}

std::string mk(double v) { return format_number(v); }

int cmd_equilibrium(const CommonOptions &o) {
  const ExperimentConfig cfg = o.load();
  const EquilibriumReport r = compute_equilibrium(cfg);
  const fs::path dir(o.out);
  const OutputHeader h = header_for("equilibrium", cfg);
  write_equilibrium_csv(dir / "equilibrium.csv", h, r.equilibrium);
  write_key_values(dir / "summary.csv", h,
                   {{"n_ions", std::to_string(cfg.n_ions)},
                    {"wall_frequency_hz", mk(cfg.trap.wall_frequency_hz)},
                    {"energy_j", mk(r.equilibrium.energy)},
                    {"planar", r.equilibrium.planar ? "true" : "false"},
                    {"radius_um", mk(r.radius * 1e6)},
                    {"min_spacing_um", mk(r.min_spacing * 1e6)},
                    {"residual_force_n", mk(r.equilibrium.gradient_norm)}});
  std::printf("N=%zu  wall %.3f kHz  energy %.9e J  %s  radius %.3f um\n",
              cfg.n_ions, cfg.trap.wall_frequency_hz * 1e-3,
              r.equilibrium.energy,
              r.equilibrium.planar ? "planar" : "non-planar", r.radius * 1e6);
  return 0;
}

int cmd_modes(const CommonOptions &o) {
  const ExperimentConfig cfg = o.load();
  const ModeReport r = compute_modes(cfg);
  const fs::path dir(o.out);
  const OutputHeader h = header_for("modes", cfg);
  write_modes_csv(dir / "modes.csv", h, *r.modes);
  if (cfg.outputs.eigenvectors) {
    write_modes_binary(dir / "modes.bin", h, *r.modes);
  }
  for (Branch b : {Branch::Drumhead, Branch::ExB, Branch::Cyclotron}) {
    const Eigen::VectorXd f = r.modes->branch_frequencies(b) / constants::two_pi;
    std::printf("%-9s %3zu modes  %.4f .. %.4f kHz\n",
                std::string(branch_name(b)).c_str(),
                static_cast<std::size_t>(f.size()), f.minCoeff() * 1e-3,
                f.maxCoeff() * 1e-3);
  }
  std::printf("branches_overlap %s\n",
              r.modes->branches_overlap() ? "true" : "false");
  return 0;
}

void write_evolve_outputs(const fs::path &dir, const ExperimentConfig &cfg,
                          const EvolveReport &rep, const std::string &command) {
  const OutputHeader h = header_for(command, cfg, rep.seeds);
  write_diagnostics_csv(dir / "diagnostics.csv", h, rep.result.diagnostics);
  std::vector<std::pair<std::string, std::string>> kv{
      {"KE_perp_mK", mk(rep.summary.ke_perp_mk)},
      {"KE_par_mK", mk(rep.summary.ke_par_mk)},
      {"PE_mK", mk(rep.summary.pe_mk)},
      {"summary_window_s", mk(cfg.run.summary_window_s)},
      {"reconfigured", rep.result.reconfigured ? "true" : "false"},
      {"reconfiguration_time_s",
       rep.result.reconfigured ? mk(rep.result.reconfiguration_time) : "nan"},
      {"scattering_events", std::to_string(rep.result.scattering_events)}};
  if (rep.spectrum) {
    write_spectrum_csv(dir / "spectrum.csv", h, rep.spectrum->psd);
    write_peaks_csv(dir / "peaks.csv", h, *rep.spectrum);
    kv.push_back({"peaks_detected", std::to_string(rep.spectrum->detected_count)});
    kv.push_back({"peaks_predicted",
                  std::to_string(rep.spectrum->predicted_hz.size())});
  }
  write_key_values(dir / "summary.csv", h, kv);
}

int run_evolve(const CommonOptions &o, bool force_spectrum,
               const std::string &command) {
  ExperimentConfig cfg = o.load();
  if (force_spectrum) {
    cfg.spectrum.enabled = true;
    cfg.validate();
  }
  const fs::path dir(o.out);
  std::optional<TrajectoryWriter> traj;
  TrajectoryObserver observer;
  if (cfg.outputs.trajectory) {
    traj.emplace(dir / "trajectory.bin",
                 header_for(command, cfg, RunSeeds::from(cfg.run.seed)),
                 cfg.n_ions, cfg.outputs.trajectory_interval_s);
    observer = [&traj](double, const Coords &x) { traj->append(x); };
  }
  const EvolveReport rep = evolve(cfg, observer);
  if (traj) {
    traj->close();
  }
  write_evolve_outputs(dir, cfg, rep, command);
  std::printf("last %.3g ms: KE_perp %.4f mK  KE_par %.4f mK  PE %.4f mK%s\n",
              cfg.run.summary_window_s * 1e3, rep.summary.ke_perp_mk,
              rep.summary.ke_par_mk, rep.summary.pe_mk,
              rep.result.reconfigured ? "  (reconfigured)" : "");
  if (rep.spectrum) {
    std::printf("spectrum: %zu of %zu predicted drumhead peaks detected\n",
                rep.spectrum->detected_count, rep.spectrum->predicted_hz.size());
  }
  return 0;
}

int cmd_scan(const CommonOptions &o) {
  const ExperimentConfig cfg = o.load();
  if (!cfg.scan) {
    throw ConfigError("scan needs a scan section (config or recipe)");
  }
  const fs::path dir(o.out);
  const std::size_t points = cfg.scan->wall_frequencies_hz.size();
  std::size_t done = 0;
  auto hook = [&](const ScanRow &row, const EvolveReport *rep) {
    ++done;
    if (row.ok) {
      std::fprintf(stderr,
                   "[%zu/%zu] %.3f kHz: KE_par %.4f mK  PE %.4f mK\n", done,
                   points, row.wall_frequency_hz * 1e-3, row.summary.ke_par_mk,
                   row.summary.pe_mk);
    } else {
      std::fprintf(stderr, "[%zu/%zu] %.3f kHz failed: %s\n", done, points,
                   row.wall_frequency_hz * 1e-3, row.error.c_str());
    }
    if (rep && cfg.outputs.diagnostics_per_point) {
      const ExperimentConfig point = scan_point_config(cfg, row.index);
      write_diagnostics_csv(
          dir / ("diagnostics_" + std::to_string(row.index) + ".csv"),
          header_for("scan", point, rep->seeds), rep->result.diagnostics);
    }
  };
  const auto rows = run_scan(cfg, o.jobs, hook);
  write_scan_csv(dir / "scan.csv", header_for("scan", cfg), rows);
  const bool any_ok =
      std::any_of(rows.begin(), rows.end(), [](const ScanRow &r) { return r.ok; });
  if (!any_ok) {
    std::fprintf(stderr, "error: every scan point failed\n");
    return 1;
  }
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"MD simulation and analysis of planar ion crystals in a "
               "Penning trap"};
  app.require_subcommand(1);
  bool list_recipes = false;
  app.add_flag("--list-recipes", list_recipes, "print recipe names and exit");

  CommonOptions opts;
  auto *eq = app.add_subcommand("equilibrium", "find the crystal equilibrium");
  auto *modes = app.add_subcommand("modes", "normal-mode table and vectors");
  auto *ev = app.add_subcommand("evolve", "time evolution with diagnostics");
  auto *scan = app.add_subcommand("scan", "wall-frequency scan");
  auto *spectrum = app.add_subcommand("spectrum", "evolve, then axial spectrum");
  for (auto *cmd : {eq, modes, ev, scan, spectrum}) {
    add_common(cmd, opts);
  }

  if (argc > 1 && std::string(argv[1]) == "--list-recipes") {
    for (const auto &n : recipe_names()) {
      std::cout << n << '\n';
    }
    return 0;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*eq) {
      return cmd_equilibrium(opts);
    }
    if (*modes) {
      return cmd_modes(opts);
    }
    if (*ev) {
      return run_evolve(opts, false, "evolve");
    }
    if (*scan) {
      return cmd_scan(opts);
    }
    return run_evolve(opts, true, "spectrum");
  } catch (const ConfigError &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ComputeError &e) {
    std::fprintf(stderr, "compute error: %s\n", e.what());
    return 1;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
