#include "ioncrystal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace ioncrystal {

namespace {

double millikelvin_average(const DiagnosticsSeries &d,
                           const std::vector<double> &series, double window) {
  return 1e3 * tail_average(d.times, series, window);
}

} // namespace

EquilibriumReport compute_equilibrium(const ExperimentConfig &cfg) {
  EquilibriumReport r;
  r.species = cfg.species_params();
  r.trap = cfg.trap_params();
  r.equilibrium =
      find_equilibrium(cfg.n_ions, r.trap, r.species, cfg.equilibrium);
  r.radius = crystal_radius(r.equilibrium.positions_rot);
  r.min_spacing = cfg.n_ions > 1
                      ? min_pair_distance(r.equilibrium.positions_rot)
                      : std::numeric_limits<double>::infinity();
  return r;
}

ModeReport compute_modes(const ExperimentConfig &cfg) {
  const SpeciesParams species = cfg.species_params();
  const TrapParams trap = cfg.trap_params();
  ModeReport r;
  r.equilibrium = std::make_shared<const EquilibriumConfig>(
      find_equilibrium(cfg.n_ions, trap, species, cfg.equilibrium));
  if (!r.equilibrium->planar) {
    throw ComputeError("equilibrium is not planar; normal modes are only "
                       "defined for planar crystals");
  }
  r.modes =
      std::make_shared<const ModeDecomposition>(*r.equilibrium, trap, species);
  return r;
}

RunConfig make_run_config(const ExperimentConfig &cfg, const RunSeeds &seeds) {
  RunConfig rc;
  rc.n_ions = cfg.n_ions;
  rc.species = cfg.species_params();
  rc.trap = cfg.trap_params();
  rc.coulomb_mode = cfg.run.coulomb;
  if (cfg.cooling.enabled) {
    rc.cooling = cfg.cooling_config(seeds.lasers);
  }
  rc.dt = cfg.run.dt_s;
  rc.t_final = cfg.run.t_final_s;
  rc.sample_interval = cfg.run.sample_interval_s;
  const auto &t = cfg.run.initial;
  const auto kelvin = [&](double mk) { return 1e-3 * std::max(mk, t.floor_mk); };
  ThermalInit init;
  init.temperatures = {kelvin(t.drumhead_mk), kelvin(t.exb_mk),
                       kelvin(t.cyclotron_mk)};
  init.seed = seeds.thermal;
  rc.initial = init;
  rc.equilibrium_options = cfg.equilibrium;
  rc.mode_sanity_bound = constants::boltzmann * cfg.run.mode_sanity_bound_k;
  rc.reconfiguration_persistence = cfg.run.reconfiguration_persistence_s;
  return rc;
}

SpectrumReport acquire_spectrum(const ExperimentConfig &cfg,
                                const CrystalState &start,
                                std::shared_ptr<const EquilibriumConfig> eq,
                                const RunSeeds &seeds) {
  const auto &sc = cfg.spectrum;
  RunConfig rc = make_run_config(cfg, seeds);
  rc.cooling.reset();
  if (sc.lasers_on) {
    rc.cooling = cfg.cooling_config(derive_seed(seeds.run, 3));
  }
  rc.t_final = sc.duration_s;
  rc.initial = ExplicitInit{start};
  rc.equilibrium = eq;

  std::vector<Eigen::VectorXd> frames;
  frames.reserve(static_cast<std::size_t>(sc.duration_s / sc.sample_dt_s) + 2);
  rc.trajectory_interval = sc.sample_dt_s;
  rc.trajectory = [&frames](double, const Coords &x) {
    frames.emplace_back(x.col(2));
  };
  run(rc);

  Eigen::MatrixXd z(static_cast<Eigen::Index>(cfg.n_ions),
                    static_cast<Eigen::Index>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    z.col(static_cast<Eigen::Index>(t)) = frames[t];
  }
  frames.clear();

  SpectrumOptions so;
  so.segments = sc.segments;
  so.max_resolution = sc.max_resolution_hz;
  SpectrumReport rep;
  rep.psd = drumhead_spectrum(z, sc.sample_dt_s, so);

  if (!eq->planar) {
    return rep; // no modes to compare against
  }
  const ModeDecomposition dec(*eq, rc.trap, rc.species);
  const Eigen::VectorXd drum = dec.branch_frequencies(Branch::Drumhead) /
                               constants::two_pi;
  const auto count = std::min<std::size_t>(
      sc.predicted_count, static_cast<std::size_t>(drum.size()));
  rep.predicted_hz.assign(drum.data(), drum.data() + count);
  PeakOptions po;
  po.search_halfwidth = sc.peak_halfwidth_hz;
  po.threshold_factor = sc.peak_threshold;
  po.band_low = drum.minCoeff() - sc.peak_halfwidth_hz;
  po.band_high = drum.maxCoeff() + sc.peak_halfwidth_hz;
  rep.detected = detect_peaks(rep.psd, rep.predicted_hz, po);
  rep.detected_count = static_cast<std::size_t>(
      std::count(rep.detected.begin(), rep.detected.end(), true));
  return rep;
}

EvolveReport evolve(const ExperimentConfig &cfg,
                    const TrajectoryObserver &trajectory) {
  EvolveReport rep;
  rep.seeds = RunSeeds::from(cfg.run.seed);
  RunConfig rc = make_run_config(cfg, rep.seeds);
  rep.trap = rc.trap;
  if (trajectory) {
    rc.trajectory_interval = cfg.outputs.trajectory_interval_s;
    rc.trajectory = trajectory;
  }
  rep.result = run(rc);
  const auto &d = rep.result.diagnostics;
  const double w = cfg.run.summary_window_s;
  rep.summary.ke_perp_mk = millikelvin_average(d, d.ke_perp, w);
  rep.summary.ke_par_mk = millikelvin_average(d, d.ke_par, w);
  rep.summary.pe_mk = millikelvin_average(d, d.pe, w);
  if (cfg.spectrum.enabled) {
    rep.spectrum = acquire_spectrum(cfg, rep.result.final_state,
                                    rep.result.equilibrium, rep.seeds);
  }
  return rep;
}

std::vector<ScanRow> run_scan(const ExperimentConfig &cfg, unsigned jobs,
                              const ScanHook &hook) {
  if (!cfg.scan) {
    throw ConfigError("config has no scan section");
  }
  const std::size_t points = cfg.scan->wall_frequencies_hz.size();
  std::vector<ScanRow> rows(points);
  std::atomic<std::size_t> next{0};
  std::mutex hook_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < points; i = next++) {
      ScanRow &row = rows[i];
      row.index = i;
      row.wall_frequency_hz = cfg.scan->wall_frequencies_hz[i];
      row.seed = scan_point_seed(cfg.run.seed, i);
      std::optional<EvolveReport> rep;
      try {
        const ExperimentConfig point = scan_point_config(cfg, i);
        row.wall_frequency_hz = point.trap.wall_frequency_hz;
        row.seed = point.run.seed;
        rep = evolve(point);
        row.ok = true;
        row.summary = rep->summary;
        row.reconfigured = rep->result.reconfigured;
        row.scattering_events = rep->result.scattering_events;
      } catch (const std::exception &e) {
        row.ok = false;
        row.error = e.what();
      }
      if (hook) {
        std::lock_guard lock(hook_mutex);
        hook(row, rep ? &*rep : nullptr);
      }
    }
  };

  const unsigned n_workers = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, jobs), points));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
      pool.emplace_back(worker);
    }
  }
  return rows;
}

} // namespace ioncrystal
