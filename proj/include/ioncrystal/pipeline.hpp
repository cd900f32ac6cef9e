#pragma once

#include "ioncrystal/experiment.hpp"
#include "ioncrystal/modes.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ioncrystal {

struct EquilibriumReport {
  TrapParams trap;
  SpeciesParams species;
  EquilibriumConfig equilibrium;
  double radius = 0.0;      // m
  double min_spacing = 0.0; // m, infinite for one ion
};

EquilibriumReport compute_equilibrium(const ExperimentConfig &cfg);

struct ModeReport {
  std::shared_ptr<const EquilibriumConfig> equilibrium;
  std::shared_ptr<const ModeDecomposition> modes;
};

/// Throws ComputeError when the equilibrium is not planar.
ModeReport compute_modes(const ExperimentConfig &cfg);

struct SpectrumReport {
  SpectrumResult psd;
  /// Highest drumhead frequencies (Hz), descending, and whether each has a
  /// detected peak.
  std::vector<double> predicted_hz;
  std::vector<bool> detected;
  std::size_t detected_count = 0;
};

/// Last-window averages of the diagnostics, in mK.
struct RunSummary {
  double ke_perp_mk = 0.0;
  double ke_par_mk = 0.0;
  double pe_mk = 0.0;
};

struct EvolveReport {
  RunSeeds seeds;
  TrapParams trap;
  RunResult result;
  RunSummary summary;
  std::optional<SpectrumReport> spectrum;
};

/// RunConfig for `cfg` (equilibrium left empty for run() to find).
RunConfig make_run_config(const ExperimentConfig &cfg, const RunSeeds &seeds);

/// Thermal run followed, when `cfg.spectrum.enabled`, by the axial spectrum
/// acquisition. `trajectory` receives frames of the main run only.
EvolveReport evolve(const ExperimentConfig &cfg,
                    const TrajectoryObserver &trajectory = {});

/// Acquires z(t) from `start` and analyses it against the drumhead modes.
SpectrumReport acquire_spectrum(const ExperimentConfig &cfg,
                                const CrystalState &start,
                                std::shared_ptr<const EquilibriumConfig> eq,
                                const RunSeeds &seeds);

struct ScanRow {
  std::size_t index = 0;
  double wall_frequency_hz = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunSummary summary;
  bool reconfigured = false;
  std::uint64_t scattering_events = 0;
};

/// Called once per finished point, serialized across workers. `report` is
/// null for a failed point.
using ScanHook = std::function<void(const ScanRow &row,
                                    const EvolveReport *report)>;

/// Runs every scan point on up to `jobs` worker threads. Rows come back in
/// scan order; failures are recorded per row.
std::vector<ScanRow> run_scan(const ExperimentConfig &cfg, unsigned jobs,
                              const ScanHook &hook = {});

} // namespace ioncrystal
