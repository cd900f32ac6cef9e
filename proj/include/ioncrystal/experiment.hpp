#pragma once

#include "ioncrystal/equilibrium.hpp"
#include "ioncrystal/forces.hpp"
#include "ioncrystal/integrator.hpp"
#include "ioncrystal/laser_cooling.hpp"
#include "ioncrystal/spectra.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ioncrystal {

/// Beam sets selectable by name in the config.
enum class BeamPreset { Nist, NistAxial, NistPlanar, Custom };

struct SpeciesSettings {
  double mass_amu = 9.012182;
  double charge_e = 1.0;
  double wavelength_m = 313e-9;
  double linewidth_hz = 18e6; // gamma0 / 2 pi
};

struct TrapSettings {
  double b_field_t = 4.4588;
  double axial_frequency_hz = 1.58e6;
  double wall_frequency_hz = 180e3;
  double delta_over_beta = 0.25;
};

struct InitialTemperatures {
  double drumhead_mk = 0.0;
  double exb_mk = 0.0;
  double cyclotron_mk = 0.0;
  /// Lower bound applied to each branch before synthesis. An exactly flat
  /// crystal never leaves the plane (every axial force is proportional to
  /// some z), so a zero drumhead branch is given this tiny seed instead.
  double floor_mk = 1e-12;
};

struct RunSettings {
  CoulombMode coulomb = CoulombMode::Full;
  double dt_s = 1e-9;
  double t_final_s = 1e-3;
  double sample_interval_s = 1e-6;
  std::uint64_t seed = 1;
  InitialTemperatures initial;
  double mode_sanity_bound_k = 1.0;
  double reconfiguration_persistence_s = 200e-6;
  /// Trailing window for summary averages.
  double summary_window_s = 1e-3;
};

struct CoolingSettings {
  bool enabled = false;
  BeamPreset preset = BeamPreset::Nist;
  std::vector<LaserBeam> beams; // Custom only; wavevector set from species
  double max_step_probability = 0.1;
};

struct ScanSettings {
  std::vector<double> wall_frequencies_hz;
  /// Optional merge patch per point (empty, or one per frequency).
  std::vector<nlohmann::json> overrides;
};

struct SpectrumSettings {
  bool enabled = false;
  double duration_s = 2e-3;
  double sample_dt_s = 2e-8;
  std::size_t segments = 3;
  bool lasers_on = false;
  double max_resolution_hz = 2e3;
  double peak_halfwidth_hz = 2e3;
  double peak_threshold = 3.0;
  std::size_t predicted_count = 10;
};

struct OutputSettings {
  bool trajectory = false;
  double trajectory_interval_s = 1e-6;
  bool eigenvectors = true;
  bool diagnostics_per_point = false;
};

struct ExperimentConfig {
  std::string recipe; // informational; empty when none
  std::size_t n_ions = 54;
  SpeciesSettings species;
  TrapSettings trap;
  EquilibriumOptions equilibrium;
  RunSettings run;
  CoolingSettings cooling;
  std::optional<ScanSettings> scan;
  SpectrumSettings spectrum;
  OutputSettings outputs;

  SpeciesParams species_params() const;
  TrapParams trap_params() const;
  /// Trap retuned to another wall frequency at the same delta/beta.
  TrapParams trap_params(double wall_frequency_hz) const;
  CoolingConfig cooling_config(std::uint64_t rng_seed) const;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// Seeds of one run, all derived from `run`.
struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t thermal = 0;
  std::uint64_t lasers = 0;

  static RunSeeds from(std::uint64_t run_seed);
};

/// Seed of scan point `index`; evolving that point alone with this seed
/// reproduces its row.
std::uint64_t scan_point_seed(std::uint64_t parent, std::size_t index);

nlohmann::json to_json(const ExperimentConfig &cfg);
/// Strict: unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the offending key.
ExperimentConfig from_json(const nlohmann::json &j);

std::vector<std::string> recipe_names();
/// Merge patch over the defaults. Throws ConfigError for unknown names.
nlohmann::json recipe_patch(const std::string &name);

/// Override of one dotted key path, e.g. {"trap.wall_frequency_hz", "2e5"}.
/// The value is parsed as JSON, falling back to a plain string.
struct KeyOverride {
  std::string path;
  std::string value;
};

/// defaults <- recipe <- config file <- overrides, then strict parse.
ExperimentConfig load_experiment(const std::string &recipe,
                                 const std::string &config_path,
                                 const std::vector<KeyOverride> &overrides = {});

/// Same chain starting from an in-memory patch instead of a file.
ExperimentConfig resolve_experiment(const std::string &recipe,
                                    const nlohmann::json &patch,
                                    const std::vector<KeyOverride> &overrides = {});

/// Configuration of scan point `index` (per-point override applied, scan
/// section removed, wall frequency and seed set for that point).
ExperimentConfig scan_point_config(const ExperimentConfig &cfg,
                                   std::size_t index);

} // namespace ioncrystal
