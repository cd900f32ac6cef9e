#pragma once

#include "ioncrystal/equilibrium.hpp"
#include "ioncrystal/forces.hpp"
#include "ioncrystal/laser_cooling.hpp"
#include "ioncrystal/modes.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace ioncrystal {

/// One step of length dt (s) under `field`, without lasers: half electric
/// kick, exact magnetic gyration over dt (position and velocity), half kick.
/// Second order; speed is conserved exactly in a pure magnetic field.
CrystalState step(const CrystalState &state, const ForceField &field,
                  double dt);

/// Every mode of each branch at its branch temperature, random phases.
struct ThermalInit {
  BranchTemperatures temperatures;
  std::uint64_t seed = 0;
};

struct ExplicitInit {
  CrystalState state;
};

using InitialState = std::variant<ThermalInit, ExplicitInit>;

/// Called at every trajectory sample with the time (s) and lab-frame
/// positions (m).
using TrajectoryObserver = std::function<void(double, const Coords &)>;

struct RunConfig {
  std::size_t n_ions = 0;
  TrapParams trap;
  SpeciesParams species;
  CoulombMode coulomb_mode = CoulombMode::Full;
  std::optional<CoolingConfig> cooling;
  double dt = 1e-9;               // s
  double t_final = 0.0;           // s
  double sample_interval = 1e-6;  // s
  InitialState initial = ThermalInit{};

  /// Equilibrium to start from; found with `equilibrium_options` when empty.
  std::shared_ptr<const EquilibriumConfig> equilibrium;
  EquilibriumOptions equilibrium_options;
  /// Reconfiguration tripwire: some mode energy (J) above the bound, or an
  /// ion nearer another ion's site than its own (rigid rotation removed) for
  /// at least the persistence time (s). Afterwards branch temperatures are
  /// no longer reported.
  double mode_sanity_bound = constants::boltzmann * 1.0;
  double reconfiguration_persistence = 200e-6;
  /// Bound on omega_c * dt.
  double max_cyclotron_phase = 0.1;

  double trajectory_interval = 0.0; // s; 0 disables the observer
  TrajectoryObserver trajectory;

  void validate() const;
  std::size_t steps_per_sample() const;
  std::size_t total_samples() const;
};

/// Sampled diagnostics. Energies are temperatures E / (N k_B) in K.
struct DiagnosticsSeries {
  std::vector<double> times; // s
  std::vector<double> ke_perp;
  std::vector<double> ke_par;
  std::vector<double> pe;
  /// Empty when the run has no planar mode decomposition; NaN after the
  /// reconfiguration detector trips.
  std::vector<double> t_drumhead;
  std::vector<double> t_exb;
  std::vector<double> t_cyclotron;
  std::vector<double> event_rate; // scattering events per second
  /// Rotating-frame energy E_rot = sum 1/2 m |v'|^2 + U_r, J.
  std::vector<double> rotating_energy;

  bool has_branch_temperatures() const { return !t_drumhead.empty(); }
  std::size_t size() const { return times.size(); }
};

struct RunResult {
  DiagnosticsSeries diagnostics;
  CrystalState final_state;
  std::shared_ptr<const EquilibriumConfig> equilibrium;
  bool reconfigured = false;
  double reconfiguration_time = 0.0; // s, valid when reconfigured
  std::uint64_t scattering_events = 0;
};

RunResult run(const RunConfig &cfg);

/// Largest |E_rot(t) - E_rot(0)| relative to the excitation energy
/// E_rot(0) - U_r(equilibrium).
double relative_energy_drift(const RunResult &result);

/// Mean of `series` over samples with time >= times.back() - window.
double tail_average(const std::vector<double> &times,
                    const std::vector<double> &series, double window);

} // namespace ioncrystal
