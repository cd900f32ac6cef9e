#include "ioncrystal/core.hpp"

#include <sstream>

namespace ioncrystal {

void SpeciesParams::validate() const {
  if (!(mass > 0.0) || !(charge > 0.0) || !(transition_wavelength > 0.0) ||
      !(natural_linewidth > 0.0)) {
    throw ConfigError("species parameters must all be strictly positive");
  }
}

void TrapParams::validate(const SpeciesParams &species) const {
  if (!(b_field > 0.0) || !(omega_z > 0.0)) {
    throw ConfigError("trap needs b_field > 0 and omega_z > 0");
  }
  if (!(delta >= 0.0)) {
    throw ConfigError("wall anisotropy delta must be >= 0");
  }
  const double beta = beta_from_wall(*this, species);
  if (!(beta > delta)) {
    std::ostringstream msg;
    msg << "planar confinement requires beta > delta >= 0 (beta=" << beta
        << ", delta=" << delta << ")";
    throw ConfigError(msg.str());
  }
}

double cyclotron_frequency(const TrapParams &trap,
                           const SpeciesParams &species) {
  return species.charge * trap.b_field / species.mass;
}

double beta_from_wall(const TrapParams &trap, const SpeciesParams &species) {
  const double wc = cyclotron_frequency(trap, species);
  if (!(trap.omega_r > 0.0) || !(trap.omega_r < wc)) {
    std::ostringstream msg;
    msg << "wall frequency " << trap.omega_r
        << " rad/s outside (0, omega_c=" << wc << ")";
    throw ConfigError(msg.str());
  }
  return trap.omega_r * (wc - trap.omega_r) / (trap.omega_z * trap.omega_z) -
         0.5;
}

TrapParams with_wall_frequency(TrapParams trap, const SpeciesParams &species,
                               double omega_r, double delta_over_beta) {
  if (!(delta_over_beta >= 0.0) || !(delta_over_beta < 1.0)) {
    throw ConfigError("delta/beta must lie in [0, 1)");
  }
  trap.omega_r = omega_r;
  trap.delta = delta_over_beta * beta_from_wall(trap, species);
  return trap;
}

NistParams default_nist_params(double omega_r, double delta_over_beta) {
  NistParams p;
  p.species.mass = 9.012182 * constants::atomic_mass_unit;
  p.species.charge = constants::elementary_charge;
  p.species.transition_wavelength = 313e-9;
  p.species.natural_linewidth = constants::two_pi * 18e6;
  p.trap.b_field = 4.4588;
  p.trap.omega_z = constants::two_pi * 1.58e6;
  p.trap = with_wall_frequency(p.trap, p.species, omega_r, delta_over_beta);
  return p;
}

double doppler_limit(const SpeciesParams &species) {
  return constants::hbar * species.natural_linewidth /
         (2.0 * constants::boltzmann);
}

UnitSystem UnitSystem::for_trap(const TrapParams &trap,
                                const SpeciesParams &species) {
  UnitSystem u;
  u.mass = species.mass;
  u.time = 1.0 / trap.omega_z;
  u.length = std::cbrt(constants::coulomb_constant * species.charge *
                       species.charge /
                       (species.mass * trap.omega_z * trap.omega_z));
  return u;
}

void CrystalState::validate() const {
  if (positions.rows() == 0) {
    throw ComputeError("crystal state has no ions");
  }
  if (velocities.rows() != positions.rows()) {
    throw ComputeError("positions and velocities disagree on ion count");
  }
  if (!positions.allFinite() || !velocities.allFinite() ||
      !std::isfinite(time)) {
    throw ComputeError("crystal state contains non-finite values");
  }
}

ScaledTrap ScaledTrap::from(const TrapParams &trap,
                            const SpeciesParams &species) {
  ScaledTrap s;
  s.units = UnitSystem::for_trap(trap, species);
  s.cyclotron = cyclotron_frequency(trap, species) / trap.omega_z;
  s.rotation = trap.omega_r / trap.omega_z;
  s.beta = beta_from_wall(trap, species);
  s.delta = trap.delta;
  return s;
}

} // namespace ioncrystal
