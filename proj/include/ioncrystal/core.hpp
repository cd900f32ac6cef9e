#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ioncrystal {

namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;    // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
inline constexpr double boltzmann = 1.380649e-23;               // J/K
inline constexpr double hbar = 1.054571817e-34;                 // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27;   // kg
inline constexpr double coulomb_constant =
    1.0 / (4.0 * std::numbers::pi * vacuum_permittivity);
inline constexpr double two_pi = 2.0 * std::numbers::pi;
} // namespace constants

/// N x 3 block of Cartesian coordinates. Column-major, so each component
/// (x, y or z of all ions) is contiguous and a flattened view is ordered
/// [x_1..x_N, y_1..y_N, z_1..z_N].
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Invalid input or configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a valid result (CLI exit code 1).
class ComputeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SpeciesParams {
  double mass = 0.0;                  // kg
  double charge = 0.0;                // C
  double transition_wavelength = 0.0; // m
  double natural_linewidth = 0.0;     // rad/s

  double wavevector() const {
    return constants::two_pi / transition_wavelength;
  }
  void validate() const;
};

struct TrapParams {
  double b_field = 0.0; // T, along +z
  double omega_z = 0.0; // rad/s
  double omega_r = 0.0; // rad/s, rotating wall
  double delta = 0.0;   // wall anisotropy, dimensionless

  void validate(const SpeciesParams &species) const;
};

double cyclotron_frequency(const TrapParams &trap,
                           const SpeciesParams &species);

/// Planar confinement strength relative to the axial one in the frame
/// rotating with the wall. Throws ConfigError unless 0 < omega_r < omega_c.
double beta_from_wall(const TrapParams &trap, const SpeciesParams &species);

/// Copy of `trap` retuned to `omega_r`, with delta recomputed from the
/// ratio delta/beta at the new wall frequency.
TrapParams with_wall_frequency(TrapParams trap, const SpeciesParams &species,
                               double omega_r, double delta_over_beta);

struct NistParams {
  SpeciesParams species;
  TrapParams trap;
};

/// 9Be+ in the NIST Penning trap. The wall anisotropy is set from
/// `delta_over_beta` at the requested wall frequency.
NistParams default_nist_params(double omega_r = constants::two_pi * 180e3,
                               double delta_over_beta = 0.25);

/// hbar*gamma0 / (2 k_B).
double doppler_limit(const SpeciesParams &species);

/// The single energy <-> temperature conversion, T = E / (N k_B).
inline double energy_to_temperature(double energy, std::size_t n_ions) {
  return energy / (static_cast<double>(n_ions) * constants::boltzmann);
}
inline double temperature_to_energy(double temperature, std::size_t n_ions) {
  return temperature * static_cast<double>(n_ions) * constants::boltzmann;
}

/// Natural scales of a trapped ion: lengths in l0 = (k_e q^2 / (m wz^2))^(1/3),
/// times in 1/wz, masses in m. In these units the Coulomb pair energy is 1/r
/// and the axial restoring force is -z.
struct UnitSystem {
  double length = 1.0; // m
  double time = 1.0;   // s
  double mass = 1.0;   // kg

  static UnitSystem for_trap(const TrapParams &trap,
                             const SpeciesParams &species);

  double velocity() const { return length / time; }
  double energy() const { return mass * velocity() * velocity(); }
  double force() const { return energy() / length; }
  double frequency() const { return 1.0 / time; }
  double stiffness() const { return energy() / (length * length); }
};

struct CrystalState {
  double time = 0.0;  // s
  Coords positions;   // m, lab frame
  Coords velocities;  // m/s, lab frame

  std::size_t size() const { return static_cast<std::size_t>(positions.rows()); }
  /// Throws ComputeError on empty, mismatched or non-finite data.
  void validate() const;
};

/// Wall frequency parameters expressed in the natural units of `UnitSystem`.
struct ScaledTrap {
  UnitSystem units;
  double cyclotron = 0.0; // omega_c / omega_z
  double rotation = 0.0;  // omega_r / omega_z
  double beta = 0.0;
  double delta = 0.0;

  static ScaledTrap from(const TrapParams &trap, const SpeciesParams &species);
};

} // namespace ioncrystal
