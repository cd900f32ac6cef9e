#pragma once

#include "ioncrystal/core.hpp"

#include <memory>

namespace ioncrystal {

class LinearizedCoulomb;

enum class CoulombMode { Full, Linearized };

/// Everything needed to evaluate the lab-frame force on a crystal.
/// Linearized mode needs `linearization` (see linear_dynamics.hpp).
struct ForceField {
  TrapParams trap;
  SpeciesParams species;
  CoulombMode coulomb_mode = CoulombMode::Full;
  std::shared_ptr<const LinearizedCoulomb> linearization;

  void validate() const;
};

/// Positions and velocities measured in the frame co-rotating with the wall.
struct RotatingState {
  double time = 0.0;
  Coords positions;  // m
  Coords velocities; // m/s, relative to the rotating frame
};

/// Pairwise Coulomb energy, k_e q^2 sum_{i<j} 1/|x_i - x_j|. Throws
/// ComputeError for coincident ions.
double coulomb_potential(const Coords &positions,
                         double charge = constants::elementary_charge);

/// Negative gradient of coulomb_potential.
Coords coulomb_force(const Coords &positions,
                     double charge = constants::elementary_charge);

/// Static quadrupole + rotating wall + Lorentz force + Coulomb force (full or
/// linearized according to the field), in newtons.
Coords lab_frame_force(const CrystalState &state, const ForceField &field);

/// Lab -> rotating frame. Positions are rotated by the wall phase
/// omega_r * t; velocities become time derivatives of the rotated
/// coordinates, so a crystal in steady rotation at omega_r has zero velocity.
RotatingState to_rotating_frame(const CrystalState &state, double omega_r);
CrystalState from_rotating_frame(const RotatingState &state, double omega_r);

/// Trap + wall + Coulomb energy in the rotating frame, in joules.
double rotating_potential_energy(const Coords &positions_rot,
                                 const TrapParams &trap,
                                 const SpeciesParams &species);

/// Dimensionless kernels (see UnitSystem). Positions in l0, energies in
/// m wz^2 l0^2, accelerations in wz^2 l0.
namespace kernels {

double coulomb_energy(const Coords &x);

/// Overwrites `field` with the Coulomb acceleration on every ion.
void coulomb_field(const Coords &x, Coords &field);

/// Trap part of the rotating-frame potential (no Coulomb).
double trap_energy(const ScaledTrap &trap, const Coords &x_rot);

double rotating_energy(const ScaledTrap &trap, const Coords &x_rot);

/// Returns the rotating-frame energy and writes its gradient.
double rotating_energy_gradient(const ScaledTrap &trap, const Coords &x_rot,
                                Coords &gradient);

/// In-place planar rotation: (x, y) -> (cos a x - sin a y, sin a x + cos a y).
void rotate_planar(Coords &c, double cos_a, double sin_a);

/// Electrostatic trap and wall acceleration in the lab frame at time t,
/// written into `accel` (Coulomb not included).
void trap_acceleration(const ScaledTrap &trap, double t, const Coords &x,
                       Coords &accel);

} // namespace kernels

} // namespace ioncrystal
