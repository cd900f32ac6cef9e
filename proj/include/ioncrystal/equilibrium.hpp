#pragma once

#include "ioncrystal/core.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace ioncrystal {

struct EquilibriumOptions {
  /// One minimisation per seed; even-indexed seeds start from a jittered
  /// triangular lattice, odd-indexed ones from random positions.
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6};
  int max_iter = 20000;
  /// Infinity norm of the residual force, in units of m wz^2 l0.
  double tol = 1e-9;
  /// max|z| below this many l0 counts as planar.
  double planarity_tol = 1e-6;
  /// Optional extra start (rotating frame, m), tried before the seeds.
  std::optional<Coords> initial_guess;
};

struct EquilibriumConfig {
  Coords positions_rot;       // m, rotating frame
  double energy = 0.0;        // J, rotating_potential_energy(positions_rot)
  double gradient_norm = 0.0; // N, infinity norm of the residual force
  bool planar = false;

  std::size_t size() const {
    return static_cast<std::size_t>(positions_rot.rows());
  }
};

/// Lowest-energy local minimum of the rotating-frame potential over all
/// seeded starts. Every returned minimum has a positive semidefinite Hessian;
/// saddle points (e.g. a planar crystal past its stability limit) are
/// escaped along their unstable direction.
EquilibriumConfig find_equilibrium(std::size_t n_ions, const TrapParams &trap,
                                   const SpeciesParams &species,
                                   const EquilibriumOptions &options = {});

/// Largest wall frequency (rad/s) with a planar equilibrium, bisected to
/// 2 pi * 50 Hz. delta is recomputed from delta/beta at every probe.
double critical_wall_frequency(std::size_t n_ions,
                               const TrapParams &trap_template,
                               const SpeciesParams &species,
                               double delta_over_beta,
                               std::pair<double, double> bracket,
                               const EquilibriumOptions &options = {});

/// Smallest distance between two ions, in the units of `positions`.
double min_pair_distance(const Coords &positions);

/// Largest planar distance from the trap axis, in the units of `positions`.
double crystal_radius(const Coords &positions);

} // namespace ioncrystal
