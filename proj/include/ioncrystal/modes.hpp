#pragma once

#include "ioncrystal/equilibrium.hpp"

#include <complex>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ioncrystal {

enum class Branch { Drumhead, ExB, Cyclotron };

std::string_view branch_name(Branch branch);

/// Hessian of the full rotating-frame potential at an equilibrium, J/m^2,
/// indexed component-major ([x_1..x_N, y_1..y_N, z_1..z_N]).
struct HessianData {
  Eigen::MatrixXd matrix;
  UnitSystem units;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows() / 3); }
  Eigen::MatrixXd axial() const;
  Eigen::MatrixXd planar() const;
};

/// Throws ComputeError for a non-planar equilibrium.
HessianData total_hessian(const EquilibriumConfig &eq, const TrapParams &trap,
                          const SpeciesParams &species);

struct DrumheadModes {
  Eigen::VectorXd frequencies; // rad/s, descending (centre of mass first)
  Eigen::MatrixXd vectors;     // N x N, orthonormal columns
};

/// Throws ComputeError if the axial block has a negative eigenvalue.
DrumheadModes drumhead_modes(const HessianData &h, const SpeciesParams &species);

/// In-plane modes of the rotating-frame gyroscopic problem.
struct PlanarModes {
  Eigen::VectorXd frequencies; // 2N, rad/s ascending: N ExB then N cyclotron
  /// Columns are orthonormal eigenvectors of the symmetrised first-order
  /// system in the coordinates y = (K^1/2 q, sqrt(m) v).
  Eigen::MatrixXcd vectors;
  Eigen::MatrixXd stiffness_sqrt;     // K^1/2, 2N x 2N
  Eigen::MatrixXd stiffness_inv_sqrt; // K^-1/2
};

PlanarModes planar_modes(const HessianData &h, const TrapParams &trap,
                         const SpeciesParams &species);

struct BranchTemperatures {
  double t_drumhead = 0.0; // K
  double t_exb = 0.0;
  double t_cyclotron = 0.0;
};

/// The 3N normal modes of a planar crystal, ordered drumhead (descending),
/// ExB (ascending), cyclotron (ascending).
class ModeDecomposition {
public:
  ModeDecomposition(const EquilibriumConfig &eq, const TrapParams &trap,
                    const SpeciesParams &species);

  std::size_t size() const { return n_; }
  std::size_t mode_count() const { return 3 * n_; }
  const Eigen::VectorXd &frequencies() const { return frequencies_; }
  const std::vector<Branch> &branches() const { return branches_; }
  const EquilibriumConfig &equilibrium() const { return eq_; }
  const TrapParams &trap() const { return trap_; }
  const SpeciesParams &species() const { return species_; }

  /// Frequencies of one branch in the decomposition's order.
  Eigen::VectorXd branch_frequencies(Branch branch) const;
  /// True when the drumhead band dips into the ExB band.
  bool branches_overlap() const;

  /// Complex phase-space vector w (6N: q_x, q_y, q_z in m then v_x, v_y, v_z
  /// in m/s, rotating frame) such that the real displacement 2 Re(c w) holds
  /// energy |c|^2 joules in mode k.
  Eigen::VectorXcd phase_space_vector(std::size_t k) const;

  /// Per-mode energies (J) of a rotating-frame displacement q (m) and
  /// velocity v (m/s); they sum to 1/2 m v.v + 1/2 q.H.q.
  Eigen::VectorXd project(const Coords &q, const Coords &v) const;

  /// Inverse of `project` for prescribed energies (J) and phases.
  void synthesize(const Eigen::VectorXd &energies, const Eigen::VectorXd &phases,
                  Coords &q, Coords &v) const;

private:
  std::size_t n_ = 0;
  EquilibriumConfig eq_;
  TrapParams trap_;
  SpeciesParams species_;
  UnitSystem units_;
  Eigen::VectorXd frequencies_; // rad/s
  std::vector<Branch> branches_;
  // Dimensionless internals.
  Eigen::VectorXd axial_freq_;
  Eigen::MatrixXd axial_vec_;
  Eigen::VectorXd planar_freq_;
  Eigen::MatrixXcd planar_vec_;
  Eigen::MatrixXd k_sqrt_;
  Eigen::MatrixXd k_inv_sqrt_;
};

struct ModeEnergies {
  Eigen::VectorXd energies; // J, decomposition order
  BranchTemperatures temperatures;
  bool reconfiguration_warning = false;
};

/// Projects a lab-frame state onto the modes. `sanity_bound` is the largest
/// believable single-mode energy in joules; beyond it the crystal has most
/// likely reorganised and `reconfiguration_warning` is set.
ModeEnergies mode_energies(const CrystalState &state,
                           const ModeDecomposition &dec,
                           double sanity_bound = constants::boltzmann * 1.0);

BranchTemperatures branch_temperatures(const ModeDecomposition &dec,
                                       const Eigen::VectorXd &energies);

/// Lab-frame state at t = 0 with every mode of a branch holding k_B T of that
/// branch and uniformly random phases.
CrystalState synthesize_thermal_state(const ModeDecomposition &dec,
                                      const BranchTemperatures &temps,
                                      std::uint64_t rng_seed);

} // namespace ioncrystal
