#pragma once

#include "ioncrystal/equilibrium.hpp"
#include "ioncrystal/forces.hpp"

namespace ioncrystal {

namespace kernels {

/// Second derivatives of the dimensionless Coulomb energy, 3N x 3N, indexed
/// component-major (x block, y block, z block). With `include_trap` the
/// diagonal trap stiffnesses (beta+delta, beta-delta, 1) are added, giving
/// the Hessian of the full rotating-frame potential.
Eigen::MatrixXd rotating_hessian(const ScaledTrap &trap, const Coords &x_rot,
                                 bool include_trap);

} // namespace kernels

/// Second-order expansion of the Coulomb energy about an equilibrium:
/// F = -J - H q, with q the rotating-frame displacement from equilibrium.
class LinearizedCoulomb {
public:
  LinearizedCoulomb(const EquilibriumConfig &eq, const TrapParams &trap,
                    const SpeciesParams &species);

  std::size_t size() const { return static_cast<std::size_t>(eq_.rows()); }

  /// dU_C/dx at equilibrium, 3N entries in newtons.
  Eigen::VectorXd jacobian() const;
  /// Coulomb-only Hessian at equilibrium, 3N x 3N in N/m.
  Eigen::MatrixXd hessian() const;

  /// Dimensionless lab-frame linearized Coulomb acceleration at scaled time t.
  void scaled_field(double t, const Coords &x_lab, Coords &field) const;

  const ScaledTrap &scaled_trap() const { return trap_; }

private:
  ScaledTrap trap_;
  Coords eq_;            // l0
  Eigen::VectorXd jac_;  // dimensionless
  Eigen::MatrixXd hess_; // dimensionless, full
  // Planar equilibria decouple in-plane and axial blocks.
  bool blocked_ = false;
  Eigen::MatrixXd planar_block_;
  Eigen::MatrixXd axial_block_;
};

/// Linearized Coulomb force on `state` (lab frame, newtons).
Coords linearized_coulomb_force(const CrystalState &state,
                                const LinearizedCoulomb &lin);

} // namespace ioncrystal
