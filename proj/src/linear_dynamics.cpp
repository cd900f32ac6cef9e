#include "ioncrystal/linear_dynamics.hpp"

namespace ioncrystal {

namespace kernels {

Eigen::MatrixXd rotating_hessian(const ScaledTrap &trap, const Coords &x_rot,
                                 bool include_trap) {
  const Eigen::Index n = x_rot.rows();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::Vector3d r = (x_rot.row(i) - x_rot.row(j)).transpose();
      const double d2 = r.squaredNorm();
      if (!(d2 > 0.0)) {
        throw ComputeError("coincident ions in Coulomb Hessian");
      }
      const double d = std::sqrt(d2);
      const double inv_d5 = 1.0 / (d2 * d2 * d);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const double t =
              (3.0 * r[a] * r[b] - (a == b ? d2 : 0.0)) * inv_d5;
          h(a * n + i, b * n + i) += t;
          h(a * n + j, b * n + j) += t;
          h(a * n + i, b * n + j) -= t;
          h(a * n + j, b * n + i) -= t;
        }
      }
    }
  }
  if (include_trap) {
    const double k[3] = {trap.beta + trap.delta, trap.beta - trap.delta, 1.0};
    for (int a = 0; a < 3; ++a) {
      for (Eigen::Index i = 0; i < n; ++i) {
        h(a * n + i, a * n + i) += k[a];
      }
    }
  }
  return h;
}

} // namespace kernels

LinearizedCoulomb::LinearizedCoulomb(const EquilibriumConfig &eq,
                                     const TrapParams &trap,
                                     const SpeciesParams &species)
    : trap_(ScaledTrap::from(trap, species)) {
  eq_ = eq.positions_rot / trap_.units.length;
  const Eigen::Index n = eq_.rows();
  Coords field;
  kernels::coulomb_field(eq_, field);
  // J = dU_C/dx = -field
  jac_ = -Eigen::Map<const Eigen::VectorXd>(field.data(), 3 * n);
  hess_ = kernels::rotating_hessian(trap_, eq_, false);

  blocked_ = hess_.block(0, 2 * n, 2 * n, n).isZero(0.0) &&
             hess_.block(2 * n, 0, n, 2 * n).isZero(0.0);
  if (blocked_) {
    planar_block_ = hess_.topLeftCorner(2 * n, 2 * n);
    axial_block_ = hess_.bottomRightCorner(n, n);
  }
}

Eigen::VectorXd LinearizedCoulomb::jacobian() const {
  return jac_ * trap_.units.force();
}

Eigen::MatrixXd LinearizedCoulomb::hessian() const {
  return hess_ * trap_.units.stiffness();
}

void LinearizedCoulomb::scaled_field(double t, const Coords &x_lab,
                                     Coords &field) const {
  const Eigen::Index n = eq_.rows();
  if (x_lab.rows() != n) {
    throw ComputeError("linearization built for a different ion count");
  }
  const double phase = trap_.rotation * t;
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  Coords q = x_lab;
  kernels::rotate_planar(q, c, s);
  q -= eq_;
  field.resize(n, 3);
  const Eigen::Map<const Eigen::VectorXd> qv(q.data(), 3 * n);
  Eigen::Map<Eigen::VectorXd> fv(field.data(), 3 * n);
  if (blocked_) {
    fv.head(2 * n).noalias() = -(planar_block_ * qv.head(2 * n));
    fv.tail(n).noalias() = -(axial_block_ * qv.tail(n));
  } else {
    fv.noalias() = -(hess_ * qv);
  }
  fv -= jac_;
  kernels::rotate_planar(field, c, -s);
}

Coords linearized_coulomb_force(const CrystalState &state,
                                const LinearizedCoulomb &lin) {
  state.validate();
  const UnitSystem &u = lin.scaled_trap().units;
  Coords field;
  lin.scaled_field(state.time / u.time, state.positions / u.length, field);
  return field * u.force();
}

} // namespace ioncrystal
