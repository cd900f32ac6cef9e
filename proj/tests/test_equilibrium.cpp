#include "ioncrystal/forces.hpp"
#include "ioncrystal/linear_dynamics.hpp"
#include "support.hpp"

#include <boost/math/tools/roots.hpp>

using namespace ioncrystal;
using testing::nist;

TEST_CASE("single ion sits at the trap centre") {
  const NistParams p = nist(180);
  const EquilibriumConfig eq = find_equilibrium(1, p.trap, p.species);
  CHECK(eq.positions_rot.cwiseAbs().maxCoeff() < 1e-15);
  CHECK(eq.planar);
  CHECK(eq.energy == doctest::Approx(0.0));
}

TEST_CASE("two-ion crystal balances along the soft axis") {
  const NistParams p = nist(180);
  const EquilibriumConfig eq = find_equilibrium(2, p.trap, p.species);

  // Independent oracle: solve m wz^2 (beta - delta) d/2 = k q^2 / d^2 by
  // bracketing, without the library's minimiser.
  const double beta = beta_from_wall(p.trap, p.species);
  const double soft = p.species.mass * p.trap.omega_z * p.trap.omega_z *
                      (beta - p.trap.delta);
  const double kq2 = constants::coulomb_constant * p.species.charge *
                     p.species.charge;
  auto balance = [&](double d) { return soft * 0.5 * d - kq2 / (d * d); };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto [lo, hi] =
      boost::math::tools::toms748_solve(balance, 1e-7, 1e-3, tol, iters);
  const double d = 0.5 * (lo + hi);

  const Eigen::RowVector3d sep = eq.positions_rot.row(0) - eq.positions_rot.row(1);
  CHECK(sep.norm() == doctest::Approx(d).epsilon(1e-8));
  CHECK(std::abs(sep(0)) < 1e-8 * d);
  CHECK(std::abs(sep(2)) < 1e-8 * d);
  CHECK(eq.positions_rot.colwise().sum().norm() < 1e-8 * d);
}

TEST_CASE("N=54 crystals are planar and shrink as the wall speeds up") {
  const auto slow = testing::cached_equilibrium(54, 180);
  const auto fast = testing::cached_equilibrium(54, 204);
  CHECK(slow->planar);
  CHECK(fast->planar);
  CHECK(fast->positions_rot.col(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(crystal_radius(fast->positions_rot) <
        crystal_radius(slow->positions_rot));

  // Residual force is tiny compared with a typical Coulomb force.
  const NistParams p = nist(204);
  const double kq2 = constants::coulomb_constant * p.species.charge *
                     p.species.charge;
  const double typical = kq2 / std::pow(min_pair_distance(fast->positions_rot), 2);
  CHECK(fast->gradient_norm < 1e-8 * typical);

  // A local minimum: small random displacements raise the energy.
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Coords q = fast->positions_rot;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      for (int c = 0; c < 3; ++c) {
        q(i, c) += 1e-8 * (uniform01(rng) - 0.5);
      }
    }
    CHECK(rotating_potential_energy(q, p.trap, p.species) >= fast->energy);
  }
}

TEST_CASE("equilibrium search is deterministic") {
  const NistParams p = nist(190);
  const EquilibriumConfig a = find_equilibrium(20, p.trap, p.species);
  const EquilibriumConfig b = find_equilibrium(20, p.trap, p.species);
  CHECK(a.positions_rot == b.positions_rot);
  CHECK(a.energy == b.energy);
}

TEST_CASE("Hessian: single ion, symmetry and finite differences") {
  const NistParams p = nist(204);
  const ScaledTrap st = ScaledTrap::from(p.trap, p.species);
  const Eigen::MatrixXd h1 =
      kernels::rotating_hessian(st, Coords::Zero(1, 3), true);
  CHECK(h1(0, 0) == doctest::Approx(st.beta + st.delta));
  CHECK(h1(1, 1) == doctest::Approx(st.beta - st.delta));
  CHECK(h1(2, 2) == doctest::Approx(1.0));
  CHECK(h1.norm() == doctest::Approx(h1.diagonal().norm()));

  const auto eq = testing::cached_equilibrium(54, 204);
  const Coords x = eq->positions_rot / st.units.length;
  const Eigen::MatrixXd h = kernels::rotating_hessian(st, x, true);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-13 * h.cwiseAbs().maxCoeff());

  // Central differences of the analytic gradient, on a perturbed state so
  // the axial block is exercised off the plane.
  Coords y = x;
  Rng rng(4);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      y(i, c) += 0.05 * (uniform01(rng) - 0.5);
    }
  }
  const Eigen::MatrixXd hy = kernels::rotating_hessian(st, y, true);
  const Eigen::Index n = y.rows();
  const double step = 1e-5;
  double worst = 0.0;
  for (Eigen::Index col = 0; col < 3 * n; ++col) {
    Coords yp = y;
    Coords ym = y;
    yp(col % n, col / n) += step;
    ym(col % n, col / n) -= step;
    Coords gp;
    Coords gm;
    kernels::rotating_energy_gradient(st, yp, gp);
    kernels::rotating_energy_gradient(st, ym, gm);
    const Coords diff = (gp - gm) / (2.0 * step);
    const Eigen::Map<const Eigen::VectorXd> fd(diff.data(), 3 * n);
    worst = std::max(worst, (fd - hy.col(col)).norm() / hy.col(col).norm());
  }
  CHECK(worst < 1e-6);

  // The uniform axial displacement is an exact eigenvector (centre of mass).
  const Eigen::MatrixXd hz = h.bottomRightCorner(n, n);
  const Eigen::VectorXd com = Eigen::VectorXd::Ones(n);
  CHECK((hz * com - com).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("linearized Coulomb force") {
  const NistParams p = nist(204);
  const auto eq = testing::cached_equilibrium(54, 204);
  const LinearizedCoulomb lin(*eq, p.trap, p.species);

  CrystalState s;
  s.time = 0.0;
  s.positions = eq->positions_rot;
  s.velocities = Coords::Zero(eq->positions_rot.rows(), 3);
  const Coords exact = coulomb_force(s.positions);
  const Coords approx = linearized_coulomb_force(s, lin);
  CHECK((approx - exact).cwiseAbs().maxCoeff() <
        1e-12 * exact.cwiseAbs().maxCoeff());

  // Error shrinks as |q|^2: halving q quarters the error.
  Coords q = testing::random_cloud(54, 1.0, 12);
  q /= q.norm();
  auto error = [&](double amplitude) {
    CrystalState d = s;
    d.positions += amplitude * q;
    return (linearized_coulomb_force(d, lin) - coulomb_force(d.positions)).norm();
  };
  const double a = 1e-7;
  const double ratio = error(a) / error(0.5 * a);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));

  // The H q term is linear.
  const Eigen::MatrixXd h = lin.hessian();
  const Eigen::VectorXd q1 = Eigen::VectorXd::Random(h.rows());
  const Eigen::VectorXd q2 = Eigen::VectorXd::Random(h.rows());
  CHECK((h * (q1 + q2) - h * q1 - h * q2).cwiseAbs().maxCoeff() <
        1e-12 * (h * q1).cwiseAbs().maxCoeff());

  // Rotated to the lab frame at a later time, it still reproduces the exact
  // force at equilibrium.
  const double wr = p.trap.omega_r;
  RotatingState r{2.5e-6, eq->positions_rot, s.velocities};
  const CrystalState lab = from_rotating_frame(r, wr);
  const Coords f_lab = linearized_coulomb_force(lab, lin);
  const Coords f_ref = coulomb_force(lab.positions);
  CHECK((f_lab - f_ref).cwiseAbs().maxCoeff() < 1e-10 * f_ref.cwiseAbs().maxCoeff());
}

TEST_CASE("critical wall frequency falls with ion number") {
  const NistParams p = nist(180);
  const double w20 = critical_wall_frequency(20, p.trap, p.species, 0.25,
                                             {constants::two_pi * 180e3,
                                              constants::two_pi * 400e3});
  const double w54 = critical_wall_frequency(54, p.trap, p.species, 0.25,
                                             {constants::two_pi * 180e3,
                                              constants::two_pi * 400e3});
  CHECK(w54 < w20);
  // Just below is planar, just above is not.
  const TrapParams below = with_wall_frequency(p.trap, p.species,
                                               w54 - constants::two_pi * 200.0, 0.25);
  const TrapParams above = with_wall_frequency(p.trap, p.species,
                                               w54 + constants::two_pi * 200.0, 0.25);
  CHECK(find_equilibrium(54, below, p.species).planar);
  CHECK_FALSE(find_equilibrium(54, above, p.species).planar);
}
