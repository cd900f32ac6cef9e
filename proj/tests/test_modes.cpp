#include "ioncrystal/forces.hpp"
#include "ioncrystal/modes.hpp"
#include "support.hpp"

using namespace ioncrystal;
using testing::nist;

namespace {

const ModeDecomposition &decomposition(double wall_khz) {
  static std::map<double, std::unique_ptr<ModeDecomposition>> cache;
  auto &slot = cache[wall_khz];
  if (!slot) {
    const NistParams p = nist(wall_khz);
    slot = std::make_unique<ModeDecomposition>(
        *testing::cached_equilibrium(54, wall_khz), p.trap, p.species);
  }
  return *slot;
}

double quadratic_energy(const ModeDecomposition &dec, const Coords &q,
                        const Coords &v) {
  const HessianData h =
      total_hessian(dec.equilibrium(), dec.trap(), dec.species());
  const Eigen::Map<const Eigen::VectorXd> qv(q.data(), q.size());
  return 0.5 * dec.species().mass * v.squaredNorm() +
         0.5 * qv.dot(h.matrix * qv);
}

} // namespace

TEST_CASE("single-ion mode frequencies") {
  const NistParams p = nist(180, 0.0);
  const EquilibriumConfig eq = find_equilibrium(1, p.trap, p.species);
  const ModeDecomposition dec(eq, p.trap, p.species);
  REQUIRE(dec.mode_count() == 3);

  const double wc = cyclotron_frequency(p.trap, p.species);
  const double wz = p.trap.omega_z;
  const double root = std::sqrt(wc * wc / 4.0 - wz * wz / 2.0);
  const double w_plus = wc / 2.0 + root;
  const double w_minus = wc / 2.0 - root;
  CHECK(w_plus / constants::two_pi == doctest::Approx(7.432e6).epsilon(1e-3));
  CHECK(w_minus / constants::two_pi == doctest::Approx(0.168e6).epsilon(3e-3));

  // Rotating-frame values; both lab motions are clockwise, like the frame.
  const double wr = p.trap.omega_r;
  CHECK(dec.frequencies()(0) == doctest::Approx(wz).epsilon(1e-10));
  CHECK(dec.frequencies()(1) == doctest::Approx(wr - w_minus).epsilon(1e-9));
  CHECK(dec.frequencies()(2) == doctest::Approx(w_plus - wr).epsilon(1e-10));
  CHECK(dec.branches()[0] == Branch::Drumhead);
  CHECK(dec.branches()[1] == Branch::ExB);
  CHECK(dec.branches()[2] == Branch::Cyclotron);
}

TEST_CASE("N=54 mode table") {
  const ModeDecomposition &dec = decomposition(180);
  CHECK(dec.mode_count() == 162);
  for (Branch b : {Branch::Drumhead, Branch::ExB, Branch::Cyclotron}) {
    CHECK(dec.branch_frequencies(b).size() == 54);
  }
  const NistParams p = nist(180);
  const Eigen::VectorXd drum = dec.branch_frequencies(Branch::Drumhead);
  CHECK(drum(0) == doctest::Approx(p.trap.omega_z).epsilon(1e-10));
  for (Eigen::Index k = 1; k < drum.size(); ++k) {
    CHECK(drum(k) <= drum(k - 1));
  }
  const double wc = cyclotron_frequency(p.trap, p.species);
  const Eigen::VectorXd cyc = dec.branch_frequencies(Branch::Cyclotron);
  CHECK(cyc.minCoeff() > 0.9 * (wc - 2.0 * p.trap.omega_r));
  CHECK(cyc.maxCoeff() < wc);
  CHECK(dec.branch_frequencies(Branch::ExB).maxCoeff() < drum.minCoeff());
  CHECK_FALSE(dec.branches_overlap());
}

TEST_CASE("mode energies partition the quadratic energy") {
  const ModeDecomposition &dec = decomposition(204);
  const Coords &eq = dec.equilibrium().positions_rot;
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Coords q(eq.rows(), 3);
    Coords v(eq.rows(), 3);
    const double qs = 1e-7 * (0.1 + uniform01(rng));
    const double vs = 0.5 * (0.1 + uniform01(rng));
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      for (int c = 0; c < 3; ++c) {
        q(i, c) = qs * (2.0 * uniform01(rng) - 1.0);
        v(i, c) = vs * (2.0 * uniform01(rng) - 1.0);
      }
    }
    const Eigen::VectorXd e = dec.project(q, v);
    const double expected = quadratic_energy(dec, q, v);
    worst = std::max(worst, std::abs(e.sum() - expected) / expected);
    CHECK(e.minCoeff() >= 0.0);
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("single-mode synthesis round trip") {
  const ModeDecomposition &dec = decomposition(204);
  const double energy = constants::boltzmann * 0.01;
  for (std::size_t k : {0ul, 17ul, 53ul, 54ul, 80ul, 107ul, 108ul, 140ul, 161ul}) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(162);
    e(static_cast<Eigen::Index>(k)) = energy;
    const Eigen::VectorXd phases = Eigen::VectorXd::Constant(162, 0.7);
    Coords q;
    Coords v;
    dec.synthesize(e, phases, q, v);
    const Eigen::VectorXd back = dec.project(q, v);
    CHECK(back(static_cast<Eigen::Index>(k)) ==
          doctest::Approx(energy).epsilon(1e-10));
    CHECK((back - e).cwiseAbs().maxCoeff() < 1e-10 * energy);
    CHECK(quadratic_energy(dec, q, v) == doctest::Approx(energy).epsilon(1e-10));
  }
}

TEST_CASE("phase-space vectors carry unit energy") {
  const ModeDecomposition &dec = decomposition(180);
  const Eigen::Index n = 54;
  for (std::size_t k : {3ul, 60ul, 120ul}) {
    const Eigen::VectorXcd w = dec.phase_space_vector(k);
    const Eigen::VectorXd real = 2.0 * w.real();
    Coords q(n, 3);
    Coords v(n, 3);
    for (int c = 0; c < 3; ++c) {
      q.col(c) = real.segment(c * n, n);
      v.col(c) = real.segment(3 * n + c * n, n);
    }
    CHECK(quadratic_energy(dec, q, v) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("thermal synthesis") {
  const ModeDecomposition &dec = decomposition(204);
  const BranchTemperatures t{0.01, 0.01, 0.01};
  const CrystalState s = synthesize_thermal_state(dec, t, 77);
  const ModeEnergies me = mode_energies(s, dec);
  CHECK((me.energies.array() - constants::boltzmann * 0.01).abs().maxCoeff() <
        1e-6 * constants::boltzmann * 0.01);
  CHECK(me.energies(0) == doctest::Approx(1.381e-25).epsilon(1e-3));
  CHECK(me.temperatures.t_drumhead == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(me.temperatures.t_exb == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(me.temperatures.t_cyclotron == doctest::Approx(0.01).epsilon(1e-6));
  CHECK_FALSE(me.reconfiguration_warning);

  const BranchTemperatures mixed{0.0, 0.01, 0.001};
  const ModeEnergies mm =
      mode_energies(synthesize_thermal_state(dec, mixed, 78), dec);
  CHECK(mm.temperatures.t_drumhead < 1e-12);
  CHECK(mm.temperatures.t_exb == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(mm.temperatures.t_cyclotron == doctest::Approx(0.001).epsilon(1e-6));

  // Zero temperature is the rigidly rotating equilibrium.
  const CrystalState cold = synthesize_thermal_state(dec, {}, 79);
  CHECK(cold.positions == dec.equilibrium().positions_rot);
  const RotatingState r = to_rotating_frame(cold, dec.trap().omega_r);
  CHECK(r.velocities.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(mode_energies(cold, dec).energies.cwiseAbs().maxCoeff() < 1e-40);

  // Phases come from the seed.
  CHECK(synthesize_thermal_state(dec, t, 77).positions == s.positions);
  CHECK(synthesize_thermal_state(dec, t, 80).positions != s.positions);
}

TEST_CASE("sanity bound flags implausible mode energies") {
  const ModeDecomposition &dec = decomposition(204);
  const CrystalState hot = synthesize_thermal_state(dec, {2.0, 2.0, 2.0}, 3);
  CHECK(mode_energies(hot, dec).reconfiguration_warning);
}

TEST_CASE("non-planar equilibria have no decomposition") {
  const NistParams p = nist(180);
  EquilibriumConfig eq = *testing::cached_equilibrium(54, 180);
  eq.positions_rot(0, 2) = 1e-6;
  eq.planar = false;
  CHECK_THROWS_AS(total_hessian(eq, p.trap, p.species), ComputeError);
}
