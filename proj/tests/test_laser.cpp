#include "ioncrystal/laser_cooling.hpp"
#include "support.hpp"

#include <boost/math/distributions/chi_squared.hpp>

using namespace ioncrystal;
using testing::nist;

namespace {

SpeciesParams be() { return nist(180).species; }

} // namespace

TEST_CASE("beam set geometry") {
  const CoolingConfig cfg = nist_beam_set(be());
  REQUIRE(cfg.beams.size() == 3);
  const LaserBeam &planar = cfg.beams[0];
  CHECK(planar.saturation({0.0, 20e-6, 0.0}) == doctest::Approx(1.0));
  CHECK(planar.saturation({37.0e-6, 20e-6, 0.0}) == doctest::Approx(1.0));
  CHECK(planar.saturation({0.0, 50e-6, 0.0}) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(planar.saturation({0.0, 20e-6, 30e-6}) ==
        doctest::Approx(0.135335).epsilon(1e-5));
  CHECK(planar.detuning == doctest::Approx(-constants::two_pi * 40e6));

  for (int k : {1, 2}) {
    const LaserBeam &axial = cfg.beams[static_cast<std::size_t>(k)];
    CHECK(axial.detuning == doctest::Approx(-constants::two_pi * 9e6));
    CHECK(axial.saturation({1e-4, -3e-5, 2e-6}) == doctest::Approx(5e-3));
  }
  CHECK(cfg.beams[1].direction.z() == 1.0);
  CHECK(cfg.beams[2].direction.z() == -1.0);
}

TEST_CASE("scattering rate") {
  const SpeciesParams sp = be();
  const double gamma = sp.natural_linewidth;
  LaserBeam b;
  b.direction = {1.0, 0.0, 0.0};
  b.detuning = -0.5 * gamma;
  b.peak_saturation = 1.0;
  b.wavevector = sp.wavevector();
  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  CHECK(scattering_rate(b, origin, origin, sp) ==
        doctest::Approx(gamma / 6.0).epsilon(1e-14));
  CHECK(scattering_rate(b, origin, origin, sp) / constants::two_pi ==
        doctest::Approx(3e6).epsilon(1e-12));

  // Low-saturation limit is linear in S.
  b.peak_saturation = 1e-6;
  const double low = 0.5 * gamma * 1e-6 / (1.0 + 1.0);
  CHECK(scattering_rate(b, origin, origin, sp) ==
        doctest::Approx(low).epsilon(1e-5));

  // Red detuning: approaching the source scatters more than receding.
  b.peak_saturation = 1.0;
  const Eigen::Vector3d receding{5.0, 0.0, 0.0};
  const Eigen::Vector3d approaching{-5.0, 0.0, 0.0};
  CHECK(scattering_rate(b, origin, approaching, sp) >
        scattering_rate(b, origin, receding, sp));
}

TEST_CASE("scattering kicks") {
  const SpeciesParams sp = be();
  CrystalState s;
  s.positions = Coords::Zero(4, 3);
  s.velocities = Coords::Zero(4, 3);
  Rng rng(1);

  CoolingConfig none;
  CHECK(apply_scattering(s, none, sp, 1e-9, rng) == 0);
  CHECK(s.velocities.cwiseAbs().maxCoeff() == 0.0);

  // Certain scattering (p = 1 per step) to inspect individual kicks.
  CoolingConfig sure;
  LaserBeam b;
  b.direction = {0.0, 0.0, 1.0};
  b.detuning = 0.0;
  b.peak_saturation = 1e9;
  b.wavevector = sp.wavevector();
  sure.beams = {b};
  sure.max_step_probability = 1.0;
  const double dt = 2.0 / sp.natural_linewidth;
  const double recoil = constants::hbar * sp.wavevector() / sp.mass;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  const int events = 4000;
  for (int e = 0; e < events; ++e) {
    s.velocities.setZero();
    CHECK(apply_scattering(s, sure, sp, dt, rng) == 4);
    for (Eigen::Index i = 0; i < 4; ++i) {
      const Eigen::Vector3d kick = s.velocities.row(i).transpose();
      CHECK(kick.norm() <= 2.0 * recoil * (1.0 + 1e-12));
      // Emission is a unit vector: |kick/recoil - d| = 1.
      CHECK((kick / recoil - b.direction).norm() ==
            doctest::Approx(1.0).epsilon(1e-12));
      mean += kick;
    }
  }
  mean /= 4.0 * events;
  CHECK(mean.z() == doctest::Approx(recoil).epsilon(0.02));
  CHECK(std::abs(mean.x()) < 0.03 * recoil);
  CHECK(std::abs(mean.y()) < 0.03 * recoil);
}

TEST_CASE("scattering probability bound") {
  const SpeciesParams sp = be();
  CrystalState s;
  s.positions = Coords::Zero(1, 3);
  s.velocities = Coords::Zero(1, 3);
  const CoolingConfig cfg = nist_beam_set(sp);
  Rng rng(3);
  CHECK_NOTHROW(apply_scattering(s, cfg, sp, 1e-9, rng));
  CHECK_THROWS_AS(apply_scattering(s, cfg, sp, 1e-6, rng), ComputeError);
}

TEST_CASE("scattering counts follow the binomial law") {
  // Frozen velocity: each step is a Bernoulli trial with p = rate dt. The
  // number of events in blocks of M steps is Binomial(M, p); compare the
  // histogram of block counts with a chi-square test.
  const SpeciesParams sp = be();
  CoolingConfig cfg;
  LaserBeam b;
  b.direction = {0.0, 0.0, 1.0};
  b.detuning = -0.5 * sp.natural_linewidth;
  b.peak_saturation = 0.5;
  b.wavevector = sp.wavevector();
  cfg.beams = {b};
  const double dt = 2e-9;
  const double p = scattering_rate(b, Eigen::Vector3d::Zero(),
                                   Eigen::Vector3d::Zero(), sp) *
                   dt;
  const int m = 50;
  const int blocks = 20000;
  CrystalState s;
  s.positions = Coords::Zero(1, 3);
  Rng rng(12345);
  std::vector<int> hist(m + 1, 0);
  for (int blk = 0; blk < blocks; ++blk) {
    int count = 0;
    for (int k = 0; k < m; ++k) {
      s.velocities = Coords::Zero(1, 3);
      count += static_cast<int>(apply_scattering(s, cfg, sp, dt, rng));
    }
    ++hist[static_cast<std::size_t>(count)];
  }
  // Binomial pmf, bins merged so every expected count is at least 5.
  std::vector<double> pmf(m + 1);
  for (int k = 0; k <= m; ++k) {
    pmf[static_cast<std::size_t>(k)] =
        std::exp(std::lgamma(m + 1.0) - std::lgamma(k + 1.0) -
                 std::lgamma(m - k + 1.0) + k * std::log(p) +
                 (m - k) * std::log1p(-p));
  }
  // Individual bins while both the bin and the remaining tail expect at
  // least 5 counts; the tail forms the last bin.
  double chi2 = 0.0;
  int bins = 0;
  double tail_expected = blocks;
  double tail_observed = blocks;
  for (int k = 0; k <= m; ++k) {
    const double e = blocks * pmf[static_cast<std::size_t>(k)];
    if (e < 5.0 || tail_expected - e < 5.0) {
      break;
    }
    const double o = hist[static_cast<std::size_t>(k)];
    chi2 += (o - e) * (o - e) / e;
    tail_expected -= e;
    tail_observed -= o;
    ++bins;
  }
  chi2 += (tail_observed - tail_expected) * (tail_observed - tail_expected) /
          tail_expected;
  const int dof = bins;
  REQUIRE(dof >= 3);
  const boost::math::chi_squared dist(dof);
  const double p_value = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p_value > 1e-3);
}

TEST_CASE("photon scatterer is reproducible") {
  const SpeciesParams sp = be();
  CrystalState a;
  a.positions = testing::random_cloud(10, 60e-6, 2);
  a.positions.col(2).setZero();
  a.velocities = testing::random_cloud(10, 40.0, 4);
  CrystalState b = a;
  PhotonScatterer sa(nist_beam_set(sp, 99), sp);
  PhotonScatterer sb(nist_beam_set(sp, 99), sp);
  for (int k = 0; k < 20000; ++k) {
    sa.apply(a, 1e-9);
    sb.apply(b, 1e-9);
  }
  CHECK(sa.total_events() > 0);
  CHECK(sa.total_events() == sb.total_events());
  CHECK(a.velocities == b.velocities);
}

TEST_CASE("beam validation") {
  LaserBeam b;
  b.direction = {1.0, 1.0, 0.0};
  b.wavevector = 1.0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  b.direction = {1.0, 0.0, 0.0};
  CHECK_NOTHROW(b.validate());
  b.profile = BeamProfile::Gaussian;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  b.waist = 1e-5;
  CHECK_NOTHROW(b.validate());
}
