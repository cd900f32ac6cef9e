#include "ioncrystal/laser_cooling.hpp"

#include <sstream>

namespace ioncrystal {

namespace {

bool is_unit(const Eigen::Vector3d &v) {
  return v.allFinite() && std::abs(v.norm() - 1.0) < 1e-9;
}

} // namespace

void LaserBeam::validate() const {
  if (!is_unit(direction)) {
    throw ConfigError("laser direction must be a unit vector");
  }
  if (!std::isfinite(detuning)) {
    throw ConfigError("laser detuning must be finite");
  }
  if (!(peak_saturation >= 0.0) || !std::isfinite(peak_saturation)) {
    throw ConfigError("laser saturation must be finite and non-negative");
  }
  if (!(wavevector > 0.0) || !std::isfinite(wavevector)) {
    throw ConfigError("laser wavevector must be positive");
  }
  if (profile == BeamProfile::Gaussian) {
    if (!(waist > 0.0) || !std::isfinite(waist)) {
      throw ConfigError("Gaussian beam waist must be positive");
    }
    if (!is_unit(offset_axis) || !std::isfinite(offset)) {
      throw ConfigError("Gaussian beam offset axis must be a unit vector");
    }
  }
}

double LaserBeam::saturation(const Eigen::Vector3d &position) const {
  if (profile == BeamProfile::Uniform) {
    return peak_saturation;
  }
  const Eigen::Vector3d r = position - offset * offset_axis;
  const double along = r.dot(direction);
  const double rho2 = r.squaredNorm() - along * along;
  return peak_saturation * std::exp(-2.0 * rho2 / (waist * waist));
}

void CoolingConfig::validate() const {
  for (const auto &b : beams) {
    b.validate();
  }
  if (!(max_step_probability > 0.0 && max_step_probability <= 1.0)) {
    throw ConfigError("max_step_probability must lie in (0, 1]");
  }
}

CoolingConfig nist_beam_set(const SpeciesParams &species,
                            std::uint64_t rng_seed) {
  const double k = species.wavevector();
  CoolingConfig cfg;
  cfg.rng_seed = rng_seed;

  LaserBeam planar;
  planar.direction = {1.0, 0.0, 0.0};
  planar.detuning = -constants::two_pi * 40e6;
  planar.peak_saturation = 1.0;
  planar.profile = BeamProfile::Gaussian;
  planar.waist = 30e-6;
  planar.offset_axis = {0.0, 1.0, 0.0};
  planar.offset = 20e-6;
  planar.wavevector = k;
  cfg.beams.push_back(planar);

  for (double sign : {1.0, -1.0}) {
    LaserBeam axial;
    axial.direction = {0.0, 0.0, sign};
    axial.detuning = -0.5 * species.natural_linewidth;
    axial.peak_saturation = 5e-3;
    axial.wavevector = k;
    cfg.beams.push_back(axial);
  }
  return cfg;
}

double scattering_rate(const LaserBeam &beam, const Eigen::Vector3d &position,
                       const Eigen::Vector3d &velocity,
                       const SpeciesParams &species) {
  const double gamma = species.natural_linewidth;
  const double s = beam.saturation(position);
  const double shift =
      2.0 * (beam.detuning - beam.wavevector * beam.direction.dot(velocity)) /
      gamma;
  return 0.5 * gamma * s / (1.0 + s + shift * shift);
}

Eigen::Vector3d random_unit_vector(Rng &rng) {
  const double cos_t = 2.0 * uniform01(rng) - 1.0;
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double phi = constants::two_pi * uniform01(rng);
  return {sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t};
}

std::size_t apply_scattering(CrystalState &state, const CoolingConfig &cfg,
                             const SpeciesParams &species, double dt,
                             Rng &rng) {
  const Eigen::Index n = state.positions.rows();
  std::size_t events = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d x = state.positions.row(i).transpose();
    for (std::size_t b = 0; b < cfg.beams.size(); ++b) {
      const LaserBeam &beam = cfg.beams[b];
      // The rate uses the velocity before this step's kicks on ion i.
      const Eigen::Vector3d v = state.velocities.row(i).transpose();
      const double p = scattering_rate(beam, x, v, species) * dt;
      if (p > cfg.max_step_probability) {
        std::ostringstream msg;
        msg << "scattering probability " << p << " per step on ion " << i
            << ", beam " << b << " exceeds " << cfg.max_step_probability
            << "; reduce dt";
        throw ComputeError(msg.str());
      }
      if (uniform01(rng) < p) {
        const double recoil =
            constants::hbar * beam.wavevector / species.mass;
        const Eigen::Vector3d kick =
            recoil * (beam.direction + random_unit_vector(rng));
        state.velocities.row(i) += kick.transpose();
        ++events;
      }
    }
  }
  return events;
}

} // namespace ioncrystal
