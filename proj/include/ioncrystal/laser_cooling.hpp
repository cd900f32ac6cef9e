#pragma once

#include "ioncrystal/core.hpp"
#include "ioncrystal/random.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace ioncrystal {

enum class BeamProfile { Uniform, Gaussian };

struct LaserBeam {
  Eigen::Vector3d direction{1.0, 0.0, 0.0}; // unit propagation vector
  double detuning = 0.0;                    // rad/s, laser minus atomic
  double peak_saturation = 0.0;
  BeamProfile profile = BeamProfile::Uniform;
  // Gaussian only: intensity exp(-2 rho^2 / waist^2), where rho is the
  // distance from the beam axis, which passes through offset * offset_axis.
  double waist = 0.0;                          // m
  Eigen::Vector3d offset_axis{0.0, 1.0, 0.0};  // unit
  double offset = 0.0;                         // m
  double wavevector = 0.0;                     // rad/m

  void validate() const;
  /// Local saturation parameter at a lab-frame position.
  double saturation(const Eigen::Vector3d &position) const;
};

struct CoolingConfig {
  std::vector<LaserBeam> beams;
  std::uint64_t rng_seed = 0;
  /// Largest allowed scattering probability per beam, ion and step.
  double max_step_probability = 0.1;

  void validate() const;
};

/// Planar beam along +x (30 um waist, offset 20 um along +y, S = 1,
/// 40 MHz red detuning) and two uniform axial beams along +-z
/// (S = 5e-3, detuning -gamma0/2).
CoolingConfig nist_beam_set(const SpeciesParams &species,
                            std::uint64_t rng_seed = 0);

/// Two-level saturated Lorentzian including the Doppler shift of the
/// lab-frame velocity, in photons per second.
double scattering_rate(const LaserBeam &beam, const Eigen::Vector3d &position,
                       const Eigen::Vector3d &velocity,
                       const SpeciesParams &species);

/// Tests every (ion, beam) pair once in ion-major order and, for each event,
/// adds an absorption kick along the beam and an isotropic emission kick.
/// Returns the number of events. Throws ComputeError if any rate * dt
/// exceeds the configured bound.
std::size_t apply_scattering(CrystalState &state, const CoolingConfig &cfg,
                             const SpeciesParams &species, double dt,
                             Rng &rng);

/// Owns the seeded stream of one run.
class PhotonScatterer {
public:
  PhotonScatterer(CoolingConfig config, SpeciesParams species)
      : config_(std::move(config)), species_(species), rng_(config_.rng_seed) {
    config_.validate();
  }

  std::size_t apply(CrystalState &state, double dt) {
    const std::size_t events =
        apply_scattering(state, config_, species_, dt, rng_);
    total_events_ += events;
    return events;
  }

  const CoolingConfig &config() const { return config_; }
  std::uint64_t total_events() const { return total_events_; }

private:
  CoolingConfig config_;
  SpeciesParams species_;
  Rng rng_;
  std::uint64_t total_events_ = 0;
};

/// Draws a direction uniformly on the unit sphere.
Eigen::Vector3d random_unit_vector(Rng &rng);

} // namespace ioncrystal
