#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace ioncrystal {

enum class WindowKind { Hann, Rectangular };

struct SpectrumOptions {
  std::size_t segments = 3; // Welch segments at 50% overlap
  WindowKind window = WindowKind::Hann;
  /// Finest acceptable bin spacing, Hz; shorter records are rejected.
  double max_resolution = 2e3;
};

struct SpectrumResult {
  std::vector<double> frequencies; // Hz, uniform from 0 to Nyquist
  std::vector<double> power;       // normalised to unit peak
  /// Multiply `power` by this to recover the one-sided PSD (signal^2 / Hz)
  /// summed over ions.
  double peak_density = 0.0;
  std::size_t segment_length = 0;
  std::size_t segment_count = 0;
  double sample_rate = 0.0; // Hz

  double resolution() const {
    return sample_rate / static_cast<double>(segment_length);
  }
};

/// Welch-averaged periodogram of the axial motion, summed over ions.
/// `z` is N x T: one row per ion, one column per sample at `sample_dt` (s).
/// The per-ion mean is removed first.
SpectrumResult drumhead_spectrum(const Eigen::MatrixXd &z, double sample_dt,
                                 const SpectrumOptions &options = {});

struct PeakOptions {
  double search_halfwidth = 2e3; // Hz around each predicted line
  double threshold_factor = 3.0; // times the band median
  /// Band over which the median is taken, Hz; defaults to the span of the
  /// predicted frequencies when both are zero.
  double band_low = 0.0;
  double band_high = 0.0;
};

/// For each predicted frequency (Hz), whether a local maximum exceeding the
/// threshold lies within the search window.
std::vector<bool> detect_peaks(const SpectrumResult &spectrum,
                               const std::vector<double> &predicted,
                               const PeakOptions &options = {});

} // namespace ioncrystal
