#include "ioncrystal/spectra.hpp"

#include "ioncrystal/core.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>

namespace ioncrystal {

namespace {

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void *p) const { fftw_free(p); }
};

class RealFft {
public:
  explicit RealFft(std::size_t length)
      : length_(length),
        in_(static_cast<double *>(fftw_malloc(sizeof(double) * length))),
        out_(static_cast<fftw_complex *>(
            fftw_malloc(sizeof(fftw_complex) * (length / 2 + 1)))) {
    if (!in_ || !out_) {
      throw ComputeError("FFT buffer allocation failed");
    }
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(length), in_.get(),
                                 out_.get(), FFTW_ESTIMATE);
    if (!plan_) {
      throw ComputeError("FFT planning failed");
    }
  }
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  double *input() { return in_.get(); }
  const fftw_complex *output() const { return out_.get(); }
  void execute() { fftw_execute(plan_); }

private:
  std::size_t length_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_ = nullptr;
};

std::vector<double> make_window(WindowKind kind, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (kind == WindowKind::Hann) {
    // Periodic Hann, the standard choice for Welch averaging.
    for (std::size_t k = 0; k < length; ++k) {
      w[k] = 0.5 - 0.5 * std::cos(constants::two_pi * static_cast<double>(k) /
                                  static_cast<double>(length));
    }
  }
  return w;
}

double median(std::vector<double> values) {
  if (values.empty()) {
    return 0.0;
  }
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double m = *mid;
  if (values.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(values.begin(), mid));
  }
  return m;
}

} // namespace

SpectrumResult drumhead_spectrum(const Eigen::MatrixXd &z, double sample_dt,
                                 const SpectrumOptions &options) {
  if (!(sample_dt > 0.0)) {
    throw ConfigError("sample_dt must be positive");
  }
  if (options.segments == 0) {
    throw ConfigError("spectrum needs at least one segment");
  }
  if (z.rows() == 0) {
    throw ComputeError("spectrum needs at least one ion");
  }
  const auto total = static_cast<std::size_t>(z.cols());
  const std::size_t k = options.segments;
  const std::size_t length = 2 * total / (k + 1);
  const double fs = 1.0 / sample_dt;
  const std::size_t needed_length = static_cast<std::size_t>(
      std::ceil(fs / options.max_resolution));
  if (length < needed_length || length < 2) {
    const std::size_t needed = (k + 1) * needed_length / 2 + 1;
    std::ostringstream msg;
    msg << "record of " << total << " samples is too short for "
        << options.max_resolution << " Hz resolution with " << k
        << " segments; need at least " << needed << " samples ("
        << static_cast<double>(needed) * sample_dt << " s)";
    throw ComputeError(msg.str());
  }
  const std::size_t hop = k > 1 ? (total - length) / (k - 1) : 0;
  const std::size_t bins = length / 2 + 1;

  const std::vector<double> window = make_window(options.window, length);
  double window_power = 0.0;
  for (double w : window) {
    window_power += w * w;
  }

  RealFft fft(length);
  std::vector<double> psd(bins, 0.0);
  for (Eigen::Index ion = 0; ion < z.rows(); ++ion) {
    const Eigen::RowVectorXd row = z.row(ion);
    const double mean = row.mean();
    for (std::size_t s = 0; s < k; ++s) {
      double *in = fft.input();
      for (std::size_t t = 0; t < length; ++t) {
        in[t] = (row(static_cast<Eigen::Index>(s * hop + t)) - mean) *
                window[t];
      }
      fft.execute();
      const fftw_complex *out = fft.output();
      for (std::size_t b = 0; b < bins; ++b) {
        psd[b] += out[b][0] * out[b][0] + out[b][1] * out[b][1];
      }
    }
  }

  const double scale = 1.0 / (fs * window_power * static_cast<double>(k));
  for (std::size_t b = 0; b < bins; ++b) {
    const bool edge = b == 0 || (length % 2 == 0 && b == bins - 1);
    psd[b] *= edge ? scale : 2.0 * scale;
  }

  SpectrumResult out;
  out.segment_length = length;
  out.segment_count = k;
  out.sample_rate = fs;
  out.frequencies.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.frequencies[b] = fs * static_cast<double>(b) / static_cast<double>(length);
  }
  out.peak_density = *std::max_element(psd.begin(), psd.end());
  out.power = std::move(psd);
  if (out.peak_density > 0.0) {
    for (double &p : out.power) {
      p /= out.peak_density;
    }
  }
  return out;
}

std::vector<bool> detect_peaks(const SpectrumResult &spectrum,
                               const std::vector<double> &predicted,
                               const PeakOptions &options) {
  std::vector<bool> found(predicted.size(), false);
  if (predicted.empty() || spectrum.power.size() < 3) {
    return found;
  }
  double lo = options.band_low;
  double hi = options.band_high;
  if (lo == 0.0 && hi == 0.0) {
    lo = *std::min_element(predicted.begin(), predicted.end()) -
         options.search_halfwidth;
    hi = *std::max_element(predicted.begin(), predicted.end()) +
         options.search_halfwidth;
  }
  const auto &f = spectrum.frequencies;
  const auto &p = spectrum.power;
  std::vector<double> band;
  for (std::size_t b = 0; b < f.size(); ++b) {
    if (f[b] >= lo && f[b] <= hi) {
      band.push_back(p[b]);
    }
  }
  const double threshold = options.threshold_factor * median(band);

  for (std::size_t m = 0; m < predicted.size(); ++m) {
    for (std::size_t b = 1; b + 1 < f.size(); ++b) {
      if (std::abs(f[b] - predicted[m]) > options.search_halfwidth) {
        continue;
      }
      if (p[b] > threshold && p[b] >= p[b - 1] && p[b] >= p[b + 1]) {
        found[m] = true;
        break;
      }
    }
  }
  return found;
}

} // namespace ioncrystal
