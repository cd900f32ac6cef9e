#pragma once

#include "ioncrystal/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

// File formats. Every CSV starts with a block of '#' lines carrying the
// command, the fully resolved config (one-line JSON) and the seeds; binaries
// embed the same JSON after their magic. Binaries are little-endian.
//
//   equilibrium.csv   ion,x_um,y_um,z_um               (rotating frame)
//   summary.csv       key,value                        (per command)
//   modes.csv         index,branch,frequency_hz
//   diagnostics.csv   t_s,KE_perp_mK,KE_par_mK,PE_mK,T_drum_mK,T_exb_mK,T_cyc_mK
//   spectrum.csv      freq_hz,power_norm
//   peaks.csv         rank,predicted_hz,detected
//   scan.csv          index,wall_frequency_hz,seed,status,KE_perp_mK,
//                     KE_par_mK,PE_mK,reconfigured,scattering_events,error
//
//   trajectory.bin    "IONTRAJ1", u64 config bytes, config,
//                     u64 N, f64 dt_sample, u64 count,
//                     count x { f64 x[N], f64 y[N], f64 z[N] }  (lab frame, m)
//   modes.bin         "IONMODE1", u64 config bytes, config, u64 N, u64 count,
//                     count x { u64 branch, f64 frequency_hz,
//                               6N x (f64 re, f64 im) }
//                     branch: 0 drumhead, 1 ExB, 2 cyclotron; the vector is
//                     the phase-space vector of ModeDecomposition.

namespace ioncrystal {

struct OutputHeader {
  std::string command;
  nlohmann::json config;
  std::optional<RunSeeds> seeds;

  /// The '#' block, newline terminated.
  std::string comment_block() const;
};

/// Shortest round-trip decimal form; "nan" for any NaN.
std::string format_number(double value);

void write_equilibrium_csv(const std::filesystem::path &path,
                           const OutputHeader &header,
                           const EquilibriumConfig &eq);
void write_key_values(const std::filesystem::path &path,
                      const OutputHeader &header,
                      const std::vector<std::pair<std::string, std::string>> &kv);
void write_modes_csv(const std::filesystem::path &path,
                     const OutputHeader &header, const ModeDecomposition &dec);
void write_modes_binary(const std::filesystem::path &path,
                        const OutputHeader &header,
                        const ModeDecomposition &dec);
void write_diagnostics_csv(const std::filesystem::path &path,
                           const OutputHeader &header,
                           const DiagnosticsSeries &d);
void write_spectrum_csv(const std::filesystem::path &path,
                        const OutputHeader &header, const SpectrumResult &s);
void write_peaks_csv(const std::filesystem::path &path,
                     const OutputHeader &header, const SpectrumReport &s);
void write_scan_csv(const std::filesystem::path &path,
                    const OutputHeader &header,
                    const std::vector<ScanRow> &rows);

/// Streams frames to trajectory.bin; the frame count in the header is
/// patched on close().
class TrajectoryWriter {
public:
  TrajectoryWriter(const std::filesystem::path &path,
                   const OutputHeader &header, std::size_t n_ions,
                   double dt_sample);
  ~TrajectoryWriter();
  TrajectoryWriter(const TrajectoryWriter &) = delete;
  TrajectoryWriter &operator=(const TrajectoryWriter &) = delete;

  void append(const Coords &positions);
  void close();
  std::uint64_t frames() const { return count_; }

private:
  std::ofstream out_;
  std::streampos count_pos_;
  std::size_t n_ = 0;
  std::uint64_t count_ = 0;
};

struct TrajectoryFile {
  nlohmann::json config;
  std::uint64_t n_ions = 0;
  double dt_sample = 0.0;
  std::vector<Coords> frames;
};
TrajectoryFile read_trajectory(const std::filesystem::path &path);

struct ModesFile {
  nlohmann::json config;
  std::uint64_t n_ions = 0;
  std::vector<std::uint64_t> branches;
  std::vector<double> frequencies_hz;
  std::vector<Eigen::VectorXcd> vectors;
};
ModesFile read_modes_binary(const std::filesystem::path &path);

} // namespace ioncrystal
