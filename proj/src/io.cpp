#include "ioncrystal/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>

namespace ioncrystal {

static_assert(std::endian::native == std::endian::little,
              "binary writers assume a little-endian host");

namespace {

constexpr char kTrajectoryMagic[8] = {'I', 'O', 'N', 'T', 'R', 'A', 'J', '1'};
constexpr char kModesMagic[8] = {'I', 'O', 'N', 'M', 'O', 'D', 'E', '1'};

std::ofstream open_text(const std::filesystem::path &path,
                        const OutputHeader &header) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw ComputeError("cannot write '" + path.string() + "'");
  }
  out << header.comment_block();
  return out;
}

std::ofstream open_binary(const std::filesystem::path &path,
                          const OutputHeader &header, const char (&magic)[8]) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ComputeError("cannot write '" + path.string() + "'");
  }
  out.write(magic, 8);
  const std::string cfg = header.config.dump();
  const std::uint64_t len = cfg.size();
  out.write(reinterpret_cast<const char *>(&len), sizeof len);
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  return out;
}

template <class T> void put(std::ostream &out, T value) {
  out.write(reinterpret_cast<const char *>(&value), sizeof value);
}

template <class T> T get(std::istream &in, const std::filesystem::path &path) {
  T value{};
  if (!in.read(reinterpret_cast<char *>(&value), sizeof value)) {
    throw ComputeError("'" + path.string() + "' is truncated");
  }
  return value;
}

nlohmann::json read_binary_header(std::istream &in,
                                  const std::filesystem::path &path,
                                  const char (&magic)[8]) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
    throw ComputeError("'" + path.string() + "' has the wrong magic");
  }
  const auto len = get<std::uint64_t>(in, path);
  std::string cfg(len, '\0');
  if (!in.read(cfg.data(), static_cast<std::streamsize>(len))) {
    throw ComputeError("'" + path.string() + "' is truncated");
  }
  return nlohmann::json::parse(cfg);
}

void finish(std::ofstream &out, const std::filesystem::path &path) {
  out.flush();
  if (!out) {
    throw ComputeError("error writing '" + path.string() + "'");
  }
}

std::string micrometres(double metres) { return format_number(metres * 1e6); }
std::string millikelvin(double kelvin) { return format_number(kelvin * 1e3); }

} // namespace

std::string format_number(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string OutputHeader::comment_block() const {
  std::string s = "# ioncrystal " + command + "\n";
  s += "# config: " + config.dump() + "\n";
  if (seeds) {
    s += "# seeds: run=" + std::to_string(seeds->run) +
         " thermal=" + std::to_string(seeds->thermal) +
         " lasers=" + std::to_string(seeds->lasers) + "\n";
  }
  return s;
}

void write_equilibrium_csv(const std::filesystem::path &path,
                           const OutputHeader &header,
                           const EquilibriumConfig &eq) {
  auto out = open_text(path, header);
  out << "ion,x_um,y_um,z_um\n";
  for (Eigen::Index i = 0; i < eq.positions_rot.rows(); ++i) {
    out << i << ',' << micrometres(eq.positions_rot(i, 0)) << ','
        << micrometres(eq.positions_rot(i, 1)) << ','
        << micrometres(eq.positions_rot(i, 2)) << '\n';
  }
  finish(out, path);
}

void write_key_values(
    const std::filesystem::path &path, const OutputHeader &header,
    const std::vector<std::pair<std::string, std::string>> &kv) {
  auto out = open_text(path, header);
  out << "key,value\n";
  for (const auto &[k, v] : kv) {
    out << k << ',' << v << '\n';
  }
  finish(out, path);
}

void write_modes_csv(const std::filesystem::path &path,
                     const OutputHeader &header, const ModeDecomposition &dec) {
  auto out = open_text(path, header);
  out << "# branches_overlap: " << (dec.branches_overlap() ? "true" : "false")
      << '\n';
  out << "index,branch,frequency_hz\n";
  for (std::size_t k = 0; k < dec.mode_count(); ++k) {
    out << k << ',' << branch_name(dec.branches()[k]) << ','
        << format_number(dec.frequencies()(static_cast<Eigen::Index>(k)) /
                         constants::two_pi)
        << '\n';
  }
  finish(out, path);
}

void write_modes_binary(const std::filesystem::path &path,
                        const OutputHeader &header,
                        const ModeDecomposition &dec) {
  auto out = open_binary(path, header, kModesMagic);
  put<std::uint64_t>(out, dec.size());
  put<std::uint64_t>(out, dec.mode_count());
  for (std::size_t k = 0; k < dec.mode_count(); ++k) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(dec.branches()[k]));
    put<double>(out, dec.frequencies()(static_cast<Eigen::Index>(k)) /
                         constants::two_pi);
    const Eigen::VectorXcd w = dec.phase_space_vector(k);
    for (Eigen::Index e = 0; e < w.size(); ++e) {
      put<double>(out, w(e).real());
      put<double>(out, w(e).imag());
    }
  }
  finish(out, path);
}

void write_diagnostics_csv(const std::filesystem::path &path,
                           const OutputHeader &header,
                           const DiagnosticsSeries &d) {
  auto out = open_text(path, header);
  out << "t_s,KE_perp_mK,KE_par_mK,PE_mK,T_drum_mK,T_exb_mK,T_cyc_mK\n";
  const bool branches = d.has_branch_temperatures();
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << format_number(d.times[i]) << ',' << millikelvin(d.ke_perp[i]) << ','
        << millikelvin(d.ke_par[i]) << ',' << millikelvin(d.pe[i]) << ',';
    if (branches) {
      out << millikelvin(d.t_drumhead[i]) << ',' << millikelvin(d.t_exb[i])
          << ',' << millikelvin(d.t_cyclotron[i]) << '\n';
    } else {
      out << "nan,nan,nan\n";
    }
  }
  finish(out, path);
}

void write_spectrum_csv(const std::filesystem::path &path,
                        const OutputHeader &header, const SpectrumResult &s) {
  auto out = open_text(path, header);
  out << "# segment_length: " << s.segment_length
      << " segments: " << s.segment_count
      << " sample_rate_hz: " << format_number(s.sample_rate)
      << " peak_density: " << format_number(s.peak_density) << '\n';
  out << "freq_hz,power_norm\n";
  for (std::size_t b = 0; b < s.frequencies.size(); ++b) {
    out << format_number(s.frequencies[b]) << ',' << format_number(s.power[b])
        << '\n';
  }
  finish(out, path);
}

void write_peaks_csv(const std::filesystem::path &path,
                     const OutputHeader &header, const SpectrumReport &s) {
  auto out = open_text(path, header);
  out << "rank,predicted_hz,detected\n";
  for (std::size_t k = 0; k < s.predicted_hz.size(); ++k) {
    out << k << ',' << format_number(s.predicted_hz[k]) << ','
        << (s.detected[k] ? 1 : 0) << '\n';
  }
  finish(out, path);
}

void write_scan_csv(const std::filesystem::path &path,
                    const OutputHeader &header,
                    const std::vector<ScanRow> &rows) {
  auto out = open_text(path, header);
  out << "index,wall_frequency_hz,seed,status,KE_perp_mK,KE_par_mK,PE_mK,"
         "reconfigured,scattering_events,error\n";
  for (const auto &r : rows) {
    const double nan = std::nan("");
    std::string error = r.error;
    for (char &c : error) {
      if (c == '"' || c == '\n' || c == ',') {
        c = ' ';
      }
    }
    out << r.index << ',' << format_number(r.wall_frequency_hz) << ','
        << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
        << format_number(r.ok ? r.summary.ke_perp_mk : nan) << ','
        << format_number(r.ok ? r.summary.ke_par_mk : nan) << ','
        << format_number(r.ok ? r.summary.pe_mk : nan) << ','
        << (r.reconfigured ? 1 : 0) << ',' << r.scattering_events << ','
        << error << '\n';
  }
  finish(out, path);
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path &path,
                                   const OutputHeader &header,
                                   std::size_t n_ions, double dt_sample)
    : out_(open_binary(path, header, kTrajectoryMagic)), n_(n_ions) {
  put<std::uint64_t>(out_, n_ions);
  put<double>(out_, dt_sample);
  count_pos_ = out_.tellp();
  put<std::uint64_t>(out_, 0);
}

TrajectoryWriter::~TrajectoryWriter() {
  try {
    close();
  } catch (...) {
  }
}

void TrajectoryWriter::append(const Coords &positions) {
  if (static_cast<std::size_t>(positions.rows()) != n_) {
    throw ComputeError("trajectory frame has the wrong ion count");
  }
  // Column-major storage is already x[N], y[N], z[N].
  out_.write(reinterpret_cast<const char *>(positions.data()),
             static_cast<std::streamsize>(sizeof(double) * 3 * n_));
  ++count_;
}

void TrajectoryWriter::close() {
  if (!out_.is_open()) {
    return;
  }
  out_.seekp(count_pos_);
  put<std::uint64_t>(out_, count_);
  out_.close();
  if (!out_) {
    throw ComputeError("error writing trajectory file");
  }
}

TrajectoryFile read_trajectory(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ComputeError("cannot open '" + path.string() + "'");
  }
  TrajectoryFile f;
  f.config = read_binary_header(in, path, kTrajectoryMagic);
  f.n_ions = get<std::uint64_t>(in, path);
  f.dt_sample = get<double>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  f.frames.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Coords frame(static_cast<Eigen::Index>(f.n_ions), 3);
    if (!in.read(reinterpret_cast<char *>(frame.data()),
                 static_cast<std::streamsize>(sizeof(double) * 3 * f.n_ions))) {
      throw ComputeError("'" + path.string() + "' is truncated");
    }
    f.frames.push_back(std::move(frame));
  }
  return f;
}

ModesFile read_modes_binary(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ComputeError("cannot open '" + path.string() + "'");
  }
  ModesFile f;
  f.config = read_binary_header(in, path, kModesMagic);
  f.n_ions = get<std::uint64_t>(in, path);
  const auto count = get<std::uint64_t>(in, path);
  const auto len = static_cast<Eigen::Index>(6 * f.n_ions);
  for (std::uint64_t k = 0; k < count; ++k) {
    f.branches.push_back(get<std::uint64_t>(in, path));
    f.frequencies_hz.push_back(get<double>(in, path));
    Eigen::VectorXcd w(len);
    for (Eigen::Index e = 0; e < len; ++e) {
      const double re = get<double>(in, path);
      const double im = get<double>(in, path);
      w(e) = {re, im};
    }
    f.vectors.push_back(std::move(w));
  }
  return f;
}

} // namespace ioncrystal
