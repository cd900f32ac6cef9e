#include "ioncrystal/modes.hpp"

#include "ioncrystal/forces.hpp"
#include "ioncrystal/linear_dynamics.hpp"
#include "ioncrystal/random.hpp"

#include <algorithm>
#include <string>

namespace ioncrystal {

namespace {

using Complex = std::complex<double>;

struct AxialSolution {
  Eigen::VectorXd frequencies; // descending
  Eigen::MatrixXd vectors;
};

AxialSolution solve_axial(const Eigen::MatrixXd &kz) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kz);
  if (es.info() != Eigen::Success) {
    throw ComputeError("axial eigen-solve failed");
  }
  const Eigen::Index n = kz.rows();
  if (es.eigenvalues()(0) <= 0.0) {
    throw ComputeError("axial Hessian not positive definite: past planar "
                       "stability (lowest eigenvalue " +
                       std::to_string(es.eigenvalues()(0)) + ")");
  }
  AxialSolution out;
  out.frequencies.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.frequencies(k) = std::sqrt(es.eigenvalues()(n - 1 - k));
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return out;
}

struct PlanarSolution {
  Eigen::VectorXd frequencies; // ascending, positive
  Eigen::MatrixXcd vectors;    // 4N x 2N
  Eigen::MatrixXd k_sqrt;
  Eigen::MatrixXd k_inv_sqrt;
};

// With y = (K^1/2 q, v) the equations q'' = -K q + g G q' (G v = v x z)
// become y' = B y with B skew-symmetric, so iB is Hermitian.
PlanarSolution solve_planar(const Eigen::MatrixXd &kp, double gyro) {
  const Eigen::Index n2 = kp.rows();
  const Eigen::Index n = n2 / 2;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ks(kp);
  if (ks.info() != Eigen::Success) {
    throw ComputeError("planar stiffness eigen-solve failed");
  }
  if (ks.eigenvalues()(0) <= 0.0) {
    throw ComputeError("planar Hessian not positive definite: unstable "
                       "in-plane equilibrium");
  }
  PlanarSolution out;
  out.k_sqrt = ks.operatorSqrt();
  out.k_inv_sqrt = ks.operatorInverseSqrt();

  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n2, 2 * n2);
  b.topRightCorner(n2, n2) = out.k_sqrt;
  b.bottomLeftCorner(n2, n2) = -out.k_sqrt;
  for (Eigen::Index i = 0; i < n; ++i) {
    b(n2 + i, n2 + n + i) = gyro;
    b(n2 + n + i, n2 + i) = -gyro;
  }
  const Eigen::MatrixXcd h = Complex(0.0, 1.0) * b.cast<Complex>();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) {
    throw ComputeError("planar eigen-solve failed");
  }
  // Eigenvalues pair as +-w; keep the positive half.
  out.frequencies = es.eigenvalues().tail(n2);
  out.vectors = es.eigenvectors().rightCols(n2);
  if (out.frequencies(0) <= 0.0) {
    throw ComputeError("planar spectrum contains a zero-frequency mode");
  }
  return out;
}

Eigen::MatrixXd scaled_hessian(const HessianData &h) {
  return h.matrix / h.units.stiffness();
}

double gyro_frequency(const TrapParams &trap, const SpeciesParams &species) {
  return cyclotron_frequency(trap, species) - 2.0 * trap.omega_r;
}

} // namespace

std::string_view branch_name(Branch branch) {
  switch (branch) {
  case Branch::Drumhead:
    return "drumhead";
  case Branch::ExB:
    return "exb";
  case Branch::Cyclotron:
    return "cyclotron";
  }
  return "unknown";
}

Eigen::MatrixXd HessianData::axial() const {
  const Eigen::Index n = matrix.rows() / 3;
  return matrix.bottomRightCorner(n, n);
}

Eigen::MatrixXd HessianData::planar() const {
  const Eigen::Index n = matrix.rows() / 3;
  return matrix.topLeftCorner(2 * n, 2 * n);
}

HessianData total_hessian(const EquilibriumConfig &eq, const TrapParams &trap,
                          const SpeciesParams &species) {
  if (!eq.planar) {
    throw ComputeError("mode analysis needs a planar equilibrium");
  }
  const ScaledTrap scaled = ScaledTrap::from(trap, species);
  Coords x = eq.positions_rot / scaled.units.length;
  x.col(2).setZero();
  HessianData out;
  out.units = scaled.units;
  out.matrix = kernels::rotating_hessian(scaled, x, true) *
               scaled.units.stiffness();
  return out;
}

DrumheadModes drumhead_modes(const HessianData &h,
                             const SpeciesParams &species) {
  (void)species; // the unit system already carries the ion mass
  const Eigen::Index n = h.matrix.rows() / 3;
  AxialSolution ax = solve_axial(scaled_hessian(h).bottomRightCorner(n, n));
  return {ax.frequencies * h.units.frequency(), std::move(ax.vectors)};
}

PlanarModes planar_modes(const HessianData &h, const TrapParams &trap,
                         const SpeciesParams &species) {
  const Eigen::Index n = h.matrix.rows() / 3;
  const double w = h.units.frequency();
  PlanarSolution pl = solve_planar(scaled_hessian(h).topLeftCorner(2 * n, 2 * n),
                                   gyro_frequency(trap, species) / w);
  const double root_k = std::sqrt(h.units.stiffness());
  return {pl.frequencies * w, std::move(pl.vectors), pl.k_sqrt * root_k,
          pl.k_inv_sqrt / root_k};
}

ModeDecomposition::ModeDecomposition(const EquilibriumConfig &eq,
                                     const TrapParams &trap,
                                     const SpeciesParams &species)
    : n_(eq.size()), eq_(eq), trap_(trap), species_(species) {
  const HessianData h = total_hessian(eq, trap, species);
  units_ = h.units;
  const Eigen::MatrixXd k = scaled_hessian(h);
  const auto n = static_cast<Eigen::Index>(n_);
  AxialSolution ax = solve_axial(k.bottomRightCorner(n, n));
  PlanarSolution pl = solve_planar(k.topLeftCorner(2 * n, 2 * n),
                                   gyro_frequency(trap, species) /
                                       units_.frequency());

  // Branch split at wc/2 between the two planar halves.
  const double split = 0.5 * cyclotron_frequency(trap, species) /
                       units_.frequency();
  if (!(pl.frequencies(n - 1) < split && pl.frequencies(n) > split)) {
    throw ComputeError("planar modes do not separate into ExB and cyclotron "
                       "branches at wc/2");
  }

  axial_freq_ = std::move(ax.frequencies);
  axial_vec_ = std::move(ax.vectors);
  planar_freq_ = std::move(pl.frequencies);
  planar_vec_ = std::move(pl.vectors);
  k_sqrt_ = std::move(pl.k_sqrt);
  k_inv_sqrt_ = std::move(pl.k_inv_sqrt);

  frequencies_.resize(3 * n);
  frequencies_ << axial_freq_, planar_freq_;
  frequencies_ *= units_.frequency();
  branches_.assign(n_, Branch::Drumhead);
  branches_.insert(branches_.end(), n_, Branch::ExB);
  branches_.insert(branches_.end(), n_, Branch::Cyclotron);
}

Eigen::VectorXd ModeDecomposition::branch_frequencies(Branch branch) const {
  const auto n = static_cast<Eigen::Index>(n_);
  return frequencies_.segment(static_cast<Eigen::Index>(branch) * n, n);
}

bool ModeDecomposition::branches_overlap() const {
  return branch_frequencies(Branch::Drumhead).minCoeff() <
         branch_frequencies(Branch::ExB).maxCoeff();
}

Eigen::VectorXcd ModeDecomposition::phase_space_vector(std::size_t k) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto idx = static_cast<Eigen::Index>(k);
  if (idx >= 3 * n) {
    throw std::out_of_range("mode index out of range");
  }
  const double root_e = std::sqrt(units_.energy());
  const double ql = units_.length / root_e;
  const double vl = units_.velocity() / root_e;
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(6 * n);
  if (idx < n) {
    const double omega = axial_freq_(idx);
    const double a = 1.0 / (std::sqrt(2.0) * omega);
    w.segment(2 * n, n) = (a * ql) * axial_vec_.col(idx).cast<Complex>();
    w.segment(5 * n, n) =
        Complex(0.0, -omega * a * vl) * axial_vec_.col(idx).cast<Complex>();
  } else {
    const Eigen::VectorXcd u = planar_vec_.col(idx - n);
    w.head(2 * n) = ql * (k_inv_sqrt_.cast<Complex>() * u.head(2 * n));
    w.segment(3 * n, 2 * n) = vl * u.tail(2 * n);
  }
  return w;
}

Eigen::VectorXd ModeDecomposition::project(const Coords &q,
                                           const Coords &v) const {
  const auto n = static_cast<Eigen::Index>(n_);
  if (q.rows() != n || v.rows() != n) {
    throw ComputeError("state size does not match the mode decomposition");
  }
  const Coords qs = q / units_.length;
  const Coords vs = v / units_.velocity();
  Eigen::VectorXd e(3 * n);

  const Eigen::VectorXd zq = axial_vec_.transpose() * qs.col(2);
  const Eigen::VectorXd zv = axial_vec_.transpose() * vs.col(2);
  e.head(n) = 0.5 * (zv.array().square() +
                     axial_freq_.array().square() * zq.array().square());

  Eigen::VectorXd y(4 * n);
  const Eigen::Map<const Eigen::VectorXd> qf(qs.data(), 2 * n);
  const Eigen::Map<const Eigen::VectorXd> vf(vs.data(), 2 * n);
  y.head(2 * n).noalias() = k_sqrt_ * qf;
  y.tail(2 * n) = vf;
  const Eigen::VectorXcd c = planar_vec_.adjoint() * y.cast<Complex>();
  e.tail(2 * n) = c.cwiseAbs2();
  return e * units_.energy();
}

void ModeDecomposition::synthesize(const Eigen::VectorXd &energies,
                                   const Eigen::VectorXd &phases, Coords &q,
                                   Coords &v) const {
  const auto n = static_cast<Eigen::Index>(n_);
  if (energies.size() != 3 * n || phases.size() != 3 * n) {
    throw ComputeError("synthesis needs one energy and phase per mode");
  }
  if ((energies.array() < 0.0).any()) {
    throw ComputeError("mode energies must be non-negative");
  }
  const Eigen::VectorXd es = energies / units_.energy();
  q = Coords::Zero(n, 3);
  v = Coords::Zero(n, 3);

  Eigen::VectorXd zq(n), zv(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double amp = std::sqrt(2.0 * es(k)) / axial_freq_(k);
    zq(k) = amp * std::cos(phases(k));
    zv(k) = -axial_freq_(k) * amp * std::sin(phases(k));
  }
  q.col(2) = axial_vec_ * zq;
  v.col(2) = axial_vec_ * zv;

  Eigen::VectorXcd c(2 * n);
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    c(k) = std::polar(std::sqrt(es(n + k)), phases(n + k));
  }
  const Eigen::VectorXd y = 2.0 * (planar_vec_ * c).real();
  Eigen::Map<Eigen::VectorXd> qf(q.data(), 2 * n);
  Eigen::Map<Eigen::VectorXd> vf(v.data(), 2 * n);
  qf.noalias() = k_inv_sqrt_ * y.head(2 * n);
  vf = y.tail(2 * n);

  q *= units_.length;
  v *= units_.velocity();
}

BranchTemperatures branch_temperatures(const ModeDecomposition &dec,
                                       const Eigen::VectorXd &energies) {
  const auto n = static_cast<Eigen::Index>(dec.size());
  const double per = 1.0 / (static_cast<double>(n) * constants::boltzmann);
  return {energies.segment(0, n).sum() * per,
          energies.segment(n, n).sum() * per,
          energies.segment(2 * n, n).sum() * per};
}

ModeEnergies mode_energies(const CrystalState &state,
                           const ModeDecomposition &dec, double sanity_bound) {
  state.validate();
  const RotatingState rot = to_rotating_frame(state, dec.trap().omega_r);
  const Coords q = rot.positions - dec.equilibrium().positions_rot;
  ModeEnergies out;
  out.energies = dec.project(q, rot.velocities);
  out.temperatures = branch_temperatures(dec, out.energies);
  out.reconfiguration_warning =
      !out.energies.allFinite() || out.energies.maxCoeff() > sanity_bound;
  return out;
}

CrystalState synthesize_thermal_state(const ModeDecomposition &dec,
                                      const BranchTemperatures &temps,
                                      std::uint64_t rng_seed) {
  const auto n = static_cast<Eigen::Index>(dec.size());
  if (temps.t_drumhead < 0.0 || temps.t_exb < 0.0 || temps.t_cyclotron < 0.0) {
    throw ConfigError("branch temperatures must be non-negative");
  }
  Eigen::VectorXd energies(3 * n);
  energies.segment(0, n).setConstant(constants::boltzmann * temps.t_drumhead);
  energies.segment(n, n).setConstant(constants::boltzmann * temps.t_exb);
  energies.segment(2 * n, n).setConstant(constants::boltzmann *
                                         temps.t_cyclotron);
  Rng rng(rng_seed);
  Eigen::VectorXd phases(3 * n);
  for (Eigen::Index k = 0; k < 3 * n; ++k) {
    phases(k) = constants::two_pi * uniform01(rng);
  }
  RotatingState rot;
  Coords q, v;
  dec.synthesize(energies, phases, q, v);
  rot.positions = dec.equilibrium().positions_rot + q;
  rot.velocities = v;
  return from_rotating_frame(rot, dec.trap().omega_r);
}

} // namespace ioncrystal
