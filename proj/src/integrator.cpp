#include "ioncrystal/integrator.hpp"

#include "ioncrystal/linear_dynamics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ioncrystal {

namespace {

// Dimensionless kick / exact gyration / kick stepper with the acceleration
// cached between steps. The gyration solves x' = v, v' = wc v x z exactly,
// so the only splitting error comes from the electric forces.
class Stepper {
public:
  Stepper(const ScaledTrap &trap, CoulombMode mode,
          std::shared_ptr<const LinearizedCoulomb> lin, double dt)
      : trap_(trap), mode_(mode), lin_(std::move(lin)), dt_(dt) {
    const double theta = trap.cyclotron * dt;
    cos_ = std::cos(theta);
    sin_ = std::sin(theta);
    // Planar displacement = (a v_x + b v_y, a v_y - b v_x).
    a_ = sin_ / trap.cyclotron;
    b_ = (1.0 - cos_) / trap.cyclotron;
  }

  void prime(const Coords &x, double t) { evaluate(x, t); }

  // `t_next` is the (scaled) time at the end of the step.
  void advance(Coords &x, Coords &v, double t_next) {
    v.noalias() += (0.5 * dt_) * accel_;
    gyrate(x, v);
    evaluate(x, t_next);
    v.noalias() += (0.5 * dt_) * accel_;
  }

  const Coords &acceleration() const { return accel_; }

private:
  void evaluate(const Coords &x, double t) {
    kernels::trap_acceleration(trap_, t, x, accel_);
    if (mode_ == CoulombMode::Full) {
      kernels::coulomb_field(x, coulomb_);
    } else {
      lin_->scaled_field(t, x, coulomb_);
    }
    accel_ += coulomb_;
  }

  // A positive charge gyrates clockwise about +z.
  void gyrate(Coords &x, Coords &v) const {
    const Eigen::Index n = x.rows();
    double *px = x.col(0).data();
    double *py = x.col(1).data();
    double *pz = x.col(2).data();
    double *vx = v.col(0).data();
    double *vy = v.col(1).data();
    const double *vz = v.col(2).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ux = vx[i];
      const double uy = vy[i];
      px[i] += a_ * ux + b_ * uy;
      py[i] += a_ * uy - b_ * ux;
      pz[i] += dt_ * vz[i];
      vx[i] = cos_ * ux + sin_ * uy;
      vy[i] = cos_ * uy - sin_ * ux;
    }
  }

  ScaledTrap trap_;
  CoulombMode mode_;
  std::shared_ptr<const LinearizedCoulomb> lin_;
  double dt_;
  double cos_ = 1.0;
  double sin_ = 0.0;
  double a_ = 0.0;
  double b_ = 0.0;
  Coords accel_;
  Coords coulomb_;
};

[[noreturn]] void abort_non_finite(double t_seconds, std::size_t step_index,
                                   const Coords &x, const Coords &v,
                                   double length, double velocity) {
  std::ostringstream msg;
  msg << "non-finite state at t = " << t_seconds << " s (step " << step_index
      << ")";
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!x.row(i).allFinite() || !v.row(i).allFinite()) {
      msg << "; ion " << i << " x = (" << x(i, 0) * length << ", "
          << x(i, 1) * length << ", " << x(i, 2) * length << ") m, v = ("
          << v(i, 0) * velocity << ", " << v(i, 1) * velocity << ", "
          << v(i, 2) * velocity << ") m/s";
      break;
    }
  }
  throw ComputeError(msg.str());
}

// True when, after removing the best-fit rigid rotation about z, some ion
// sits closer to another ion's equilibrium site than to its own.
bool sites_exchanged(const Coords &x_rot, const Coords &eq) {
  const Eigen::Index n = x_rot.rows();
  double dot = 0.0;
  double cross = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    dot += eq(i, 0) * x_rot(i, 0) + eq(i, 1) * x_rot(i, 1);
    cross += eq(i, 0) * x_rot(i, 1) - eq(i, 1) * x_rot(i, 0);
  }
  const double norm = std::hypot(dot, cross);
  Coords x = x_rot;
  if (norm > 0.0) {
    kernels::rotate_planar(x, dot / norm, -cross / norm);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double own = (x.row(i) - eq.row(i)).squaredNorm();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && (x.row(i) - eq.row(j)).squaredNorm() < own) {
        return true;
      }
    }
  }
  return false;
}

std::size_t ratio_steps(double interval, double dt, const char *name) {
  const double r = interval / dt;
  const double rounded = std::round(r);
  if (rounded < 1.0 || std::abs(r - rounded) > 1e-6 * rounded) {
    throw ConfigError(std::string(name) +
                      " must be a positive integer multiple of dt");
  }
  return static_cast<std::size_t>(rounded);
}

} // namespace

CrystalState step(const CrystalState &state, const ForceField &field,
                  double dt) {
  state.validate();
  field.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ConfigError("dt must be positive");
  }
  const ScaledTrap trap = ScaledTrap::from(field.trap, field.species);
  const UnitSystem &u = trap.units;
  Stepper stepper(trap, field.coulomb_mode, field.linearization, dt / u.time);
  Coords x = state.positions / u.length;
  Coords v = state.velocities / u.velocity();
  double t = state.time / u.time;
  stepper.prime(x, t);
  t += dt / u.time;
  stepper.advance(x, v, t);
  if (!x.allFinite() || !v.allFinite()) {
    abort_non_finite(t * u.time, 1, x, v, u.length, u.velocity());
  }
  CrystalState out;
  out.time = state.time + dt;
  out.positions = x * u.length;
  out.velocities = v * u.velocity();
  return out;
}

void RunConfig::validate() const {
  species.validate();
  trap.validate(species);
  if (n_ions == 0) {
    throw ConfigError("n_ions must be at least 1");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ConfigError("dt must be positive");
  }
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) {
    throw ConfigError("t_final must be non-negative");
  }
  if (cyclotron_frequency(trap, species) * dt > max_cyclotron_phase) {
    std::ostringstream msg;
    msg << "dt = " << dt << " s does not resolve the cyclotron motion: "
        << "omega_c dt = " << cyclotron_frequency(trap, species) * dt
        << " > " << max_cyclotron_phase;
    throw ConfigError(msg.str());
  }
  ratio_steps(sample_interval, dt, "sample_interval");
  if (trajectory_interval > 0.0) {
    ratio_steps(trajectory_interval, dt, "trajectory_interval");
  }
  if (cooling) {
    cooling->validate();
  }
  if (const auto *e = std::get_if<ExplicitInit>(&initial)) {
    e->state.validate();
    if (e->state.size() != n_ions) {
      throw ConfigError("explicit initial state has the wrong ion count");
    }
  }
  if (equilibrium && equilibrium->size() != n_ions) {
    throw ConfigError("equilibrium has the wrong ion count");
  }
  if (!(reconfiguration_persistence >= 0.0)) {
    throw ConfigError("reconfiguration_persistence must be non-negative");
  }
  if (!(mode_sanity_bound > 0.0)) {
    throw ConfigError("mode_sanity_bound must be positive");
  }
}

std::size_t RunConfig::steps_per_sample() const {
  return ratio_steps(sample_interval, dt, "sample_interval");
}

std::size_t RunConfig::total_samples() const {
  return static_cast<std::size_t>(std::llround(t_final / dt)) /
             steps_per_sample() +
         1;
}

RunResult run(const RunConfig &cfg) {
  cfg.validate();
  RunResult result;
  result.equilibrium =
      cfg.equilibrium
          ? cfg.equilibrium
          : std::make_shared<const EquilibriumConfig>(find_equilibrium(
                cfg.n_ions, cfg.trap, cfg.species, cfg.equilibrium_options));
  const EquilibriumConfig &eq = *result.equilibrium;

  std::optional<ModeDecomposition> dec;
  if (eq.planar) {
    dec.emplace(eq, cfg.trap, cfg.species);
  }

  CrystalState initial;
  if (const auto *th = std::get_if<ThermalInit>(&cfg.initial)) {
    if (!dec) {
      throw ComputeError("thermal initialisation needs a planar equilibrium");
    }
    initial = synthesize_thermal_state(*dec, th->temperatures, th->seed);
  } else {
    initial = std::get<ExplicitInit>(cfg.initial).state;
  }

  const ScaledTrap trap = ScaledTrap::from(cfg.trap, cfg.species);
  const UnitSystem &u = trap.units;
  std::shared_ptr<const LinearizedCoulomb> lin;
  if (cfg.coulomb_mode == CoulombMode::Linearized) {
    lin = std::make_shared<const LinearizedCoulomb>(eq, cfg.trap, cfg.species);
  }
  const double dt = cfg.dt / u.time;
  Stepper stepper(trap, cfg.coulomb_mode, lin, dt);
  std::optional<PhotonScatterer> scatterer;
  if (cfg.cooling) {
    scatterer.emplace(*cfg.cooling, cfg.species);
  }

  const auto n = static_cast<Eigen::Index>(cfg.n_ions);
  const double n_kb = static_cast<double>(n) * constants::boltzmann;
  const Coords eq_scaled = eq.positions_rot / u.length;
  const double u_eq = kernels::rotating_energy(trap, eq_scaled);

  Coords x = initial.positions / u.length;
  Coords v = initial.velocities / u.velocity();
  const double t0 = initial.time / u.time;
  double t = t0;
  stepper.prime(x, t);

  const std::size_t steps_per_sample = cfg.steps_per_sample();
  const std::size_t samples = cfg.total_samples();
  const std::size_t total_steps = (samples - 1) * steps_per_sample;
  const std::size_t steps_per_frame =
      cfg.trajectory && cfg.trajectory_interval > 0.0
          ? ratio_steps(cfg.trajectory_interval, cfg.dt, "trajectory_interval")
          : 0;

  DiagnosticsSeries &d = result.diagnostics;
  d.times.reserve(samples);
  CrystalState si; // scratch for laser kicks and mode projection
  Coords xr, vr, lab;
  std::uint64_t events_since_sample = 0;
  double exchanged_since = -1.0;

  auto time_at = [&](std::size_t k) {
    return initial.time + static_cast<double>(k) * cfg.dt;
  };

  auto record = [&](double t_now, std::size_t k) {
    const double phase = trap.rotation * t_now;
    const double c = std::cos(phase);
    const double s = std::sin(phase);
    xr = x;
    vr = v;
    kernels::rotate_planar(xr, c, s);
    kernels::rotate_planar(vr, c, s);
    vr.col(0) -= trap.rotation * xr.col(1);
    vr.col(1) += trap.rotation * xr.col(0);

    const double e_unit = u.energy();
    const double ke_perp =
        0.5 * (vr.col(0).squaredNorm() + vr.col(1).squaredNorm());
    const double ke_par = 0.5 * vr.col(2).squaredNorm();
    const double u_now = kernels::rotating_energy(trap, xr);
    d.times.push_back(time_at(k));
    d.ke_perp.push_back(ke_perp * e_unit / n_kb);
    d.ke_par.push_back(ke_par * e_unit / n_kb);
    d.pe.push_back((u_now - u_eq) * e_unit / n_kb);
    d.rotating_energy.push_back((ke_perp + ke_par + u_now) * e_unit);
    d.event_rate.push_back(d.times.size() == 1
                               ? 0.0
                               : static_cast<double>(events_since_sample) /
                                     cfg.sample_interval);
    events_since_sample = 0;

    if (!dec) {
      return;
    }
    const Coords q = xr - eq_scaled;
    if (!result.reconfigured) {
      if (sites_exchanged(xr, eq_scaled)) {
        if (exchanged_since < 0.0) {
          exchanged_since = d.times.back();
        }
        if (d.times.back() - exchanged_since >=
            cfg.reconfiguration_persistence) {
          result.reconfigured = true;
          result.reconfiguration_time = exchanged_since;
        }
      } else {
        exchanged_since = -1.0;
      }
    }
    if (!result.reconfigured) {
      const Eigen::VectorXd energies =
          dec->project(q * u.length, vr * u.velocity());
      if (!energies.allFinite() ||
          energies.maxCoeff() > cfg.mode_sanity_bound) {
        result.reconfigured = true;
        result.reconfiguration_time = d.times.back();
      } else {
        const BranchTemperatures bt = branch_temperatures(*dec, energies);
        d.t_drumhead.push_back(bt.t_drumhead);
        d.t_exb.push_back(bt.t_exb);
        d.t_cyclotron.push_back(bt.t_cyclotron);
        return;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    d.t_drumhead.push_back(nan);
    d.t_exb.push_back(nan);
    d.t_cyclotron.push_back(nan);
  };

  auto emit_frame = [&](std::size_t k) {
    lab = x * u.length;
    cfg.trajectory(time_at(k), lab);
  };

  record(t, 0);
  if (steps_per_frame) {
    emit_frame(0);
  }
  for (std::size_t k = 1; k <= total_steps; ++k) {
    t = t0 + static_cast<double>(k) * dt;
    stepper.advance(x, v, t);
    if (scatterer) {
      si.time = time_at(k);
      si.positions = x * u.length;
      si.velocities = v * u.velocity();
      const std::size_t events = scatterer->apply(si, cfg.dt);
      if (events) {
        v = si.velocities / u.velocity();
        events_since_sample += events;
        result.scattering_events += events;
      }
    }
    if (!stepper.acceleration().allFinite() || !v.allFinite()) {
      abort_non_finite(time_at(k), k, x, v, u.length,
                       u.velocity());
    }
    if (k % steps_per_sample == 0) {
      record(t, k);
    }
    if (steps_per_frame && k % steps_per_frame == 0) {
      emit_frame(k);
    }
  }

  result.final_state.time = time_at(total_steps);
  result.final_state.positions = x * u.length;
  result.final_state.velocities = v * u.velocity();
  return result;
}

double relative_energy_drift(const RunResult &result) {
  const auto &e = result.diagnostics.rotating_energy;
  if (e.empty()) {
    return 0.0;
  }
  const double excitation = e.front() - result.equilibrium->energy;
  if (!(excitation > 0.0)) {
    throw ComputeError("energy drift undefined for a run starting at rest");
  }
  double worst = 0.0;
  for (double value : e) {
    worst = std::max(worst, std::abs(value - e.front()));
  }
  return worst / excitation;
}

double tail_average(const std::vector<double> &times,
                    const std::vector<double> &series, double window) {
  if (times.empty() || times.size() != series.size()) {
    throw ComputeError("tail_average needs equal, non-empty series");
  }
  const double start = times.back() - window;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= start - 1e-12 * std::abs(start)) {
      sum += series[i];
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

} // namespace ioncrystal
