#include "ioncrystal/forces.hpp"

#include "ioncrystal/linear_dynamics.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace ioncrystal {

namespace kernels {

namespace {

#if defined(__AVX512F__)
// 1/sqrt refined from the 14-bit hardware estimate by two Newton steps
// (relative error a few ulp).
inline __m512d inverse_sqrt(__m512d a) {
  const __m512d half = _mm512_set1_pd(0.5);
  const __m512d three_halves = _mm512_set1_pd(1.5);
  __m512d y = _mm512_rsqrt14_pd(a);
  for (int k = 0; k < 2; ++k) {
    const __m512d ay2 = _mm512_mul_pd(_mm512_mul_pd(a, y), y);
    y = _mm512_mul_pd(y, _mm512_fnmadd_pd(half, ay2, three_halves));
  }
  return y;
}
#endif

// Pair terms (x_i - x_j) / r^3 for j in [begin, end): summed into the
// returned field on ion i and subtracted from the field on each ion j.
// Vectorised with a fixed reduction order, so results are reproducible for
// a given build.
inline void pair_field(const double *px, const double *py, const double *pz,
                       Eigen::Index begin, Eigen::Index end, double xi,
                       double yi, double zi, double *fx, double *fy,
                       double *fz, double &ax, double &ay, double &az) {
#if defined(__AVX512F__)
  const __m512d vxi = _mm512_set1_pd(xi);
  const __m512d vyi = _mm512_set1_pd(yi);
  const __m512d vzi = _mm512_set1_pd(zi);
  const __m512d one = _mm512_set1_pd(1.0);
  __m512d vsx = _mm512_setzero_pd();
  __m512d vsy = _mm512_setzero_pd();
  __m512d vsz = _mm512_setzero_pd();
  for (Eigen::Index j = begin; j < end; j += 8) {
    const Eigen::Index left = end - j;
    const __mmask8 m =
        left >= 8 ? __mmask8(0xFF) : __mmask8((1u << left) - 1u);
    const __m512d dx = _mm512_sub_pd(vxi, _mm512_maskz_loadu_pd(m, px + j));
    const __m512d dy = _mm512_sub_pd(vyi, _mm512_maskz_loadu_pd(m, py + j));
    const __m512d dz = _mm512_sub_pd(vzi, _mm512_maskz_loadu_pd(m, pz + j));
    __m512d r2 = _mm512_mul_pd(dx, dx);
    r2 = _mm512_fmadd_pd(dy, dy, r2);
    r2 = _mm512_fmadd_pd(dz, dz, r2);
    r2 = _mm512_mask_blend_pd(m, one, r2);
    const __m512d inv_r = inverse_sqrt(r2);
    const __m512d inv_r3 = _mm512_mul_pd(_mm512_mul_pd(inv_r, inv_r), inv_r);
    const __m512d cx = _mm512_maskz_mul_pd(m, dx, inv_r3);
    const __m512d cy = _mm512_maskz_mul_pd(m, dy, inv_r3);
    const __m512d cz = _mm512_maskz_mul_pd(m, dz, inv_r3);
    vsx = _mm512_add_pd(vsx, cx);
    vsy = _mm512_add_pd(vsy, cy);
    vsz = _mm512_add_pd(vsz, cz);
    _mm512_mask_storeu_pd(
        fx + j, m, _mm512_sub_pd(_mm512_maskz_loadu_pd(m, fx + j), cx));
    _mm512_mask_storeu_pd(
        fy + j, m, _mm512_sub_pd(_mm512_maskz_loadu_pd(m, fy + j), cy));
    _mm512_mask_storeu_pd(
        fz + j, m, _mm512_sub_pd(_mm512_maskz_loadu_pd(m, fz + j), cz));
  }
  ax += _mm512_reduce_add_pd(vsx);
  ay += _mm512_reduce_add_pd(vsy);
  az += _mm512_reduce_add_pd(vsz);
#else
  double sx = 0.0, sy = 0.0, sz = 0.0;
#pragma omp simd reduction(+ : sx, sy, sz)
  for (Eigen::Index j = begin; j < end; ++j) {
    const double dx = xi - px[j];
    const double dy = yi - py[j];
    const double dz = zi - pz[j];
    const double r2 = dx * dx + dy * dy + dz * dz;
    const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
    const double cx = dx * inv_r3;
    const double cy = dy * inv_r3;
    const double cz = dz * inv_r3;
    sx += cx;
    sy += cy;
    sz += cz;
    fx[j] -= cx;
    fy[j] -= cy;
    fz[j] -= cz;
  }
  ax += sx;
  ay += sy;
  az += sz;
#endif
}

inline double accumulate_inverse_distance(const double *px, const double *py,
                                          const double *pz, Eigen::Index begin,
                                          Eigen::Index end, double xi,
                                          double yi, double zi) {
  double sum = 0.0;
#pragma omp simd reduction(+ : sum)
  for (Eigen::Index j = begin; j < end; ++j) {
    const double dx = xi - px[j];
    const double dy = yi - py[j];
    const double dz = zi - pz[j];
    sum += 1.0 / std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return sum;
}

} // namespace

double coulomb_energy(const Coords &x) {
  const Eigen::Index n = x.rows();
  const double *px = x.col(0).data();
  const double *py = x.col(1).data();
  const double *pz = x.col(2).data();
  double energy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    energy += accumulate_inverse_distance(px, py, pz, i + 1, n, px[i], py[i],
                                          pz[i]);
  }
  if (!std::isfinite(energy)) {
    throw ComputeError("coincident ions in Coulomb energy");
  }
  return energy;
}

void coulomb_field(const Coords &x, Coords &field) {
  const Eigen::Index n = x.rows();
  field.resize(n, 3);
  const double *px = x.col(0).data();
  const double *py = x.col(1).data();
  const double *pz = x.col(2).data();
  double *fx = field.col(0).data();
  double *fy = field.col(1).data();
  double *fz = field.col(2).data();
  field.setZero();
  double check = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double ax = fx[i], ay = fy[i], az = fz[i];
    pair_field(px, py, pz, i + 1, n, px[i], py[i], pz[i], fx, fy, fz, ax, ay,
               az);
    fx[i] = ax;
    fy[i] = ay;
    fz[i] = az;
    check += ax + ay + az;
  }
  if (!std::isfinite(check)) {
    throw ComputeError("coincident ions in Coulomb force");
  }
}

double trap_energy(const ScaledTrap &trap, const Coords &x_rot) {
  const double kx = trap.beta + trap.delta;
  const double ky = trap.beta - trap.delta;
  return 0.5 * (kx * x_rot.col(0).squaredNorm() +
                ky * x_rot.col(1).squaredNorm() + x_rot.col(2).squaredNorm());
}

double rotating_energy(const ScaledTrap &trap, const Coords &x_rot) {
  return trap_energy(trap, x_rot) + coulomb_energy(x_rot);
}

double rotating_energy_gradient(const ScaledTrap &trap, const Coords &x_rot,
                                Coords &gradient) {
  coulomb_field(x_rot, gradient);
  gradient = -gradient;
  gradient.col(0) += (trap.beta + trap.delta) * x_rot.col(0);
  gradient.col(1) += (trap.beta - trap.delta) * x_rot.col(1);
  gradient.col(2) += x_rot.col(2);
  return rotating_energy(trap, x_rot);
}

void rotate_planar(Coords &c, double cos_a, double sin_a) {
  const Eigen::Index n = c.rows();
  double *px = c.col(0).data();
  double *py = c.col(1).data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = px[i];
    const double y = py[i];
    px[i] = cos_a * x - sin_a * y;
    py[i] = sin_a * x + cos_a * y;
  }
}

void trap_acceleration(const ScaledTrap &trap, double t, const Coords &x,
                       Coords &accel) {
  const Eigen::Index n = x.rows();
  accel.resize(n, 3);
  const double phase = trap.rotation * t;
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  const double d = trap.delta;
  const double *px = x.col(0).data();
  const double *py = x.col(1).data();
  const double *pz = x.col(2).data();
  double *ax = accel.col(0).data();
  double *ay = accel.col(1).data();
  double *az = accel.col(2).data();
  for (Eigen::Index i = 0; i < n; ++i) {
    // Wall quadrupole 1/2 delta (x'^2 - y'^2), gradient rotated back.
    const double xr = c * px[i] - s * py[i];
    const double yr = s * px[i] + c * py[i];
    const double gx = d * xr;
    const double gy = -d * yr;
    ax[i] = 0.5 * px[i] - (c * gx + s * gy);
    ay[i] = 0.5 * py[i] - (-s * gx + c * gy);
    az[i] = -pz[i];
  }
}

} // namespace kernels

void ForceField::validate() const {
  species.validate();
  trap.validate(species);
  if (coulomb_mode == CoulombMode::Linearized && !linearization) {
    throw ConfigError("linearized Coulomb mode requires a linearization");
  }
}

double coulomb_potential(const Coords &positions, double charge) {
  if (positions.rows() < 2) {
    return 0.0;
  }
  return constants::coulomb_constant * charge * charge *
         kernels::coulomb_energy(positions);
}

Coords coulomb_force(const Coords &positions, double charge) {
  Coords field;
  kernels::coulomb_field(positions, field);
  // field holds sum (x_i - x_j)/r^3 in the units of the input coordinates
  return constants::coulomb_constant * charge * charge * field;
}

Coords lab_frame_force(const CrystalState &state, const ForceField &field) {
  state.validate();
  field.validate();
  const ScaledTrap scaled = ScaledTrap::from(field.trap, field.species);
  const UnitSystem &u = scaled.units;
  const Coords x = state.positions / u.length;
  const double t = state.time / u.time;

  Coords accel;
  kernels::trap_acceleration(scaled, t, x, accel);
  Coords coulomb;
  if (field.coulomb_mode == CoulombMode::Full) {
    kernels::coulomb_field(x, coulomb);
  } else {
    field.linearization->scaled_field(t, x, coulomb);
  }
  accel += coulomb;
  Coords force = accel * u.force();

  // q v x B with B = B z
  const double qb = field.species.charge * field.trap.b_field;
  force.col(0) += qb * state.velocities.col(1);
  force.col(1) -= qb * state.velocities.col(0);
  return force;
}

RotatingState to_rotating_frame(const CrystalState &state, double omega_r) {
  RotatingState out;
  out.time = state.time;
  const double phase = omega_r * state.time;
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  out.positions = state.positions;
  kernels::rotate_planar(out.positions, c, s);
  out.velocities = state.velocities;
  kernels::rotate_planar(out.velocities, c, s);
  // d/dt of the rotated coordinates adds omega_r z x x'
  out.velocities.col(0) -= omega_r * out.positions.col(1);
  out.velocities.col(1) += omega_r * out.positions.col(0);
  return out;
}

CrystalState from_rotating_frame(const RotatingState &state, double omega_r) {
  CrystalState out;
  out.time = state.time;
  const double phase = omega_r * state.time;
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  out.velocities = state.velocities;
  out.velocities.col(0) += omega_r * state.positions.col(1);
  out.velocities.col(1) -= omega_r * state.positions.col(0);
  kernels::rotate_planar(out.velocities, c, -s);
  out.positions = state.positions;
  kernels::rotate_planar(out.positions, c, -s);
  return out;
}

double rotating_potential_energy(const Coords &positions_rot,
                                 const TrapParams &trap,
                                 const SpeciesParams &species) {
  const ScaledTrap scaled = ScaledTrap::from(trap, species);
  const Coords x = positions_rot / scaled.units.length;
  return kernels::rotating_energy(scaled, x) * scaled.units.energy();
}

} // namespace ioncrystal
