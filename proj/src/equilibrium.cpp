#include "ioncrystal/equilibrium.hpp"

#include "ioncrystal/forces.hpp"
#include "ioncrystal/linear_dynamics.hpp"
#include "ioncrystal/random.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>

namespace ioncrystal {

namespace {

using Vec = Eigen::VectorXd;

// Rotating-frame potential as a function of the flattened coordinates.
struct Objective {
  const ScaledTrap &trap;
  Eigen::Index n;

  double operator()(const Vec &x, Vec &grad) const {
    const Eigen::Map<const Coords> pos(x.data(), n, 3);
    Coords g;
    const double e = kernels::rotating_energy_gradient(trap, pos, g);
    grad = Eigen::Map<const Vec>(g.data(), 3 * n);
    return e;
  }
  double energy(const Vec &x) const {
    const Eigen::Map<const Coords> pos(x.data(), n, 3);
    return kernels::rotating_energy(trap, pos);
  }
};

// Energy that maps coincident ions to +inf so line searches back off.
double safe_energy(const Objective &f, const Vec &x, Vec &grad) {
  try {
    return f(x, grad);
  } catch (const ComputeError &) {
    return std::numeric_limits<double>::infinity();
  }
}

// Limited-memory BFGS with a backtracking Armijo search. Stops when the
// infinity norm of the gradient drops below tol or progress stalls.
void lbfgs(const Objective &f, Vec &x, double tol, int max_iter,
           double max_step) {
  constexpr int history = 12;
  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vec g;
  double e = f(x, g);
  int stalls = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < tol) {
      return;
    }
    // two-loop recursion
    Vec d = -g;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(d);
      d -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(d);
      d += (alpha[k] - beta) * s_hist[k];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }
    double step = 1.0;
    const double longest = d.lpNorm<Eigen::Infinity>();
    if (longest > max_step) {
      step = max_step / longest;
    }
    Vec x_new, g_new;
    double e_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * d;
      e_new = safe_energy(f, x_new, g_new);
      if (e_new <= e + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Direction is useless at round-off level; restart from steepest
      // descent once, then give up.
      if (s_hist.empty() || ++stalls > 3) {
        return;
      }
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    Vec s = x_new - x;
    Vec y = g_new - g;
    const double sy = s.dot(y);
    x = std::move(x_new);
    g = std::move(g_new);
    e = e_new;
    if (sy > 1e-16 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
}

struct Minimum {
  Vec x;
  double energy = 0.0;
  double gradient_norm = 0.0;
};

// L-BFGS, then escape any negative-curvature direction and finish with
// Newton steps on the exact Hessian.
Minimum minimise(const ScaledTrap &trap, Eigen::Index n, Vec x,
                 const EquilibriumOptions &options) {
  const Objective f{trap, n};
  Vec g;
  for (int round = 0; round < 40; ++round) {
    lbfgs(f, x, std::max(options.tol, 1e-7), options.max_iter, 0.5);
    const Eigen::Map<const Coords> pos(x.data(), n, 3);
    const Eigen::MatrixXd h = kernels::rotating_hessian(trap, pos, true);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    const Vec &lambda = eig.eigenvalues();
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    if (lambda[0] < -1e-9 * scale) {
      const Vec dir = eig.eigenvectors().col(0);
      const double e0 = f.energy(x);
      double best = e0;
      Vec best_x = x;
      for (double amp : {0.05, -0.05, 0.2, -0.2}) {
        Vec trial = x + amp * dir;
        Vec gt;
        const double et = safe_energy(f, trial, gt);
        if (et < best) {
          best = et;
          best_x = trial;
        }
      }
      if (best_x == x) {
        best_x = x + 1e-3 * dir;
      }
      x = best_x;
      continue;
    }
    // Newton polish with a pseudo-inverse that ignores zero modes (e.g. the
    // rotation mode of an isotropic trap).
    double e = f(x, g);
    for (int it = 0; it < 20 && g.lpNorm<Eigen::Infinity>() > options.tol;
         ++it) {
      const Eigen::Map<const Coords> p(x.data(), n, 3);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          kernels::rotating_hessian(trap, p, true));
      const Vec coeff = es.eigenvectors().transpose() * g;
      Vec step_coeff = Vec::Zero(coeff.size());
      const double cutoff =
          1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      for (Eigen::Index k = 0; k < coeff.size(); ++k) {
        if (es.eigenvalues()[k] > cutoff) {
          step_coeff[k] = -coeff[k] / es.eigenvalues()[k];
        }
      }
      const Vec dx = es.eigenvectors() * step_coeff;
      double t = 1.0;
      Vec xn, gn;
      double en = e;
      for (int ls = 0; ls < 30; ++ls) {
        xn = x + t * dx;
        en = safe_energy(f, xn, gn);
        if (en <= e + 1e-12 * std::abs(e) ||
            gn.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
          break;
        }
        t *= 0.5;
      }
      if (!std::isfinite(en)) {
        break;
      }
      x = xn;
      g = gn;
      e = en;
    }
    break;
  }
  Minimum m;
  m.energy = f(x, g);
  m.gradient_norm = g.lpNorm<Eigen::Infinity>();
  m.x = std::move(x);
  return m;
}

Vec seed_positions(Eigen::Index n, const ScaledTrap &trap, std::size_t index,
                   std::uint64_t seed) {
  Rng rng(seed);
  const double beta = trap.beta;
  const double radius = std::cbrt(3.0 * std::numbers::pi *
                                  static_cast<double>(n) / (4.0 * beta));
  const double sigma0 = 2.0 * beta * radius / (std::numbers::pi * std::numbers::pi);
  const double spacing = std::sqrt(2.0 / (std::sqrt(3.0) * sigma0));
  // Elongate along the soft (y) axis.
  const double sx = std::sqrt(beta / (beta + trap.delta));
  const double sy = std::sqrt(beta / std::max(beta - trap.delta, 1e-12));

  Coords pos = Coords::Zero(n, 3);
  if (index % 2 == 0) {
    const double angle = index == 0 ? 0.0 : constants::two_pi * uniform01(rng);
    const double jitter = index == 0 ? 0.0 : 0.05 * spacing;
    std::vector<Eigen::Vector2d> sites;
    const int m = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))) + 3;
    for (int i = -m; i <= m; ++i) {
      for (int j = -m; j <= m; ++j) {
        const double u = spacing * (i + 0.5 * j);
        const double v = spacing * (std::sqrt(3.0) / 2.0) * j;
        sites.emplace_back(std::cos(angle) * u - std::sin(angle) * v,
                           std::sin(angle) * u + std::cos(angle) * v);
      }
    }
    std::stable_sort(sites.begin(), sites.end(),
                     [](const Eigen::Vector2d &a, const Eigen::Vector2d &b) {
                       return a.squaredNorm() < b.squaredNorm();
                     });
    for (Eigen::Index i = 0; i < n; ++i) {
      pos(i, 0) = sx * sites[i][0] + jitter * (2.0 * uniform01(rng) - 1.0);
      pos(i, 1) = sy * sites[i][1] + jitter * (2.0 * uniform01(rng) - 1.0);
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = radius * std::sqrt(uniform01(rng));
      const double phi = constants::two_pi * uniform01(rng);
      pos(i, 0) = sx * r * std::cos(phi);
      pos(i, 1) = sy * r * std::sin(phi);
    }
  }
  if (n == 1) {
    pos.setZero();
  }
  return Eigen::Map<const Vec>(pos.data(), 3 * n);
}

} // namespace

EquilibriumConfig find_equilibrium(std::size_t n_ions, const TrapParams &trap,
                                   const SpeciesParams &species,
                                   const EquilibriumOptions &options) {
  if (n_ions == 0) {
    throw ConfigError("need at least one ion");
  }
  species.validate();
  trap.validate(species);
  if (options.seeds.empty() && !options.initial_guess) {
    throw ConfigError("equilibrium search needs at least one seed");
  }
  const ScaledTrap scaled = ScaledTrap::from(trap, species);
  const auto n = static_cast<Eigen::Index>(n_ions);

  std::vector<Vec> starts;
  if (options.initial_guess) {
    if (options.initial_guess->rows() != n) {
      throw ConfigError("initial guess has the wrong ion count");
    }
    const Coords guess = *options.initial_guess / scaled.units.length;
    starts.emplace_back(Eigen::Map<const Vec>(guess.data(), 3 * n));
  }
  for (std::size_t k = 0; k < options.seeds.size(); ++k) {
    starts.push_back(seed_positions(n, scaled, k, options.seeds[k]));
  }

  std::optional<Minimum> best;
  double best_residual = std::numeric_limits<double>::infinity();
  for (Vec &start : starts) {
    Minimum m = minimise(scaled, n, std::move(start), options);
    best_residual = std::min(best_residual, m.gradient_norm);
    if (!(m.gradient_norm <= options.tol)) {
      continue;
    }
    // Ties resolved in favour of the earlier seed.
    if (!best || m.energy < best->energy - 1e-12 * std::abs(best->energy)) {
      best = std::move(m);
    }
  }
  if (!best) {
    std::ostringstream msg;
    msg << "equilibrium search did not converge; best residual "
        << best_residual << " (tolerance " << options.tol << ")";
    throw ComputeError(msg.str());
  }

  const UnitSystem &u = scaled.units;
  EquilibriumConfig eq;
  const Eigen::Map<const Coords> pos(best->x.data(), n, 3);
  eq.planar = pos.col(2).cwiseAbs().maxCoeff() < options.planarity_tol;
  eq.positions_rot = pos * u.length;
  if (eq.planar) {
    eq.positions_rot.col(2).setZero();
  }
  eq.energy = best->energy * u.energy();
  eq.gradient_norm = best->gradient_norm * u.force();
  return eq;
}

double critical_wall_frequency(std::size_t n_ions,
                               const TrapParams &trap_template,
                               const SpeciesParams &species,
                               double delta_over_beta,
                               std::pair<double, double> bracket,
                               const EquilibriumOptions &options) {
  auto [lo, hi] = bracket;
  if (!(lo < hi)) {
    throw ConfigError("critical frequency bracket must satisfy lo < hi");
  }
  auto planar_at = [&](double omega_r) {
    const TrapParams trap =
        with_wall_frequency(trap_template, species, omega_r, delta_over_beta);
    return find_equilibrium(n_ions, trap, species, options).planar;
  };
  if (!planar_at(lo)) {
    throw ConfigError("critical frequency bracket: equilibrium at the lower "
                      "end is not planar");
  }
  if (planar_at(hi)) {
    throw ConfigError("critical frequency bracket: equilibrium at the upper "
                      "end is still planar");
  }
  const double resolution = constants::two_pi * 50.0;
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (planar_at(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double min_pair_distance(const Coords &positions) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < positions.rows(); ++j) {
      best = std::min(best, (positions.row(i) - positions.row(j)).norm());
    }
  }
  return best;
}

double crystal_radius(const Coords &positions) {
  return positions.leftCols<2>().rowwise().norm().maxCoeff();
}

} // namespace ioncrystal
