#pragma once

#include "ioncrystal/core.hpp"
#include "ioncrystal/equilibrium.hpp"
#include "ioncrystal/random.hpp"
#include "tone.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace testing {

using namespace ioncrystal;

inline NistParams nist(double wall_khz, double delta_over_beta = 0.25) {
  return default_nist_params(constants::two_pi * wall_khz * 1e3,
                             delta_over_beta);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

/// Random cloud of `n` ions inside a cube of side `span` (m), no two
/// closer than span / (4 n).
inline Coords random_cloud(std::size_t n, double span, std::uint64_t seed) {
  Rng rng(seed);
  Coords x(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    while (true) {
      for (int c = 0; c < 3; ++c) {
        x(i, c) = span * (uniform01(rng) - 0.5);
      }
      bool ok = true;
      for (Eigen::Index j = 0; j < i; ++j) {
        ok = ok && (x.row(i) - x.row(j)).norm() > span / (4.0 * n);
      }
      if (ok) {
        break;
      }
    }
  }
  return x;
}

/// Equilibria are shared between test cases; finding one for N=54 costs
/// about a second.
inline std::shared_ptr<const EquilibriumConfig>
cached_equilibrium(std::size_t n, double wall_khz) {
  static std::mutex m;
  static std::map<std::pair<std::size_t, double>,
                  std::shared_ptr<const EquilibriumConfig>>
      cache;
  std::lock_guard lock(m);
  auto &slot = cache[{n, wall_khz}];
  if (!slot) {
    const NistParams p = nist(wall_khz);
    slot = std::make_shared<const EquilibriumConfig>(
        find_equilibrium(n, p.trap, p.species));
  }
  return slot;
}

} // namespace testing
