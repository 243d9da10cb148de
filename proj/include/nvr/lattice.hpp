#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvr/rng.hpp"

namespace nvr::lattice {

struct LatticeSpec {
  double a = 3.57;           // lattice constant, angstrom
  int n_super = 5;           // conventional cells per axis
  double p13 = 0.011;        // 13C substitution probability per site
  int dopant_cap = 200;      // hard cap on dopants generated in the box
  double r_cut = 6.0;        // bath cutoff radius, angstrom
  double alpha = 1.99e4;     // secular dipolar prefactor, kHz * angstrom^3
  std::uint64_t seed = 0;

  double nn_distance() const { return std::sqrt(3.0) / 4.0 * a; }
  double box_side() const { return a / 4.0 * (4.0 * n_super - 1.0); }

  void validate() const {
    if (!(a > 0.0)) throw std::invalid_argument("lattice constant must be positive");
    if (n_super < 1) throw std::invalid_argument("supercell count must be >= 1");
    if (!(p13 >= 0.0 && p13 <= 1.0))
      throw std::invalid_argument("doping probability must lie in [0, 1]");
    if (dopant_cap < 0) throw std::invalid_argument("dopant cap must be >= 0");
    if (!(r_cut > 0.0)) throw std::invalid_argument("cutoff radius must be positive");
    if (!(alpha > 0.0)) throw std::invalid_argument("coupling prefactor must be positive");
  }
};

using Site = Eigen::Vector3d;

struct NVFrame {
  Eigen::Vector3d vacancy{0.0, 0.0, 0.0};
  Eigen::Vector3d nitrogen{0.0, 0.0, 0.0};
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
};

struct C13Spin {
  Eigen::Vector3d position;  // angstrom, vacancy at the origin
  double a_par = 0.0;        // parallel hyperfine coupling, kHz
};

struct NuclearBath {
  std::vector<C13Spin> spins;
  LatticeSpec spec;
  NVFrame nv;
};

// Eight-point diamond basis in quarter-cell integer coordinates.
inline constexpr std::array<std::array<int, 3>, 8> kDiamondBasis{{
    {0, 0, 0}, {0, 2, 2}, {2, 0, 2}, {2, 2, 0},
    {1, 1, 1}, {1, 3, 3}, {3, 1, 3}, {3, 3, 1},
}};

// Sites r = (a/4)(p + 4l) over an n^3 supercell, recentered so the bounding
// box is symmetric about the origin. Integer coordinates span [0, 4n-1], so
// the recentered cubic box has side (a/4)(4n - 1).
inline std::vector<Site> enumerate_supercell(const LatticeSpec& spec) {
  spec.validate();
  const double q = spec.a / 4.0;
  const double center = q * (4.0 * spec.n_super - 1.0) / 2.0;
  std::vector<Site> sites;
  sites.reserve(8u * spec.n_super * spec.n_super * spec.n_super);
  for (int i = 0; i < spec.n_super; ++i)
    for (int j = 0; j < spec.n_super; ++j)
      for (int k = 0; k < spec.n_super; ++k)
        for (const auto& p : kDiamondBasis)
          sites.emplace_back(q * (p[0] + 4 * i) - center,
                             q * (p[1] + 4 * j) - center,
                             q * (p[2] + 4 * k) - center);
  return sites;
}

// Vacancy = site closest to the origin, nitrogen = its nearest neighbor;
// both removed, everything shifted so the vacancy sits at the origin.
// Ties resolve to the lowest enumeration index.
inline std::pair<NVFrame, std::vector<Site>> place_nv(std::vector<Site> sites) {
  if (sites.size() < 2)
    throw std::invalid_argument("NV placement needs at least two sites");

  std::size_t vac = 0;
  double best = sites[0].squaredNorm();
  for (std::size_t i = 1; i < sites.size(); ++i) {
    const double d = sites[i].squaredNorm();
    if (d < best) {
      best = d;
      vac = i;
    }
  }
  const Eigen::Vector3d vacancy = sites[vac];
  sites.erase(sites.begin() + static_cast<std::ptrdiff_t>(vac));

  std::size_t nit = 0;
  best = (sites[0] - vacancy).squaredNorm();
  for (std::size_t i = 1; i < sites.size(); ++i) {
    const double d = (sites[i] - vacancy).squaredNorm();
    if (d < best) {
      best = d;
      nit = i;
    }
  }
  const Eigen::Vector3d nitrogen = sites[nit];
  sites.erase(sites.begin() + static_cast<std::ptrdiff_t>(nit));

  for (auto& s : sites) s -= vacancy;

  NVFrame nv;
  nv.vacancy = Eigen::Vector3d::Zero();
  nv.nitrogen = nitrogen - vacancy;
  nv.axis = Eigen::Vector3d(0.0, 0.0, 1.0);
  return {nv, std::move(sites)};
}

inline constexpr double kFirstShellTol = 1e-6;  // angstrom

// Drop the first coordination shell of the vacancy. The shell sits at
// exactly r_nn, so the tolerance goes above the threshold to classify it
// robustly; the next shell is at a/sqrt(2), far outside the band.
inline std::vector<Site> eligible_sites(const std::vector<Site>& sites,
                                        const LatticeSpec& spec) {
  const double r_min = spec.nn_distance() + kFirstShellTol;
  std::vector<Site> out;
  out.reserve(sites.size());
  for (const auto& s : sites)
    if (s.norm() >= r_min) out.push_back(s);
  return out;
}

// Secular dipolar coupling (alpha/r^3)(3 z^2/r^2 - 1), kHz.
inline double dipolar_coupling(const Eigen::Vector3d& position, double alpha) {
  const double r2 = position.squaredNorm();
  if (r2 == 0.0)
    throw std::domain_error("dipolar coupling undefined at zero separation");
  const double r = std::sqrt(r2);
  return alpha / (r2 * r) * (3.0 * position.z() * position.z() / r2 - 1.0);
}

// Bernoulli doping in enumeration order with a hard cap on dopants generated
// in the box, then the spherical cutoff, then coupling assignment.
inline NuclearBath dope_and_cut(const std::vector<Site>& eligible,
                                const LatticeSpec& spec, Rng& rng) {
  spec.validate();
  NuclearBath bath;
  bath.spec = spec;
  const double r_cut2 = spec.r_cut * spec.r_cut;
  int doped = 0;
  for (const auto& site : eligible) {
    if (doped >= spec.dopant_cap) break;
    if (!rng.bernoulli(spec.p13)) continue;
    ++doped;
    if (site.squaredNorm() > r_cut2) continue;
    bath.spins.push_back({site, dipolar_coupling(site, spec.alpha)});
  }
  return bath;
}

// Full pipeline for one configuration; the whole construction is a pure
// function of (spec, spec.seed).
inline NuclearBath make_bath(const LatticeSpec& spec) {
  auto [nv, shifted] = place_nv(enumerate_supercell(spec));
  const auto ok = eligible_sites(shifted, spec);
  Rng rng(spec.seed);
  NuclearBath bath = dope_and_cut(ok, spec, rng);
  bath.nv = nv;
  return bath;
}

}  // namespace nvr::lattice
