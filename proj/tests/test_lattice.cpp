#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "nvr/lattice.hpp"
#include "test_support.hpp"

using namespace nvr;
using namespace nvr::lattice;

TEST_CASE("supercell enumeration: counts and box geometry") {
  LatticeSpec spec;
  const auto sites = enumerate_supercell(spec);
  CHECK(sites.size() == 1000);
  CHECK(spec.box_side() == doctest::Approx(16.9575).epsilon(1e-12));
  CHECK(std::abs(spec.box_side() - 16.96) < 0.005);

  for (int axis = 0; axis < 3; ++axis) {
    double lo = sites[0][axis], hi = sites[0][axis];
    for (const auto& s : sites) {
      lo = std::min(lo, s[axis]);
      hi = std::max(hi, s[axis]);
    }
    CHECK(std::abs(hi + lo) < 1e-9);                    // symmetric about origin
    CHECK(std::abs(hi - lo - spec.box_side()) < 1e-9);  // side length
  }

  LatticeSpec one = spec;
  one.n_super = 1;
  CHECK(enumerate_supercell(one).size() == 8);
}

TEST_CASE("supercell enumeration: 8 n^3 sites for n in [1, 8]") {
  for (int n = 1; n <= 8; ++n) {
    LatticeSpec spec;
    spec.n_super = n;
    CHECK(enumerate_supercell(spec).size() ==
          8u * static_cast<std::size_t>(n) * n * n);
  }
}

TEST_CASE("supercell enumeration: all-pairs minimum distance is the bond length") {
  LatticeSpec spec;
  const auto sites = enumerate_supercell(spec);
  const double bond2 = spec.nn_distance() * spec.nn_distance();
  double min2 = 1e300;
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      min2 = std::min(min2, (sites[i] - sites[j]).squaredNorm());
  CHECK(std::sqrt(min2) >= spec.nn_distance() - 1e-9);
  CHECK(std::sqrt(min2) == doctest::Approx(std::sqrt(bond2)).epsilon(1e-12));
}

TEST_CASE("NV placement on the default box") {
  LatticeSpec spec;
  auto [nv, rest] = place_nv(enumerate_supercell(spec));
  CHECK(nv.vacancy.norm() == 0.0);
  CHECK(std::abs(nv.nitrogen.norm() - spec.nn_distance()) < 1e-9);
  CHECK(std::abs(nv.nitrogen.norm() - 1.5459) < 5e-5);
  CHECK(nv.axis.isApprox(Eigen::Vector3d(0, 0, 1)));
  CHECK(rest.size() == 998);
}

TEST_CASE("NV placement: origin site, tie-break, and error path") {
  std::vector<Site> centered = {{0, 0, 0}, {1, 1, 1}, {2, 0, 0}};
  auto [nv, rest] = place_nv(centered);
  CHECK(nv.vacancy.norm() == 0.0);
  CHECK(nv.nitrogen.isApprox(Eigen::Vector3d(1, 1, 1)));
  CHECK(rest.size() == 1);

  // three equidistant candidates: the lowest enumeration index wins
  std::vector<Site> tied = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
  auto [nv2, rest2] = place_nv(tied);
  CHECK(nv2.nitrogen.isApprox(Eigen::Vector3d(-1, 1, 0)));  // (0,1,0) - (1,0,0)
  REQUIRE(rest2.size() == 1);
  CHECK(rest2[0].isApprox(Eigen::Vector3d(-2, 0, 0)));

  CHECK_THROWS_AS(place_nv({{0, 0, 0}}), std::invalid_argument);
}

TEST_CASE("first-shell eligibility filter") {
  LatticeSpec spec;
  const double r_nn = spec.nn_distance();
  const std::vector<Site> sites = {
      {1.0, 0.0, 0.0},              // inside the shell
      {r_nn, 0.0, 0.0},             // exactly the first shell
      {3.0, 0.0, 0.0},              // second shell and beyond
  };
  const auto kept = eligible_sites(sites, spec);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].x() == 3.0);
}

TEST_CASE("eligibility removes exactly the three remaining shell neighbors") {
  LatticeSpec spec;
  auto [nv, rest] = place_nv(enumerate_supercell(spec));
  const auto kept = eligible_sites(rest, spec);
  CHECK(rest.size() - kept.size() == 3);  // 4 nearest neighbors minus the nitrogen
  for (const auto& s : kept) CHECK(s.norm() > spec.nn_distance());
}

TEST_CASE("dipolar coupling closed forms") {
  const double alpha = 1.99e4;
  CHECK(dipolar_coupling({0, 0, 3}, alpha) ==
        doctest::Approx(2.0 * alpha / 27.0).epsilon(1e-12));
  CHECK(std::abs(dipolar_coupling({0, 0, 3}, alpha) - 1474.07) < 0.01);

  // magic angle: cos(theta) = 1/sqrt(3) along (1,1,1)
  CHECK(std::abs(dipolar_coupling({2, 2, 2}, alpha)) < 1e-9);

  // boundary scale at 6 angstrom
  CHECK(alpha / 216.0 == doctest::Approx(92.1296).epsilon(1e-4));
  for (double z = -6.0; z <= 6.0; z += 0.25) {
    const double rho = std::sqrt(36.0 - z * z);
    const double c = dipolar_coupling({rho, 0.0, z}, alpha);
    CHECK(std::abs(c) <= 2.0 * alpha / 216.0 + 1e-9);
  }

  CHECK_THROWS_AS(dipolar_coupling({0, 0, 0}, alpha), std::domain_error);
}

TEST_CASE("doping: degenerate probabilities and the dopant cap") {
  LatticeSpec spec;
  auto [nv, rest] = place_nv(enumerate_supercell(spec));
  const auto ok = eligible_sites(rest, spec);

  spec.p13 = 0.0;
  Rng rng0(1);
  CHECK(dope_and_cut(ok, spec, rng0).spins.empty());

  // p13 = 1 with a cap of 3 accepts exactly the first three eligible sites
  spec.p13 = 1.0;
  spec.dopant_cap = 3;
  spec.r_cut = 1e9;  // keep everything so the cap is observable
  Rng rng1(1);
  const auto bath = dope_and_cut(ok, spec, rng1);
  REQUIRE(bath.spins.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(bath.spins[i].position.isApprox(ok[i]));
}

TEST_CASE("doping statistics match the binomial mean over the in-sphere sites") {
  LatticeSpec spec;
  auto [nv, rest] = place_nv(enumerate_supercell(spec));
  const auto ok = eligible_sites(rest, spec);

  // exhaustive oracle: eligible sites inside the cutoff sphere
  std::size_t in_sphere = 0;
  for (const auto& s : ok)
    if (s.norm() <= spec.r_cut) ++in_sphere;
  const double expected = spec.p13 * static_cast<double>(in_sphere);

  const int n_seeds = 20000;
  double total = 0.0;
  std::map<std::size_t, int> histogram;
  for (int seed = 0; seed < n_seeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto bath = dope_and_cut(ok, spec, rng);
    total += static_cast<double>(bath.spins.size());
    ++histogram[bath.spins.size()];
  }
  const double mean = total / n_seeds;
  CHECK(std::abs(mean - expected) / expected < 0.02);

  // retained-count distribution peaks at the low end
  std::size_t mode = 0;
  int best = -1;
  for (const auto& [count, freq] : histogram)
    if (freq > best) {
      best = freq;
      mode = count;
    }
  CHECK(mode <= 2);
}

TEST_CASE("bath invariants and determinism") {
  LatticeSpec spec;
  spec.seed = 77;
  const auto bath = make_bath(spec);
  const auto again = make_bath(spec);
  REQUIRE(bath.spins.size() == again.spins.size());
  for (std::size_t i = 0; i < bath.spins.size(); ++i) {
    CHECK(bath.spins[i].position == again.spins[i].position);
    CHECK(bath.spins[i].a_par == again.spins[i].a_par);
  }

  for (int seed = 0; seed < 300; ++seed) {
    LatticeSpec s = spec;
    s.seed = static_cast<std::uint64_t>(seed);
    const auto b = make_bath(s);
    CHECK(b.spins.size() <= static_cast<std::size_t>(s.dopant_cap));
    for (const auto& spin : b.spins) {
      const double r = spin.position.norm();
      CHECK(r >= s.nn_distance());
      CHECK(r <= s.r_cut);
      const double bound = 2.0 * s.alpha / (r * r * r);
      CHECK(std::abs(spin.a_par) <= bound * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("lattice spec validation") {
  LatticeSpec spec;
  spec.a = 0.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = {};
  spec.n_super = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = {};
  spec.p13 = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = {};
  spec.r_cut = -1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
