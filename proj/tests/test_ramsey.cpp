#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nvr/fft.hpp"
#include "nvr/ramsey.hpp"
#include "nvr/rng.hpp"
#include "test_support.hpp"

using namespace nvr;
using namespace nvr::ramsey;

namespace {

RamseyConfig base_config() {
  RamseyConfig cfg;
  cfg.f_base = 5.0;
  cfg.t2_star = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("branch detuning") {
  RamseyConfig cfg = base_config();
  HyperfineSet none;
  CHECK(detuning_mhz(cfg, none, {0, {}}) == 5.0);

  HyperfineSet one{{500.0}};
  CHECK(detuning_mhz(cfg, one, {0, {0.5}}) == doctest::Approx(5.25).epsilon(1e-12));
  const double up = detuning_mhz(cfg, one, {0, {0.5}});
  const double dn = detuning_mhz(cfg, one, {0, {-0.5}});
  CHECK(up + dn == doctest::Approx(10.0).epsilon(1e-12));  // symmetric about f_base

  cfg.include_n14 = true;
  cfg.a_par_n14 = 2160.0;
  CHECK(detuning_mhz(cfg, none, {1, {}}) == doctest::Approx(5.0 + 2.16).epsilon(1e-12));

  CHECK_THROWS_AS(detuning_mhz(cfg, one, {0, {}}), std::invalid_argument);
}

TEST_CASE("fringe closed forms") {
  CHECK(fringe(0.0, 123.4, 1.0) == 1.0);
  // half a period with a negligible envelope decay
  CHECK(fringe(0.5, 1.0, 1e9) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fringe(1.0, 0.0, 1.0) ==
        doctest::Approx(0.5 * (1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("ensemble signal: empty bath reduces to the bare fringe") {
  RamseyConfig cfg = base_config();
  const auto signal = ensemble_signal(cfg, {});
  const auto grid = cfg.time_grid();
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(signal[k] == doctest::Approx(fringe(grid[k], cfg.f_base, cfg.t2_star))
                           .epsilon(1e-15));
}

TEST_CASE("ensemble signal: one spin matches the product closed form") {
  RamseyConfig cfg = base_config();
  const double a = 730.0;  // kHz
  const auto signal = ensemble_signal(cfg, {{a}});
  const auto grid = cfg.time_grid();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double tau = grid[k];
    const double expect =
        0.5 * (1.0 + std::exp(-(tau / cfg.t2_star) * (tau / cfg.t2_star)) *
                         std::cos(2.0 * std::numbers::pi * cfg.f_base * tau) *
                         std::cos(std::numbers::pi * a / 1000.0 * tau));
    CHECK(std::abs(signal[k] - expect) < 1e-12);
  }
}

TEST_CASE("ensemble signal agrees with the projection-enumeration oracle") {
  Rng rng(2024);
  for (int rep = 0; rep < 60; ++rep) {
    RamseyConfig cfg = base_config();
    cfg.f_base = rng.uniform(4.0, 6.0);
    cfg.t2_star = rng.uniform(0.5, 5.0);
    cfg.include_n14 = rep % 3 == 0;
    cfg.a_par_n14 = cfg.include_n14 ? rng.uniform(-3000.0, 3000.0) : 0.0;
    const int n = static_cast<int>(rng.below(5));  // 0..4 spins
    HyperfineSet hf;
    for (int i = 0; i < n; ++i) hf.couplings.push_back(rng.uniform(-2000.0, 2000.0));

    const auto fast = ensemble_signal(cfg, hf);
    const auto slow = testsup::ensemble_signal_oracle(cfg, hf.couplings);
    double worst = 0.0;
    for (std::size_t k = 0; k < fast.size(); ++k)
      worst = std::max(worst, std::abs(fast[k] - slow[k]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("ensemble signal stays inside [0, 1]") {
  Rng rng(7);
  for (int rep = 0; rep < 40; ++rep) {
    RamseyConfig cfg = base_config();
    cfg.t2_star = rng.uniform(0.5, 10.0);
    HyperfineSet hf;
    const int n = static_cast<int>(rng.below(10));  // up to 9
    for (int i = 0; i < n; ++i) hf.couplings.push_back(rng.uniform(-5000.0, 5000.0));
    for (double v : ensemble_signal(cfg, hf)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("ensemble signal rejects oversized baths") {
  RamseyConfig cfg = base_config();
  HyperfineSet big;
  big.couplings.assign(10, 100.0);
  CHECK_THROWS_AS(ensemble_signal(cfg, big), std::runtime_error);
}

TEST_CASE("linear readout map") {
  RamseyConfig cfg = base_config();
  std::vector<double> ones(200, 1.0), zeros(200, 0.0), half(200, 0.5);
  CHECK(to_pl(ones, cfg).values[7] == 100.0);
  CHECK(to_pl(zeros, cfg).values[7] == 80.0);
  CHECK(to_pl(half, cfg).values[7] == 90.0);

  // linearity of the readout
  Rng rng(3);
  std::vector<double> s1(200), s2(200);
  for (auto& v : s1) v = rng.uniform01();
  for (auto& v : s2) v = rng.uniform01();
  const double alpha = 0.37;
  std::vector<double> mix(200);
  for (std::size_t k = 0; k < 200; ++k) mix[k] = alpha * s1[k] + (1 - alpha) * s2[k];
  const auto tm = to_pl(mix, cfg);
  const auto t1 = to_pl(s1, cfg);
  const auto t2 = to_pl(s2, cfg);
  for (std::size_t k = 0; k < 200; ++k)
    CHECK(tm.values[k] ==
          doctest::Approx(alpha * t1.values[k] + (1 - alpha) * t2.values[k])
              .epsilon(1e-12));

  CHECK_THROWS_AS(to_pl(std::vector<double>(100, 0.5), cfg), std::invalid_argument);
}

TEST_CASE("trace bounds and monotone envelope") {
  RamseyConfig cfg = base_config();
  cfg.f_base = 0.0;
  const auto trace = forward_reconstruct({}, cfg);
  for (std::size_t k = 1; k < trace.values.size(); ++k)
    CHECK(trace.values[k] <= trace.values[k - 1] + 1e-12);

  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    RamseyConfig c = base_config();
    c.f_base = rng.uniform(4.0, 6.0);
    HyperfineSet hf{{rng.uniform(-900.0, 900.0), rng.uniform(-900.0, 900.0)}};
    for (double v : forward_reconstruct(hf, c).values) {
      CHECK(v >= c.pl_low - 1e-12);
      CHECK(v <= c.pl_high + 1e-12);
    }
  }
}

TEST_CASE("single-spin spectrum puts the sidebands at f_base +- A/2") {
  RamseyConfig cfg = base_config();
  cfg.t2_star = 50.0;  // long dephasing keeps the lines narrow
  const double a_khz = 2000.0;
  const auto trace = forward_reconstruct({{a_khz}}, cfg);

  double mean = 0.0;
  for (double v : trace.values) mean += v;
  mean /= 200.0;
  std::vector<double> centered(200);
  for (std::size_t k = 0; k < 200; ++k) centered[k] = trace.values[k] - mean;
  const auto mag = fft::rfft_mag(centered);

  const double dt = (cfg.t_end - cfg.t_start) / 199.0;
  const double bin_hz = 1.0 / (200.0 * dt);  // MHz per bin
  const double lo = cfg.f_base - a_khz / 2000.0;
  const double hi = cfg.f_base + a_khz / 2000.0;
  const auto peaks = testsup::local_maxima(mag);
  REQUIRE(peaks.size() >= 2);
  const double p0 = static_cast<double>(std::min(peaks[0], peaks[1])) * bin_hz;
  const double p1 = static_cast<double>(std::max(peaks[0], peaks[1])) * bin_hz;
  CHECK(std::abs(p0 - lo) <= bin_hz);
  CHECK(std::abs(p1 - hi) <= bin_hz);
}

TEST_CASE("forward reconstruction accepts the published NV parameter sets") {
  RamseyConfig cfg = base_config();
  cfg.t2_star = 1.0570;
  const auto nv1 = forward_reconstruct({{721.8, 634.8}}, cfg);
  CHECK(nv1.values.size() == 200);
  CHECK(std::is_sorted(nv1.times.begin(), nv1.times.end()));

  cfg.t2_star = 1.7585;
  const auto nv3 = forward_reconstruct({{22.3}}, cfg);
  CHECK(nv3.values.size() == 200);
  for (double v : nv3.values) {
    CHECK(v >= cfg.pl_low - 1e-12);
    CHECK(v <= cfg.pl_high + 1e-12);
  }
}

TEST_CASE("config validation") {
  RamseyConfig cfg = base_config();
  cfg.t_end = cfg.t_start;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.t2_star = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.pl_low = 60.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.pl_high = cfg.pl_low;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = base_config();
  cfg.n_points = 100;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
