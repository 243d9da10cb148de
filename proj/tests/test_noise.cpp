#include <doctest.h>

#include <cmath>
#include <vector>

#include "nvr/noise.hpp"
#include "test_support.hpp"

using namespace nvr;
using namespace nvr::noise;
using nvr::ramsey::Trace;

namespace {

Trace ramp_trace(double lo, double hi) {
  Trace t;
  t.values.resize(200);
  t.times.resize(200);
  for (int k = 0; k < 200; ++k) {
    t.values[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / 199.0;
    t.times[static_cast<std::size_t>(k)] = 0.01 * k;
  }
  return t;
}

Trace constant_trace(double level) {
  Trace t = ramp_trace(level, level);
  for (auto& v : t.values) v = level;
  return t;
}

}  // namespace

TEST_CASE("quadratic noise scale with positive clipping") {
  NoiseModel m;  // calibrated defaults
  CHECK(sigma_of_y(m, 80.0) == doctest::Approx(4.180).epsilon(1e-9));
  CHECK(sigma_of_y(m, 100.0) == doctest::Approx(2.700).epsilon(1e-9));

  // raw quadratic is negative at 60 PL, so the floor takes over
  CHECK(m.b0 + m.b1 * 60.0 + m.b2 * 3600.0 == doctest::Approx(-10.14).epsilon(1e-9));
  CHECK(sigma_of_y(m, 60.0) == m.sigma_floor);

  for (double y = 0.0; y <= 120.0; y += 0.5) CHECK(sigma_of_y(m, y) >= m.sigma_floor);
}

TEST_CASE("residual construction") {
  const Trace ref = ramp_trace(80.0, 95.0);
  Trace shifted = ref;
  for (auto& v : shifted.values) v += 2.0;

  const auto zero = compute_residuals({ref}, ref);
  for (const auto& [y, r] : zero.pairs) CHECK(r == 0.0);
  CHECK(zero.per_sweep_means[0] == 0.0);

  const auto off = compute_residuals({shifted}, ref);
  for (const auto& [y, r] : off.pairs) CHECK(r == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(off.per_sweep_means[0] == doctest::Approx(2.0).epsilon(1e-12));

  // linearity: mean over sweeps of per-sweep means equals mean(sweeps) - mean(ref)
  Rng rng(5);
  std::vector<Trace> sweeps;
  double grand = 0.0;
  for (int s = 0; s < 12; ++s) {
    Trace t = ref;
    for (auto& v : t.values) {
      const double bump = rng.uniform(-3.0, 3.0);
      v += bump;
      grand += bump;
    }
    sweeps.push_back(t);
  }
  const auto res = compute_residuals(sweeps, ref);
  double mean_of_means = 0.0;
  for (double m : res.per_sweep_means) mean_of_means += m;
  mean_of_means /= static_cast<double>(res.per_sweep_means.size());
  CHECK(mean_of_means == doctest::Approx(grand / (12.0 * 200.0)).epsilon(1e-9));

  Trace bad = ref;
  bad.times.back() += 1.0;
  CHECK_THROWS_AS(compute_residuals({bad}, ref), std::invalid_argument);
}

TEST_CASE("sigma fit round-trips a known quadratic") {
  NoiseModel truth;  // calibrated default coefficients
  const Trace ref = ramp_trace(75.0, 95.0);
  Rng rng(99);
  std::vector<Trace> sweeps;
  for (int s = 0; s < 600; ++s) {
    Trace t = ref;
    for (std::size_t k = 0; k < t.values.size(); ++k)
      t.values[k] += rng.normal(0.0, sigma_of_y(truth, ref.values[k]));
    sweeps.push_back(std::move(t));
  }
  const auto res = compute_residuals(sweeps, ref);
  const auto [b0, b1, b2] = fit_sigma(res, 20);
  NoiseModel fit = truth;
  fit.b0 = b0;
  fit.b1 = b1;
  fit.b2 = b2;
  for (double y = 75.0; y <= 95.0; y += 1.0) {
    const double want = sigma_of_y(truth, y);
    const double got = sigma_of_y(fit, y);
    CHECK(std::abs(got - want) / want < 0.05);
  }
}

TEST_CASE("sigma fit: homoscedastic residuals give a flat curve") {
  const double c = 3.0;
  const Trace ref = ramp_trace(75.0, 95.0);
  Rng rng(1234);
  std::vector<Trace> sweeps;
  for (int s = 0; s < 600; ++s) {
    Trace t = ref;
    for (auto& v : t.values) v += rng.normal(0.0, c);
    sweeps.push_back(std::move(t));
  }
  const auto [b0, b1, b2] = fit_sigma(compute_residuals(sweeps, ref), 20);
  auto curve = [&](double y) { return b0 + b1 * y + b2 * y * y; };
  for (double y = 75.0; y <= 95.0; y += 2.0)
    CHECK(std::abs(curve(y) - c) / c < 0.05);
  CHECK(std::abs(curve(95.0) - curve(75.0)) < 0.05 * c);  // b1, b2 carry no trend
}

TEST_CASE("sigma fit: zero residuals fit to the zero curve") {
  const Trace ref = ramp_trace(75.0, 95.0);
  std::vector<Trace> sweeps(5, ref);
  const auto [b0, b1, b2] = fit_sigma(compute_residuals(sweeps, ref), 10);
  CHECK(std::abs(b0) < 1e-9);
  CHECK(std::abs(b1) < 1e-9);
  CHECK(std::abs(b2) < 1e-9);
  NoiseModel m;
  m.b0 = b0;
  m.b1 = b1;
  m.b2 = b2;
  CHECK(sigma_of_y(m, 85.0) == m.sigma_floor);  // clipped at use time
}

TEST_CASE("sigma fit input gates") {
  ResidualSet tiny;
  for (int i = 0; i < 30; ++i) tiny.pairs.emplace_back(80.0, 0.1);
  CHECK_THROWS_AS(fit_sigma(tiny, 20), std::runtime_error);
}

TEST_CASE("drift scale estimation") {
  // alternating +-m means: the n-1 divisor gives m * sqrt(n/(n-1))
  const double m = 1.7;
  ResidualSet res;
  for (int s = 0; s < 30; ++s)
    res.per_sweep_means.push_back(s % 2 == 0 ? m : -m);
  CHECK(fit_dc(res) == doctest::Approx(m * std::sqrt(30.0 / 29.0)).epsilon(1e-12));

  ResidualSet same;
  same.per_sweep_means.assign(40, 0.83);
  CHECK(fit_dc(same) < 1e-12);  // zero spread up to accumulation rounding

  ResidualSet few;
  few.per_sweep_means.assign(29, 0.0);
  CHECK_THROWS_AS(fit_dc(few), std::runtime_error);

  // statistical recovery at the calibrated scale
  Rng rng(31);
  ResidualSet draw;
  for (int s = 0; s < 10000; ++s) draw.per_sweep_means.push_back(rng.normal(0.0, 3.928));
  CHECK(std::abs(fit_dc(draw) - 3.928) / 3.928 < 0.03);
}

TEST_CASE("synthesis: degenerate noise returns the clean trace") {
  NoiseModel m;
  m.b0 = m.b1 = m.b2 = 0.0;
  m.sigma_dc = 0.0;
  m.sigma_floor = 1e-12;
  const Trace clean = ramp_trace(80.0, 95.0);
  Rng rng(4);
  const Trace noisy = synthesize(clean, m, rng);
  for (std::size_t k = 0; k < clean.values.size(); ++k)
    CHECK(std::abs(noisy.values[k] - clean.values[k]) < 1e-9);
}

TEST_CASE("synthesis reproduces the two calibrated scales at level 80") {
  NoiseModel m;
  const Trace clean = constant_trace(80.0);
  const int n_traces = 20000;
  Rng rng(12345);
  std::vector<double> demeaned;
  demeaned.reserve(static_cast<std::size_t>(n_traces) * 200);
  std::vector<double> trace_means;
  trace_means.reserve(n_traces);
  for (int i = 0; i < n_traces; ++i) {
    const Trace noisy = synthesize(clean, m, rng);
    double mean = 0.0;
    for (double v : noisy.values) mean += v - 80.0;
    mean /= 200.0;
    trace_means.push_back(mean);
    for (double v : noisy.values) demeaned.push_back(v - 80.0 - mean);
  }
  double ss = 0.0;
  for (double v : demeaned) ss += v * v;
  const double point_std = std::sqrt(ss / static_cast<double>(demeaned.size() - 1));
  CHECK(std::abs(point_std - 4.180) / 4.180 < 0.03);

  const double mean_std = testsup::sample_std(trace_means);
  const double expect = std::sqrt(3.928 * 3.928 + 4.180 * 4.180 / 200.0);
  CHECK(expect == doctest::Approx(3.939).epsilon(1e-4));
  CHECK(std::abs(mean_std - expect) / expect < 0.03);
}

TEST_CASE("synthetic residual marginal is Gaussian") {
  NoiseModel m;
  const Trace clean = constant_trace(80.0);
  Rng rng(777);
  std::vector<double> residuals;
  residuals.reserve(1000000);
  for (int i = 0; i < 5000; ++i) {
    const Trace noisy = synthesize(clean, m, rng);
    for (double v : noisy.values) residuals.push_back(v - 80.0);
  }
  const double n = static_cast<double>(residuals.size());
  double mean = 0.0;
  for (double v : residuals) mean += v;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : residuals) {
    const double d = v - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  const double excess_kurtosis = m4 / (m2 * m2) - 3.0;
  CHECK(std::abs(excess_kurtosis) < 0.1);
}

TEST_CASE("synthesis is deterministic under a fixed seed") {
  NoiseModel m;
  const Trace clean = ramp_trace(78.0, 92.0);
  Rng a(42), b(42);
  const Trace ta = synthesize(clean, m, a);
  const Trace tb = synthesize(clean, m, b);
  for (std::size_t k = 0; k < ta.values.size(); ++k)
    CHECK(ta.values[k] == tb.values[k]);
}

TEST_CASE("calibration round trip at the calibrated operating point") {
  NoiseModel truth;
  const Trace ref = ramp_trace(75.0, 95.0);
  Rng rng(2718);
  std::vector<Trace> sweeps;
  for (int s = 0; s < 3000; ++s) sweeps.push_back(synthesize(ref, truth, rng));
  const auto res = compute_residuals(sweeps, ref);

  const auto [b0, b1, b2] = fit_sigma(res, 20);
  NoiseModel fit = truth;
  fit.b0 = b0;
  fit.b1 = b1;
  fit.b2 = b2;
  for (double y = 75.0; y <= 95.0; y += 1.0)
    CHECK(std::abs(sigma_of_y(fit, y) - sigma_of_y(truth, y)) / sigma_of_y(truth, y) <
          0.05);

  const double dc = fit_dc(res);
  CHECK(std::abs(dc - truth.sigma_dc) / truth.sigma_dc < 0.05);
}
