#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvr/ramsey.hpp"
#include "nvr/rng.hpp"

namespace nvr::noise {

// Two-component experimental noise model: pointwise Gaussian fluctuations
// with quadratic level-dependent scale, plus one Gaussian baseline offset
// per trace. Defaults are the pooled experimental calibration.
struct NoiseModel {
  double b0 = -147.9;       // PL units
  double b1 = 3.481;
  double b2 = -0.01975;
  double sigma_dc = 3.928;  // per-trace baseline scale, PL units
  double sigma_floor = 0.1; // positive clip for sigma(y)

  void validate() const {
    if (!(sigma_floor > 0.0))
      throw std::invalid_argument("sigma_floor must be positive");
    if (!(sigma_dc >= 0.0))
      throw std::invalid_argument("sigma_dc must be non-negative");
  }
};

inline double sigma_of_y(const NoiseModel& m, double y) {
  return std::max(m.b0 + m.b1 * y + m.b2 * y * y, m.sigma_floor);
}

// Residuals against a reference, stored sweep-major: pair index i belongs to
// sweep i / points_per_sweep. per_sweep_means may be left empty for data that
// carries no drift component.
struct ResidualSet {
  std::vector<std::pair<double, double>> pairs;  // (reference level y, residual r)
  std::vector<double> per_sweep_means;
};

inline ResidualSet compute_residuals(const std::vector<ramsey::Trace>& sweeps,
                                     const ramsey::Trace& reference) {
  ResidualSet res;
  res.pairs.reserve(sweeps.size() * reference.values.size());
  for (const auto& sweep : sweeps) {
    if (sweep.values.size() != reference.values.size() ||
        sweep.times.size() != reference.times.size())
      throw std::invalid_argument("sweep grid does not match the reference grid");
    for (std::size_t k = 0; k < sweep.times.size(); ++k)
      if (std::abs(sweep.times[k] - reference.times[k]) > 1e-9)
        throw std::invalid_argument("sweep grid does not match the reference grid");
    double mean = 0.0;
    for (std::size_t k = 0; k < sweep.values.size(); ++k) {
      const double r = sweep.values[k] - reference.values[k];
      res.pairs.emplace_back(reference.values[k], r);
      mean += r;
    }
    res.per_sweep_means.push_back(mean / static_cast<double>(sweep.values.size()));
  }
  return res;
}

// Equal-count binning of residual magnitude versus reference level, then a
// least-squares quadratic through the per-bin standard deviations. Each
// sweep's mean is subtracted first so the drift component stays out of the
// fast-noise fit.
inline std::array<double, 3> fit_sigma(const ResidualSet& res, int n_bins = 20) {
  if (n_bins < 3) throw std::invalid_argument("need at least 3 bins");
  if (res.pairs.size() < static_cast<std::size_t>(n_bins) * 10)
    throw std::runtime_error("too few residual pairs for a sigma fit");

  std::vector<std::pair<double, double>> pts(res.pairs);
  if (!res.per_sweep_means.empty()) {
    if (pts.size() % res.per_sweep_means.size() != 0)
      throw std::invalid_argument("pair count is not a multiple of the sweep count");
    const std::size_t per_sweep = pts.size() / res.per_sweep_means.size();
    for (std::size_t i = 0; i < pts.size(); ++i)
      pts[i].second -= res.per_sweep_means[i / per_sweep];
  }
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<double> centers, stds;
  const std::size_t n = pts.size();
  for (int b = 0; b < n_bins; ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / n_bins;
    const std::size_t hi = n * (static_cast<std::size_t>(b) + 1) / n_bins;
    const std::size_t m = hi - lo;
    if (m < 2) continue;
    double ysum = 0.0, rsum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      ysum += pts[i].first;
      rsum += pts[i].second;
    }
    const double rbar = rsum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = pts[i].second - rbar;
      ss += d * d;
    }
    centers.push_back(ysum / static_cast<double>(m));
    stds.push_back(std::sqrt(ss / static_cast<double>(m - 1)));
  }
  if (centers.size() < 3) throw std::runtime_error("too few populated bins for a sigma fit");

  Eigen::MatrixXd design(centers.size(), 3);
  Eigen::VectorXd rhs(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    design(static_cast<Eigen::Index>(i), 1) = centers[i];
    design(static_cast<Eigen::Index>(i), 2) = centers[i] * centers[i];
    rhs(static_cast<Eigen::Index>(i)) = stds[i];
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);
  return {coef(0), coef(1), coef(2)};
}

// Baseline drift scale: sample standard deviation of per-sweep means.
inline double fit_dc(const ResidualSet& res) {
  const std::size_t n = res.per_sweep_means.size();
  if (n < 30) throw std::runtime_error("too few sweeps to estimate the drift scale");
  const double mean =
      std::accumulate(res.per_sweep_means.begin(), res.per_sweep_means.end(), 0.0) /
      static_cast<double>(n);
  double ss = 0.0;
  for (double v : res.per_sweep_means) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

// y_noisy = y + delta * 1 + eps, with delta drawn once per trace and each
// eps_k drawn independently at scale sigma(y_k).
inline ramsey::Trace synthesize(const ramsey::Trace& clean, const NoiseModel& model,
                                Rng& rng) {
  model.validate();
  ramsey::Trace out;
  out.times = clean.times;
  out.values.resize(clean.values.size());
  const double delta = rng.normal(0.0, model.sigma_dc);
  for (std::size_t k = 0; k < clean.values.size(); ++k)
    out.values[k] = clean.values[k] + delta +
                    rng.normal(0.0, sigma_of_y(model, clean.values[k]));
  return out;
}

}  // namespace nvr::noise
