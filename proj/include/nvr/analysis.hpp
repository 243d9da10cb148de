#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nvr/fft.hpp"
#include "nvr/ramsey.hpp"

namespace nvr::analysis {

namespace detail {

inline void check_same_grid(const ramsey::Trace& a, const ramsey::Trace& b) {
  if (a.values.size() != b.values.size() || a.times.size() != b.times.size())
    throw std::invalid_argument("traces are not on the same grid");
  for (std::size_t k = 0; k < a.times.size(); ++k)
    if (std::abs(a.times[k] - b.times[k]) >
        1e-6 * std::max(1.0, std::abs(a.times[k])))
      throw std::invalid_argument("traces are not on the same grid");
}

}  // namespace detail

struct PcaModel {
  std::vector<double> mean_trace;        // empirical mean, PL(%)
  std::vector<double> times;             // common grid
  Eigen::MatrixXd modes;                 // n_points x K, orthonormal columns
  std::vector<double> score_std;         // population std of scores per mode
  std::vector<double> explained_ratio;   // non-increasing, sums to 1

  int mode_count() const { return static_cast<int>(modes.cols()); }
};

struct MetricReport {
  double rmse = 0.0;
  double chi2 = 0.0;
  double chi2_nu = 0.0;
  double fft_rmse = 0.0;
};

// Mean-center the ensemble and take the thin SVD of the centered matrix.
// Sign convention: the largest-magnitude entry of each mode is positive.
inline PcaModel pca_fit(const std::vector<ramsey::Trace>& traces) {
  if (traces.size() < 2)
    throw std::invalid_argument("PCA needs at least two traces");
  const std::size_t n_pts = traces[0].values.size();
  for (const auto& t : traces) detail::check_same_grid(traces[0], t);

  const Eigen::Index n = static_cast<Eigen::Index>(traces.size());
  const Eigen::Index p = static_cast<Eigen::Index>(n_pts);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      x(i, j) = traces[static_cast<std::size_t>(i)].values[static_cast<std::size_t>(j)];

  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  Eigen::MatrixXd modes = svd.matrixV();

  // flip modes so the largest-|entry| element is positive
  for (Eigen::Index k = 0; k < modes.cols(); ++k) {
    Eigen::Index arg = 0;
    modes.col(k).cwiseAbs().maxCoeff(&arg);
    if (modes(arg, k) < 0.0) modes.col(k) = -modes.col(k);
  }

  PcaModel model;
  model.mean_trace.assign(mean.data(), mean.data() + mean.size());
  model.times = traces[0].times;
  model.modes = std::move(modes);

  const double total = s.squaredNorm();
  model.score_std.resize(static_cast<std::size_t>(s.size()));
  model.explained_ratio.resize(static_cast<std::size_t>(s.size()));
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    model.score_std[static_cast<std::size_t>(k)] =
        s(k) / std::sqrt(static_cast<double>(n));
    model.explained_ratio[static_cast<std::size_t>(k)] =
        total > 0.0 ? s(k) * s(k) / total
                    : (k == 0 ? 1.0 : 0.0);
  }
  return model;
}

inline Eigen::VectorXd pca_project(const PcaModel& model, const ramsey::Trace& trace) {
  if (trace.values.size() != model.mean_trace.size())
    throw std::invalid_argument("trace is not on the model grid");
  Eigen::VectorXd centered(static_cast<Eigen::Index>(trace.values.size()));
  for (Eigen::Index j = 0; j < centered.size(); ++j)
    centered(j) = trace.values[static_cast<std::size_t>(j)] -
                  model.mean_trace[static_cast<std::size_t>(j)];
  return model.modes.transpose() * centered;
}

inline ramsey::Trace pca_reconstruct(const PcaModel& model,
                                     const Eigen::VectorXd& scores, int k_modes) {
  if (k_modes < 0 || k_modes > model.mode_count() || k_modes > scores.size())
    throw std::invalid_argument("requested mode count exceeds the model");
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(
      model.mean_trace.data(), static_cast<Eigen::Index>(model.mean_trace.size()));
  if (k_modes > 0) v += model.modes.leftCols(k_modes) * scores.head(k_modes);
  ramsey::Trace out;
  out.times = model.times;
  out.values.assign(v.data(), v.data() + v.size());
  return out;
}

inline ramsey::Trace pca_reconstruct(const PcaModel& model,
                                     const Eigen::VectorXd& scores) {
  return pca_reconstruct(model, scores, model.mode_count());
}

// mu(t) +- sigma_k * u_k(t); k is 1-based.
inline ramsey::Trace pca_mode_trace(const PcaModel& model, int k, int sign) {
  if (k < 1 || k > model.mode_count())
    throw std::invalid_argument("mode index out of range");
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +-1");
  ramsey::Trace out;
  out.times = model.times;
  out.values.resize(model.mean_trace.size());
  const double s = model.score_std[static_cast<std::size_t>(k - 1)] * sign;
  for (std::size_t j = 0; j < out.values.size(); ++j)
    out.values[j] = model.mean_trace[j] + s * model.modes(static_cast<Eigen::Index>(j), k - 1);
  return out;
}

inline double rmse(const ramsey::Trace& pred, const ramsey::Trace& ref) {
  detail::check_same_grid(pred, ref);
  double ss = 0.0;
  for (std::size_t k = 0; k < pred.values.size(); ++k) {
    const double d = pred.values[k] - ref.values[k];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(pred.values.size()));
}

inline std::pair<double, double> chi2(const ramsey::Trace& pred,
                                      const ramsey::Trace& ref,
                                      std::span<const double> sigmas, double nu) {
  detail::check_same_grid(pred, ref);
  if (sigmas.size() != pred.values.size())
    throw std::invalid_argument("sigma vector length does not match the grid");
  if (!(nu > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.values.size(); ++k) {
    if (!(sigmas[k] > 0.0))
      throw std::invalid_argument("uncertainties must be positive");
    const double r = (pred.values[k] - ref.values[k]) / sigmas[k];
    acc += r * r;
  }
  return {acc, acc / nu};
}

// RMSE between unit-max-normalized magnitude spectra of the mean-removed
// traces (101 bins for the 200-point grid).
inline double fft_rmse(const ramsey::Trace& pred, const ramsey::Trace& ref) {
  detail::check_same_grid(pred, ref);
  auto norm_spectrum = [](const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    std::vector<double> centered(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) centered[k] = values[k] - mean;
    std::vector<double> mag = fft::rfft_mag(centered);
    double peak = 0.0;
    for (double m : mag) peak = std::max(peak, m);
    if (peak == 0.0)
      throw std::domain_error("constant trace has no spectrum to normalize");
    for (double& m : mag) m /= peak;
    return mag;
  };
  const auto a = norm_spectrum(pred.values);
  const auto b = norm_spectrum(ref.values);
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(a.size()));
}

}  // namespace nvr::analysis
