#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "nvr/fft.hpp"

namespace nvr::losses {

struct StftConfig {
  enum class Window { rect, hann };
  int window_len = 32;
  int hop = 8;
  Window window = Window::hann;

  void validate() const {
    if (!(hop > 0 && hop <= window_len && window_len <= 200))
      throw std::invalid_argument("need 0 < hop <= window_len <= 200");
  }
};

struct LossWeights {
  double lambda_stft = 0.5;
  double w_count = 1.0;
  double w_cij = 1.0;
  double beta = 1.0;  // SmoothL1 transition scale

  void validate() const {
    if (lambda_stft < 0.0 || w_count < 0.0 || w_cij < 0.0 || !(beta > 0.0))
      throw std::invalid_argument("loss weights must be non-negative, beta positive");
  }
};

// Sliding windowed rFFT frames; frame count = floor((len - W)/hop) + 1,
// each frame holding W/2 + 1 complex bins.
inline std::vector<std::vector<std::complex<double>>> stft(
    std::span<const double> x, const StftConfig& cfg) {
  cfg.validate();
  if (x.size() < static_cast<std::size_t>(cfg.window_len))
    throw std::invalid_argument("sequence shorter than the analysis window");
  const std::size_t w = static_cast<std::size_t>(cfg.window_len);
  const std::size_t n_frames = (x.size() - w) / static_cast<std::size_t>(cfg.hop) + 1;

  std::vector<double> taper(w, 1.0);
  if (cfg.window == StftConfig::Window::hann)
    for (std::size_t j = 0; j < w; ++j)
      taper[j] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                       static_cast<double>(j) /
                                       static_cast<double>(w)));

  std::vector<std::vector<std::complex<double>>> frames(n_frames);
  std::vector<double> buf(w);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t off = f * static_cast<std::size_t>(cfg.hop);
    for (std::size_t j = 0; j < w; ++j) buf[j] = x[off + j] * taper[j];
    frames[f] = fft::rfft(buf);
  }
  return frames;
}

// Squared-error term plus an l1 penalty on the complex STFT difference of
// the mean-centered sequences. The l1 sums magnitudes of complex entries.
inline double core_loss(std::span<const double> pred, std::span<const double> target,
                        const StftConfig& cfg, const LossWeights& weights) {
  weights.validate();
  if (pred.size() != target.size())
    throw std::invalid_argument("prediction and target lengths differ");

  double sq = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - target[k];
    sq += d * d;
  }
  if (weights.lambda_stft == 0.0) return sq;

  auto centered = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] - mean;
    return out;
  };
  const auto fp = stft(centered(pred), cfg);
  const auto ft = stft(centered(target), cfg);
  double l1 = 0.0;
  for (std::size_t f = 0; f < fp.size(); ++f)
    for (std::size_t b = 0; b < fp[f].size(); ++b)
      l1 += std::abs(fp[f][b] - ft[f][b]);
  return sq + weights.lambda_stft * l1;
}

inline double logspace_mse(double pred_t2, double true_t2) {
  if (pred_t2 < 0.0 || true_t2 < 0.0)
    throw std::invalid_argument("log-space error needs non-negative values");
  const double d = std::log1p(pred_t2) - std::log1p(true_t2);
  return d * d;
}

// r^2/(2 beta) inside the transition, |r| - beta/2 outside.
inline double smooth_l1(double r, double beta = 1.0) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  const double a = std::abs(r);
  return a < beta ? r * r / (2.0 * beta) : a - 0.5 * beta;
}

// -log softmax(logits)[label], evaluated via the shifted log-sum-exp.
inline double cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
    throw std::invalid_argument("label out of range");
  double peak = logits[0];
  for (double z : logits) peak = std::max(peak, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  return std::log(sum) - (logits[static_cast<std::size_t>(label)] - peak);
}

inline double cross_entropy_batch(const std::vector<std::vector<double>>& logits,
                                  std::span<const int> labels) {
  if (logits.empty() || logits.size() != labels.size())
    throw std::invalid_argument("batch sizes differ");
  double acc = 0.0;
  for (std::size_t b = 0; b < logits.size(); ++b)
    acc += cross_entropy(logits[b], labels[b]);
  return acc / static_cast<double>(logits.size());
}

// Mean SmoothL1 over the first n slots; zero-padded slots beyond n are
// masked out entirely.
inline double masked_smooth_l1(std::span<const double> pred,
                               std::span<const double> target, int n,
                               double beta = 1.0) {
  if (pred.size() != target.size())
    throw std::invalid_argument("prediction and target lengths differ");
  if (n < 1 || static_cast<std::size_t>(n) > pred.size())
    throw std::invalid_argument("mask count must lie in [1, slot count]");
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += smooth_l1(pred[static_cast<std::size_t>(i)] -
                         target[static_cast<std::size_t>(i)],
                     beta);
  return acc / static_cast<double>(n);
}

inline double total_hf_loss(double count_loss, double cij_loss,
                            const LossWeights& weights) {
  weights.validate();
  if (count_loss < 0.0 || cij_loss < 0.0)
    throw std::invalid_argument("loss terms must be non-negative");
  return weights.w_count * count_loss + weights.w_cij * cij_loss;
}

}  // namespace nvr::losses
