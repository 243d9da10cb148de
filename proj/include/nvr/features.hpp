#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nvr/fft.hpp"
#include "nvr/ramsey.hpp"

namespace nvr::features {

inline constexpr int kFreqBins = ramsey::kTracePoints / 2 + 1;  // 101

enum class TokenType : int { cls = 0, meta = 1, time = 2, freq = 3 };

// Joint time/frequency token layout: [cls][meta x n_meta][time x 200][freq x 101].
// Learned embedding tables live in the training stack; this carries the
// values, categories, and positions they consume.
struct TokenSequence {
  int n_meta = 0;
  std::vector<double> meta_values;   // scaled scalars
  std::vector<double> time_tokens;   // z-normalized samples
  std::vector<double> freq_tokens;   // log-magnitude rFFT bins
  std::vector<int> type_ids;
  std::vector<int> positions;

  int total() const { return 1 + n_meta + ramsey::kTracePoints + kFreqBins; }

  std::vector<double> values() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total()));
    out.push_back(0.0);  // cls slot carries no scalar payload
    out.insert(out.end(), meta_values.begin(), meta_values.end());
    out.insert(out.end(), time_tokens.begin(), time_tokens.end());
    out.insert(out.end(), freq_tokens.begin(), freq_tokens.end());
    return out;
  }
};

struct MinMaxPair {
  ramsey::Trace noisy;
  ramsey::Trace clean;
  double clean_min = 0.0;
  double clean_max = 0.0;
};

// Map both members by the clean trace's extrema; the clean output spans
// exactly [0, 1] and the noisy output is left unclamped.
inline MinMaxPair minmax_normalize_pair(const ramsey::Trace& noisy,
                                        const ramsey::Trace& clean) {
  if (noisy.values.size() != clean.values.size())
    throw std::invalid_argument("pair members are not on the same grid");
  double lo = clean.values[0], hi = clean.values[0];
  for (double v : clean.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) throw std::domain_error("constant clean trace cannot be normalized");
  const double inv = 1.0 / (hi - lo);
  MinMaxPair out;
  out.clean_min = lo;
  out.clean_max = hi;
  out.noisy.times = noisy.times;
  out.clean.times = clean.times;
  out.noisy.values.resize(noisy.values.size());
  out.clean.values.resize(clean.values.size());
  for (std::size_t k = 0; k < clean.values.size(); ++k) {
    out.noisy.values[k] = (noisy.values[k] - lo) * inv;
    out.clean.values[k] = (clean.values[k] - lo) * inv;
  }
  return out;
}

// (y - mean) / (std + eps) with the population std.
inline std::vector<double> znorm(std::span<const double> values,
                                 double epsilon = 1e-8) {
  if (values.size() != static_cast<std::size_t>(ramsey::kTracePoints))
    throw std::invalid_argument("z-normalization expects a 200-point trace");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double inv = 1.0 / (std::sqrt(var) + epsilon);
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = (values[k] - mean) * inv;
  return out;
}

// s_k = log(1 + |X_k|) over the 101 rFFT bins.
inline std::vector<double> rfft_logmag(std::span<const double> normalized) {
  if (normalized.size() != static_cast<std::size_t>(ramsey::kTracePoints))
    throw std::invalid_argument("frequency summary expects a 200-point trace");
  auto mag = fft::rfft_mag(normalized);
  for (double& m : mag) m = std::log1p(m);
  return mag;
}

// Rescale metadata scalars to comparable numeric ranges.
inline std::array<double, 3> scale_metadata(double pl, double t2_us, double f_mhz) {
  if (!(pl >= 0.0 && pl <= 100.0))
    throw std::invalid_argument("PL must lie in [0, 100]");
  if (t2_us < 0.0) throw std::invalid_argument("t2 must be non-negative");
  return {pl / 100.0, std::log1p(t2_us), f_mhz};
}

// n_meta = 2 keeps (PL, T2*); n_meta = 3 appends the offset detuning.
inline TokenSequence build_tokens(const ramsey::Trace& trace, double pl,
                                  double t2_us, double f_mhz, int n_meta) {
  if (n_meta != 2 && n_meta != 3)
    throw std::invalid_argument("metadata token count must be 2 or 3");
  TokenSequence seq;
  seq.n_meta = n_meta;
  const auto scaled = scale_metadata(pl, t2_us, f_mhz);
  seq.meta_values.assign(scaled.begin(), scaled.begin() + n_meta);
  seq.time_tokens = znorm(trace.values);
  seq.freq_tokens = rfft_logmag(seq.time_tokens);
  seq.type_ids.reserve(static_cast<std::size_t>(seq.total()));
  seq.type_ids.push_back(static_cast<int>(TokenType::cls));
  for (int i = 0; i < n_meta; ++i)
    seq.type_ids.push_back(static_cast<int>(TokenType::meta));
  for (int i = 0; i < ramsey::kTracePoints; ++i)
    seq.type_ids.push_back(static_cast<int>(TokenType::time));
  for (int i = 0; i < kFreqBins; ++i)
    seq.type_ids.push_back(static_cast<int>(TokenType::freq));
  seq.positions.resize(static_cast<std::size_t>(seq.total()));
  for (int i = 0; i < seq.total(); ++i) seq.positions[static_cast<std::size_t>(i)] = i;
  return seq;
}

// Shift-invariant softmax.
inline std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("softmax of an empty vector");
  double peak = v[0];
  for (double z : v) {
    if (!std::isfinite(z)) throw std::invalid_argument("softmax needs finite entries");
    peak = std::max(peak, z);
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

// Normalize across features to zero mean and unit variance, then scale/shift.
inline std::vector<double> layer_norm(std::span<const double> x,
                                      std::span<const double> gain,
                                      std::span<const double> bias,
                                      double epsilon = 1e-8) {
  if (x.size() < 2) throw std::invalid_argument("layer norm needs at least 2 features");
  if (gain.size() != x.size() || bias.size() != x.size())
    throw std::invalid_argument("gain/bias length mismatch");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(var + epsilon);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = gain[i] * ((x[i] - mean) * inv) + bias[i];
  return out;
}

struct AttentionWeights {
  int heads = 1;
  int model_dim = 256;
  std::vector<Eigen::MatrixXd> w_q, w_k, w_v;  // per head, D x d_h
  Eigen::MatrixXd w_o;                          // D x D

  int head_dim() const { return model_dim / heads; }

  void validate() const {
    if (heads < 1 || model_dim < 1 || model_dim % heads != 0)
      throw std::invalid_argument("model width must divide evenly into heads");
    const auto h = static_cast<std::size_t>(heads);
    if (w_q.size() != h || w_k.size() != h || w_v.size() != h)
      throw std::invalid_argument("per-head projection count mismatch");
    for (std::size_t i = 0; i < h; ++i)
      if (w_q[i].rows() != model_dim || w_q[i].cols() != head_dim() ||
          w_k[i].rows() != model_dim || w_k[i].cols() != head_dim() ||
          w_v[i].rows() != model_dim || w_v[i].cols() != head_dim())
        throw std::invalid_argument("per-head projection shape mismatch");
    if (w_o.rows() != model_dim || w_o.cols() != model_dim)
      throw std::invalid_argument("output projection shape mismatch");
    for (const auto& m : {w_o})
      if (!m.allFinite()) throw std::invalid_argument("weights must be finite");
  }
};

struct MhaResult {
  Eigen::MatrixXd output;                 // L x D
  std::vector<Eigen::MatrixXd> attention; // per head, L x L row-stochastic
};

// Scaled dot-product attention per head, concatenated and projected by W_O.
// With residual_ln set, each row gets x + MHA(x) followed by layer
// normalization with unit gain and zero bias.
inline MhaResult mha_forward_detailed(const Eigen::MatrixXd& tokens,
                                      const AttentionWeights& w,
                                      bool residual_ln = false) {
  w.validate();
  if (tokens.cols() != w.model_dim)
    throw std::invalid_argument("token width does not match the model width");
  if (tokens.rows() < 1) throw std::invalid_argument("need at least one token");

  const Eigen::Index length = tokens.rows();
  const Eigen::Index d_h = w.head_dim();
  MhaResult result;
  result.attention.reserve(static_cast<std::size_t>(w.heads));
  Eigen::MatrixXd concat(length, w.model_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_h));

  for (int h = 0; h < w.heads; ++h) {
    const Eigen::MatrixXd q = tokens * w.w_q[static_cast<std::size_t>(h)];
    const Eigen::MatrixXd k = tokens * w.w_k[static_cast<std::size_t>(h)];
    const Eigen::MatrixXd v = tokens * w.w_v[static_cast<std::size_t>(h)];
    Eigen::MatrixXd scores = q * k.transpose() * scale;
    for (Eigen::Index r = 0; r < length; ++r) {
      const double peak = scores.row(r).maxCoeff();
      Eigen::ArrayXd e = (scores.row(r).array() - peak).exp();
      scores.row(r) = (e / e.sum()).matrix();
    }
    concat.middleCols(h * d_h, d_h) = scores * v;
    result.attention.push_back(std::move(scores));
  }
  result.output = concat * w.w_o;
  if (!residual_ln) return result;

  result.output += tokens;
  const std::vector<double> unit(static_cast<std::size_t>(w.model_dim), 1.0);
  const std::vector<double> zero(static_cast<std::size_t>(w.model_dim), 0.0);
  for (Eigen::Index r = 0; r < length; ++r) {
    std::vector<double> row(static_cast<std::size_t>(w.model_dim));
    for (Eigen::Index c = 0; c < w.model_dim; ++c)
      row[static_cast<std::size_t>(c)] = result.output(r, c);
    const auto normed = layer_norm(row, unit, zero);
    for (Eigen::Index c = 0; c < w.model_dim; ++c)
      result.output(r, c) = normed[static_cast<std::size_t>(c)];
  }
  return result;
}

inline Eigen::MatrixXd mha_forward(const Eigen::MatrixXd& tokens,
                                   const AttentionWeights& w,
                                   bool residual_ln = false) {
  return mha_forward_detailed(tokens, w, residual_ln).output;
}

}  // namespace nvr::features
