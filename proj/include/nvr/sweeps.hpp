#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "nvr/ramsey.hpp"
#include "nvr/rng.hpp"

namespace nvr::sweeps {

// One laboratory sweep: per-point photon counts in the signal and
// normalization windows. Counts are kept as doubles so an ingest-time
// kcounts-to-counts multiplier can be applied.
struct SweepRecord {
  std::vector<double> s_counts;  // signal window, raw counts
  std::vector<double> n_counts;  // normalization window, raw counts
  std::vector<double> pl;        // optional stored PL channel, bookkeeping only
  std::int64_t sweep_id = 0;

  void validate() const {
    if (s_counts.size() != static_cast<std::size_t>(ramsey::kTracePoints) ||
        n_counts.size() != s_counts.size())
      throw std::invalid_argument("sweep records carry 200 counts per window");
    for (double v : s_counts)
      if (v < 0.0) throw std::invalid_argument("counts must be non-negative");
    for (double v : n_counts)
      if (v < 0.0) throw std::invalid_argument("counts must be non-negative");
  }
};

struct ResampledTrace {
  std::vector<double> pl;      // ratio-of-means PL(%), 200 points
  std::vector<double> u_pl;    // per-point standard uncertainty, PL(%)
  std::vector<double> pl_sum;  // carried summed PL channel; unused in metrics
  int k = 0;
  std::vector<int> indices;    // chosen sweep positions, sorted
};

namespace detail {

inline void check_subset(const std::vector<SweepRecord>& records,
                         std::span<const int> subset) {
  if (subset.empty()) throw std::invalid_argument("subset must be non-empty");
  for (int i : subset)
    if (i < 0 || static_cast<std::size_t>(i) >= records.size())
      throw std::invalid_argument("subset index out of range");
}

}  // namespace detail

// PL_j = 100 * mean(S_j) / mean(N_j) over the subset.
inline std::vector<double> pl_ratio(const std::vector<SweepRecord>& records,
                                    std::span<const int> subset) {
  detail::check_subset(records, subset);
  const std::size_t n_pts = records[static_cast<std::size_t>(subset[0])].s_counts.size();
  std::vector<double> pl(n_pts);
  const double inv_k = 1.0 / static_cast<double>(subset.size());
  for (std::size_t j = 0; j < n_pts; ++j) {
    double mu_s = 0.0, mu_n = 0.0;
    for (int i : subset) {
      mu_s += records[static_cast<std::size_t>(i)].s_counts[j];
      mu_n += records[static_cast<std::size_t>(i)].n_counts[j];
    }
    mu_s *= inv_k;
    mu_n *= inv_k;
    if (mu_n == 0.0)
      throw std::domain_error("normalization counts average to zero");
    pl[j] = 100.0 * mu_s / mu_n;
  }
  return pl;
}

// First-order (delta-method) uncertainty of the ratio of means, including
// the empirical signal/normalization covariance. Sample statistics use the
// n-1 divisor; the result carries the same percent scaling as pl_ratio.
inline std::vector<double> propagate_uncertainty(
    const std::vector<SweepRecord>& records, std::span<const int> subset) {
  detail::check_subset(records, subset);
  const std::size_t k = subset.size();
  if (k < 2)
    throw std::invalid_argument("uncertainty propagation needs at least two sweeps");
  const std::size_t n_pts = records[static_cast<std::size_t>(subset[0])].s_counts.size();
  std::vector<double> u(n_pts);
  const double inv_k = 1.0 / static_cast<double>(k);
  const double inv_km1 = 1.0 / static_cast<double>(k - 1);
  for (std::size_t j = 0; j < n_pts; ++j) {
    double mu_s = 0.0, mu_n = 0.0;
    for (int i : subset) {
      mu_s += records[static_cast<std::size_t>(i)].s_counts[j];
      mu_n += records[static_cast<std::size_t>(i)].n_counts[j];
    }
    mu_s *= inv_k;
    mu_n *= inv_k;
    if (mu_n == 0.0)
      throw std::domain_error("normalization counts average to zero");
    double var_s = 0.0, var_n = 0.0, cov = 0.0;
    for (int i : subset) {
      const double ds = records[static_cast<std::size_t>(i)].s_counts[j] - mu_s;
      const double dn = records[static_cast<std::size_t>(i)].n_counts[j] - mu_n;
      var_s += ds * ds;
      var_n += dn * dn;
      cov += ds * dn;
    }
    var_s *= inv_km1;
    var_n *= inv_km1;
    cov *= inv_km1;
    const double mn2 = mu_n * mu_n;
    const double var = inv_k * (var_s / mn2 + mu_s * mu_s * var_n / (mn2 * mn2) -
                                2.0 * mu_s * cov / (mn2 * mu_n));
    u[j] = 100.0 * std::sqrt(std::max(var, 0.0));
  }
  return u;
}

namespace detail {

// C(n, k) saturating at cap; avoids overflow for large pools.
inline std::uint64_t binomial_at_most(std::uint64_t n, std::uint64_t k,
                                      std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double c = 1.0L;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (c > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::uint64_t>(c + 0.5L);
}

// Floyd's sampler: k distinct indices from [0, n), then sorted canonical form.
inline std::vector<int> draw_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::set<int> chosen;
  for (std::size_t j = n - k; j < n; ++j) {
    const int t = static_cast<int>(rng.below(j + 1));
    if (!chosen.insert(t).second) chosen.insert(static_cast<int>(j));
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace detail

// Up to n_rep mutually distinct K-subsets of [0, n_records), each drawn
// without replacement. When the subset space is no larger than n_rep every
// subset is returned by lexicographic enumeration. Otherwise candidate r is
// derived from (seed, r) alone, so parallel generation and duplicate
// filtering give the same sequence regardless of scheduling.
inline std::vector<std::vector<int>> resample(std::size_t n_records, std::size_t k,
                                              std::size_t n_rep,
                                              std::uint64_t seed) {
  if (k == 0 || k > n_records)
    throw std::invalid_argument("subset size must lie in [1, record count]");
  std::vector<std::vector<int>> out;
  if (n_rep == 0) return out;

  const std::uint64_t space = detail::binomial_at_most(n_records, k, n_rep);
  if (space <= n_rep) {
    std::vector<int> comb(k);
    for (std::size_t i = 0; i < k; ++i) comb[i] = static_cast<int>(i);
    while (true) {
      out.push_back(comb);
      std::size_t i = k;
      while (i > 0 && comb[i - 1] == static_cast<int>(n_records - k + i - 1)) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
    return out;
  }

  std::set<std::vector<int>> seen;
  const std::uint64_t max_attempts =
      1000ull * static_cast<std::uint64_t>(n_rep) + 1000ull;
  for (std::uint64_t r = 0; out.size() < n_rep; ++r) {
    if (r >= max_attempts)
      throw std::runtime_error("resampling failed to find enough unique subsets");
    Rng rng = stream_rng(seed, r);
    auto subset = detail::draw_subset(n_records, k, rng);
    if (seen.insert(subset).second) out.push_back(std::move(subset));
  }
  return out;
}

// Ratio trace, uncertainty, and bookkeeping channels for one chosen subset.
inline ResampledTrace make_resampled(const std::vector<SweepRecord>& records,
                                     std::span<const int> subset) {
  ResampledTrace rt;
  rt.pl = pl_ratio(records, subset);
  rt.u_pl = subset.size() >= 2 ? propagate_uncertainty(records, subset)
                               : std::vector<double>(rt.pl.size(), 0.0);
  rt.k = static_cast<int>(subset.size());
  rt.indices.assign(subset.begin(), subset.end());
  std::sort(rt.indices.begin(), rt.indices.end());
  const bool have_pl = std::all_of(subset.begin(), subset.end(), [&](int i) {
    return !records[static_cast<std::size_t>(i)].pl.empty();
  });
  if (have_pl) {
    rt.pl_sum.assign(rt.pl.size(), 0.0);
    for (int i : subset)
      for (std::size_t j = 0; j < rt.pl_sum.size(); ++j)
        rt.pl_sum[j] += records[static_cast<std::size_t>(i)].pl[j];
  }
  return rt;
}

}  // namespace nvr::sweeps
