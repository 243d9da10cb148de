#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace nvr::ramsey {

inline constexpr int kTracePoints = 200;
inline constexpr int kMaxBathSpins = 9;

struct RamseyConfig {
  int n_points = kTracePoints;
  double t_start = 0.0;      // us
  double t_end = 2.0;        // us
  double f_base = 5.0;       // offset detuning, MHz
  double t2_star = 1.0;      // us
  double a_par_n14 = 0.0;    // 14N parallel coupling, kHz
  bool include_n14 = false;
  double pl_high = 100.0;    // PL(%) of m_s = 0
  double pl_low = 80.0;      // PL(%) of m_s = -1 readout

  void validate() const {
    if (n_points != kTracePoints)
      throw std::invalid_argument("trace length is fixed at 200 points");
    if (!(t_start >= 0.0 && t_end > t_start))
      throw std::invalid_argument("need t_end > t_start >= 0");
    if (!(t2_star > 0.0)) throw std::invalid_argument("t2_star must be positive");
    if (!(pl_low >= 75.0 && pl_low <= 90.0))
      throw std::invalid_argument("pl_low must lie in [75, 90]");
    if (!(pl_high > pl_low))
      throw std::invalid_argument("pl_high must exceed pl_low");
  }

  std::vector<double> time_grid() const {
    std::vector<double> t(static_cast<std::size_t>(n_points));
    const double dt = (t_end - t_start) / static_cast<double>(n_points - 1);
    for (int k = 0; k < n_points; ++k) t[static_cast<std::size_t>(k)] = t_start + dt * k;
    return t;
  }
};

struct HyperfineSet {
  std::vector<double> couplings;  // parallel couplings, kHz

  int n() const { return static_cast<int>(couplings.size()); }

  void validate() const {
    if (n() > kMaxBathSpins)
      throw std::runtime_error("bath spin count exceeds the supported maximum of 9");
    for (double c : couplings)
      if (!std::isfinite(c)) throw std::invalid_argument("couplings must be finite");
  }
};

// Quasi-static nuclear projections for one ensemble branch.
struct ProjectionState {
  int m_n14 = 0;               // -1, 0, +1
  std::vector<double> m_c13;   // one of +-1/2 per bath spin
};

struct Trace {
  std::vector<double> values;  // PL(%)
  std::vector<double> times;   // us
};

// Detuning of one projection branch, MHz. Couplings enter in kHz.
inline double detuning_mhz(const RamseyConfig& cfg, const HyperfineSet& hf,
                           const ProjectionState& proj) {
  if (proj.m_c13.size() != hf.couplings.size())
    throw std::invalid_argument("projection length does not match bath size");
  if (proj.m_n14 < -1 || proj.m_n14 > 1)
    throw std::invalid_argument("14N projection must be one of {-1, 0, +1}");
  double d = cfg.f_base;
  if (cfg.include_n14) d += cfg.a_par_n14 / 1000.0 * proj.m_n14;
  for (std::size_t i = 0; i < hf.couplings.size(); ++i) {
    if (std::abs(proj.m_c13[i]) != 0.5)
      throw std::invalid_argument("13C projections must be +-1/2");
    d += hf.couplings[i] / 1000.0 * proj.m_c13[i];
  }
  return d;
}

// |0> population after the pi/2 - tau - pi/2 sequence at fixed detuning.
// The Gaussian envelope multiplies only the oscillatory term.
inline double fringe(double tau_us, double delta_mhz, double t2_star_us) {
  const double env = std::exp(-(tau_us / t2_star_us) * (tau_us / t2_star_us));
  return 0.5 * (1.0 + env * std::cos(2.0 * std::numbers::pi * delta_mhz * tau_us));
}

// Projection-ensemble Ramsey signal on the config grid. The uniform average
// of cos(2*pi*delta*tau) over all +-1/2 combinations (and m_N in {-1,0,+1}
// when the 14N term is on) factorizes exactly:
//   mean = cos(2*pi*f_base*tau) * prod_i cos(pi*c_i*tau/1000)
//          * (1 + 2 cos(2*pi*a_N*tau/1000)) / 3
// so each grid point costs O(n) instead of O(3 * 2^n) branches.
inline std::vector<double> ensemble_signal(const RamseyConfig& cfg,
                                           const HyperfineSet& hf) {
  cfg.validate();
  hf.validate();
  const auto grid = cfg.time_grid();
  std::vector<double> signal(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double tau = grid[k];
    double osc = std::cos(2.0 * std::numbers::pi * cfg.f_base * tau);
    for (double c : hf.couplings)
      osc *= std::cos(std::numbers::pi * c / 1000.0 * tau);
    if (cfg.include_n14) {
      const double phi = 2.0 * std::numbers::pi * cfg.a_par_n14 / 1000.0 * tau;
      osc *= (1.0 + 2.0 * std::cos(phi)) / 3.0;
    }
    const double rel = tau / cfg.t2_star;
    signal[k] = 0.5 * (1.0 + std::exp(-rel * rel) * osc);
  }
  return signal;
}

// Linear readout map from |0> population to PL(%).
inline Trace to_pl(std::span<const double> signal, const RamseyConfig& cfg) {
  cfg.validate();
  if (signal.size() != static_cast<std::size_t>(cfg.n_points))
    throw std::invalid_argument("signal length does not match the config grid");
  Trace trace;
  trace.times = cfg.time_grid();
  trace.values.resize(signal.size());
  for (std::size_t k = 0; k < signal.size(); ++k)
    trace.values[k] = cfg.pl_low + (cfg.pl_high - cfg.pl_low) * signal[k];
  return trace;
}

// Regenerate the trace implied by a set of hyperfine parameters; used to
// validate parameter estimates against reference measurements.
inline Trace forward_reconstruct(const HyperfineSet& hf, const RamseyConfig& cfg) {
  return to_pl(ensemble_signal(cfg, hf), cfg);
}

}  // namespace nvr::ramsey
