// nvr: command-line front end for the NV Ramsey data pipeline.
// Subcommands cover lattice/bath generation, trace simulation and forward
// reconstruction, noise calibration and synthesis, sweep resampling, PCA,
// evaluation metrics, loss spot checks, token dumps, and corpus generation.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nvr/nvr.hpp"

namespace fs = std::filesystem;
using nvr::dataset::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ColumnsFile {
  std::ofstream os;
  explicit ColumnsFile(const fs::path& path) : os(path, std::ios::trunc) {
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    os << std::setprecision(10);
  }
  void header(const std::string& text) { os << "# " << text << '\n'; }
  template <typename... Ts>
  void row(Ts... vs) {
    bool first = true;
    ((os << (first ? "" : " ") << vs, first = false), ...);
    os << '\n';
  }
};

std::string strip_suffix(std::string path, const std::string& suffix) {
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    path.resize(path.size() - suffix.size());
  return path;
}

nvr::noise::NoiseModel load_model_or_default(const std::string& path) {
  if (path.empty()) return {};
  const json j = nvr::dataset::load_manifest(path);
  return nvr::dataset::noise_from_json(j.contains("noise_model")
                                           ? j.at("noise_model")
                                           : j);
}

// Collect the trace ensemble referenced by a corpus / traces / noise-corpus
// manifest. For corpora the caller picks the clean or the noisy block.
std::vector<nvr::ramsey::Trace> load_ensemble(const fs::path& manifest_path,
                                              const std::string& prefer) {
  const json j = nvr::dataset::load_manifest(manifest_path);
  const auto grid = nvr::dataset::grid_from_json(j.at("grid"));
  const auto times = nvr::dataset::grid_times(grid);
  const auto& files = j.at("files");
  std::string key = "traces";
  if (prefer == "noisy" && files.contains("noisy")) key = "noisy";
  const auto rows = nvr::io::read_f32_rows(
      nvr::dataset::sibling(manifest_path, files.at(key).get<std::string>()),
      static_cast<std::size_t>(grid.n_points));
  std::vector<nvr::ramsey::Trace> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = {rows[i], times};
  return out;
}

struct GridFlags {
  double t_start = 0.0;
  double t_end = 2.0;
  void attach(CLI::App* cmd) {
    cmd->add_option("--t-start", t_start, "evolution start, us");
    cmd->add_option("--t-end", t_end, "evolution end, us");
  }
};

// ---------------------------------------------------------------------------

int cmd_lattice_gen(std::uint64_t seed, int n_configs,
                    const nvr::lattice::LatticeSpec& spec, const std::string& out,
                    const std::string& format) {
  std::cout << "nvr lattice-gen\nseed: " << seed << "\n";
  auto [nv, shifted] = nvr::lattice::place_nv(nvr::lattice::enumerate_supercell(spec));
  const auto eligible = nvr::lattice::eligible_sites(shifted, spec);

  std::vector<nvr::dataset::BathRecord> baths;
  for (int c = 0; c < n_configs; ++c) {
    nvr::Rng rng = nvr::stream_rng(seed, static_cast<std::uint64_t>(c));
    auto bath = nvr::lattice::dope_and_cut(eligible, spec, rng);
    bath.nv = nv;
    baths.push_back({c, nv, bath.spins});
  }

  if (format == "columns") {
    ColumnsFile cf(out);
    cf.header("seed = " + std::to_string(seed));
    cf.header("config spin x y z a_par_khz");
    for (const auto& b : baths)
      for (std::size_t i = 0; i < b.spins.size(); ++i)
        cf.row(b.config_id, i, b.spins[i].position.x(), b.spins[i].position.y(),
               b.spins[i].position.z(), b.spins[i].a_par);
  } else {
    json configs = json::array();
    for (const auto& b : baths) configs.push_back(nvr::dataset::bath_to_json(b));
    const json j = {{"kind", "baths"},
                    {"version", nvr::dataset::kManifestVersion},
                    {"seed", seed},
                    {"n_configs", n_configs},
                    {"lattice", nvr::dataset::lattice_to_json(spec)},
                    {"configs", std::move(configs)}};
    nvr::dataset::save_manifest(out, j);
  }
  std::size_t total = 0;
  for (const auto& b : baths) total += b.spins.size();
  std::cout << "configs: " << n_configs << "\nretained spins: " << total << "\n";
  return kExitOk;
}

int write_single_trace(const nvr::ramsey::Trace& trace,
                       const nvr::ramsey::RamseyConfig& cfg, const std::string& out,
                       const std::string& format, const json& extra) {
  if (format == "columns") {
    ColumnsFile cf(out);
    cf.header("t_us pl_percent");
    for (std::size_t k = 0; k < trace.values.size(); ++k)
      cf.row(trace.times[k], trace.values[k]);
  } else {
    const std::string base = strip_suffix(out, ".traces");
    nvr::dataset::TraceSet set;
    set.grid = {cfg.t_start, cfg.t_end, cfg.n_points};
    set.traces.push_back(trace);
    nvr::dataset::write_trace_set(base, set, extra);
  }
  return kExitOk;
}

int cmd_simulate(const GridFlags& grid, double t2, double f,
                 const std::vector<double>& couplings, double pl_low, double pl_high,
                 double n14, bool include_n14, const std::string& out,
                 const std::string& format) {
  std::cout << "nvr simulate\n";
  nvr::ramsey::RamseyConfig cfg;
  cfg.t_start = grid.t_start;
  cfg.t_end = grid.t_end;
  cfg.t2_star = t2;
  cfg.f_base = f;
  cfg.pl_low = pl_low;
  cfg.pl_high = pl_high;
  cfg.include_n14 = include_n14;
  cfg.a_par_n14 = n14;
  cfg.validate();
  const auto trace = nvr::ramsey::forward_reconstruct({couplings}, cfg);
  std::cout << "points: " << trace.values.size() << "\n";
  return write_single_trace(trace, cfg, out, format,
                            {{"t2_star", t2}, {"f_base", f}, {"pl_low", pl_low}});
}

int cmd_reconstruct(const GridFlags& grid, int n, const std::vector<double>& couplings,
                    double t2, double f, double pl_low, double pl_high,
                    const std::string& out, const std::string& format) {
  std::cout << "nvr reconstruct\n";
  if (n != static_cast<int>(couplings.size()))
    throw std::invalid_argument("--n must match the number of --couplings entries");
  nvr::ramsey::RamseyConfig cfg;
  cfg.t_start = grid.t_start;
  cfg.t_end = grid.t_end;
  cfg.t2_star = t2;
  cfg.f_base = f;
  cfg.pl_low = pl_low;
  cfg.pl_high = pl_high;
  cfg.validate();
  const auto trace = nvr::ramsey::forward_reconstruct({couplings}, cfg);
  std::cout << "points: " << trace.values.size() << "\n";
  return write_single_trace(
      trace, cfg, out, format,
      {{"n_c13", n}, {"t2_star", t2}, {"f_base", f}, {"couplings", couplings}});
}

int cmd_calibrate_noise(const std::string& sweeps_path, const std::string& ref_path,
                        int n_bins, double sigma_floor, const std::string& out,
                        const std::string& format) {
  std::cout << "nvr calibrate-noise\n";
  const auto sweep_set = nvr::dataset::read_sweeps(sweeps_path);
  const auto times = nvr::dataset::grid_times(sweep_set.grid);

  std::vector<nvr::ramsey::Trace> sweep_traces;
  for (std::size_t i = 0; i < sweep_set.records.size(); ++i) {
    const std::vector<int> idx{static_cast<int>(i)};
    sweep_traces.push_back({nvr::sweeps::pl_ratio(sweep_set.records, idx), times});
  }

  nvr::ramsey::Trace reference;
  if (ref_path.empty()) {
    std::vector<int> all(sweep_set.records.size());
    std::iota(all.begin(), all.end(), 0);
    reference = {nvr::sweeps::pl_ratio(sweep_set.records, all), times};
  } else {
    const auto refs = load_ensemble(ref_path, "traces");
    if (refs.empty()) throw std::runtime_error("reference manifest holds no trace");
    reference = refs[0];
  }

  const auto residuals = nvr::noise::compute_residuals(sweep_traces, reference);
  const auto [b0, b1, b2] = nvr::noise::fit_sigma(residuals, n_bins);
  nvr::noise::NoiseModel model;
  model.b0 = b0;
  model.b1 = b1;
  model.b2 = b2;
  model.sigma_dc = residuals.per_sweep_means.size() >= 30
                       ? nvr::noise::fit_dc(residuals)
                       : 0.0;
  model.sigma_floor = sigma_floor;

  std::cout << "sigma(y) = " << b0 << " + " << b1 << " y + " << b2 << " y^2\n"
            << "sigma_dc = " << model.sigma_dc << "\n";

  if (format == "columns") {
    ColumnsFile sf(out + ".sigma.cols");
    sf.header("y sigma_fit");
    double lo = 1e300, hi = -1e300;
    for (const auto& [y, r] : residuals.pairs) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    for (int i = 0; i <= 100; ++i) {
      const double y = lo + (hi - lo) * i / 100.0;
      sf.row(y, nvr::noise::sigma_of_y(model, y));
    }
    ColumnsFile hf(out + ".hist.cols");
    hf.header("residual_center count");
    double rlo = 1e300, rhi = -1e300;
    for (const auto& [y, r] : residuals.pairs) {
      rlo = std::min(rlo, r);
      rhi = std::max(rhi, r);
    }
    const int bins = 81;
    std::vector<int> hist(bins, 0);
    for (const auto& [y, r] : residuals.pairs) {
      int b = static_cast<int>((r - rlo) / (rhi - rlo) * bins);
      b = std::clamp(b, 0, bins - 1);
      ++hist[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b)
      hf.row(rlo + (rhi - rlo) * (b + 0.5) / bins, hist[static_cast<std::size_t>(b)]);
  } else {
    json j = {{"kind", "noise-model"}, {"version", nvr::dataset::kManifestVersion}};
    j["noise_model"] = nvr::dataset::noise_to_json(model);
    j["n_sweeps"] = sweep_set.records.size();
    nvr::dataset::save_manifest(out, j);
  }
  return kExitOk;
}

int cmd_synth(const std::string& clean_path, const std::string& model_path,
              std::uint64_t seed, int reps, const std::string& out,
              const std::string& format) {
  std::cout << "nvr synth\nseed: " << seed << "\n";
  const auto model = load_model_or_default(model_path);
  const json cj = nvr::dataset::load_manifest(clean_path);
  const auto grid = nvr::dataset::grid_from_json(cj.at("grid"));
  const auto clean = load_ensemble(clean_path, "traces");

  nvr::dataset::TraceSet noisy;
  noisy.grid = grid;
  for (std::size_t i = 0; i < clean.size(); ++i)
    for (int r = 0; r < reps; ++r) {
      nvr::Rng rng = nvr::stream_rng(
          seed, i * static_cast<std::uint64_t>(reps) + static_cast<std::uint64_t>(r));
      noisy.traces.push_back(nvr::noise::synthesize(clean[i], model, rng));
    }
  std::cout << "traces: " << noisy.traces.size() << "\n";

  if (format == "columns") {
    // residual histogram, plot-ready
    std::vector<double> residuals;
    for (std::size_t i = 0; i < clean.size(); ++i)
      for (int r = 0; r < reps; ++r) {
        const auto& t = noisy.traces[i * static_cast<std::size_t>(reps) +
                                     static_cast<std::size_t>(r)];
        for (std::size_t k = 0; k < t.values.size(); ++k)
          residuals.push_back(t.values[k] - clean[i].values[k]);
      }
    double lo = 1e300, hi = -1e300;
    for (double r : residuals) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const int bins = 81;
    std::vector<int> hist(bins, 0);
    for (double r : residuals) {
      int b = static_cast<int>((r - lo) / (hi - lo) * bins);
      ++hist[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))];
    }
    ColumnsFile cf(out);
    cf.header("seed = " + std::to_string(seed));
    cf.header("residual_center count");
    for (int b = 0; b < bins; ++b)
      cf.row(lo + (hi - lo) * (b + 0.5) / bins, hist[static_cast<std::size_t>(b)]);
  } else {
    nvr::dataset::write_trace_set(out, noisy, {{"seed", seed}, {"reps", reps}});
  }
  return kExitOk;
}

int cmd_resample(const std::string& sweeps_path, std::vector<int> k_list,
                 std::size_t n_rep, std::uint64_t seed, const std::string& out,
                 const std::string& format) {
  std::cout << "nvr resample\nseed: " << seed << "\n";
  const auto sweep_set = nvr::dataset::read_sweeps(sweeps_path);
  const auto times = nvr::dataset::grid_times(sweep_set.grid);
  if (k_list.empty()) k_list = {5, 10, 15, 25, 30, 35, 40, 45, 50};

  for (int k : k_list) {
    const auto subsets = nvr::sweeps::resample(sweep_set.records.size(),
                                               static_cast<std::size_t>(k), n_rep, seed);
    const std::string stem =
        k_list.size() == 1 ? out : out + "_k" + std::to_string(k);
    if (format == "columns") {
      ColumnsFile cf(stem + ".cols");
      cf.header("seed = " + std::to_string(seed));
      cf.header("realization t_us pl_percent u_pl");
      for (std::size_t r = 0; r < subsets.size(); ++r) {
        const auto rt = nvr::sweeps::make_resampled(sweep_set.records, subsets[r]);
        for (std::size_t j = 0; j < rt.pl.size(); ++j)
          cf.row(r, times[j], rt.pl[j], rt.u_pl[j]);
      }
    } else {
      nvr::dataset::TraceSet set;
      set.grid = sweep_set.grid;
      json index = json::array();
      for (const auto& subset : subsets) {
        const auto rt = nvr::sweeps::make_resampled(sweep_set.records, subset);
        set.traces.push_back({rt.pl, times});
        set.uncert.push_back(rt.u_pl);
        index.push_back(rt.indices);
      }
      nvr::dataset::write_trace_set(stem, set,
                                    {{"kind", "resampled"},
                                     {"seed", seed},
                                     {"k", k},
                                     {"n_rep", n_rep},
                                     {"indices", std::move(index)}});
    }
    std::cout << "k=" << k << " realizations: " << subsets.size() << "\n";
  }
  return kExitOk;
}

int cmd_pca(const std::string& in_path, const std::string& use, int store_modes,
            const std::string& out, const std::string& format) {
  std::cout << "nvr pca\n";
  const auto traces = load_ensemble(in_path, use);
  const auto model = nvr::analysis::pca_fit(traces);
  const int stored = std::min(store_modes, model.mode_count());
  std::cout << "traces: " << traces.size() << "\n";
  for (int k = 0; k < std::min(3, model.mode_count()); ++k)
    std::cout << "PC" << k + 1 << " explained: "
              << 100.0 * model.explained_ratio[static_cast<std::size_t>(k)] << "%\n";

  if (format == "columns") {
    ColumnsFile sc(out + ".scores.cols");
    sc.header("pc1 pc2");
    for (const auto& t : traces) {
      const auto s = nvr::analysis::pca_project(model, t);
      sc.row(s(0), model.mode_count() > 1 ? s(1) : 0.0);
    }
    ColumnsFile mc(out + ".modes.cols");
    mc.header("t_us mean pc1_plus pc1_minus pc2_plus pc2_minus");
    const auto p1 = nvr::analysis::pca_mode_trace(model, 1, +1);
    const auto m1 = nvr::analysis::pca_mode_trace(model, 1, -1);
    const auto p2 = model.mode_count() > 1 ? nvr::analysis::pca_mode_trace(model, 2, +1) : p1;
    const auto m2 = model.mode_count() > 1 ? nvr::analysis::pca_mode_trace(model, 2, -1) : m1;
    for (std::size_t kk = 0; kk < model.mean_trace.size(); ++kk)
      mc.row(model.times[kk], model.mean_trace[kk], p1.values[kk], m1.values[kk],
             p2.values[kk], m2.values[kk]);
  } else {
    const std::string stem = fs::path(out).filename().string();
    json j = {{"kind", "pca"},
              {"version", nvr::dataset::kManifestVersion},
              {"n_traces", traces.size()},
              {"n_modes", stored},
              {"times", model.times},
              {"mean", model.mean_trace},
              {"score_std",
               std::vector<double>(model.score_std.begin(),
                                   model.score_std.begin() + stored)},
              {"explained_ratio",
               std::vector<double>(model.explained_ratio.begin(),
                                   model.explained_ratio.begin() + stored)},
              {"files", {{"modes", stem + ".modes"}}}};
    std::ofstream mf = nvr::io::open_out(out + ".modes");
    for (int k = 0; k < stored; ++k) {
      std::vector<double> row(model.mean_trace.size());
      for (std::size_t i = 0; i < row.size(); ++i)
        row[i] = model.modes(static_cast<Eigen::Index>(i), k);
      nvr::io::append_f32_row(mf, row);
    }
    nvr::dataset::save_manifest(out + ".manifest", j);
  }
  return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& ref_path,
             double sigma_const, double nu, const std::string& out,
             const std::string& format) {
  std::cout << "nvr eval\n";
  const auto pred = load_ensemble(pred_path, "traces");
  const auto ref = load_ensemble(ref_path, "traces");
  if (pred.size() != ref.size() || pred.empty())
    throw std::invalid_argument("prediction and reference trace counts differ");

  json reports = json::array();
  std::vector<double> rmses, ffts;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    nvr::analysis::MetricReport rep;
    rep.rmse = nvr::analysis::rmse(pred[i], ref[i]);
    rep.fft_rmse = nvr::analysis::fft_rmse(pred[i], ref[i]);
    json jr = {{"rmse", rep.rmse}, {"fft_rmse", rep.fft_rmse}};
    if (sigma_const > 0.0) {
      const std::vector<double> sigmas(pred[i].values.size(), sigma_const);
      const auto [c, cn] = nvr::analysis::chi2(pred[i], ref[i], sigmas, nu);
      jr["chi2"] = c;
      jr["chi2_nu"] = cn;
    }
    reports.push_back(std::move(jr));
    rmses.push_back(rep.rmse);
    ffts.push_back(rep.fft_rmse);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2]
                        : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  std::cout << "median rmse: " << median(rmses)
            << "\nmedian fft_rmse: " << median(ffts) << "\n";

  if (format == "columns") {
    // normalized spectrum overlay for the first pair
    auto spectrum = [](const nvr::ramsey::Trace& t) {
      double mean = 0.0;
      for (double v : t.values) mean += v;
      mean /= static_cast<double>(t.values.size());
      std::vector<double> centered(t.values.size());
      for (std::size_t k = 0; k < centered.size(); ++k)
        centered[k] = t.values[k] - mean;
      auto mag = nvr::fft::rfft_mag(centered);
      double peak = 0.0;
      for (double m : mag) peak = std::max(peak, m);
      if (peak > 0.0)
        for (double& m : mag) m /= peak;
      return mag;
    };
    const auto sp = spectrum(pred[0]);
    const auto sr = spectrum(ref[0]);
    const double dt = (ref[0].times[1] - ref[0].times[0]);
    ColumnsFile cf(out);
    cf.header("f_mhz mag_pred mag_ref");
    for (std::size_t k = 0; k < sp.size(); ++k)
      cf.row(static_cast<double>(k) / (200.0 * dt), sp[k], sr[k]);
  } else {
    const json j = {{"kind", "report"},
                    {"version", nvr::dataset::kManifestVersion},
                    {"n_pairs", pred.size()},
                    {"median_rmse", median(rmses)},
                    {"median_fft_rmse", median(ffts)},
                    {"pairs", std::move(reports)}};
    nvr::dataset::save_manifest(out, j);
  }
  return kExitOk;
}

int cmd_loss_check() {
  std::cout << "nvr loss-check\n";
  struct Row {
    std::string name;
    double got;
    double want;
  };
  std::vector<Row> rows;

  rows.push_back({"smooth_l1(0, beta=1)", nvr::losses::smooth_l1(0.0), 0.0});
  rows.push_back({"smooth_l1(0.5, beta=1)", nvr::losses::smooth_l1(0.5), 0.125});
  rows.push_back({"smooth_l1(2, beta=1)", nvr::losses::smooth_l1(2.0), 1.5});
  rows.push_back({"logspace_mse(0, e-1)",
                  nvr::losses::logspace_mse(0.0, std::exp(1.0) - 1.0), 1.0});
  rows.push_back({"logspace_mse symmetry gap",
                  nvr::losses::logspace_mse(2.5, 0.7) -
                      nvr::losses::logspace_mse(0.7, 2.5),
                  0.0});
  const std::vector<double> uniform(11, 0.0);
  rows.push_back({"cross_entropy(uniform-11)",
                  nvr::losses::cross_entropy(uniform, 3), std::log(11.0)});
  std::vector<double> one(11, 0.0);
  one[0] = 1.0;
  rows.push_back({"cross_entropy([1,0x10], 0)", nvr::losses::cross_entropy(one, 0),
                  std::log((std::exp(1.0) + 10.0) / std::exp(1.0))});
  std::vector<double> hot(11, 0.0);
  hot[6] = 1000.0;
  rows.push_back({"cross_entropy(saturated)", nvr::losses::cross_entropy(hot, 6), 0.0});
  std::vector<double> pred(10, 0.0), target(10, 0.0);
  pred[0] = pred[1] = 1.0;
  pred[9] = 1e6;
  rows.push_back({"masked_smooth_l1(n=2)",
                  nvr::losses::masked_smooth_l1(pred, target, 2), 0.5});
  std::vector<double> pred_tail(pred);
  pred_tail[7] = -4e8;
  rows.push_back({"masked tail annihilation gap",
                  nvr::losses::masked_smooth_l1(pred_tail, target, 2) -
                      nvr::losses::masked_smooth_l1(pred, target, 2),
                  0.0});
  std::vector<double> x(200);
  for (int i = 0; i < 200; ++i) x[static_cast<std::size_t>(i)] = std::sin(0.1 * i);
  rows.push_back({"core_loss(x, x)", nvr::losses::core_loss(x, x, {}, {}), 0.0});
  // alternating +-0.5 keeps every mean and difference exactly representable
  std::vector<double> sq(200);
  for (int i = 0; i < 200; ++i) sq[static_cast<std::size_t>(i)] = i % 2 ? 0.5 : -0.5;
  std::vector<double> sq_off(sq);
  for (double& v : sq_off) v += 0.75;
  rows.push_back({"core_loss(x + 0.75, x)", nvr::losses::core_loss(sq_off, sq, {}, {}),
                  200.0 * 0.75 * 0.75});
  double stft_peak = 0.0;
  for (const auto& frame : nvr::losses::stft(std::vector<double>(200, 0.0), {}))
    for (const auto& c : frame) stft_peak = std::max(stft_peak, std::abs(c));
  rows.push_back({"stft(0) max |bin|", stft_peak, 0.0});
  rows.push_back({"total_hf_loss(2, 3)", nvr::losses::total_hf_loss(2.0, 3.0, {}), 5.0});
  rows.push_back({"total_hf_loss(0, 0)", nvr::losses::total_hf_loss(0.0, 0.0, {}), 0.0});

  bool all_ok = true;
  std::cout << std::left << std::setw(34) << "case" << std::setw(16) << "value"
            << std::setw(16) << "expected" << "status\n";
  for (const auto& row : rows) {
    const bool ok = std::abs(row.got - row.want) < 1e-12;
    all_ok = all_ok && ok;
    std::cout << std::left << std::setw(34) << row.name << std::setw(16)
              << std::setprecision(10) << row.got << std::setw(16) << row.want
              << (ok ? "pass" : "FAIL") << "\n";
  }
  return all_ok ? kExitOk : kExitRuntime;
}

int cmd_tokens(const std::string& in_path, double pl, double t2, double f,
               int n_meta, const std::string& out, const std::string& format) {
  std::cout << "nvr tokens\n";
  const auto traces = load_ensemble(in_path, "traces");
  if (traces.empty()) throw std::runtime_error("input manifest holds no trace");

  std::vector<nvr::features::TokenSequence> seqs;
  for (const auto& t : traces)
    seqs.push_back(nvr::features::build_tokens(t, pl, t2, f, n_meta));
  std::cout << "traces: " << traces.size() << "\ntokens per trace: "
            << seqs[0].total() << "\n";

  if (format == "columns") {
    ColumnsFile cf(out);
    cf.header("position type_id value");
    const auto values = seqs[0].values();
    for (int i = 0; i < seqs[0].total(); ++i)
      cf.row(seqs[0].positions[static_cast<std::size_t>(i)],
             seqs[0].type_ids[static_cast<std::size_t>(i)],
             values[static_cast<std::size_t>(i)]);
  } else {
    const std::string stem = fs::path(out).filename().string();
    std::ofstream vf = nvr::io::open_out(out + ".values");
    for (const auto& s : seqs) nvr::io::append_f32_row(vf, s.values());
    const json j = {{"kind", "tokens"},
                    {"version", nvr::dataset::kManifestVersion},
                    {"n_traces", seqs.size()},
                    {"n_meta", n_meta},
                    {"t_tot", seqs[0].total()},
                    {"type_ids", seqs[0].type_ids},
                    {"positions", seqs[0].positions},
                    {"meta", {{"pl", pl}, {"t2_star", t2}, {"f_base", f}}},
                    {"files", {{"values", stem + ".values"}}}};
    nvr::dataset::save_manifest(out + ".manifest", j);
  }
  return kExitOk;
}

int cmd_gen_corpus(const nvr::dataset::CorpusParams& params, const std::string& out) {
  std::cout << "nvr gen-corpus\nseed: " << params.seed << "\n";
  const auto start = std::chrono::steady_clock::now();
  const auto result = nvr::dataset::generate_corpus(params, out);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "configs: " << result.configs.size()
            << "\ntraces: " << result.n_traces << "\nelapsed_s: " << secs << "\n";
  return kExitOk;
}

int cmd_gen_noise_corpus(std::size_t n, double lo, double hi, std::uint64_t seed,
                         const std::string& model_path, const GridFlags& grid,
                         const std::string& out) {
  std::cout << "nvr gen-noise-corpus\nseed: " << seed << "\n";
  const auto model = load_model_or_default(model_path);
  nvr::dataset::generate_pure_noise(n, lo, hi, seed, model,
                                    {grid.t_start, grid.t_end, 200}, out);
  std::cout << "traces: " << n << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV Ramsey data pipeline"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  int exit_code = kExitOk;

  // ---- lattice-gen
  auto* lat = app.add_subcommand("lattice-gen", "generate nuclear baths");
  std::uint64_t lat_seed = 0;
  int lat_configs = 1;
  nvr::lattice::LatticeSpec lat_spec;
  std::string lat_out, lat_format = "manifest";
  lat->add_option("--seed", lat_seed, "RNG seed")->required();
  lat->add_option("--n-configs", lat_configs, "bath count")->check(CLI::PositiveNumber);
  lat->add_option("--a", lat_spec.a, "lattice constant, angstrom");
  lat->add_option("--n-super", lat_spec.n_super, "supercells per axis");
  lat->add_option("--p13", lat_spec.p13, "doping probability");
  lat->add_option("--dopant-cap", lat_spec.dopant_cap, "max dopants in the box");
  lat->add_option("--r-cut", lat_spec.r_cut, "cutoff radius, angstrom");
  lat->add_option("--alpha", lat_spec.alpha, "coupling prefactor, kHz*A^3");
  lat->add_option("--out", lat_out, "output path")->required();
  lat->add_option("--format", lat_format)->check(CLI::IsMember({"manifest", "columns"}));
  lat->callback([&] {
    lat_spec.validate();
    exit_code = cmd_lattice_gen(lat_seed, lat_configs, lat_spec, lat_out, lat_format);
  });

  // ---- simulate
  auto* sim = app.add_subcommand("simulate", "simulate a clean Ramsey trace");
  GridFlags sim_grid;
  double sim_t2 = 1.0, sim_f = 5.0, sim_pl_low = 80.0, sim_pl_high = 100.0,
         sim_n14 = 0.0;
  std::vector<double> sim_couplings;
  std::string sim_out, sim_format = "manifest";
  sim_grid.attach(sim);
  sim->add_option("--t2", sim_t2, "T2*, us")->required();
  sim->add_option("--f", sim_f, "offset detuning, MHz")->required();
  sim->add_option("--couplings", sim_couplings, "13C couplings, kHz")->delimiter(',');
  sim->add_option("--pl-low", sim_pl_low, "PL(%) readout of ms=-1");
  sim->add_option("--pl-high", sim_pl_high, "PL(%) readout of ms=0");
  auto* sim_n14_opt = sim->add_option("--n14", sim_n14, "14N coupling, kHz");
  sim->add_option("--out", sim_out, "output path")->required();
  sim->add_option("--format", sim_format)->check(CLI::IsMember({"manifest", "columns"}));
  sim->callback([&] {
    exit_code = cmd_simulate(sim_grid, sim_t2, sim_f, sim_couplings, sim_pl_low,
                             sim_pl_high, sim_n14, sim_n14_opt->count() > 0, sim_out,
                             sim_format);
  });

  // ---- reconstruct
  auto* rec = app.add_subcommand("reconstruct",
                                 "forward-reconstruct a trace from parameters");
  GridFlags rec_grid;
  int rec_n = 0;
  double rec_t2 = 1.0, rec_f = 5.0, rec_pl_low = 80.0, rec_pl_high = 100.0;
  std::vector<double> rec_couplings;
  std::string rec_out, rec_format = "manifest";
  rec_grid.attach(rec);
  rec->add_option("--n", rec_n, "13C count")->required();
  rec->add_option("--couplings", rec_couplings, "couplings, kHz")
      ->delimiter(',')
      ->required();
  rec->add_option("--t2", rec_t2, "T2*, us")->required();
  rec->add_option("--f", rec_f, "offset detuning, MHz");
  rec->add_option("--pl-low", rec_pl_low, "PL(%) readout of ms=-1");
  rec->add_option("--pl-high", rec_pl_high, "PL(%) readout of ms=0");
  rec->add_option("--out", rec_out, "output path")->required();
  rec->add_option("--format", rec_format)->check(CLI::IsMember({"manifest", "columns"}));
  rec->callback([&] {
    exit_code = cmd_reconstruct(rec_grid, rec_n, rec_couplings, rec_t2, rec_f,
                                rec_pl_low, rec_pl_high, rec_out, rec_format);
  });

  // ---- calibrate-noise
  auto* cal = app.add_subcommand("calibrate-noise",
                                 "fit the noise model from sweep records");
  std::string cal_sweeps, cal_ref, cal_out, cal_format = "manifest";
  int cal_bins = 20;
  double cal_floor = 0.1;
  cal->add_option("--sweeps", cal_sweeps, "sweep manifest")->required();
  cal->add_option("--reference", cal_ref, "reference trace manifest");
  cal->add_option("--n-bins", cal_bins, "level bins")->check(CLI::PositiveNumber);
  cal->add_option("--sigma-floor", cal_floor, "positive clip, PL");
  cal->add_option("--out", cal_out, "output path")->required();
  cal->add_option("--format", cal_format)->check(CLI::IsMember({"manifest", "columns"}));
  cal->callback([&] {
    exit_code = cmd_calibrate_noise(cal_sweeps, cal_ref, cal_bins, cal_floor, cal_out,
                                    cal_format);
  });

  // ---- synth
  auto* syn = app.add_subcommand("synth", "add calibrated noise to clean traces");
  std::string syn_clean, syn_model, syn_out, syn_format = "manifest";
  std::uint64_t syn_seed = 0;
  int syn_reps = 1;
  syn->add_option("--clean", syn_clean, "clean trace manifest")->required();
  syn->add_option("--model", syn_model, "noise model manifest");
  syn->add_option("--seed", syn_seed, "RNG seed")->required();
  syn->add_option("--reps", syn_reps, "noisy draws per clean trace")
      ->check(CLI::PositiveNumber);
  syn->add_option("--out", syn_out, "output path")->required();
  syn->add_option("--format", syn_format)->check(CLI::IsMember({"manifest", "columns"}));
  syn->callback([&] {
    exit_code = cmd_synth(syn_clean, syn_model, syn_seed, syn_reps, syn_out, syn_format);
  });

  // ---- resample
  auto* res = app.add_subcommand("resample", "K-sweep subset averaging");
  std::string res_sweeps, res_out, res_format = "manifest";
  std::vector<int> res_k;
  std::size_t res_nrep = 10000;
  std::uint64_t res_seed = 0;
  res->add_option("--sweeps", res_sweeps, "sweep manifest")->required();
  res->add_option("--k", res_k, "subset sizes (default: the standard K ladder)")
      ->delimiter(',');
  res->add_option("--n-rep", res_nrep, "max realizations per K");
  res->add_option("--seed", res_seed, "RNG seed")->required();
  res->add_option("--out", res_out, "output path")->required();
  res->add_option("--format", res_format)->check(CLI::IsMember({"manifest", "columns"}));
  res->callback([&] {
    exit_code = cmd_resample(res_sweeps, res_k, res_nrep, res_seed, res_out, res_format);
  });

  // ---- pca
  auto* pca = app.add_subcommand("pca", "principal components of a trace ensemble");
  std::string pca_in, pca_out, pca_use = "noisy", pca_format = "manifest";
  int pca_modes = 10;
  pca->add_option("--in", pca_in, "corpus or trace manifest")->required();
  pca->add_option("--use", pca_use)->check(CLI::IsMember({"noisy", "clean"}));
  pca->add_option("--modes", pca_modes, "stored mode count")->check(CLI::PositiveNumber);
  pca->add_option("--out", pca_out, "output path")->required();
  pca->add_option("--format", pca_format)->check(CLI::IsMember({"manifest", "columns"}));
  pca->callback([&] {
    exit_code = cmd_pca(pca_in, pca_use == "clean" ? "traces" : "noisy", pca_modes,
                        pca_out, pca_format);
  });

  // ---- eval
  auto* ev = app.add_subcommand("eval", "reconstruction metrics");
  std::string ev_pred, ev_ref, ev_out, ev_format = "manifest";
  double ev_sigma = 0.0, ev_nu = 200.0;
  ev->add_option("--pred", ev_pred, "prediction manifest")->required();
  ev->add_option("--ref", ev_ref, "reference manifest")->required();
  ev->add_option("--sigma-const", ev_sigma, "constant uncertainty for chi2");
  ev->add_option("--nu", ev_nu, "degrees of freedom");
  ev->add_option("--out", ev_out, "output path")->required();
  ev->add_option("--format", ev_format)->check(CLI::IsMember({"manifest", "columns"}));
  ev->callback([&] {
    exit_code = cmd_eval(ev_pred, ev_ref, ev_sigma, ev_nu, ev_out, ev_format);
  });

  // ---- loss-check
  auto* loss = app.add_subcommand("loss-check", "closed-form loss spot checks");
  loss->callback([&] { exit_code = cmd_loss_check(); });

  // ---- tokens
  auto* tok = app.add_subcommand("tokens", "dump token sequences");
  std::string tok_in, tok_out, tok_format = "manifest";
  double tok_pl = 85.0, tok_t2 = 1.0, tok_f = 5.0;
  int tok_meta = 3;
  tok->add_option("--in", tok_in, "trace manifest")->required();
  tok->add_option("--pl", tok_pl, "PL metadata scalar")->required();
  tok->add_option("--t2", tok_t2, "T2* metadata scalar, us")->required();
  tok->add_option("--f", tok_f, "detuning metadata scalar, MHz");
  tok->add_option("--n-meta", tok_meta)->check(CLI::IsMember({2, 3}));
  tok->add_option("--out", tok_out, "output path")->required();
  tok->add_option("--format", tok_format)->check(CLI::IsMember({"manifest", "columns"}));
  tok->callback([&] {
    exit_code = cmd_tokens(tok_in, tok_pl, tok_t2, tok_f, tok_meta, tok_out, tok_format);
  });

  // ---- gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a labeled synthetic corpus");
  nvr::dataset::CorpusParams gp;
  std::string gen_out, gen_noise = "on";
  GridFlags gen_grid;
  gen->add_option("--seed", gp.seed, "RNG seed")->required();
  gen->add_option("--n-configs", gp.n_configs, "bath configurations")
      ->check(CLI::PositiveNumber);
  gen->add_option("--traces-per-config", gp.traces_per_config, "traces per bath")
      ->check(CLI::PositiveNumber);
  gen->add_option("--t2-min", gp.ranges.t2_min);
  gen->add_option("--t2-max", gp.ranges.t2_max);
  gen->add_option("--f-min", gp.ranges.f_min);
  gen->add_option("--f-max", gp.ranges.f_max);
  gen->add_option("--pl-low-min", gp.ranges.pl_low_min);
  gen->add_option("--pl-low-max", gp.ranges.pl_low_max);
  gen->add_option("--noise", gen_noise)->check(CLI::IsMember({"on", "off"}));
  gen->add_option("--threads", gp.threads, "0 = hardware")
      ->check(CLI::NonNegativeNumber);
  gen_grid.attach(gen);
  gen->add_option("--out", gen_out, "output path")->required();
  gen->callback([&] {
    gp.noise_on = gen_noise == "on";
    gp.grid = {gen_grid.t_start, gen_grid.t_end, 200};
    exit_code = cmd_gen_corpus(gp, gen_out);
  });

  // ---- gen-noise-corpus
  auto* gnc = app.add_subcommand("gen-noise-corpus",
                                 "generate the pure-noise control corpus");
  std::size_t gnc_n = 1000;
  double gnc_lo = 75.0, gnc_hi = 90.0;
  std::uint64_t gnc_seed = 0;
  std::string gnc_model, gnc_out;
  GridFlags gnc_grid;
  gnc->add_option("--seed", gnc_seed, "RNG seed")->required();
  gnc->add_option("--n", gnc_n, "trace count")->check(CLI::PositiveNumber);
  gnc->add_option("--level-min", gnc_lo);
  gnc->add_option("--level-max", gnc_hi);
  gnc->add_option("--model", gnc_model, "noise model manifest");
  gnc_grid.attach(gnc);
  gnc->add_option("--out", gnc_out, "output path")->required();
  gnc->callback([&] {
    exit_code =
        cmd_gen_noise_corpus(gnc_n, gnc_lo, gnc_hi, gnc_seed, gnc_model, gnc_grid, gnc_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return exit_code;
}
