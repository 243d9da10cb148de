#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nvr/io.hpp"
#include "nvr/lattice.hpp"
#include "nvr/noise.hpp"
#include "nvr/ramsey.hpp"
#include "nvr/rng.hpp"
#include "nvr/sweeps.hpp"

namespace nvr::dataset {

using nlohmann::json;

inline constexpr int kManifestVersion = 1;
inline constexpr int kLabelSlots = 10;

struct GridDef {
  double t_start = 0.0;
  double t_end = 2.0;
  int n_points = ramsey::kTracePoints;
};

struct CorpusRanges {
  double t2_min = 0.5, t2_max = 10.0;        // us
  double f_min = 4.0, f_max = 6.0;           // MHz
  double pl_low_min = 75.0, pl_low_max = 90.0;

  void validate() const {
    if (!(t2_min > 0.0 && t2_max >= t2_min))
      throw std::invalid_argument("invalid t2 range");
    if (!(f_max >= f_min)) throw std::invalid_argument("invalid detuning range");
    if (!(pl_low_min >= 75.0 && pl_low_max <= 90.0 && pl_low_max >= pl_low_min))
      throw std::invalid_argument("pl_low range must lie inside [75, 90]");
  }
};

// Per-trace ground truth, fixed-width on disk:
// f32 t2_star, f32 pl_low, f32 f_base, i32 n_c13, 10 x f32 couplings,
// 10 x u8 mask. 66 bytes per record, little-endian.
struct LabelRecord {
  float t2_star = 0.0f;
  float pl_low = 0.0f;
  float f_base = 0.0f;
  std::int32_t n_c13 = 0;
  std::array<float, kLabelSlots> couplings{};
  std::array<std::uint8_t, kLabelSlots> mask{};
};

inline constexpr std::size_t kLabelRecordBytes = 4 * 3 + 4 + 4 * kLabelSlots + kLabelSlots;

inline void write_label(std::ostream& os, const LabelRecord& rec) {
  io::put_f32(os, rec.t2_star);
  io::put_f32(os, rec.pl_low);
  io::put_f32(os, rec.f_base);
  io::put_i32(os, rec.n_c13);
  for (float c : rec.couplings) io::put_f32(os, c);
  for (std::uint8_t m : rec.mask) io::put_u8(os, m);
}

inline LabelRecord read_label(std::istream& is) {
  LabelRecord rec;
  rec.t2_star = io::get_f32(is);
  rec.pl_low = io::get_f32(is);
  rec.f_base = io::get_f32(is);
  rec.n_c13 = io::get_i32(is);
  for (float& c : rec.couplings) c = io::get_f32(is);
  for (std::uint8_t& m : rec.mask) m = io::get_u8(is);
  return rec;
}

inline std::vector<LabelRecord> read_labels(const std::filesystem::path& p) {
  std::ifstream is = io::open_in(p);
  is.seekg(0, std::ios::end);
  const std::uint64_t bytes = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0, std::ios::beg);
  if (bytes % kLabelRecordBytes != 0)
    throw std::runtime_error("label file size is not a whole number of records");
  std::vector<LabelRecord> out(bytes / kLabelRecordBytes);
  for (auto& rec : out) rec = read_label(is);
  return out;
}

struct BathRecord {
  int config_id = 0;
  lattice::NVFrame nv;
  std::vector<lattice::C13Spin> spins;
};

// ---------------------------------------------------------------------------
// manifest JSON pieces

inline json grid_to_json(const GridDef& g) {
  return {{"t_start", g.t_start}, {"t_end", g.t_end}, {"n_points", g.n_points}};
}

inline GridDef grid_from_json(const json& j) {
  return {j.at("t_start").get<double>(), j.at("t_end").get<double>(),
          j.at("n_points").get<int>()};
}

inline json ranges_to_json(const CorpusRanges& r) {
  return {{"t2", {r.t2_min, r.t2_max}},
          {"f_base", {r.f_min, r.f_max}},
          {"pl_low", {r.pl_low_min, r.pl_low_max}}};
}

inline CorpusRanges ranges_from_json(const json& j) {
  CorpusRanges r;
  r.t2_min = j.at("t2")[0].get<double>();
  r.t2_max = j.at("t2")[1].get<double>();
  r.f_min = j.at("f_base")[0].get<double>();
  r.f_max = j.at("f_base")[1].get<double>();
  r.pl_low_min = j.at("pl_low")[0].get<double>();
  r.pl_low_max = j.at("pl_low")[1].get<double>();
  return r;
}

inline json lattice_to_json(const lattice::LatticeSpec& s) {
  return {{"a", s.a},         {"n_super", s.n_super}, {"p13", s.p13},
          {"dopant_cap", s.dopant_cap}, {"r_cut", s.r_cut},  {"alpha", s.alpha}};
}

inline lattice::LatticeSpec lattice_from_json(const json& j) {
  lattice::LatticeSpec s;
  s.a = j.at("a").get<double>();
  s.n_super = j.at("n_super").get<int>();
  s.p13 = j.at("p13").get<double>();
  s.dopant_cap = j.at("dopant_cap").get<int>();
  s.r_cut = j.at("r_cut").get<double>();
  s.alpha = j.at("alpha").get<double>();
  return s;
}

inline json noise_to_json(const noise::NoiseModel& m) {
  return {{"b0", m.b0},
          {"b1", m.b1},
          {"b2", m.b2},
          {"sigma_dc", m.sigma_dc},
          {"sigma_floor", m.sigma_floor}};
}

inline noise::NoiseModel noise_from_json(const json& j) {
  noise::NoiseModel m;
  m.b0 = j.at("b0").get<double>();
  m.b1 = j.at("b1").get<double>();
  m.b2 = j.at("b2").get<double>();
  m.sigma_dc = j.at("sigma_dc").get<double>();
  m.sigma_floor = j.at("sigma_floor").get<double>();
  return m;
}

inline json bath_to_json(const BathRecord& b) {
  json spins = json::array();
  for (const auto& s : b.spins)
    spins.push_back({{"pos", {s.position.x(), s.position.y(), s.position.z()}},
                     {"a_par", s.a_par}});
  return {{"id", b.config_id},
          {"vacancy", {b.nv.vacancy.x(), b.nv.vacancy.y(), b.nv.vacancy.z()}},
          {"nitrogen", {b.nv.nitrogen.x(), b.nv.nitrogen.y(), b.nv.nitrogen.z()}},
          {"axis", {b.nv.axis.x(), b.nv.axis.y(), b.nv.axis.z()}},
          {"spins", std::move(spins)}};
}

inline BathRecord bath_from_json(const json& j) {
  BathRecord b;
  b.config_id = j.at("id").get<int>();
  auto vec3 = [](const json& a) {
    return Eigen::Vector3d{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  };
  b.nv.vacancy = vec3(j.at("vacancy"));
  b.nv.nitrogen = vec3(j.at("nitrogen"));
  b.nv.axis = vec3(j.at("axis"));
  for (const auto& s : j.at("spins"))
    b.spins.push_back({vec3(s.at("pos")), s.at("a_par").get<double>()});
  return b;
}

inline void save_manifest(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << j.dump(1) << '\n';
}

inline json load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  json j;
  is >> j;
  return j;
}

inline std::filesystem::path sibling(const std::filesystem::path& manifest,
                                     const std::string& name) {
  return manifest.parent_path() / name;
}

// ---------------------------------------------------------------------------
// generic trace sets (simulate / reconstruct / synth / resample outputs)

struct TraceSet {
  GridDef grid;
  std::vector<ramsey::Trace> traces;
  std::vector<std::vector<double>> uncert;  // optional, one row per trace
};

inline std::vector<double> grid_times(const GridDef& g) {
  std::vector<double> t(static_cast<std::size_t>(g.n_points));
  const double dt = (g.t_end - g.t_start) / static_cast<double>(g.n_points - 1);
  for (int k = 0; k < g.n_points; ++k) t[static_cast<std::size_t>(k)] = g.t_start + dt * k;
  return t;
}

inline void write_trace_set(const std::filesystem::path& base, const TraceSet& set,
                            json extra = json::object()) {
  const std::string stem = base.filename().string();
  json j = {{"kind", "traces"},
            {"version", kManifestVersion},
            {"n_traces", set.traces.size()},
            {"grid", grid_to_json(set.grid)},
            {"files", {{"traces", stem + ".traces"}}}};
  std::ofstream tf = io::open_out(base.string() + ".traces");
  for (const auto& t : set.traces) io::append_f32_row(tf, t.values);
  if (!set.uncert.empty()) {
    j["files"]["uncert"] = stem + ".uncert";
    std::ofstream uf = io::open_out(base.string() + ".uncert");
    for (const auto& u : set.uncert) io::append_f32_row(uf, u);
  }
  for (auto& [key, value] : extra.items()) j[key] = value;
  save_manifest(base.string() + ".manifest", j);
}

inline TraceSet read_trace_set(const std::filesystem::path& manifest_path) {
  const json j = load_manifest(manifest_path);
  TraceSet set;
  set.grid = grid_from_json(j.at("grid"));
  const auto times = grid_times(set.grid);
  const auto rows = io::read_f32_rows(
      sibling(manifest_path, j.at("files").at("traces").get<std::string>()),
      static_cast<std::size_t>(set.grid.n_points));
  if (j.contains("n_traces") && rows.size() != j.at("n_traces").get<std::size_t>())
    throw std::runtime_error("trace block size disagrees with the manifest count");
  set.traces.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    set.traces[i] = {rows[i], times};
  if (j.at("files").contains("uncert")) {
    set.uncert = io::read_f32_rows(
        sibling(manifest_path, j.at("files").at("uncert").get<std::string>()),
        static_cast<std::size_t>(set.grid.n_points));
    if (set.uncert.size() != set.traces.size())
      throw std::runtime_error("uncertainty block size disagrees with the manifest count");
  }
  return set;
}

// ---------------------------------------------------------------------------
// sweep records (raw photon-count ingestion)

struct SweepSet {
  GridDef grid;
  double count_scale = 1.0;  // kcounts-to-counts multiplier applied on ingest
  std::vector<sweeps::SweepRecord> records;
};

inline void write_sweeps(const std::filesystem::path& base, const SweepSet& set) {
  const std::string stem = base.filename().string();
  json j = {{"kind", "sweeps"},
            {"version", kManifestVersion},
            {"n_sweeps", set.records.size()},
            {"grid", grid_to_json(set.grid)},
            {"count_scale", set.count_scale},
            {"files",
             {{"s_counts", stem + ".scounts"}, {"n_counts", stem + ".ncounts"}}}};
  std::ofstream sf = io::open_out(base.string() + ".scounts");
  std::ofstream nf = io::open_out(base.string() + ".ncounts");
  const bool have_pl =
      std::all_of(set.records.begin(), set.records.end(),
                  [](const sweeps::SweepRecord& r) { return !r.pl.empty(); });
  std::ofstream pf;
  if (have_pl) {
    j["files"]["pl"] = stem + ".plchan";
    pf = io::open_out(base.string() + ".plchan");
  }
  for (const auto& rec : set.records) {
    for (double v : rec.s_counts)
      io::put_u32(sf, static_cast<std::uint32_t>(std::llround(v)));
    for (double v : rec.n_counts)
      io::put_u32(nf, static_cast<std::uint32_t>(std::llround(v)));
    if (have_pl) io::append_f32_row(pf, rec.pl);
  }
  save_manifest(base.string() + ".manifest", j);
}

inline SweepSet read_sweeps(const std::filesystem::path& manifest_path) {
  const json j = load_manifest(manifest_path);
  SweepSet set;
  set.grid = grid_from_json(j.at("grid"));
  set.count_scale = j.value("count_scale", 1.0);
  const std::size_t n_pts = static_cast<std::size_t>(set.grid.n_points);
  const std::size_t n_sweeps = j.at("n_sweeps").get<std::size_t>();

  auto read_counts = [&](const std::string& name) {
    const auto path = sibling(manifest_path, name);
    if (std::filesystem::file_size(path) != n_sweeps * n_pts * 4)
      throw std::runtime_error("count block size disagrees with the manifest: " +
                               path.string());
    std::ifstream is = io::open_in(path);
    std::vector<std::vector<double>> rows(n_sweeps);
    for (auto& row : rows) {
      row.resize(n_pts);
      for (auto& v : row)
        v = static_cast<double>(io::get_u32(is)) * set.count_scale;
    }
    return rows;
  };
  const auto s_rows = read_counts(j.at("files").at("s_counts").get<std::string>());
  const auto n_rows = read_counts(j.at("files").at("n_counts").get<std::string>());
  std::vector<std::vector<double>> pl_rows;
  if (j.at("files").contains("pl"))
    pl_rows = io::read_f32_rows(
        sibling(manifest_path, j.at("files").at("pl").get<std::string>()), n_pts);

  set.records.resize(n_sweeps);
  for (std::size_t i = 0; i < n_sweeps; ++i) {
    set.records[i].s_counts = s_rows[i];
    set.records[i].n_counts = n_rows[i];
    if (!pl_rows.empty()) set.records[i].pl = pl_rows[i];
    set.records[i].sweep_id = static_cast<std::int64_t>(i);
  }
  return set;
}

// ---------------------------------------------------------------------------
// corpus generation

struct CorpusParams {
  std::size_t n_configs = 1;
  std::size_t traces_per_config = 1;
  CorpusRanges ranges;
  lattice::LatticeSpec lattice_spec;
  GridDef grid;
  double pl_high = 100.0;
  noise::NoiseModel noise_model;
  bool noise_on = true;
  std::uint64_t seed = 0;
  int threads = 1;  // 0 = hardware concurrency

  void validate() const {
    if (n_configs < 1 || traces_per_config < 1)
      throw std::invalid_argument("corpus must contain at least one trace");
    ranges.validate();
    lattice_spec.validate();
    noise_model.validate();
    if (grid.n_points != ramsey::kTracePoints)
      throw std::invalid_argument("trace length is fixed at 200 points");
    if (!(grid.t_end > grid.t_start && grid.t_start >= 0.0))
      throw std::invalid_argument("need t_end > t_start >= 0");
  }
};

struct CorpusResult {
  std::vector<BathRecord> configs;
  std::size_t n_traces = 0;
};

namespace detail {

inline LabelRecord make_label(const lattice::NuclearBath& bath, double t2,
                              double pl_low, double f_base) {
  LabelRecord rec;
  rec.t2_star = static_cast<float>(t2);
  rec.pl_low = static_cast<float>(pl_low);
  rec.f_base = static_cast<float>(f_base);
  rec.n_c13 = static_cast<std::int32_t>(bath.spins.size());
  std::vector<double> c;
  c.reserve(bath.spins.size());
  for (const auto& s : bath.spins) c.push_back(s.a_par);
  std::stable_sort(c.begin(), c.end(),
                   [](double a, double b) { return std::abs(a) > std::abs(b); });
  for (std::size_t i = 0; i < c.size() && i < kLabelSlots; ++i) {
    rec.couplings[i] = static_cast<float>(c[i]);
    rec.mask[i] = 1;
  }
  return rec;
}

// One configuration's full payload, deterministic in (params, config index).
struct ConfigBlock {
  BathRecord bath;
  std::vector<std::vector<double>> clean;
  std::vector<std::vector<double>> noisy;
  std::vector<LabelRecord> labels;
};

inline ConfigBlock build_config(const CorpusParams& p,
                                const std::vector<lattice::Site>& eligible,
                                const lattice::NVFrame& nv, std::size_t config) {
  Rng rng = stream_rng(p.seed, config);
  lattice::NuclearBath bath = lattice::dope_and_cut(eligible, p.lattice_spec, rng);
  // the estimator supports at most 9 bath spins; larger realizations are
  // redrawn from the same stream (probability ~1e-6 at natural abundance)
  while (bath.spins.size() > static_cast<std::size_t>(ramsey::kMaxBathSpins))
    bath = lattice::dope_and_cut(eligible, p.lattice_spec, rng);
  bath.nv = nv;

  ramsey::HyperfineSet hf;
  for (const auto& s : bath.spins) hf.couplings.push_back(s.a_par);

  ConfigBlock block;
  block.bath = {static_cast<int>(config), nv, bath.spins};
  block.clean.reserve(p.traces_per_config);
  block.labels.reserve(p.traces_per_config);
  if (p.noise_on) block.noisy.reserve(p.traces_per_config);

  ramsey::RamseyConfig cfg;
  cfg.t_start = p.grid.t_start;
  cfg.t_end = p.grid.t_end;
  cfg.pl_high = p.pl_high;
  for (std::size_t t = 0; t < p.traces_per_config; ++t) {
    cfg.t2_star = rng.uniform(p.ranges.t2_min, p.ranges.t2_max);
    cfg.f_base = rng.uniform(p.ranges.f_min, p.ranges.f_max);
    cfg.pl_low = rng.uniform(p.ranges.pl_low_min, p.ranges.pl_low_max);
    ramsey::Trace clean = ramsey::to_pl(ramsey::ensemble_signal(cfg, hf), cfg);
    block.labels.push_back(make_label(bath, cfg.t2_star, cfg.pl_low, cfg.f_base));
    if (p.noise_on)
      block.noisy.push_back(noise::synthesize(clean, p.noise_model, rng).values);
    block.clean.push_back(std::move(clean.values));
  }
  return block;
}

}  // namespace detail

// Streaming generation: configurations are processed in fixed-size batches,
// workers fill per-configuration buffers, and a single writer appends them
// in configuration order. Output bytes depend only on (params, seed).
inline CorpusResult generate_corpus(const CorpusParams& params,
                                    const std::filesystem::path& base) {
  params.validate();
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads =
      params.threads == 0 ? hw : static_cast<std::size_t>(params.threads);

  auto [nv, shifted] = lattice::place_nv(lattice::enumerate_supercell(params.lattice_spec));
  const auto eligible = lattice::eligible_sites(shifted, params.lattice_spec);

  std::ofstream clean_f = io::open_out(base.string() + ".traces");
  std::ofstream label_f = io::open_out(base.string() + ".labels");
  std::ofstream noisy_f;
  if (params.noise_on) noisy_f = io::open_out(base.string() + ".noisy");

  CorpusResult result;
  result.configs.reserve(params.n_configs);

  const std::size_t batch = std::max<std::size_t>(n_threads * 4, 8);
  std::vector<detail::ConfigBlock> blocks;
  for (std::size_t start = 0; start < params.n_configs; start += batch) {
    const std::size_t stop = std::min(start + batch, params.n_configs);
    blocks.assign(stop - start, {});
    auto work = [&](std::size_t tid) {
      for (std::size_t c = start + tid; c < stop; c += n_threads)
        blocks[c - start] = detail::build_config(params, eligible, nv, c);
    };
    if (n_threads <= 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    for (auto& block : blocks) {
      for (const auto& row : block.clean) io::append_f32_row(clean_f, row);
      for (const auto& row : block.noisy) io::append_f32_row(noisy_f, row);
      for (const auto& rec : block.labels) write_label(label_f, rec);
      result.n_traces += block.clean.size();
      result.configs.push_back(std::move(block.bath));
    }
  }

  const std::string stem = base.filename().string();
  json j = {{"kind", "corpus"},
            {"version", kManifestVersion},
            {"seed", params.seed},
            {"n_configs", params.n_configs},
            {"traces_per_config", params.traces_per_config},
            {"n_traces", result.n_traces},
            {"noise_on", params.noise_on},
            {"grid", grid_to_json(params.grid)},
            {"pl_high", params.pl_high},
            {"ranges", ranges_to_json(params.ranges)},
            {"lattice", lattice_to_json(params.lattice_spec)},
            {"noise_model", noise_to_json(params.noise_model)},
            {"files",
             {{"traces", stem + ".traces"}, {"labels", stem + ".labels"}}}};
  if (params.noise_on) j["files"]["noisy"] = stem + ".noisy";
  json configs = json::array();
  for (const auto& b : result.configs) configs.push_back(bath_to_json(b));
  j["configs"] = std::move(configs);
  save_manifest(base.string() + ".manifest", j);
  return result;
}

// Pure-noise control corpus: flat level plus the calibrated noise model,
// with a shot-noise-style uncertainty channel u(t) = sqrt(x(t)).
inline void generate_pure_noise(std::size_t n_traces, double level_lo,
                                double level_hi, std::uint64_t seed,
                                const noise::NoiseModel& model, const GridDef& grid,
                                const std::filesystem::path& base) {
  if (n_traces < 1) throw std::invalid_argument("need at least one trace");
  if (!(level_lo > 0.0 && level_hi >= level_lo))
    throw std::invalid_argument("level range must be positive");
  model.validate();

  std::ofstream tf = io::open_out(base.string() + ".traces");
  std::ofstream uf = io::open_out(base.string() + ".uncert");
  const std::size_t n_pts = static_cast<std::size_t>(grid.n_points);
  std::vector<double> x(n_pts), u(n_pts);
  for (std::size_t i = 0; i < n_traces; ++i) {
    Rng rng = stream_rng(seed, i);
    const double level = rng.uniform(level_lo, level_hi);
    const double delta = rng.normal(0.0, model.sigma_dc);
    const double sig = noise::sigma_of_y(model, level);
    for (std::size_t k = 0; k < n_pts; ++k) {
      // quantize to storage precision first so u = sqrt(x) holds exactly
      // for the values a consumer reads back
      x[k] = static_cast<double>(static_cast<float>(
          std::max(level + delta + rng.normal(0.0, sig), 0.0)));
      u[k] = std::sqrt(x[k]);
    }
    io::append_f32_row(tf, x);
    io::append_f32_row(uf, u);
  }

  const std::string stem = base.filename().string();
  const json j = {{"kind", "noise-corpus"},
                  {"version", kManifestVersion},
                  {"seed", seed},
                  {"n_traces", n_traces},
                  {"level_range", {level_lo, level_hi}},
                  {"grid", grid_to_json(grid)},
                  {"noise_model", noise_to_json(model)},
                  {"files",
                   {{"traces", stem + ".traces"}, {"uncert", stem + ".uncert"}}}};
  save_manifest(base.string() + ".manifest", j);
}

// Train/validation assignment at configuration granularity: 0 = train,
// 1 = validation. No configuration lands on both sides.
inline std::vector<int> split(std::size_t n_configs, double fraction,
                              std::uint64_t seed) {
  if (n_configs < 2)
    throw std::invalid_argument("splitting needs at least two configurations");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n_configs);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = stream_rng(seed, 0x51e7a55ull);
  for (std::size_t i = n_configs - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n_configs)));
  n_train = std::clamp<std::size_t>(n_train, 1, n_configs - 1);
  std::vector<int> assignment(n_configs, 1);
  for (std::size_t i = 0; i < n_train; ++i) assignment[order[i]] = 0;
  return assignment;
}

// Convenience overload operating on a corpus manifest file in place.
inline std::vector<int> split(const std::filesystem::path& manifest_path,
                              double fraction) {
  json j = load_manifest(manifest_path);
  const auto assignment = split(j.at("n_configs").get<std::size_t>(), fraction,
                                j.at("seed").get<std::uint64_t>());
  j["split"] = assignment;
  j["split_fraction"] = fraction;
  save_manifest(manifest_path, j);
  return assignment;
}

}  // namespace nvr::dataset
