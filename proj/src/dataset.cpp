#include "qst/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "qst/kernels.hpp"

namespace qst {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Integrity digests
// ---------------------------------------------------------------------------

std::string sha256_bytes(const void* data, std::size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  require(EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr) == 1,
          ErrorCode::NumericalFailure, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * digest_len);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return sha256_bytes(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string Manifest::to_json() const {
  nlohmann::json j;
  j["grid"] = nlohmann::json::parse(grid_json);
  j["seed"] = seed;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json je;
    je["spec"] = nlohmann::json::parse(e.spec.to_json());
    nlohmann::json noises = nlohmann::json::array();
    for (const auto& n : e.noises) noises.push_back(nlohmann::json::parse(n.to_json()));
    je["noises"] = noises;
    je["label"] = e.label;
    je["file"] = e.file;
    je["sha256"] = e.sha256;
    list.push_back(je);
  }
  j["entries"] = list;
  return j.dump(2);
}

Manifest Manifest::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad manifest JSON: ") + e.what());
  }
  Manifest m;
  m.grid_json = j.at("grid").dump();
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.spec = StateSpec::from_json(je.at("spec").dump());
    for (const auto& jn : je.value("noises", nlohmann::json::array()))
      e.noises.push_back(NoiseSpec::from_json(jn.dump()));
    e.label = je.at("label").get<int>();
    e.file = je.at("file").get<std::string>();
    e.sha256 = je.value("sha256", "");
    m.entries.push_back(std::move(e));
  }
  return m;
}

void Manifest::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << to_json() << '\n';
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

namespace {

nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::ConfigError, "bad " + what + ": " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::parse(const std::string& json_text,
                           const std::vector<std::string>& allowed_keys) {
  const auto j = parse_json(json_text, "config JSON");
  require(j.is_object(), ErrorCode::ConfigError, "config must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool known = false;
    for (const auto& k : allowed_keys) known |= k == key;
    require(known, ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }
  RunConfig rc;
  rc.text_ = j.dump();
  return rc;
}

RunConfig RunConfig::load(const std::string& path,
                          const std::vector<std::string>& allowed_keys) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::ConfigError, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), allowed_keys);
}

bool RunConfig::has(const std::string& key) const {
  return parse_json(text_, "config").contains(key);
}

double RunConfig::number(const std::string& key, double fallback) const {
  const auto j = parse_json(text_, "config");
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int RunConfig::integer(const std::string& key, int fallback) const {
  const auto j = parse_json(text_, "config");
  return j.contains(key) ? j.at(key).get<int>() : fallback;
}

std::uint64_t RunConfig::seed(const std::string& key,
                              std::uint64_t fallback) const {
  const auto j = parse_json(text_, "config");
  return j.contains(key) ? j.at(key).get<std::uint64_t>() : fallback;
}

std::string RunConfig::text(const std::string& key,
                            const std::string& fallback) const {
  const auto j = parse_json(text_, "config");
  return j.contains(key) ? j.at(key).get<std::string>() : fallback;
}

std::vector<std::string> RunConfig::strings(const std::string& key) const {
  const auto j = parse_json(text_, "config");
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  return out;
}

std::string RunConfig::raw(const std::string& key) const {
  const auto j = parse_json(text_, "config");
  require(j.contains(key), ErrorCode::ConfigError, "missing key '" + key + "'");
  return j.at(key).dump();
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

GenerateConfig GenerateConfig::from_run_config(const RunConfig& rc) {
  GenerateConfig cfg;
  for (const auto& name : rc.strings("classes"))
    cfg.classes.push_back(family_from_name(name));
  require(!cfg.classes.empty(), ErrorCode::ConfigError,
          "config needs a non-empty 'classes' list");
  cfg.per_class = rc.integer("per_class", cfg.per_class);
  cfg.cutoff = rc.integer("cutoff", cfg.cutoff);
  cfg.grid_nx = rc.integer("grid_nx", cfg.grid_nx);
  cfg.grid_ny = rc.integer("grid_ny", cfg.grid_ny);
  cfg.extent = rc.number("extent", cfg.extent);
  cfg.mix_sigma_max = rc.number("mix_sigma_max", cfg.mix_sigma_max);
  cfg.mix_density = rc.number("mix_density", cfg.mix_density);
  cfg.seed = rc.seed("seed", cfg.seed);
  require(cfg.per_class > 0, ErrorCode::ConfigError, "per_class must be > 0");
  require(cfg.mix_sigma_max >= 0.0 && cfg.mix_sigma_max <= 0.5,
          ErrorCode::ConfigError, "mix_sigma_max must be in [0, 0.5]");
  return cfg;
}

Manifest generate_dataset(const GenerateConfig& cfg,
                          const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto grid =
      make_square_grid(-cfg.extent, cfg.extent, cfg.grid_nx, cfg.grid_ny);

  ClassDatasetConfig dc;
  dc.classes = cfg.classes;
  dc.per_class = cfg.per_class;
  dc.cutoff = cfg.cutoff;
  dc.grid_nx = cfg.grid_nx;
  dc.grid_ny = cfg.grid_ny;
  dc.extent = cfg.extent;
  dc.mix_sigma_max = cfg.mix_sigma_max;
  dc.mix_density = cfg.mix_density;

  // Rebuild the sampling stream exactly as make_class_dataset does so the
  // manifest can record every noise seed.
  Rng master(cfg.seed);
  std::vector<ManifestEntry> entries;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    for (int i = 0; i < cfg.per_class; ++i) {
      ManifestEntry e;
      e.spec = sample_state_spec(cfg.classes[c], cfg.cutoff, master);
      NoiseSpec mix;
      mix.kind = NoiseKind::MixRandom;
      mix.sigma = master.uniform(0.0, cfg.mix_sigma_max);
      mix.density = cfg.mix_density;
      mix.seed = master.next_u64();
      e.noises.push_back(mix);
      e.label = static_cast<int>(c);
      e.file = family_name(cfg.classes[c]) + "_" + std::to_string(i) + ".csv";
      entries.push_back(std::move(e));
    }
  }

  kernels::parallel_for(entries.size(), [&](std::size_t i) {
    auto& e = entries[i];
    DensityMatrix rho = e.spec.build();
    if (e.noises[0].sigma > 0.0)
      rho = mix_random(rho, e.noises[0].sigma, e.noises[0].density,
                       e.noises[0].seed);
    const DataVector q = normalize_unit_max(husimi(rho, grid));
    write_csv((fs::path(out_dir) / e.file).string(), grid, q);
  });
  for (auto& e : entries)
    e.sha256 = sha256_file((fs::path(out_dir) / e.file).string());

  Manifest manifest;
  manifest.grid_json = grid.to_json();
  manifest.seed = cfg.seed;
  manifest.entries = std::move(entries);
  manifest.save((fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

std::vector<LabeledSample> load_dataset(const std::string& manifest_path) {
  const Manifest manifest = Manifest::load(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  const PhaseGrid grid = PhaseGrid::from_json(manifest.grid_json);
  require(grid.layout == PhaseGrid::Layout::Square, ErrorCode::ConfigError,
          "classification datasets need square grids");
  std::vector<LabeledSample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    const auto gd = read_csv((dir / e.file).string());
    require(gd.data.size() == grid.size(), ErrorCode::IoError,
            "sample size mismatch in " + e.file);
    LabeledSample s;
    s.image = gd.data.values;
    s.h = grid.ny;
    s.w = grid.nx;
    s.label = e.label;
    s.spec = e.spec;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

Scenario scenario_from_name(const std::string& name) {
  if (name == "loss-compare") return Scenario::LossCompare;
  if (name == "additive-noise") return Scenario::AdditiveNoise;
  if (name == "conv-noise") return Scenario::ConvNoise;
  if (name == "mixed-rank") return Scenario::MixedRank;
  if (name == "data-reduction") return Scenario::DataReduction;
  fail(ErrorCode::ConfigError, "unknown scenario '" + name + "'");
}

namespace {

// rank-r mixture of Fig.-11 form: 0.8 cat + (0.2/(r-1)) sum fock(n)
DensityMatrix cat_fock_mixture(int rank, int cutoff) {
  const auto cat = make_cat(cxd(2.0, 0.0), 0, 0, cutoff);
  if (rank <= 1) return cat;
  CMatrix m = 0.8 * cat.matrix();
  for (int n = 0; n <= rank - 2; ++n)
    m += 0.2 / (rank - 1) * make_fock(n, cutoff).matrix();
  return DensityMatrix::trusted(std::move(m));
}

void write_trace_csv(const std::string& path, const FitReport& report) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot open " + path);
  out << "iteration,fidelity,loss\n";
  const std::size_t n =
      std::max(report.fidelity_trace.size(), report.loss_trace.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << (i + 1) << ',';
    out << (i < report.fidelity_trace.size()
                ? format_double(report.fidelity_trace[i])
                : std::string())
        << ',';
    out << (i < report.loss_trace.size() ? format_double(report.loss_trace[i])
                                         : std::string())
        << '\n';
  }
}

struct MethodStats {
  std::vector<double> finals;
  nlohmann::json summary() const {
    double mean = 0.0;
    for (double v : finals) mean += v;
    mean /= finals.empty() ? 1 : finals.size();
    double var = 0.0;
    for (double v : finals) var += (v - mean) * (v - mean);
    if (finals.size() > 1) var /= finals.size() - 1;
    nlohmann::json j;
    j["mean_fidelity"] = mean;
    j["std_fidelity"] = std::sqrt(var);
    j["finals"] = finals;
    return j;
  }
};

// Runs one fit unless its trace file already exists (fit-level resume).
template <typename Fit>
double run_or_resume(const std::string& trace_path, const Fit& fit) {
  if (fs::exists(trace_path)) {
    const auto gd = [&] {
      std::ifstream in(trace_path);
      std::string line;
      std::getline(in, line);  // header
      double last = 0.0;
      while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) continue;
        const std::string f = line.substr(c1 + 1, c2 - c1 - 1);
        if (!f.empty()) last = parse_double(f);
      }
      return last;
    }();
    return gd;
  }
  const FitReport report = fit();
  write_trace_csv(trace_path, report);
  return report.fidelity_trace.empty() ? 0.0 : report.fidelity_trace.back();
}

}  // namespace

void run_benchmark(Scenario scenario, const BenchmarkOptions& opts,
                   const std::string& out_dir) {
  fs::create_directories(out_dir);
  nlohmann::json summary;
  std::map<std::string, MethodStats> stats;

  auto trace_path = [&](const std::string& method, int seed,
                        const std::string& tag = "") {
    return (fs::path(out_dir) /
            (method + (tag.empty() ? "" : "_" + tag) + "_seed" +
             std::to_string(seed) + ".csv"))
        .string();
  };

  switch (scenario) {
    case Scenario::LossCompare: {
      const int cutoff = opts.cutoff;
      const auto truth = make_binomial(2, 4, 0, cutoff);
      auto ops = std::make_shared<MeasurementSet>(build_operators(
          make_square_grid(-5, 5, 16, 16), MeasurementKind::HusimiProjector,
          cutoff));
      const auto problem = make_problem(truth, ops);
      write_pgm((fs::path(out_dir) / "data.pgm").string(), ops->grid,
                problem.data);
      for (int s = 0; s < opts.seeds; ++s) {
        const std::uint64_t seed = opts.seed + s;
        for (FitLoss loss : {FitLoss::L1, FitLoss::L2, FitLoss::CrossEntropy,
                             FitLoss::KL}) {
          const std::string method = "cholesky_" + fit_loss_name(loss);
          stats[method].finals.push_back(
              run_or_resume(trace_path(method, s), [&] {
                return cholesky_fit(problem, loss, opts.max_iters,
                                    cholesky_default_adam(), seed, truth);
              }));
        }
        CganConfig cgan;
        cgan.seed = seed;
        stats["cgan_l1_1"].finals.push_back(
            run_or_resume(trace_path("cgan_l1_1", s), [&] {
              return qst_cgan_fit(problem, cgan, opts.max_iters, truth);
            }));
        stats["imle"].finals.push_back(
            run_or_resume(trace_path("imle", s), [&] {
              return imle(problem, opts.imle_iters, 1e-5, truth);
            }));
      }
      break;
    }
    case Scenario::AdditiveNoise: {
      const int cutoff = opts.cutoff;
      const auto truth = make_binomial(2, 4, 0, cutoff);
      auto ops = std::make_shared<MeasurementSet>(build_operators(
          make_square_grid(-5, 5, 16, 16), MeasurementKind::HusimiProjector,
          cutoff));
      const double sigma_g = 0.05;
      for (int s = 0; s < opts.seeds; ++s) {
        ReconstructionProblem problem = make_problem(truth, ops);
        problem.data =
            additive_gaussian(problem.data, sigma_g, opts.seed + 1000 + s);
        problem.known_noise_sigma = sigma_g;
        if (s == 0)
          write_pgm((fs::path(out_dir) / "noisy_data.pgm").string(), ops->grid,
                    problem.data);
        for (FitLoss loss : {FitLoss::L2, FitLoss::CrossEntropy}) {
          const std::string method = "cholesky_" + fit_loss_name(loss);
          stats[method].finals.push_back(
              run_or_resume(trace_path(method, s), [&] {
                return cholesky_fit(problem, loss, opts.max_iters,
                                    cholesky_default_adam(), opts.seed + s,
                                    truth);
              }));
        }
        CganConfig cgan;
        cgan.seed = opts.seed + s;
        stats["cgan_l1_1"].finals.push_back(
            run_or_resume(trace_path("cgan_l1_1", s), [&] {
              return qst_cgan_fit(problem, cgan, opts.max_iters, truth);
            }));
      }
      break;
    }
    case Scenario::ConvNoise: {
      const int cutoff = opts.cutoff;
      const double n_th = 5.0;
      auto ops = std::make_shared<MeasurementSet>(build_operators(
          make_square_grid(-5, 5, 41, 41), MeasurementKind::HusimiProjector,
          cutoff));
      for (int which = 0; which < 2; ++which) {
        const auto truth =
            which == 0 ? make_fock(1, cutoff) : make_binomial(2, 4, 0, cutoff);
        const std::string tag = which == 0 ? "fock1" : "binomial";
        DataVector raw;
        raw.values = ops->expect_all(truth);
        ReconstructionProblem problem;
        problem.ops = ops;
        problem.cutoff = cutoff;
        problem.data =
            normalize_unit_max(gaussian_convolve(raw, ops->grid, n_th));
        problem.known_conv_nth = n_th;
        write_pgm((fs::path(out_dir) / ("conv_data_" + tag + ".pgm")).string(),
                  ops->grid, problem.data);
        for (int s = 0; s < opts.seeds; ++s) {
          CganConfig cgan;
          cgan.lambda_l1 = 10.0;
          cgan.seed = opts.seed + s;
          stats["cgan_l1_10_" + tag].finals.push_back(
              run_or_resume(trace_path("cgan_l1_10", s, tag), [&] {
                return qst_cgan_fit(problem, cgan, opts.max_iters, truth);
              }));
        }
      }
      break;
    }
    case Scenario::MixedRank: {
      const int cutoff = opts.cutoff > 16 ? opts.cutoff : 20;
      auto ops = std::make_shared<MeasurementSet>(build_operators(
          make_square_grid(-5, 5, 32, 32), MeasurementKind::HusimiProjector,
          cutoff));
      for (int rank = 1; rank <= 4; ++rank) {
        const auto truth = cat_fock_mixture(rank, cutoff);
        const auto problem = make_problem(truth, ops);
        const std::string tag = "rank" + std::to_string(rank);
        for (int s = 0; s < opts.seeds; ++s) {
          CganConfig cgan;
          cgan.seed = opts.seed + s;
          stats["cgan_" + tag].finals.push_back(
              run_or_resume(trace_path("cgan", s, tag), [&] {
                return qst_cgan_fit(problem, cgan, opts.max_iters, truth);
              }));
          stats["imle_" + tag].finals.push_back(
              run_or_resume(trace_path("imle", s, tag), [&] {
                return imle(problem, opts.imle_iters, 1e-5, truth);
              }));
        }
      }
      break;
    }
    case Scenario::DataReduction: {
      const int cutoff = opts.cutoff > 16 ? opts.cutoff : 20;
      const auto truth = cat_fock_mixture(2, cutoff);
      for (int points : {32, 64, 128, 256, 512, 1024}) {
        const std::string tag = "n" + std::to_string(points);
        for (int s = 0; s < opts.seeds; ++s) {
          auto ops = std::make_shared<MeasurementSet>(build_operators(
              sample_scatter(points, 5.0, opts.seed + 31 * s + points),
              MeasurementKind::HusimiProjector, cutoff));
          const auto problem = make_problem(truth, ops);
          CganConfig cgan;
          cgan.seed = opts.seed + s;
          stats["cgan_" + tag].finals.push_back(
              run_or_resume(trace_path("cgan", s, tag), [&] {
                return qst_cgan_fit(problem, cgan, opts.max_iters, truth);
              }));
          stats["imle_" + tag].finals.push_back(
              run_or_resume(trace_path("imle", s, tag), [&] {
                return imle(problem, opts.max_iters, 1e-5, truth);
              }));
        }
      }
      break;
    }
  }

  for (const auto& [method, st] : stats) summary[method] = st.summary();
  std::ofstream out((fs::path(out_dir) / "summary.json").string());
  require(out.good(), ErrorCode::IoError, "cannot write summary");
  out << summary.dump(2) << '\n';
}

}  // namespace qst
