#pragma once

#include <string>
#include <vector>

#include "qst/classify.hpp"
#include "qst/reconstruct.hpp"

// Dataset pipelines, integrity manifests, and the benchmark harness that
// reproduces the reconstruction experiments as CSV/PGM report directories.

namespace qst {

std::string sha256_bytes(const void* data, std::size_t len);
std::string sha256_file(const std::string& path);

struct ManifestEntry {
  StateSpec spec;
  std::vector<NoiseSpec> noises;
  int label = 0;
  std::string file;
  std::string sha256;
};

struct Manifest {
  std::string grid_json;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::string to_json() const;
  static Manifest from_json(const std::string& text);
  void save(const std::string& path) const;
  static Manifest load(const std::string& path);
};

/// Schema-checked JSON configuration: unknown keys are rejected so typos
/// fail loudly instead of silently using defaults.
class RunConfig {
 public:
  static RunConfig parse(const std::string& json_text,
                         const std::vector<std::string>& allowed_keys);
  static RunConfig load(const std::string& path,
                        const std::vector<std::string>& allowed_keys);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<std::string> strings(const std::string& key) const;
  std::string raw(const std::string& key) const;  // sub-object as JSON text

 private:
  std::string text_;
};

struct GenerateConfig {
  std::vector<StateFamily> classes;
  int per_class = 10;
  int cutoff = 32;
  int grid_nx = 32, grid_ny = 32;
  double extent = 5.0;
  double mix_sigma_max = 0.5;
  double mix_density = 0.8;
  std::uint64_t seed = 1;

  static GenerateConfig from_run_config(const RunConfig& rc);
};

// Writes one CSV per sample plus manifest.json into out_dir; byte-identical
// rerun for a fixed seed.
Manifest generate_dataset(const GenerateConfig& cfg,
                          const std::string& out_dir);

// Loads the samples a manifest points at (paths relative to its directory).
std::vector<LabeledSample> load_dataset(const std::string& manifest_path);

enum class Scenario {
  LossCompare,
  AdditiveNoise,
  ConvNoise,
  MixedRank,
  DataReduction,
};
Scenario scenario_from_name(const std::string& name);

struct BenchmarkOptions {
  int seeds = 3;
  int max_iters = 3000;
  int imle_iters = 20000;
  int cutoff = 16;        // MixedRank and DataReduction use 20
  std::uint64_t seed = 1;
};

// Runs one reconstruction scenario and writes fidelity-trace CSVs, a
// summary JSON (mean and standard deviation per method) and PGM heatmaps
// into out_dir. A fit whose trace file already exists is not recomputed,
// so interrupted runs resume at the fit boundary.
void run_benchmark(Scenario scenario, const BenchmarkOptions& opts,
                   const std::string& out_dir);

}  // namespace qst
