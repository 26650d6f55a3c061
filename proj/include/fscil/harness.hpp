#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fscil/protocol.hpp"

namespace fscil {

// One named run variant: an ablation mode plus its amplification settings.
struct RunVariant {
  std::string label;
  Mode mode = Mode::tri_we;
  AmplifyConfig amplify;
};

struct ExperimentConfig {
  std::optional<SyntheticSpec> spec;       // exactly one of spec / dataset_path
  std::optional<std::string> dataset_path;
  ExtractorConfig model;                   // input dims come from the benchmark
  std::vector<RunVariant> runs;
  LossWeights weights;
  AlphaPolicy alpha;
  AmplifyConfig amplify;                   // default for runs without overrides
  double lr_fast = 0.1;
  double lr_slow = 0.001;
  double momentum = 0.9;
  double cosine_scale = 16.0;
  BaseTrainConfig base;
  std::size_t incr_epochs = 20;
  std::vector<std::uint64_t> seeds{1};
  std::string out_dir = "out";
  bool save_snapshots = false;

  nlohmann::json resolved;  // every field explicit; embedded into reports
};

// Parses and validates a config; unknown keys and invalid values raise
// ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

SyntheticSpec parse_synthetic_spec(const nlohmann::json& j, const std::string& where);
nlohmann::json spec_to_json(const SyntheticSpec& spec);

struct ExperimentResult {
  std::vector<std::string> report_paths;  // one JSON report per seed
  std::string csv_path;                   // aggregate CSV
  std::string benchmark_hash;
};

// Runs every (variant, seed) pair. The base session is trained once per seed
// and shared across variants. Seeds run in parallel up to FSCIL_THREADS
// workers; outputs are assembled in seed order so results do not depend on
// scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct CompareSummary {
  std::string text;
  std::map<std::string, double> mean_avg_acc;  // label -> mean over seeds
  std::optional<double> triwe_naive_margin;    // mean(tri-we) - mean(naive)
  std::optional<bool> triwe_beats_naive;
  std::optional<bool> amplified_ge_plain;      // cutmix tri-we vs no-amplification tri-we
};

// Compares reports produced on the same benchmark (hashes must match) and
// summarizes per-seed and mean orderings of the run variants.
CompareSummary compare_reports(const std::vector<std::string>& report_paths);

}  // namespace fscil
