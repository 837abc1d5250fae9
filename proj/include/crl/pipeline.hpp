#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "crl/corpus.hpp"
#include "crl/evaluator.hpp"
#include "crl/trainer.hpp"

#include <json.hpp>

namespace crl {

// Full synth -> pretrain -> gen-candidates -> finetune x3 -> evaluate ->
// report pipeline for one or more seeds. This is the engine behind the CLI
// subcommands and the acceptance experiment.
struct ExperimentConfig {
  SynthConfig synth;  // num_examples must equal train+valid+test
  int train_size = 1000;
  int valid_size = 200;
  int test_size = 200;

  int hidden_size = 48;
  int context_window = 64;

  int pretrain_epochs = 10;
  double pretrain_lr = 2e-3;
  int pretrain_batch = 8;

  BeamConfig candidate_beam;  // diverse search settings for training sets
  TrainConfig finetune;       // metric is overridden per system

  int eval_beam_width = 4;

  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

nlohmann::json experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);

// The three systems, always in this order.
inline constexpr std::array<MetricKind, 3> kSystemMetrics = {
    MetricKind::RougeMean, MetricKind::BartLike, MetricKind::DaeLike};

struct SeedOutcome {
  std::uint64_t seed = 0;
  EvalReport report;
  // Indexed like kSystemMetrics: R, B, D.
  std::array<double, 3> rouge_mean{};
  std::array<double, 3> bart{};
  std::array<double, 3> dae{};
  std::array<double, 3> hallucination{};
  std::array<int, 3> best_epoch{};
  bool diagonal_rouge = false;
  bool diagonal_bart = false;
  bool diagonal_dae = false;
  bool diagonal_all = false;
  std::filesystem::path report_text_path;
  std::filesystem::path report_csv_path;
};

struct ExperimentOutcome {
  std::vector<SeedOutcome> seeds;
  int full_diagonal_count = 0;
  // Mean over seeds per system (R, B, D order).
  std::array<double, 3> mean_hallucination{};
};

// Writes manifest.json (before any work), then per-seed run directories
// with corpus, checkpoints, candidate dumps, training logs, reports, and a
// summary.json. Byte-identical outputs on re-run with the same config.
ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir);

// Re-runs the pipeline recorded in an experiment manifest.
ExperimentOutcome replay_experiment(const std::filesystem::path& manifest_path,
                                    const std::filesystem::path& out_dir);

}  // namespace crl
