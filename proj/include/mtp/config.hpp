#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtp/network.hpp"
#include "mtp/perturb.hpp"
#include "mtp/tasks.hpp"
#include "mtp/training.hpp"

namespace mtp {

// Whole-experiment configuration. Defaults are the published parameter
// choices, so an empty JSON object reproduces the reference setup. Unknown
// keys anywhere in the file are errors.
struct ExperimentConfig {
  std::uint64_t master_seed = 20240101;

  // network
  int n = 350;
  std::vector<int> module_sizes{50, 150, 150};
  Connectivity connectivity = Connectivity::Disconnected;
  double g = 1.5;

  TrialTiming timing;
  TrainConfig train;
  // Readout-only training is a shallow, badly conditioned problem; the
  // per-step Adam movement at the full-network learning rate cannot reach a
  // good readout within the configured iteration budget, so the readout phase
  // gets its own (higher) learning rate.
  double readout_learning_rate = 1e-2;
  // End-to-end baselines plateau for hundreds of iterations before the
  // memory tasks' loss drops; they get a larger iteration budget with the
  // learning-rate decay at the midpoint.
  int baseline_iterations = 1000;
  NoiseConfig noise;

  std::vector<std::string> tasks;  // empty = all nine

  // perturbation sweep
  std::vector<PerturbKind> perturb_kinds{
      PerturbKind::LesionWeights, PerturbKind::SilenceUnits,
      PerturbKind::GlobalWeightNoise, PerturbKind::InputNoise};
  std::map<PerturbKind, std::vector<double>> perturb_strengths{
      {PerturbKind::LesionWeights, {0.0, 0.05, 0.1, 0.2, 0.5, 1.0}},
      {PerturbKind::SilenceUnits, {0.0, 0.05, 0.1, 0.2, 0.5, 1.0}},
      {PerturbKind::GlobalWeightNoise, {0.0, 0.01, 0.02, 0.05, 0.1}},
      {PerturbKind::InputNoise, {0.0, 0.1, 0.2, 0.5, 1.0}}};
  PerturbCondition perturb_condition = PerturbCondition::WholeNetwork;
  int target_module = 1;
  int n_draws = 25;
  int n_nets = 2;

  std::string output_dir = "out";
  std::string report_format = "csv";  // csv | json

  std::vector<TaskKind> task_list() const;  // resolved task kinds
  ModulePartition partition() const { return ModulePartition{module_sizes}; }
  TrainConfig readout_train() const {
    TrainConfig cfg = train;
    cfg.learning_rate = readout_learning_rate;
    return cfg;
  }
  TrainConfig baseline_train() const {
    TrainConfig cfg = train;
    cfg.iterations = baseline_iterations;
    cfg.lr_decay_after = baseline_iterations / 2;
    return cfg;
  }
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
// FNV-1a hex digest of the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace mtp
