#pragma once

#include <string>
#include <vector>

#include "mtp/eval.hpp"
#include "mtp/network.hpp"

namespace mtp {

enum class PerturbKind { LesionWeights, SilenceUnits, GlobalWeightNoise, InputNoise };
enum class PerturbCondition { WholeNetwork, Modular };

const char* perturb_kind_name(PerturbKind k);
PerturbKind perturb_kind_from_name(const std::string& name);
const char* perturb_condition_name(PerturbCondition c);
PerturbCondition perturb_condition_from_name(const std::string& name);

struct PerturbationSpec {
  PerturbKind kind = PerturbKind::LesionWeights;
  // Fraction in [0,1] for LesionWeights / SilenceUnits; sigma >= 0 for the
  // noise kinds.
  double strength = 0.0;
  PerturbCondition condition = PerturbCondition::WholeNetwork;
  int target_module = 1;  // M2 by default (Modular condition)
  std::uint64_t draw_seed = 0;
  std::uint64_t net_seed = 0;

  void validate() const;
};

// Perturbed evaluation context: a weight copy plus evaluation-time clamps.
// The original params are never touched.
struct EvalContext {
  NetworkParams params;
  std::vector<std::uint8_t> silenced;  // size n; empty when nothing silenced
  double input_noise_sigma = 0.0;

  ForwardOverlay overlay() const {
    ForwardOverlay o;
    if (!silenced.empty()) o.silenced = &silenced;
    o.extra_input_noise_sigma = input_noise_sigma;
    return o;
  }
};

// Candidate sets: WholeNetwork = all n^2 recurrent entries / all n units;
// Modular = the target module's diagonal block / its units. An explicit unit
// range overrides the module lookup (used for the random pseudo-modules of
// non-modular networks).
EvalContext apply_perturbation(const NetworkParams& params,
                               const PerturbationSpec& spec, RngStream& rng,
                               const std::pair<int, int>* unit_range = nullptr);

struct SweepRow {
  std::uint64_t net_seed;
  TaskKind task;
  PerturbKind kind;
  PerturbCondition condition;
  int target_module;
  double strength;
  std::uint64_t draw_seed;
  double performance_pct;
};

struct SweepReport {
  std::vector<SweepRow> rows;

  void canonical_sort();
  // Columns: net_seed,task,kind,condition,target_module,strength,draw_seed,
  // performance_pct
  std::string to_csv() const;
  // Per-cell mean and standard deviation across draws (and networks).
  std::string summary_json() const;
};

struct TrainedNetwork {
  NetworkParams params;
  std::uint64_t net_seed = 0;
  // Modular networks target M2 in the Modular condition; others average over
  // 5 random contiguous pseudo-modules of target-module size.
  bool modular = true;
};

// For every (network, task, kind, strength, draw): perturb with a derived
// stream and evaluate on a fixed 250-trial test set (same test seed for all
// cells, derived from master_seed). Deterministic given master_seed.
SweepReport run_sweep(const std::vector<TrainedNetwork>& networks,
                      const std::vector<TaskKind>& tasks,
                      const std::vector<PerturbKind>& kinds,
                      const std::vector<double>& strengths,
                      PerturbCondition condition, int n_draws,
                      const TrialTiming& timing, std::uint64_t master_seed,
                      int target_module = 1, int test_trials = 250);

}  // namespace mtp
