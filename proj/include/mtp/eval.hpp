#pragma once

#include <string>

#include "mtp/network.hpp"
#include "mtp/tasks.hpp"

namespace mtp {

// Angular tolerance of the decision metric.
inline constexpr double kDecisionAngleTol = 2.0 * 3.14159265358979323846 / 10.0;
// Analytic chance rate for the angle criterion under a uniform decoded angle.
inline constexpr double kAngleChanceRate = 0.2;

struct PerformanceResult {
  TaskKind task;
  int n_trials = 0;
  int n_correct = 0;
  double percent = 0.0;
};

enum class CountScheme { SeparateTraining, ModularPrimitives };

struct ParamCount {
  CountScheme scheme;
  int n = 0;
  int n_out = 0;
  int n_tasks = 0;
  long long overall = 0;
  long long trained_total = 0;
  long long trained_per_task = 0;
};

// Angle tasks: decoded angle = atan2(mean sin output, mean cos output) over
// the response period, correct iff circular distance <= 2*pi/10; an all-zero
// decode (atan2(0,0)) counts as incorrect. Scalar tasks: mean value-unit
// output must be strictly closer to the target magnitude than to the
// distractor.
bool decode_decision(const Trial& trial, const Matrix& outputs);

// 250-trial noiseless test set from a task-specific sub-stream of test_seed.
PerformanceResult performance(const NetworkParams& params, TaskKind task,
                              const TrialTiming& timing, std::uint64_t test_seed,
                              int n_trials = 250,
                              const ForwardOverlay& overlay = {},
                              RngStream* overlay_noise_rng = nullptr);

// Table-style parameter accounting. `include_input_weights` false reproduces
// the published table exactly; true counts the routed input weights too.
ParamCount count_parameters(CountScheme scheme, int n, int n_out, int n_tasks,
                            const ModulePartition* partition = nullptr,
                            bool include_input_weights = false);

std::string performance_to_json(const PerformanceResult& r);
std::string param_count_to_json(const ParamCount& c);
std::string param_count_table_csv(int n, int n_out, int n_tasks);

}  // namespace mtp
