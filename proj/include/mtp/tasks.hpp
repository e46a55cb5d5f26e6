#pragma once

#include <string>
#include <vector>

#include "mtp/matrix.hpp"
#include "mtp/rng.hpp"

namespace mtp {

// Three pretraining primitives plus the nine trial-based tasks (T1-T9).
enum class TaskKind {
  PrimitiveFixation,
  PrimitivePosPulse,
  PrimitiveNegPulse,
  DelayPro,
  DelayAnti,
  MemPro,
  MemAnti,
  MemDm1,
  MemDm2,
  ContextMemDm1,
  ContextMemDm2,
  MultiMem,
};

inline constexpr int kNumTaskKinds = 12;

bool is_primitive(TaskKind k);
const char* task_name(TaskKind k);
TaskKind task_from_name(const std::string& name);  // throws on unknown name
std::vector<TaskKind> all_tasks();                 // the nine tasks, T1..T9
std::vector<TaskKind> all_primitives();

// Discrete trial clock. dt is 25 ms so one stimulus pulse is exactly one step
// and the 100 ms inter-pulse gap is four steps.
struct TrialTiming {
  double dt_ms = 25.0;
  int total_steps = 60;
  int fixation_steps = 10;
  int stimulus_onset_step = 10;
  int response_steps = 10;   // at the end of the trial
  int pulse_width_steps = 1;
  int pulse_gap_steps = 4;

  int response_start() const { return total_steps - response_steps; }
  void validate() const;  // throws std::invalid_argument on bad timing
};

// Decision ground truth. Angle for DelayPro..MemAnti; target/distractor
// magnitudes for the Dm-family tasks; primitives carry no decision.
struct GroundTruth {
  enum class Kind { None, Angle, Scalar };
  Kind kind = Kind::None;
  double angle = 0.0;       // radians, Kind::Angle (already anti-flipped)
  double target = 0.0;      // Kind::Scalar
  double distractor = 0.0;  // Kind::Scalar
};

struct Trial {
  TaskKind kind;
  Matrix inputs;   // total_steps x 3
  Matrix targets;  // total_steps x n_out
  std::vector<std::uint8_t> response_mask;  // total_steps, 1 in response period
  GroundTruth ground_truth;
};

struct TaskMetadata {
  int n_in;
  int n_out;
  std::string channel_map;
};

// Global input layout: ch0 = fixation, ch1 = Input1 / cos(theta) / train A,
// ch2 = Input2 / sin(theta) / train B.
TaskMetadata task_metadata(TaskKind kind);

Trial generate_trial(TaskKind kind, const TrialTiming& timing, RngStream& rng);

// n_trials independent trials from per-trial derived sub-streams.
std::vector<Trial> generate_batch(TaskKind kind, const TrialTiming& timing,
                                  int n_trials, const RngStream& rng);

// Debug dump: one JSON object per trial.
std::string trial_to_json(const Trial& trial, const TrialTiming& timing);

}  // namespace mtp
