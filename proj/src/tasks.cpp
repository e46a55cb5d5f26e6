#include "mtp/tasks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace mtp {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kAmpLo = 0.5;
constexpr double kAmpHi = 1.5;
constexpr double kMinGap = 0.2;  // min separation between compared magnitudes

struct PulsePair {
  double first;
  double second;
};

// Two amplitudes whose comparison is well-posed under the decision metric.
PulsePair draw_separated_pair(RngStream& rng) {
  const double a = rng.uniform(kAmpLo, kAmpHi);
  double b = rng.uniform(kAmpLo, kAmpHi);
  while (std::fabs(a - b) < kMinGap) b = rng.uniform(kAmpLo, kAmpHi);
  return {a, b};
}

PulsePair draw_pair(RngStream& rng) {
  return {rng.uniform(kAmpLo, kAmpHi), rng.uniform(kAmpLo, kAmpHi)};
}

void write_pulse_train(Matrix& inputs, int channel, const TrialTiming& t,
                       const PulsePair& p) {
  const int w = t.pulse_width_steps;
  const int start1 = t.stimulus_onset_step;
  const int start2 = start1 + w + t.pulse_gap_steps;
  for (int s = 0; s < w; ++s) {
    inputs(start1 + s, channel) = p.first;
    inputs(start2 + s, channel) = p.second;
  }
}

void write_fixation_input(Matrix& inputs, const TrialTiming& t) {
  for (int s = 0; s < t.response_start(); ++s) inputs(s, 0) = 1.0;
}

// Output channel 0 mirrors the fixation input for all nine tasks.
void write_fixation_target(Matrix& targets, const TrialTiming& t) {
  for (int s = 0; s < t.response_start(); ++s) targets(s, 0) = 1.0;
}

// Response channels hold the required value from the step it is first
// determined by the inputs through the end of the trial, mirroring the
// hold-in-memory targets the modules were pretrained on. A readout of a
// frozen reservoir is a fixed linear map; it cannot gate its output on the
// fixation signal, so demanding zero during the delay would make the task
// unrealizable by construction.
void write_angle_targets(Matrix& targets, const TrialTiming& t, double angle,
                         int from_step) {
  write_fixation_target(targets, t);
  for (int s = from_step; s < t.total_steps; ++s) {
    targets(s, 1) = std::cos(angle);
    targets(s, 2) = std::sin(angle);
  }
}

void write_scalar_targets(Matrix& targets, const TrialTiming& t, double value,
                          int from_step) {
  write_fixation_target(targets, t);
  for (int s = from_step; s < t.total_steps; ++s) targets(s, 1) = value;
}

}  // namespace

bool is_primitive(TaskKind k) {
  return k == TaskKind::PrimitiveFixation || k == TaskKind::PrimitivePosPulse ||
         k == TaskKind::PrimitiveNegPulse;
}

const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::PrimitiveFixation: return "PrimitiveFixation";
    case TaskKind::PrimitivePosPulse: return "PrimitivePosPulse";
    case TaskKind::PrimitiveNegPulse: return "PrimitiveNegPulse";
    case TaskKind::DelayPro: return "DelayPro";
    case TaskKind::DelayAnti: return "DelayAnti";
    case TaskKind::MemPro: return "MemPro";
    case TaskKind::MemAnti: return "MemAnti";
    case TaskKind::MemDm1: return "MemDm1";
    case TaskKind::MemDm2: return "MemDm2";
    case TaskKind::ContextMemDm1: return "ContextMemDm1";
    case TaskKind::ContextMemDm2: return "ContextMemDm2";
    case TaskKind::MultiMem: return "MultiMem";
  }
  return "?";
}

TaskKind task_from_name(const std::string& name) {
  for (int i = 0; i < kNumTaskKinds; ++i) {
    const auto k = static_cast<TaskKind>(i);
    if (name == task_name(k)) return k;
  }
  throw std::invalid_argument("unknown task name: " + name);
}

std::vector<TaskKind> all_tasks() {
  return {TaskKind::DelayPro,      TaskKind::DelayAnti,
          TaskKind::MemPro,        TaskKind::MemAnti,
          TaskKind::MemDm1,        TaskKind::MemDm2,
          TaskKind::ContextMemDm1, TaskKind::ContextMemDm2,
          TaskKind::MultiMem};
}

std::vector<TaskKind> all_primitives() {
  return {TaskKind::PrimitiveFixation, TaskKind::PrimitivePosPulse,
          TaskKind::PrimitiveNegPulse};
}

void TrialTiming::validate() const {
  if (dt_ms <= 0) throw std::invalid_argument("timing: dt_ms must be > 0");
  if (total_steps < 1) throw std::invalid_argument("timing: total_steps < 1");
  if (fixation_steps < 0 || response_steps < 0 ||
      fixation_steps + response_steps > total_steps)
    throw std::invalid_argument("timing: fixation + response exceed trial");
  if (pulse_width_steps < 1)
    throw std::invalid_argument("timing: pulse_width_steps < 1");
  if (stimulus_onset_step < 0 || stimulus_onset_step >= response_start())
    throw std::invalid_argument("timing: stimulus onset not before response");
  // Two-pulse trains must end strictly before the response period.
  const int train_end = stimulus_onset_step + 2 * pulse_width_steps + pulse_gap_steps;
  if (train_end > response_start())
    throw std::invalid_argument("timing: pulse train overlaps response period");
}

TaskMetadata task_metadata(TaskKind kind) {
  switch (kind) {
    case TaskKind::PrimitiveFixation:
      return {3, 1, "in: ch0 fixation only; out: reconstruction"};
    case TaskKind::PrimitivePosPulse:
      return {3, 1, "in: ch1 positive pulse only; out: held value"};
    case TaskKind::PrimitiveNegPulse:
      return {3, 1, "in: ch2 negative pulse only; out: held value"};
    case TaskKind::DelayPro:
    case TaskKind::DelayAnti:
    case TaskKind::MemPro:
    case TaskKind::MemAnti:
      return {3, 3, "in: fixation/cos/sin; out: fixation/cos/sin"};
    case TaskKind::MemDm1:
      return {3, 2, "in: fixation/train on ch1, ch2 silent; out: fixation/value"};
    case TaskKind::MemDm2:
      return {3, 2, "in: fixation/train on ch2, ch1 silent; out: fixation/value"};
    case TaskKind::ContextMemDm1:
      return {3, 2, "in: fixation/trains A+B, attend A; out: fixation/value"};
    case TaskKind::ContextMemDm2:
      return {3, 2, "in: fixation/trains A+B, attend B; out: fixation/value"};
    case TaskKind::MultiMem:
      return {3, 2, "in: fixation/trains A+B; out: fixation/winning sum"};
  }
  throw std::invalid_argument("task_metadata: bad kind");
}

Trial generate_trial(TaskKind kind, const TrialTiming& timing, RngStream& rng) {
  timing.validate();
  const auto meta = task_metadata(kind);
  Trial trial;
  trial.kind = kind;
  trial.inputs = Matrix(timing.total_steps, 3);
  trial.targets = Matrix(timing.total_steps, meta.n_out);
  trial.response_mask.assign(timing.total_steps, 0);
  for (int s = timing.response_start(); s < timing.total_steps; ++s)
    trial.response_mask[s] = 1;

  const int onset = timing.stimulus_onset_step;
  const int resp = timing.response_start();
  // Step at which the second pulse of a train arrives; the comparison tasks'
  // answer is determined from here on.
  const int decided =
      onset + timing.pulse_width_steps + timing.pulse_gap_steps;

  switch (kind) {
    case TaskKind::PrimitiveFixation: {
      // Autoencode the fixation signal; the only active input channel is ch0.
      write_fixation_input(trial.inputs, timing);
      for (int s = 0; s < resp; ++s) trial.targets(s, 0) = 1.0;
      break;
    }
    case TaskKind::PrimitivePosPulse:
    case TaskKind::PrimitiveNegPulse: {
      const bool neg = kind == TaskKind::PrimitiveNegPulse;
      const int ch = neg ? 2 : 1;
      const double sign = neg ? -1.0 : 1.0;
      const double amp = sign * rng.uniform(kAmpLo, kAmpHi);
      const int last_start = resp - timing.pulse_width_steps;
      const int start =
          static_cast<int>(rng.uniform_int(onset, last_start));
      for (int s = 0; s < timing.pulse_width_steps; ++s)
        trial.inputs(start + s, ch) = amp;
      // Hold the pulse value from its onset to the end of the trial.
      for (int s = start; s < timing.total_steps; ++s)
        trial.targets(s, 0) = amp;
      break;
    }
    case TaskKind::DelayPro:
    case TaskKind::DelayAnti: {
      const double theta = rng.uniform(0.0, kPi);
      write_fixation_input(trial.inputs, timing);
      for (int s = onset; s < timing.total_steps; ++s) {
        trial.inputs(s, 1) = std::cos(theta);
        trial.inputs(s, 2) = std::sin(theta);
      }
      const bool anti = kind == TaskKind::DelayAnti;
      const double out_angle = anti ? std::fmod(theta + kPi, 2 * kPi) : theta;
      write_angle_targets(trial.targets, timing, out_angle, onset);
      trial.ground_truth = {GroundTruth::Kind::Angle, out_angle, 0, 0};
      break;
    }
    case TaskKind::MemPro:
    case TaskKind::MemAnti: {
      const double theta = rng.uniform(0.0, kPi);
      // Stimulus turns off after a short, variable duration.
      const int max_dur = std::min(16, resp - onset);
      const int min_dur = std::min(8, max_dur);
      const int dur = static_cast<int>(rng.uniform_int(min_dur, max_dur));
      write_fixation_input(trial.inputs, timing);
      for (int s = onset; s < onset + dur; ++s) {
        trial.inputs(s, 1) = std::cos(theta);
        trial.inputs(s, 2) = std::sin(theta);
      }
      const bool anti = kind == TaskKind::MemAnti;
      const double out_angle = anti ? std::fmod(theta + kPi, 2 * kPi) : theta;
      write_angle_targets(trial.targets, timing, out_angle, onset);
      trial.ground_truth = {GroundTruth::Kind::Angle, out_angle, 0, 0};
      break;
    }
    case TaskKind::MemDm1:
    case TaskKind::MemDm2: {
      const int ch = kind == TaskKind::MemDm1 ? 1 : 2;
      const auto p = draw_separated_pair(rng);
      write_fixation_input(trial.inputs, timing);
      write_pulse_train(trial.inputs, ch, timing, p);
      const double hi = std::max(p.first, p.second);
      const double lo = std::min(p.first, p.second);
      write_scalar_targets(trial.targets, timing, hi, decided);
      trial.ground_truth = {GroundTruth::Kind::Scalar, 0, hi, lo};
      break;
    }
    case TaskKind::ContextMemDm1:
    case TaskKind::ContextMemDm2: {
      const bool attend_a = kind == TaskKind::ContextMemDm1;
      // Independent sub-streams per train, salted with a fresh draw so
      // successive calls on the same stream give different trials.
      const std::uint64_t salt = rng.next_u64();
      RngStream rng_a(derive_seed(salt, "trainA", 0));
      RngStream rng_b(derive_seed(salt, "trainB", 0));
      const auto pa = attend_a ? draw_separated_pair(rng_a) : draw_pair(rng_a);
      const auto pb = attend_a ? draw_pair(rng_b) : draw_separated_pair(rng_b);
      write_fixation_input(trial.inputs, timing);
      write_pulse_train(trial.inputs, 1, timing, pa);
      write_pulse_train(trial.inputs, 2, timing, pb);
      const auto& att = attend_a ? pa : pb;
      const double hi = std::max(att.first, att.second);
      const double lo = std::min(att.first, att.second);
      write_scalar_targets(trial.targets, timing, hi, decided);
      trial.ground_truth = {GroundTruth::Kind::Scalar, 0, hi, lo};
      break;
    }
    case TaskKind::MultiMem: {
      const std::uint64_t salt = rng.next_u64();
      RngStream rng_a(derive_seed(salt, "trainA", 0));
      RngStream rng_b(derive_seed(salt, "trainB", 0));
      auto pa = draw_pair(rng_a);
      auto pb = draw_pair(rng_b);
      // Re-draw train B until the two sums are separated.
      while (std::fabs((pa.first + pa.second) - (pb.first + pb.second)) <
             kMinGap)
        pb = draw_pair(rng_b);
      write_fixation_input(trial.inputs, timing);
      write_pulse_train(trial.inputs, 1, timing, pa);
      write_pulse_train(trial.inputs, 2, timing, pb);
      const double sum_a = pa.first + pa.second;
      const double sum_b = pb.first + pb.second;
      const double hi = std::max(sum_a, sum_b);
      const double lo = std::min(sum_a, sum_b);
      write_scalar_targets(trial.targets, timing, hi, decided);
      trial.ground_truth = {GroundTruth::Kind::Scalar, 0, hi, lo};
      break;
    }
  }
  return trial;
}

std::vector<Trial> generate_batch(TaskKind kind, const TrialTiming& timing,
                                  int n_trials, const RngStream& rng) {
  if (n_trials < 1)
    throw std::invalid_argument("generate_batch: n_trials must be >= 1");
  std::vector<Trial> batch;
  batch.reserve(n_trials);
  for (int i = 0; i < n_trials; ++i) {
    auto trial_rng = derive_stream(rng, "trial", i);
    batch.push_back(generate_trial(kind, timing, trial_rng));
  }
  return batch;
}

std::string trial_to_json(const Trial& trial, const TrialTiming& timing) {
  nlohmann::json j;
  j["kind"] = task_name(trial.kind);
  j["dt_ms"] = timing.dt_ms;
  auto mat_to_json = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < m.cols; ++k) row.push_back(m(i, k));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["inputs"] = mat_to_json(trial.inputs);
  j["targets"] = mat_to_json(trial.targets);
  j["response_mask"] = trial.response_mask;
  switch (trial.ground_truth.kind) {
    case GroundTruth::Kind::None:
      j["ground_truth"] = nullptr;
      break;
    case GroundTruth::Kind::Angle:
      j["ground_truth"] = {{"angle", trial.ground_truth.angle}};
      break;
    case GroundTruth::Kind::Scalar:
      j["ground_truth"] = {{"target", trial.ground_truth.target},
                           {"distractor", trial.ground_truth.distractor}};
      break;
  }
  return j.dump();
}

}  // namespace mtp
