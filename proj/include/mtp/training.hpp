#pragma once

#include <string>
#include <vector>

#include "mtp/network.hpp"
#include "mtp/tasks.hpp"

namespace mtp {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_trials = 200;
  int iterations = 200;
  double l2_weight = 1e-5;
  double activity_reg = 1e-7;
  int lr_decay_after = 200;      // single step decay once this many iterations passed
  double lr_decay_factor = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws std::invalid_argument
};

// Entry-level trainability masks. A false entry guarantees the parameter is
// never modified; gradients are always computed for the whole network first
// and zeroed afterwards.
struct GradMask {
  int n = 0;
  std::vector<std::uint8_t> rec;  // n*n, row-major
  std::vector<std::uint8_t> in;   // n*3, row-major
  bool out = false;               // readout of the current objective
  // When non-empty (size n), only these readout columns are trainable; a
  // readout created under such a mask starts zero on the frozen columns, so
  // module objectives read nothing outside their own block.
  std::vector<std::uint8_t> out_cols;

  std::uint8_t& rec_at(int i, int j) { return rec[static_cast<std::size_t>(i) * n + j]; }
  bool rec_at(int i, int j) const { return rec[static_cast<std::size_t>(i) * n + j]; }
  std::uint8_t& in_at(int i, int c) { return in[static_cast<std::size_t>(i) * kNumInputChannels + c]; }
  bool in_at(int i, int c) const { return in[static_cast<std::size_t>(i) * kNumInputChannels + c]; }

  bool any_rec_or_in() const;

  // Everything trainable (separate-training baseline).
  static GradMask full(int n);
  // Readout only; recurrent and input weights frozen.
  static GradMask readout_only(int n);
  // Module m's diagonal recurrent block plus its w_in rows (routed channel
  // only under Disconnected, all channels under Connected), plus the readout.
  static GradMask module_block(const ModulePartition& partition, int m,
                               Connectivity connectivity);
  // Off-diagonal recurrent blocks only (connected-variant joint phase).
  static GradMask off_diagonal(const ModulePartition& partition);
};

struct TrainLogEntry {
  int iteration;
  double loss;
  double learning_rate;
  double wall_ms;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::string to_csv() const;  // iteration,loss,learning_rate,wall_ms
};

struct Gradients {
  Matrix d_rec;  // n x n
  Matrix d_in;   // n x 3
  Matrix d_out;  // n_out x n (current objective's readout)
  double loss = 0.0;
};

struct AdamState {
  Matrix m_rec, v_rec, m_in, v_in, m_out, v_out;
  long step = 0;

  static AdamState zeros(int n, int n_out);
};

// Squared-error mean over steps x output units, plus l2_weight * sum of
// trainable weights^2 (trainable per `mask`; all weights when mask is null)
// plus activity_reg * mean(states^2).
double compute_loss(const Matrix& outputs, const Matrix& targets,
                    const Matrix& states, const NetworkParams& params,
                    TaskKind task, const TrainConfig& cfg,
                    const GradMask* mask = nullptr);

// Analytic gradients of the full loss through the unrolled tanh recurrence,
// averaged over the batch, then masked. Forward passes use training noise
// from per-trial sub-streams of `rng`.
Gradients bptt_gradients(const NetworkParams& params, TaskKind task,
                         const std::vector<Trial>& batch, const GradMask& mask,
                         const TrainConfig& cfg, const NoiseConfig& noise,
                         RngStream& rng);

void adam_step(NetworkParams& params, TaskKind task, const Gradients& grads,
               AdamState& state, const TrainConfig& cfg, double learning_rate);

// Raised when training hits a non-finite loss.
struct TrainingDiverged : std::runtime_error {
  int iteration;
  double loss;
  TrainingDiverged(int it, double l);
};

TrainLog train(NetworkParams& params, TaskKind objective, const GradMask& mask,
               const TrialTiming& timing, const TrainConfig& cfg,
               const NoiseConfig& noise, RngStream& rng);

// Joint phase over several objectives: per iteration the masked gradients of
// each objective's loss are summed before the Adam update. Readouts for the
// objectives must already exist and are left untouched when mask.out is false.
TrainLog train_joint(NetworkParams& params, const std::vector<TaskKind>& objectives,
                     const GradMask& mask, const TrialTiming& timing,
                     const TrainConfig& cfg, const NoiseConfig& noise,
                     RngStream& rng);

}  // namespace mtp
