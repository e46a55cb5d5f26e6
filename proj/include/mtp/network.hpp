#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtp/matrix.hpp"
#include "mtp/rng.hpp"
#include "mtp/tasks.hpp"

namespace mtp {

inline constexpr int kNumInputChannels = 3;

// Contiguous, ordered, disjoint blocks of units: M1, M2, M3 by default.
struct ModulePartition {
  std::vector<int> sizes{50, 150, 150};

  int total() const;
  int num_modules() const { return static_cast<int>(sizes.size()); }
  // [begin, end) unit indices of module m.
  std::pair<int, int> range(int m) const;
  int module_of(int unit) const;
};

enum class Connectivity {
  Disconnected,  // off-diagonal blocks of w_rec forced to zero
  Connected,     // off-diagonal blocks present and trainable
};

const char* connectivity_name(Connectivity c);
Connectivity connectivity_from_name(const std::string& name);

struct NoiseConfig {
  double input_noise_sigma = 0.002;
  double state_noise_sigma = 0.0;
  bool enabled = true;

  bool active() const {
    return enabled && (input_noise_sigma > 0 || state_noise_sigma > 0);
  }
  static NoiseConfig off() { return {0.0, 0.0, false}; }
};

struct NetworkParams {
  int n = 0;
  Matrix w_rec;  // n x n
  Matrix w_in;   // n x 3
  std::map<TaskKind, Matrix> readouts;  // task -> n_out x n
  ModulePartition partition;
  Connectivity connectivity = Connectivity::Disconnected;

  bool has_readout(TaskKind task) const { return readouts.count(task) > 0; }
};

// w_rec ~ N(0,1)*g/sqrt(n); w_in ~ N(0,1)/sqrt(3). Under Disconnected, the
// off-diagonal recurrent blocks are zeroed and w_in rows of module k are
// nonzero on channel k only (fixation->M1, ch1->M2, ch2->M3).
NetworkParams init_params(int n, const ModulePartition& partition,
                          Connectivity connectivity, double g, RngStream& rng);

// Adds a readout for `task` if absent, N(0,1)/sqrt(n_out) entries.
void ensure_readout(NetworkParams& params, TaskKind task, RngStream& rng);

// Evaluation-time modifiers used by the perturbation module: unit clamping
// and extra input noise. The forward pass itself never mutates params.
struct ForwardOverlay {
  const std::vector<std::uint8_t>* silenced = nullptr;  // size n, 1 = clamp to 0
  double extra_input_noise_sigma = 0.0;
};

// One trial: h_0 = 0, h_{t+1} = tanh(W_rec h_t +
// W_in x~_t + eta_t), y = W_out h. Row t of `states` is h_{t+1}, the state
// after consuming input row t; `outputs` row t is the readout of that state.
// Noise draw order per step: input noise (3 channels), then state noise
// (n units, only when state_noise_sigma > 0).
struct ForwardResult {
  Matrix states;   // total_steps x n
  Matrix outputs;  // total_steps x n_out
};

ForwardResult forward(const NetworkParams& params, TaskKind task,
                      const Matrix& inputs, const NoiseConfig& noise,
                      RngStream& rng, const ForwardOverlay& overlay = {});

// --- Weights file format (bit-exact) ---
// meta.json: format_version, n, partition sizes, connectivity, task list with
// n_out per readout, master seed, config hash. weights.bin: little-endian
// IEEE-754 doubles, row-major, w_rec then w_in then readouts in meta order.
struct NetworkMeta {
  std::uint64_t master_seed = 0;
  std::string config_hash;
};

void save_network(const NetworkParams& params, const std::string& dir,
                  const NetworkMeta& meta);
std::pair<NetworkParams, NetworkMeta> load_network(const std::string& dir);

// FNV-1a over the raw weight bytes (w_rec, w_in, readouts in task order).
std::uint64_t weights_hash(const NetworkParams& params);

}  // namespace mtp
