#pragma once

#include <map>
#include <string>

#include "mtp/network.hpp"
#include "mtp/training.hpp"

namespace mtp {

// A network whose recurrent and input weights were pretrained on the three
// primitives and then frozen; only readouts may be added afterwards.
struct PretrainedReservoir {
  NetworkParams params;
  std::map<int, TrainLog> pretrain_logs;  // module index -> log (3 = joint phase)
  std::uint64_t master_seed = 0;
  std::string config_hash;
};

// M1 on fixation autoencoding, M2 on positive pulses, M3 on negative pulses,
// each with a mask restricted to that module's block (plus routed input rows).
// Under Connected a joint phase then trains the off-diagonal blocks on the
// summed primitive losses. Per-module sub-streams make the result independent
// of training order under Disconnected.
PretrainedReservoir pretrain_modules(const TrainConfig& cfg,
                                     const TrialTiming& timing,
                                     Connectivity connectivity, RngStream& rng,
                                     int n = 350,
                                     const ModulePartition& partition = {},
                                     double g = 1.5,
                                     const NoiseConfig& noise = {});

// Trains the readout for one of the nine tasks; every other weight is
// bit-identical before and after. Throws if `task` is a primitive.
TrainLog train_readout(PretrainedReservoir& reservoir, TaskKind task,
                       const TrainConfig& cfg, const TrialTiming& timing,
                       RngStream& rng, const NoiseConfig& noise = {});

// Separate-training baseline: a fresh fully-trainable network trained
// end-to-end on a single task.
std::pair<NetworkParams, TrainLog> train_separate_baseline(
    TaskKind task, const TrainConfig& cfg, const TrialTiming& timing,
    RngStream& rng, int n = 350, double g = 1.5, const NoiseConfig& noise = {});

}  // namespace mtp
