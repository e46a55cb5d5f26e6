#include "mtp/pipeline.hpp"

#include <stdexcept>

namespace mtp {

PretrainedReservoir pretrain_modules(const TrainConfig& cfg,
                                     const TrialTiming& timing,
                                     Connectivity connectivity, RngStream& rng,
                                     int n, const ModulePartition& partition,
                                     double g, const NoiseConfig& noise) {
  cfg.validate();
  timing.validate();
  if (partition.num_modules() < 3)
    throw std::invalid_argument("pretrain_modules: need at least 3 modules");

  PretrainedReservoir res;
  res.master_seed = rng.seed();
  auto init_rng = derive_stream(rng, "init", 0);
  res.params = init_params(n, partition, connectivity, g, init_rng);

  const auto primitives = all_primitives();
  for (int m = 0; m < 3; ++m) {
    const auto mask = GradMask::module_block(partition, m, connectivity);
    auto module_rng = derive_stream(rng, "module", m);
    res.pretrain_logs[m] =
        train(res.params, primitives[m], mask, timing, cfg, noise, module_rng);
  }

  if (connectivity == Connectivity::Connected) {
    const auto mask = GradMask::off_diagonal(partition);
    auto joint_rng = derive_stream(rng, "joint", 0);
    res.pretrain_logs[3] = train_joint(res.params, primitives, mask, timing,
                                       cfg, noise, joint_rng);
  }
  return res;
}

TrainLog train_readout(PretrainedReservoir& reservoir, TaskKind task,
                       const TrainConfig& cfg, const TrialTiming& timing,
                       RngStream& rng, const NoiseConfig& noise) {
  if (is_primitive(task))
    throw std::invalid_argument("train_readout: task must not be a primitive");
  const auto mask = GradMask::readout_only(reservoir.params.n);
  auto task_rng = derive_stream(rng, task_name(task), 0);
  return train(reservoir.params, task, mask, timing, cfg, noise, task_rng);
}

std::pair<NetworkParams, TrainLog> train_separate_baseline(
    TaskKind task, const TrainConfig& cfg, const TrialTiming& timing,
    RngStream& rng, int n, double g, const NoiseConfig& noise) {
  if (is_primitive(task))
    throw std::invalid_argument("baseline: task must not be a primitive");
  auto init_rng = derive_stream(rng, "init", 0);
  // Single-block partition: the whole matrix is one trainable module.
  NetworkParams params =
      init_params(n, ModulePartition{{n}}, Connectivity::Connected, g, init_rng);
  const auto mask = GradMask::full(n);
  auto task_rng = derive_stream(rng, task_name(task), 0);
  TrainLog log = train(params, task, mask, timing, cfg, noise, task_rng);
  return {std::move(params), std::move(log)};
}

}  // namespace mtp
