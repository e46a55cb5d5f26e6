#include <stdexcept>

#include "doctest.h"
#include "mtp/pipeline.hpp"

using namespace mtp;

namespace {

TrialTiming short_timing() {
  TrialTiming t;
  t.total_steps = 20;
  t.fixation_steps = 4;
  t.stimulus_onset_step = 5;
  t.response_steps = 5;
  t.pulse_width_steps = 1;
  t.pulse_gap_steps = 2;
  return t;
}

TrainConfig quick_cfg() {
  TrainConfig cfg;
  cfg.batch_trials = 6;
  cfg.iterations = 6;
  cfg.lr_decay_after = 6;
  return cfg;
}

const ModulePartition kPart{{4, 6, 6}};

PretrainedReservoir quick_reservoir(std::uint64_t seed,
                                    Connectivity conn = Connectivity::Disconnected) {
  RngStream rng(seed);
  return pretrain_modules(quick_cfg(), short_timing(), conn, rng, kPart.total(),
                          kPart, 1.3, NoiseConfig{0.002, 0.0, true});
}

}  // namespace

TEST_CASE("disconnected pretraining keeps off-block structure and is deterministic") {
  auto a = quick_reservoir(31);
  auto b = quick_reservoir(31);
  CHECK(weights_hash(a.params) == weights_hash(b.params));
  CHECK(a.pretrain_logs.size() == 3);
  CHECK(a.pretrain_logs.at(0).entries.size() == 6);

  for (int i = 0; i < kPart.total(); ++i)
    for (int j = 0; j < kPart.total(); ++j)
      if (kPart.module_of(i) != kPart.module_of(j))
        CHECK(a.params.w_rec(i, j) == 0.0);

  // Input routing survives training: module k reads channel k only.
  for (int i = 0; i < kPart.total(); ++i)
    for (int c = 0; c < 3; ++c)
      if (c != kPart.module_of(i)) CHECK(a.params.w_in(i, c) == 0.0);

  // Pretraining moved every module off its initialization.
  RngStream seed_rng(31);
  auto init_rng = derive_stream(seed_rng, "init", 0);
  auto init = init_params(kPart.total(), kPart, Connectivity::Disconnected, 1.3,
                          init_rng);
  for (int m = 0; m < 3; ++m) {
    auto [b0, e0] = kPart.range(m);
    bool changed = false;
    for (int i = b0; i < e0 && !changed; ++i)
      for (int j = b0; j < e0 && !changed; ++j)
        if (a.params.w_rec(i, j) != init.w_rec(i, j)) changed = true;
    CHECK(changed);
  }
}

TEST_CASE("connected pretraining adds a joint phase over the off-blocks") {
  auto r = quick_reservoir(32, Connectivity::Connected);
  CHECK(r.pretrain_logs.count(3) == 1);
  bool off_nonzero = false;
  for (int i = 0; i < kPart.total(); ++i)
    for (int j = 0; j < kPart.total(); ++j)
      if (kPart.module_of(i) != kPart.module_of(j) && r.params.w_rec(i, j) != 0)
        off_nonzero = true;
  CHECK(off_nonzero);
}

TEST_CASE("module training order does not matter under disconnected wiring") {
  auto reference = quick_reservoir(33);

  // Replay the same per-module sub-streams in a different order.
  RngStream master(33);
  auto init_rng = derive_stream(master, "init", 0);
  auto p = init_params(kPart.total(), kPart, Connectivity::Disconnected, 1.3,
                       init_rng);
  const auto prims = all_primitives();
  const NoiseConfig noise{0.002, 0.0, true};
  for (int m : {2, 0, 1}) {
    auto mask = GradMask::module_block(kPart, m, Connectivity::Disconnected);
    auto module_rng = derive_stream(master, "module", m);
    train(p, prims[m], mask, short_timing(), quick_cfg(), noise, module_rng);
  }
  CHECK(p.w_rec == reference.params.w_rec);
  CHECK(p.w_in == reference.params.w_in);
}

TEST_CASE("readout training never touches the frozen reservoir") {
  auto r = quick_reservoir(34);
  const auto rec_before = r.params.w_rec;
  const auto in_before = r.params.w_in;

  RngStream rng(35);
  train_readout(r, TaskKind::DelayPro, quick_cfg(), short_timing(), rng,
                NoiseConfig::off());
  CHECK(r.params.w_rec == rec_before);
  CHECK(r.params.w_in == in_before);
  REQUIRE(r.params.has_readout(TaskKind::DelayPro));
  CHECK(r.params.readouts.at(TaskKind::DelayPro).rows == 3);
  CHECK(r.params.readouts.at(TaskKind::DelayPro).cols == kPart.total());

  // Training a second task leaves the first task's readout bit-identical.
  const auto t1 = r.params.readouts.at(TaskKind::DelayPro);
  train_readout(r, TaskKind::MemDm1, quick_cfg(), short_timing(), rng,
                NoiseConfig::off());
  CHECK(r.params.readouts.at(TaskKind::DelayPro) == t1);
  CHECK(r.params.w_rec == rec_before);

  CHECK_THROWS_AS(train_readout(r, TaskKind::PrimitivePosPulse, quick_cfg(),
                                short_timing(), rng, NoiseConfig::off()),
                  std::invalid_argument);
}

TEST_CASE("separate baselines are fresh independent networks") {
  RngStream r1(36), r2(36), r3(37);
  auto cfg = quick_cfg();
  auto [p1, log1] = train_separate_baseline(TaskKind::MemPro, cfg, short_timing(),
                                            r1, 12, 1.3, NoiseConfig::off());
  auto [p2, log2] = train_separate_baseline(TaskKind::MemPro, cfg, short_timing(),
                                            r2, 12, 1.3, NoiseConfig::off());
  auto [p3, log3] = train_separate_baseline(TaskKind::MemPro, cfg, short_timing(),
                                            r3, 12, 1.3, NoiseConfig::off());
  CHECK(weights_hash(p1) == weights_hash(p2));
  CHECK(weights_hash(p1) != weights_hash(p3));
  CHECK(log1.entries.size() == 6);
  CHECK(p1.partition.num_modules() == 1);

  CHECK_THROWS_AS(train_separate_baseline(TaskKind::PrimitiveFixation, cfg,
                                          short_timing(), r1, 12, 1.3,
                                          NoiseConfig::off()),
                  std::invalid_argument);

  // End-to-end training moves recurrent weights, unlike readout training.
  RngStream init_ref(36);
  auto init_rng = derive_stream(init_ref, "init", 0);
  auto init = init_params(12, ModulePartition{{12}}, Connectivity::Connected,
                          1.3, init_rng);
  CHECK(p1.w_rec.data != init.w_rec.data);
}

TEST_CASE("pretraining validates its configuration") {
  RngStream rng(38);
  CHECK_THROWS_AS(pretrain_modules(quick_cfg(), short_timing(),
                                   Connectivity::Disconnected, rng, 12,
                                   ModulePartition{{12}}, 1.3,
                                   NoiseConfig::off()),
                  std::invalid_argument);
}
