#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mtp/network.hpp"

using namespace mtp;

namespace {

NetworkParams default_net(std::uint64_t seed,
                          Connectivity conn = Connectivity::Disconnected) {
  RngStream rng(seed);
  auto p = init_params(350, ModulePartition{}, conn, 1.5, rng);
  auto ro = derive_stream(rng, "readout", 0);
  ensure_readout(p, TaskKind::DelayPro, ro);
  return p;
}

}  // namespace

TEST_CASE("init_params: diagonal-block std matches g/sqrt(N)") {
  const auto p = default_net(3);
  double sum = 0, sum2 = 0;
  int count = 0;
  for (int m = 0; m < 3; ++m) {
    const auto [b, e] = p.partition.range(m);
    for (int i = b; i < e; ++i)
      for (int j = b; j < e; ++j) {
        sum += p.w_rec(i, j);
        sum2 += p.w_rec(i, j) * p.w_rec(i, j);
        ++count;
      }
  }
  const double mean = sum / count;
  const double sd = std::sqrt(sum2 / count - mean * mean);
  CHECK(std::fabs(sd - 1.5 / std::sqrt(350.0)) < 0.005);
}

TEST_CASE("init_params: disconnected structure and routing") {
  const auto p = default_net(4);
  for (int i = 0; i < p.n; ++i) {
    const int mi = p.partition.module_of(i);
    for (int j = 0; j < p.n; ++j)
      if (p.partition.module_of(j) != mi) CHECK(p.w_rec(i, j) == 0.0);
    for (int c = 0; c < 3; ++c)
      if (c != mi) CHECK(p.w_in(i, c) == 0.0);
    CHECK(p.w_in(i, mi) != 0.0);
  }
}

TEST_CASE("init_params: determinism and validation") {
  const auto a = default_net(5);
  const auto b = default_net(5);
  CHECK(a.w_rec == b.w_rec);
  CHECK(a.w_in == b.w_in);
  RngStream rng(1);
  CHECK_THROWS_AS(init_params(100, ModulePartition{}, Connectivity::Disconnected,
                              1.5, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_params(350, ModulePartition{}, Connectivity::Disconnected,
                              0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("forward: zero weights give zero trajectories") {
  NetworkParams p;
  p.n = 4;
  p.partition.sizes = {4};
  p.w_rec = Matrix(4, 4);
  p.w_in = Matrix(4, 3);
  p.readouts[TaskKind::PrimitiveFixation] = Matrix(1, 4);
  Matrix inputs(10, 3);
  RngStream rng(0);
  const auto r = forward(p, TaskKind::PrimitiveFixation, inputs,
                         NoiseConfig::off(), rng);
  for (double v : r.states.data) CHECK(v == 0.0);
  for (double v : r.outputs.data) CHECK(v == 0.0);
}

TEST_CASE("forward: closed-form single unit") {
  NetworkParams p;
  p.n = 1;
  p.partition.sizes = {1};
  p.w_rec = Matrix(1, 1);
  p.w_in = Matrix(1, 3);
  p.w_in(0, 0) = 1.0;
  p.readouts[TaskKind::PrimitiveFixation] = Matrix(1, 1, 1.0);
  Matrix inputs(20, 3);
  for (int t = 0; t < 20; ++t) inputs(t, 0) = 0.5;
  RngStream rng(0);
  const auto r = forward(p, TaskKind::PrimitiveFixation, inputs,
                         NoiseConfig::off(), rng);
  for (int t = 0; t < 20; ++t)
    CHECK(r.states(t, 0) == doctest::Approx(0.4621171573).epsilon(1e-9));
}

TEST_CASE("forward: states stay inside (-1, 1) and are deterministic") {
  const auto p = default_net(6);
  Matrix inputs(60, 3);
  for (int t = 0; t < 50; ++t) inputs(t, 0) = 1.0;
  NoiseConfig noise;  // default training noise on
  RngStream r1(77), r2(77);
  const auto a = forward(p, TaskKind::DelayPro, inputs, noise, r1);
  const auto b = forward(p, TaskKind::DelayPro, inputs, noise, r2);
  CHECK(a.states == b.states);
  for (double v : a.states.data) CHECK(std::fabs(v) < 1.0);
  // noise off twice = pure function
  RngStream r3(1), r4(2);
  const auto c = forward(p, TaskKind::DelayPro, inputs, NoiseConfig::off(), r3);
  const auto d = forward(p, TaskKind::DelayPro, inputs, NoiseConfig::off(), r4);
  CHECK(c.states == d.states);

  CHECK_THROWS_AS(forward(p, TaskKind::DelayPro, Matrix(10, 2),
                          NoiseConfig::off(), r3),
                  std::invalid_argument);
  CHECK_THROWS_AS(forward(p, TaskKind::MemPro, inputs, NoiseConfig::off(), r3),
                  std::invalid_argument);
}

TEST_CASE("disconnected M2 equals an isolated 150-unit network") {
  const auto p = default_net(8);
  const auto [b2, e2] = p.partition.range(1);
  // isolated copy of M2's blocks
  NetworkParams iso;
  iso.n = e2 - b2;
  iso.partition.sizes = {iso.n};
  iso.w_rec = Matrix(iso.n, iso.n);
  iso.w_in = Matrix(iso.n, 3);
  for (int i = 0; i < iso.n; ++i) {
    for (int j = 0; j < iso.n; ++j) iso.w_rec(i, j) = p.w_rec(b2 + i, b2 + j);
    for (int c = 0; c < 3; ++c) iso.w_in(i, c) = p.w_in(b2 + i, c);
  }
  iso.readouts[TaskKind::PrimitivePosPulse] = Matrix(1, iso.n);
  auto p2 = p;
  p2.readouts[TaskKind::PrimitivePosPulse] = Matrix(1, p.n);

  Matrix inputs(30, 3);
  inputs(5, 1) = 1.2;
  NoiseConfig noise;
  noise.input_noise_sigma = 0.002;
  noise.state_noise_sigma = 0.0;
  RngStream ra(55), rb(55);
  const auto full = forward(p2, TaskKind::PrimitivePosPulse, inputs, noise, ra);
  const auto part = forward(iso, TaskKind::PrimitivePosPulse, inputs, noise, rb);
  // Equal up to summation-order rounding: the embedded pass sums 350-wide
  // rows whose off-module entries are exact zeros, the isolated pass 150-wide.
  for (int t = 0; t < 30; ++t)
    for (int i = 0; i < iso.n; ++i)
      CHECK(std::fabs(full.states(t, b2 + i) - part.states(t, i)) < 1e-12);
}

TEST_CASE("block independence: M3 weights do not touch M1/M2 states") {
  const auto p = default_net(9);
  auto q = p;
  const auto [b3, e3] = q.partition.range(2);
  for (int i = b3; i < e3; ++i)
    for (int j = b3; j < e3; ++j) q.w_rec(i, j) *= 2.0;
  Matrix inputs(40, 3);
  for (int t = 0; t < 30; ++t) inputs(t, 0) = 1.0;
  RngStream ra(3), rb(3);
  const auto sa = forward(p, TaskKind::DelayPro, inputs, NoiseConfig::off(), ra);
  const auto sb = forward(q, TaskKind::DelayPro, inputs, NoiseConfig::off(), rb);
  for (int t = 0; t < 40; ++t)
    for (int i = 0; i < b3; ++i) CHECK(sa.states(t, i) == sb.states(t, i));
}

TEST_CASE("weights file round-trip is bit-exact") {
  namespace fs = std::filesystem;
  auto p = default_net(10);
  RngStream ro(1);
  ensure_readout(p, TaskKind::MemDm1, ro);
  const auto dir = fs::temp_directory_path() / "mtp_net_test";
  fs::remove_all(dir);
  save_network(p, dir.string(), {12345, "deadbeef"});
  const auto [q, meta] = load_network(dir.string());
  CHECK(meta.master_seed == 12345);
  CHECK(meta.config_hash == "deadbeef");
  CHECK(q.n == p.n);
  CHECK(q.w_rec == p.w_rec);
  CHECK(q.w_in == p.w_in);
  REQUIRE(q.readouts.size() == p.readouts.size());
  for (const auto& [task, w] : p.readouts) CHECK(q.readouts.at(task) == w);
  CHECK(weights_hash(q) == weights_hash(p));

  // byte-length validation
  std::ofstream f(dir / "weights.bin", std::ios::binary | std::ios::app);
  f << "x";
  f.close();
  CHECK_THROWS(load_network(dir.string()));
  fs::remove_all(dir);
}
