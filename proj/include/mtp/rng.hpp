#pragma once

#include <cstdint>
#include <string_view>

namespace mtp {

// Counter-free splittable RNG built on xoshiro256++ with splitmix64 seeding.
// Identical seeds give identical draw sequences on every platform; std::
// distributions are deliberately avoided because their output is
// implementation-defined.
//
// Sub-streams are derived by hashing (parent seed, label, index), so parallel
// work items can each own an independent stream that depends only on the
// master seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] inclusive. Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double gaussian();
  double gaussian(double mean, double stddev);

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
};

// Derived stream seed = splitmix-mix of (parent.seed(), FNV-1a(label), index).
// Distinct (label, index) pairs collide only with ~2^-64 probability.
RngStream derive_stream(const RngStream& parent, std::string_view label,
                        std::uint64_t index);

// The raw seed hash used by derive_stream; exposed for file metadata.
std::uint64_t derive_seed(std::uint64_t parent_seed, std::string_view label,
                          std::uint64_t index);

}  // namespace mtp
