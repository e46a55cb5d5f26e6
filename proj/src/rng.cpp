#include "mtp/rng.hpp"

#include <cmath>
#include <numbers>

namespace mtp {
namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++ (Blackman & Vigna)
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // multiply-shift mapping; bias is < 2^-64 * span, irrelevant for our spans
  const auto r = static_cast<unsigned __int128>(next_u64()) * span;
  return lo + static_cast<std::int64_t>(r >> 64);
}

double RngStream::gaussian() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gaussian(double mean, double stddev) {
  return mean + stddev * gaussian();
}

std::uint64_t derive_seed(std::uint64_t parent_seed, std::string_view label,
                          std::uint64_t index) {
  std::uint64_t x = parent_seed;
  std::uint64_t h = splitmix64(x);
  x ^= fnv1a64(label);
  h ^= splitmix64(x);
  x ^= index * 0x9e3779b97f4a7c15ULL + 1;
  h ^= splitmix64(x);
  return h;
}

RngStream derive_stream(const RngStream& parent, std::string_view label,
                        std::uint64_t index) {
  return RngStream(derive_seed(parent.seed(), label, index));
}

}  // namespace mtp
