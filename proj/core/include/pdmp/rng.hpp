#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pdmp {

/// Identifies one reproducible random stream: a run seed plus the index of
/// the trajectory (or sample block) drawing from it.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
};

/// Engine for one stream. Streams are derived by seeding a 64-bit Mersenne
/// Twister through seed_seq with both halves of (seed, index), so ensembles
/// are reproducible regardless of which thread runs which index. Uniforms
/// are built from the top 53 bits, which keeps draws identical across
/// standard libraries.
class Rng {
 public:
  explicit Rng(RngStream stream);

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Exp(1) by inversion of one uniform.
  double exponential() { return -std::log1p(-uniform()); }

  std::uint64_t next_u64() { return engine_(); }

  const RngStream& stream() const { return stream_; }

 private:
  RngStream stream_;
  std::mt19937_64 engine_;
};

/// Mixes a label into a seed so sub-experiments get unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label);

}  // namespace pdmp
