#pragma once

#include <cstdint>
#include <random>

namespace remest {

/// Independent random substreams drawn from one run seed.
enum class Stream : std::uint32_t {
  kChannel = 0,
  kProcessNoise = 1,
  kMeasurementNoise = 2,
  kInitialState = 3,
};

/// Seeded deterministic generator.
///
/// The engine is std::mt19937_64 seeded through std::seed_seq with the words
/// (seed low, seed high, stream). Both are pinned down bit-for-bit by the C++
/// standard; the uniform and normal transforms below are ours for the same
/// reason, so a (seed, stream) pair yields the same sequence on every
/// conforming toolchain.
class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal, Marsaglia polar method.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace remest
