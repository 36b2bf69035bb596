#pragma once

#include <cstdint>
#include <random>

namespace kgd {

/// Deterministic random source. All draws are built from the raw mt19937_64
/// output stream (which the standard pins down exactly), so identical seeds
/// give identical sequences on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller, one spare cached.
  double gauss();

  /// Uniform integer in [0, bound), bound >= 1, rejection-sampled.
  std::uint64_t integer(std::uint64_t bound);

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t raw() { return gen_(); }

  /// Mixes (seed, stream) into an independent-looking seed so one run seed
  /// can feed several unrelated consumers (init, batching, dropout, ...).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kgd
