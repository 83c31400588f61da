#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "spikecode/lif.hpp"

namespace spikecode {

struct RateCoderConfig {
  std::uint64_t seed = 0;
  std::size_t t_count = 1;
};

/// SplitMix64: a Weyl sequence passed through a 64-bit finalizer. Cheap to
/// construct, so every pixel can own a stream.
class Substream {
 public:
  using result_type = std::uint64_t;
  explicit Substream(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return finalize(state_ += 0x9e3779b97f4a7c15ULL); }

  static constexpr std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Engine for an independent substream, keyed by (seed, stream_index).
/// Results do not depend on the order in which streams are consumed.
inline Substream substream(std::uint64_t seed, std::uint64_t stream_index) {
  return Substream(Substream::finalize(Substream::finalize(seed) ^ stream_index));
}

/// Uniform draw in [0, 1) with 53 bits of resolution.
template <typename Engine>
double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Bernoulli(p) spike in each of cfg.t_count slots. Throws for p outside [0, 1].
SpikeTrain encode_poisson(double p, const RateCoderConfig& cfg, std::uint64_t stream_index);

}  // namespace spikecode
