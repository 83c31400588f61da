#include "spikecode/rate_coder.hpp"

#include <cmath>
#include <stdexcept>

namespace spikecode {

SpikeTrain encode_poisson(double p, const RateCoderConfig& cfg, std::uint64_t stream_index) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("encode_poisson: probability must lie in [0, 1]");
  if (cfg.t_count < 1) throw std::invalid_argument("encode_poisson: t_count must be >= 1");
  auto rng = substream(cfg.seed, stream_index);
  SpikeTrain train(cfg.t_count);
  for (std::size_t n = 0; n < cfg.t_count; ++n) train.set(n, uniform01(rng) < p);
  return train;
}

}  // namespace spikecode
