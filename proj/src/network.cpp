#include "stvo/network.hpp"

#include <random>

#include "stvo/matching.hpp"
#include "stvo/spatial.hpp"
#include "stvo/temporal.hpp"
#include "stvo/update.hpp"

namespace stvo {

WeightStore init_network_weights(const NetworkDims& dims, std::uint64_t seed) {
  WeightStore store(seed, "kaiming_uniform_a_sqrt5");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x77656967u};
  std::mt19937_64 rng(seq);
  add_feature_encoder_weights(store, dims, rng);
  add_temporal_encoder_weights(store, dims, rng);
  add_spatial_weights(store, dims, rng);
  add_update_weights(store, dims, rng);
  return store;
}

}  // namespace stvo
