#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mbtl {

using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>{0.0, 1.0}(rng); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>{lo, hi}(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>{0, n - 1}(rng);
}

std::string rng_state(const Rng& rng);
void restore_rng_state(Rng& rng, const std::string& state);

// Derives an independent stream for a named purpose from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose);

}  // namespace mbtl
