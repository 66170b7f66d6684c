#include "mbtl/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace mbtl {

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void restore_rng_state(Rng& rng, const std::string& state) {
  std::istringstream in(state);
  in >> rng;
  if (!in) throw std::invalid_argument("restore_rng_state: malformed generator state");
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose) {
  std::uint64_t h = 1469598103934665603ULL ^ base;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

}  // namespace mbtl
