#ifndef XATTN_RANDOM_H_
#define XATTN_RANDOM_H_

#include <cstdint>
#include <random>

namespace xattn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generator for item `index` of a seeded computation, so that
// results do not depend on evaluation order.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ index));
}

}  // namespace xattn

#endif  // XATTN_RANDOM_H_
