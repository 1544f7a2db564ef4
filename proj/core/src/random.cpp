#include "rationalift/random.h"

#include <cmath>
#include <numbers>

namespace rationalift {

double Rng::gumbel() { return -std::log(-std::log(open_uniform())); }

double Rng::normal() {
  // Box-Muller; one value per call keeps the stream position predictable.
  const double u1 = open_uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace rationalift
