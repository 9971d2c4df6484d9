#include "ddfl/rng.hpp"

#include <cmath>
#include <numbers>

namespace ddfl {

double Rng::normal() {
  // Box-Muller; discard the second variate.
  double u1 = uniform01();
  double u2 = uniform01();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::derive(std::uint64_t master, std::string_view tag) {
  // FNV-1a over the tag, mixed with the master seed through one splitmix step.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  Rng mixer(master ^ h);
  return mixer.next_u64();
}

}  // namespace ddfl
