#pragma once

#include <cstdint>
#include <string_view>

namespace ddfl {

// Deterministic, platform-independent RNG. All randomness in the toolkit flows
// from one master seed; child streams are derived by hashing a tag so that
// stages (collection dither, per-channel noise, dictionary perturbation, ...)
// are reproducible independently of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // splitmix64 step
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform double in [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // standard normal via Box-Muller (two uniforms per call, no caching so the
  // stream stays a pure function of call count)
  double normal();

  static std::uint64_t derive(std::uint64_t master, std::string_view tag);

  Rng child(std::string_view tag) const { return Rng(derive(state_, tag)); }

 private:
  std::uint64_t state_;
};

}  // namespace ddfl
