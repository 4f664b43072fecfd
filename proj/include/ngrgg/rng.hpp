#pragma once
// Seeding and random-draw helpers.
//
// All randomness in an experiment flows from one root seed. Independent
// streams are derived per purpose and per replica with derive_seed(), so a
// replica is reproducible in isolation no matter how many other replicas run.

#include <cstdint>
#include <random>

namespace ngrgg {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum class SeedPurpose : std::uint64_t {
  graph = 1,     // node placement
  init = 2,      // initial spins / committed selection / initial field
  dynamics = 3,  // interaction sequence
  sampling = 4,  // measurement-side sampling (e.g. correlation pairs)
};

// stream(root, purpose, index) = mix(mix(mix(root + C0) ^ purpose*C1) ^ (index + C2))
inline std::uint64_t derive_seed(std::uint64_t root, SeedPurpose purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t h = mix64(root + 0x9E3779B97F4A7C15ull);
  h = mix64(h ^ (static_cast<std::uint64_t>(purpose) * 0xD1B54A32D192ED03ull));
  return mix64(h ^ (index + 0x2545F4914F6CDD1Dull));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// One draw per call, unbiased enough for simulation use (Lemire truncation).
inline std::uint64_t bounded(Rng& g, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(g()) * static_cast<unsigned __int128>(n)) >> 64);
}

// Uniform in [0,1) with 53 random bits; one draw.
inline double uniform01(Rng& g) { return (g() >> 11) * 0x1.0p-53; }

// Fair coin; one draw.
inline bool coin(Rng& g) { return (g() >> 63) != 0; }

}  // namespace ngrgg
