#pragma once

#include <cstdint>
#include <random>

namespace robustpr::rng {

// SplitMix64 finalizer. Used as a mixing function for seed derivation, not as
// a generator in its own right.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent substream seed from a root seed and up to two
/// stream labels (e.g. trial index and replication index, or a purpose tag).
/// Counter-based: substreams never share generator state, so trials can run
/// on any number of workers with identical results.
inline std::uint64_t derive(std::uint64_t root, std::uint64_t a,
                            std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return h;
}

// Purpose tags for per-trial substreams. Keeping them distinct means e.g. the
// noise stream can vary with p while ensemble/signal/corruption stay paired.
enum Stream : std::uint64_t {
  kEnsemble = 1,
  kSignal = 2,
  kCorruption = 3,
  kNoise = 4,
  kPowerStart = 5,
  kMasks = 6,
  kSolver = 7,
};

inline std::mt19937_64 engine(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace robustpr::rng
