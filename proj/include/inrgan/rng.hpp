#pragma once

#include <cstdint>
#include <random>

namespace inrgan {

using Rng = std::mt19937_64;

/// Named randomness streams split from one root seed.
enum class Stream : std::uint32_t {
  init = 1,
  data = 2,
  latent = 3,
  eval = 4,
  extractor = 5,
  projection = 6,
};

/// Deterministic child seed for (root, stream, index). Independent streams
/// make every subsystem reproducible on its own, and per-step streams make
/// resumed training continue exactly.
inline std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline Rng make_rng(std::uint64_t root, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

}  // namespace inrgan
