#pragma once

#include <cstdint>
#include <random>

namespace laat {

/// Independent random streams derived from one run seed.
enum class Stream : std::uint32_t {
    split = 1,
    init = 2,
    noise = 3,
    landscape = 4,
    synthetic = 5,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

} // namespace laat
