#pragma once

#include <cstdint>
#include <random>

namespace ctmle {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream). Streams depend only on their two keys,
/// so replicate r draws the same numbers whatever order replicates run in.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9E3779B9u};
    return Rng(seq);
}

/// Derive a child seed; used to hand sub-computations their own streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    Rng rng = make_rng(seed, stream);
    return rng();
}

}  // namespace ctmle
