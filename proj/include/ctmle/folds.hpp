#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ctmle {

/// V-fold partition of n observations. Fold sizes differ by at most one.
struct FoldScheme {
    int V = 1;
    std::vector<int> assignment;
    std::uint64_t seed = 0;

    /// Random balanced assignment from `seed`.
    static FoldScheme make(std::size_t n, int V, std::uint64_t seed);
    /// Fold v gets rows v, v + V, v + 2V, ... (no shuffling).
    static FoldScheme interleaved(std::size_t n, int V);

    std::size_t n() const noexcept { return assignment.size(); }
    std::vector<std::size_t> validation(int v) const;
    std::vector<std::size_t> training(int v) const;
    /// A one-fold scheme has no held-out block: training and validation are all rows.
    bool in_sample() const noexcept { return V == 1; }
};

}  // namespace ctmle
