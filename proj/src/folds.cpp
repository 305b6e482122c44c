#include "ctmle/folds.hpp"

#include "ctmle/error.hpp"
#include "ctmle/rng.hpp"

#include <algorithm>
#include <numeric>

namespace ctmle {

FoldScheme FoldScheme::make(std::size_t n, int V, std::uint64_t seed) {
    if (V < 1) throw InputError("FoldScheme: V must be at least 1");
    if (static_cast<std::size_t>(V) > n) throw InputError("FoldScheme: more folds than observations");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, 0xF01D5ULL);
    std::shuffle(order.begin(), order.end(), rng);
    FoldScheme fs;
    fs.V = V;
    fs.seed = seed;
    fs.assignment.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) fs.assignment[order[k]] = static_cast<int>(k % static_cast<std::size_t>(V));
    return fs;
}

FoldScheme FoldScheme::interleaved(std::size_t n, int V) {
    if (V < 1 || static_cast<std::size_t>(V) > n) throw InputError("FoldScheme: invalid fold count");
    FoldScheme fs;
    fs.V = V;
    fs.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) fs.assignment[i] = static_cast<int>(i % static_cast<std::size_t>(V));
    return fs;
}

std::vector<std::size_t> FoldScheme::validation(int v) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (V == 1 || assignment[i] == v) rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldScheme::training(int v) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (V == 1 || assignment[i] != v) rows.push_back(i);
    return rows;
}

}  // namespace ctmle
