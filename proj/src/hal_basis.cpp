#include "ctmle/hal_basis.hpp"

#include "ctmle/error.hpp"
#include "ctmle/splines.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace ctmle {

namespace {

std::vector<double> knots_for(const Eigen::Ref<const Vector>& col, int max_knots) {
    std::vector<double> sorted(col.data(), col.data() + col.size());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> knots;
    if (distinct.size() <= 1) return knots;
    if (static_cast<int>(distinct.size()) - 1 <= max_knots) {
        knots.assign(distinct.begin() + 1, distinct.end());
        return knots;
    }
    for (int k = 1; k <= max_knots; ++k) {
        const double q = sorted_quantile(sorted, static_cast<double>(k) / (max_knots + 1));
        if (q > distinct.front()) knots.push_back(q);
    }
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    return knots;
}

// All subsets of {0..p-1} of size 1..max_order, in lexicographic order by size.
std::vector<std::vector<int>> subsets(int p, int max_order) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int start, int size) {
        if (static_cast<int>(cur.size()) == size) {
            out.push_back(cur);
            return;
        }
        for (int j = start; j < p; ++j) {
            cur.push_back(j);
            rec(j + 1, size);
            cur.pop_back();
        }
    };
    for (int s = 1; s <= std::min(max_order, p); ++s) rec(0, s);
    return out;
}

std::size_t count_columns(const std::vector<std::vector<double>>& knots, int max_order) {
    std::size_t total = 0;
    for (const auto& s : subsets(static_cast<int>(knots.size()), max_order)) {
        std::size_t c = 1;
        for (int j : s) c *= knots[static_cast<std::size_t>(j)].size();
        total += c;
    }
    return total;
}

std::vector<double> thin(const std::vector<double>& knots, std::size_t keep) {
    if (knots.size() <= keep) return knots;
    std::vector<double> out;
    for (std::size_t k = 0; k < keep; ++k) out.push_back(knots[(k * 2 + 1) * knots.size() / (2 * keep)]);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

SparseMatrix HalBasis::design(const Matrix& w) const {
    const Eigen::Index n = w.rows();
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t c = 0; c < terms_.size(); ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            bool on = true;
            for (const auto& [j, knot] : terms_[c]) {
                if (w(i, j) < knot) {
                    on = false;
                    break;
                }
            }
            if (on) trips.emplace_back(static_cast<int>(i), static_cast<int>(c), 1.0);
        }
    }
    SparseMatrix x(n, static_cast<Eigen::Index>(terms_.size()));
    x.setFromTriplets(trips.begin(), trips.end());
    x.makeCompressed();
    return x;
}

HalDesign hal_lite_basis(const Matrix& w, const HalBasisOptions& opts) {
    if (opts.max_interaction < 1) throw InputError("hal_lite_basis: max_interaction must be at least 1");
    if (opts.max_knots_per_dim < 1) throw InputError("hal_lite_basis: max_knots_per_dim must be at least 1");
    const int p = static_cast<int>(w.cols());
    const Eigen::Index n = w.rows();

    HalDesign out;
    for (int j = 0; j < p; ++j) out.knots.push_back(knots_for(w.col(j), opts.max_knots_per_dim));

    std::size_t budget_knots = static_cast<std::size_t>(opts.max_knots_per_dim);
    while (count_columns(out.knots, opts.max_interaction) > opts.max_columns && budget_knots > 1) {
        --budget_knots;
        for (auto& k : out.knots) k = thin(k, budget_knots);
    }
    if (budget_knots < static_cast<std::size_t>(opts.max_knots_per_dim))
        out.warnings.push_back("hal_lite_basis: column budget " + std::to_string(opts.max_columns) +
                               " exceeded; knots per covariate truncated to " + std::to_string(budget_knots));

    // Build each candidate column as its sorted list of active rows; drop constant
    // and duplicate columns.
    std::map<std::vector<int>, std::size_t> seen;
    std::vector<HalBasis::Term> terms;
    for (const auto& s : subsets(p, opts.max_interaction)) {
        std::vector<std::size_t> idx(s.size(), 0);
        bool empty = false;
        for (int j : s) empty = empty || out.knots[static_cast<std::size_t>(j)].empty();
        if (empty) continue;
        while (true) {
            HalBasis::Term term;
            for (std::size_t f = 0; f < s.size(); ++f)
                term.emplace_back(s[f], out.knots[static_cast<std::size_t>(s[f])][idx[f]]);
            std::vector<int> rows;
            for (Eigen::Index i = 0; i < n; ++i) {
                bool on = true;
                for (const auto& [j, knot] : term) on = on && w(i, j) >= knot;
                if (on) rows.push_back(static_cast<int>(i));
            }
            if (!rows.empty() && static_cast<Eigen::Index>(rows.size()) < n &&
                seen.emplace(std::move(rows), terms.size()).second) {
                terms.push_back(std::move(term));
            }
            std::size_t f = 0;
            while (f < s.size()) {
                if (++idx[f] < out.knots[static_cast<std::size_t>(s[f])].size()) break;
                idx[f] = 0;
                ++f;
            }
            if (f == s.size()) break;
        }
    }
    out.basis = HalBasis(std::move(terms));
    out.design = out.basis.design(w);
    return out;
}

}  // namespace ctmle
