#pragma once

#include "ctmle/types.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace ctmle {

struct HalBasisOptions {
    int max_interaction = 2;
    int max_knots_per_dim = 10;
    std::size_t max_columns = 4000;
};

/// Zero-order indicator basis: each column is a product of 1{w_j >= knot} over a
/// subset of covariates of size at most `max_interaction`.
class HalBasis {
public:
    /// One factor per covariate in the subset: (covariate index, knot).
    using Term = std::vector<std::pair<int, double>>;

    HalBasis() = default;
    explicit HalBasis(std::vector<Term> terms) : terms_(std::move(terms)) {}

    std::size_t n_columns() const noexcept { return terms_.size(); }
    const std::vector<Term>& terms() const noexcept { return terms_; }

    SparseMatrix design(const Matrix& w) const;

private:
    std::vector<Term> terms_;
};

struct HalDesign {
    HalBasis basis;
    SparseMatrix design;
    std::vector<std::vector<double>> knots;  ///< per covariate, after any truncation
    Warnings warnings;
};

/// Knots sit at empirical quantiles (or at every distinct value but the minimum when
/// there are few). Constant and duplicate columns are removed, keeping the first.
/// When the column budget is exceeded the knot count is reduced with a warning.
HalDesign hal_lite_basis(const Matrix& w, const HalBasisOptions& opts = {});

}  // namespace ctmle
