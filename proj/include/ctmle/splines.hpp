#pragma once

#include "ctmle/types.hpp"

#include <vector>

namespace ctmle {

/// Natural cubic spline basis (truncated-power form) with boundary knots at the
/// data range and interior knots at empirical quantiles. Columns exclude the
/// constant, so the basis spans the same space as R's `ns(x, df)`. The basis is
/// linear below the first and above the last knot.
class NaturalSplineBasis {
public:
    NaturalSplineBasis() = default;
    /// Knots sorted ascending, boundary knots included; at least two.
    explicit NaturalSplineBasis(std::vector<double> knots);

    int df() const noexcept { return static_cast<int>(knots_.size()) - 1; }
    const std::vector<double>& knots() const noexcept { return knots_; }

    Matrix evaluate(const Vector& x) const;

private:
    double truncated_cube_ratio(double u, std::size_t k) const;

    std::vector<double> knots_;  // on the unit-range scale
    double origin_ = 0.0;
    double width_ = 1.0;
};

struct SplineDesign {
    NaturalSplineBasis basis;
    Matrix design;
    Warnings warnings;
};

/// Build an n x df basis. Falls back to a smaller df (with a warning) when x has
/// fewer than df + 1 distinct values; throws InputError for constant x.
SplineDesign natural_spline_basis(const Vector& x, int df);

/// Type-7 sample quantile of already sorted data.
double sorted_quantile(const std::vector<double>& sorted, double prob);

}  // namespace ctmle
