#include "ctmle/splines.hpp"

#include "ctmle/error.hpp"

#include <algorithm>
#include <cmath>

namespace ctmle {

double sorted_quantile(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) throw InputError("sorted_quantile: empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

NaturalSplineBasis::NaturalSplineBasis(std::vector<double> knots) {
    if (knots.size() < 2) throw InputError("NaturalSplineBasis: need at least two knots");
    if (!std::is_sorted(knots.begin(), knots.end()) ||
        std::adjacent_find(knots.begin(), knots.end()) != knots.end())
        throw InputError("NaturalSplineBasis: knots must be strictly increasing");
    origin_ = knots.front();
    width_ = knots.back() - knots.front();
    knots_.reserve(knots.size());
    for (double k : knots) knots_.push_back((k - origin_) / width_);
}

double NaturalSplineBasis::truncated_cube_ratio(double u, std::size_t k) const {
    const double last = knots_.back();
    const double a = std::max(0.0, u - knots_[k]);
    const double b = std::max(0.0, u - last);
    return (a * a * a - b * b * b) / (last - knots_[k]);
}

Matrix NaturalSplineBasis::evaluate(const Vector& x) const {
    const int cols = df();
    const std::size_t kk = knots_.size();
    Matrix out(x.size(), cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double u = (x[i] - origin_) / width_;
        out(i, 0) = u;
        if (kk > 2) {
            const double tail = truncated_cube_ratio(u, kk - 2);
            for (std::size_t k = 0; k + 2 < kk; ++k)
                out(i, static_cast<Eigen::Index>(k) + 1) = truncated_cube_ratio(u, k) - tail;
        }
    }
    return out;
}

SplineDesign natural_spline_basis(const Vector& x, int df) {
    if (df < 1) throw InputError("natural_spline_basis: df must be at least 1");
    if (x.size() == 0) throw InputError("natural_spline_basis: empty input");
    if (!x.allFinite()) throw InputError("natural_spline_basis: non-finite input");

    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw InputError("natural_spline_basis: input is constant");

    SplineDesign out;
    int use_df = std::min<int>(df, static_cast<int>(distinct.size()) - 1);
    // Interior knots at quantiles must be distinct and strictly inside the range.
    std::vector<double> knots;
    for (; use_df >= 1; --use_df) {
        knots.clear();
        knots.push_back(sorted.front());
        for (int k = 1; k < use_df; ++k)
            knots.push_back(sorted_quantile(sorted, static_cast<double>(k) / use_df));
        knots.push_back(sorted.back());
        if (std::adjacent_find(knots.begin(), knots.end()) == knots.end()) break;
    }
    if (use_df < df)
        out.warnings.push_back("natural_spline_basis: reduced df from " + std::to_string(df) + " to " +
                               std::to_string(use_df) + " for lack of distinct values");
    out.basis = NaturalSplineBasis(std::move(knots));
    out.design = out.basis.evaluate(x);
    return out;
}

}  // namespace ctmle
