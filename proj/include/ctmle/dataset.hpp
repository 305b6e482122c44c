#pragma once

#include "ctmle/types.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ctmle {

/// Affine map taking raw outcomes into [0,1].
struct OutcomeScale {
    double y_min = 0.0;
    double y_max = 1.0;
    bool applied = false;

    double range() const noexcept { return applied ? y_max - y_min : 1.0; }
    double to_raw(double scaled) const noexcept { return applied ? scaled * (y_max - y_min) + y_min : scaled; }
};

struct ScaledOutcome {
    Vector y;
    OutcomeScale scale;
    bool degenerate = false;  ///< all raw values equal; y is the constant 0.5
};

/// Min-max scale raw outcomes into [0,1]. With `keep_unit_interval`, data already
/// inside [0,1] is passed through unchanged.
ScaledOutcome scale_outcome(const Vector& y_raw, bool keep_unit_interval = false);

double unscale_estimate(double psi_scaled, const OutcomeScale& scale);

/// Observed data (W, A, Y) with the outcome stored on the unit interval.
///
/// Immutable after construction; copies are cheap enough for the sizes used here
/// and concurrent readers need no synchronization.
class Dataset {
public:
    Dataset() = default;

    /// Takes outcomes that are already in [0,1] together with the scale that produced them.
    Dataset(Matrix w, IntVector a, Vector y, OutcomeScale scale, std::vector<std::string> names, int n_arms = 2);

    /// Scales `y_raw` with scale_outcome() and builds the dataset.
    static Dataset from_raw(Matrix w, IntVector a, const Vector& y_raw, std::vector<std::string> names = {},
                            int n_arms = 2, bool keep_unit_interval = false);

    std::size_t n() const noexcept { return static_cast<std::size_t>(y_.size()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(w_.cols()); }
    int n_arms() const noexcept { return n_arms_; }

    const Matrix& w() const noexcept { return w_; }
    const IntVector& a() const noexcept { return a_; }
    const Vector& y() const noexcept { return y_; }
    const OutcomeScale& y_scale() const noexcept { return scale_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// 0/1 indicator of membership in `arm`.
    IntVector arm_indicator(int arm) const;

    /// Binary dataset with labels flipped (a -> 1 - a).
    Dataset relabeled() const;

    /// Rows in `rows`, in that order.
    Dataset subset(const std::vector<std::size_t>& rows) const;

private:
    Matrix w_;
    IntVector a_;
    Vector y_;
    OutcomeScale scale_;
    std::vector<std::string> names_;
    int n_arms_ = 2;
};

struct ValidationReport {
    std::size_t n = 0;
    std::vector<std::size_t> arm_counts;
    std::vector<int> empty_arms;
    std::vector<std::string> zero_variance_columns;
    Warnings warnings;
};

/// Summarize a dataset; throws InputError when it has no rows.
ValidationReport validate_dataset(const Dataset& ds);

}  // namespace ctmle
