#include "ctmle/dataset.hpp"

#include "ctmle/error.hpp"

#include <cmath>
#include <utility>

namespace ctmle {

ScaledOutcome scale_outcome(const Vector& y_raw, bool keep_unit_interval) {
    if (y_raw.size() == 0) throw InputError("scale_outcome: empty outcome vector");
    if (!y_raw.allFinite()) throw InputError("scale_outcome: non-finite outcome");

    ScaledOutcome out;
    const double lo = y_raw.minCoeff();
    const double hi = y_raw.maxCoeff();
    if (keep_unit_interval && lo >= 0.0 && hi <= 1.0) {
        out.y = y_raw;
        return out;
    }
    if (!(hi > lo)) {
        out.y = Vector::Constant(y_raw.size(), 0.5);
        out.scale = {lo, hi, false};
        out.degenerate = true;
        return out;
    }
    out.scale = {lo, hi, true};
    out.y = ((y_raw.array() - lo) / (hi - lo)).cwiseMax(0.0).cwiseMin(1.0).matrix();
    return out;
}

double unscale_estimate(double psi_scaled, const OutcomeScale& scale) {
    return scale.to_raw(psi_scaled);
}

Dataset::Dataset(Matrix w, IntVector a, Vector y, OutcomeScale scale, std::vector<std::string> names, int n_arms)
    : w_(std::move(w)), a_(std::move(a)), y_(std::move(y)), scale_(scale), names_(std::move(names)), n_arms_(n_arms) {
    if (w_.rows() != y_.size() || a_.size() != y_.size())
        throw InputError("Dataset: W, A and Y must have the same number of rows");
    if (n_arms_ < 2) throw InputError("Dataset: at least two treatment arms are required");
    if (scale_.applied && !(scale_.y_max > scale_.y_min)) throw InputError("Dataset: invalid outcome scale");
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
        if (!std::isfinite(y_[i]) || y_[i] < 0.0 || y_[i] > 1.0)
            throw InputError("Dataset: outcome at row " + std::to_string(i) + " is outside [0,1]");
        if (a_[i] < 0 || a_[i] >= n_arms_)
            throw InputError("Dataset: treatment label " + std::to_string(a_[i]) + " at row " + std::to_string(i) +
                             " is outside the declared arm set");
    }
    if (!w_.allFinite()) throw InputError("Dataset: covariates contain missing or non-finite values");
    if (names_.empty()) {
        for (Eigen::Index j = 0; j < w_.cols(); ++j) names_.push_back("W" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(names_.size()) != w_.cols())
        throw InputError("Dataset: covariate name count does not match column count");
}

Dataset Dataset::from_raw(Matrix w, IntVector a, const Vector& y_raw, std::vector<std::string> names, int n_arms,
                          bool keep_unit_interval) {
    auto scaled = scale_outcome(y_raw, keep_unit_interval);
    return Dataset(std::move(w), std::move(a), std::move(scaled.y), scaled.scale, std::move(names), n_arms);
}

IntVector Dataset::arm_indicator(int arm) const {
    return (a_.array() == arm).cast<int>().matrix();
}

Dataset Dataset::relabeled() const {
    if (n_arms_ != 2) throw InputError("relabeled: only defined for binary treatment");
    IntVector flipped = (1 - a_.array()).matrix();
    return Dataset(w_, std::move(flipped), y_, scale_, names_, 2);
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    Matrix w(m, w_.cols());
    IntVector a(m);
    Vector y(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto i = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)]);
        w.row(r) = w_.row(i);
        a[r] = a_[i];
        y[r] = y_[i];
    }
    return Dataset(std::move(w), std::move(a), std::move(y), scale_, names_, n_arms_);
}

ValidationReport validate_dataset(const Dataset& ds) {
    if (ds.n() == 0) throw InputError("validate_dataset: dataset has no rows");
    ValidationReport rep;
    rep.n = ds.n();
    rep.arm_counts.assign(static_cast<std::size_t>(ds.n_arms()), 0);
    for (Eigen::Index i = 0; i < ds.a().size(); ++i) ++rep.arm_counts[static_cast<std::size_t>(ds.a()[i])];
    for (int k = 0; k < ds.n_arms(); ++k) {
        if (rep.arm_counts[static_cast<std::size_t>(k)] == 0) {
            rep.empty_arms.push_back(k);
            rep.warnings.push_back("arm " + std::to_string(k) + " empty");
        }
    }
    for (Eigen::Index j = 0; j < ds.w().cols(); ++j) {
        const auto col = ds.w().col(j);
        if (col.maxCoeff() == col.minCoeff()) {
            rep.zero_variance_columns.push_back(ds.names()[static_cast<std::size_t>(j)]);
            rep.warnings.push_back("covariate " + ds.names()[static_cast<std::size_t>(j)] + " has zero variance");
        }
    }
    return rep;
}

}  // namespace ctmle
