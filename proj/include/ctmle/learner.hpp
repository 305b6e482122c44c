#pragma once

#include "ctmle/folds.hpp"
#include "ctmle/glm.hpp"
#include "ctmle/hal_basis.hpp"
#include "ctmle/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctmle {

enum class LearnerKind { mean, glm, spline, hal, select };

/// A regression recipe addressable by name and hyperparameters.
///
/// Text form is `name[:key=value,...]`, e.g. `glm:link=identity`, `spline:df=2`,
/// `hal:order=2,knots=10`. A discrete cross-validation selector lists its candidates
/// separated by `|`: `select:glm|mean|hal:knots=5`.
struct LearnerSpec {
    LearnerKind kind = LearnerKind::glm;
    Link link = Link::logit;
    bool interactions = false;  ///< glm: add all pairwise products
    int df = 2;                 ///< spline: per-covariate natural spline df
    HalBasisOptions hal;
    int n_lambda = 20;
    double lambda_ratio = 1e-3;
    int inner_folds = 5;        ///< hal: lambda selection; select: candidate risk
    std::vector<LearnerSpec> candidates;

    static LearnerSpec parse(std::string_view text);
    std::string to_string() const;

    static LearnerSpec mean_only() { return parse("mean"); }
};

/// A fitted regression; immutable and safe to share across threads.
class FittedLearner {
public:
    virtual ~FittedLearner() = default;
    virtual Vector predict(const Matrix& x) const = 0;
    virtual std::string describe() const = 0;
    const Warnings& warnings() const noexcept { return warnings_; }

protected:
    Warnings warnings_;
};

using LearnerPtr = std::shared_ptr<const FittedLearner>;

/// Fit `spec` to (x, y). `seed` drives any internal cross-validation. Logistic fits
/// that separate are kept (flagged in warnings) rather than rejected.
LearnerPtr fit_learner(const LearnerSpec& spec, const Matrix& x, const Vector& y, std::uint64_t seed = 1);

enum class Loss { squared, neg_log_likelihood };

struct CvSelection {
    std::size_t chosen = 0;
    std::vector<double> risks;  ///< +inf for candidates that failed on some fold
};

/// Discrete cross-validation selector; ties go to the earliest candidate.
CvSelection cv_select(const std::vector<LearnerSpec>& candidates, const Matrix& x, const Vector& y,
                      const FoldScheme& folds, Loss loss, std::uint64_t seed = 1);

/// Out-of-fold predictions: row i is predicted by a model trained without fold(i).
/// When `train_mask` is given only rows with a nonzero mask enter training (all rows
/// are still predicted). Folds are fit in parallel; results do not depend on the
/// thread count.
Vector cross_fit(const LearnerSpec& spec, const Matrix& x, const Vector& y, const FoldScheme& folds,
                 const IntVector& train_mask = {}, std::uint64_t seed = 1);

/// Rows of x selected by index.
Matrix select_rows(const Matrix& x, const std::vector<std::size_t>& rows);
Vector select_rows(const Vector& v, const std::vector<std::size_t>& rows);

}  // namespace ctmle
