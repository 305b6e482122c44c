#pragma once

#include "ctmle/dataset.hpp"
#include "ctmle/learner.hpp"
#include "ctmle/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ctmle {

enum class PsKind { standard, adaptive, adaptive_bivariate };

std::string to_string(PsKind kind);

struct EstimatorConfig {
    double ps_floor = 1e-6;       ///< propensities are clipped below at this value
    double or_clip = 1e-6;        ///< OR predictions clipped to [c, 1-c] before logit
    int folds = 5;                ///< V for cross-validated variance and CV-CTMLE
    double level = 0.95;
    std::uint64_t seed = 1;
    bool compute_variance = true; ///< false: in-sample EIF variance instead of cross-validated
    int adaptive_iterations = 1;  ///< >1 refits the adaptive PS on the targeted OR and retargets
    double epsilon_bound = 30.0;
};

/// How the outcome regression and the propensity are obtained for one arm.
///  - standard: PS regresses the arm indicator on W with `ps_spec`
///    (sequential decomposition for more than two arms);
///  - adaptive: PS regresses the arm indicator on the OR prediction with `ps_spec` as the smoother.
struct NuisanceRecipe {
    LearnerSpec or_spec;
    PsKind ps_kind = PsKind::adaptive;
    LearnerSpec ps_spec;
};

/// Per-row nuisance predictions feeding an estimator.
struct NuisanceBundle {
    Vector or_pred;
    Vector ps_pred;
    PsKind ps_kind = PsKind::adaptive;
    std::optional<FoldScheme> folds;
};

/// P(A = 1 | OR predictions) fitted with a smoother over the prediction columns.
struct AdaptivePsFit {
    LearnerPtr model;          ///< null when the fit is a constant
    std::vector<Eigen::Index> columns;  ///< non-constant input columns the model uses
    double constant = 0.0;
    double floor = 1e-6;
    Vector pred;               ///< floored predictions at the training rows
    bool separation = false;
    Warnings warnings;

    /// `or_preds` has one column per OR prediction used in the fit.
    Vector predict(const Matrix& or_preds) const;
};

/// Regress the 0/1 indicator `a` on `or_preds` (n x 1 or n x 2). Constant inputs give an
/// intercept-only fit; a constant indicator gives 0 or 1 clipped to [floor, 1] with a
/// warning; separation is flagged and the predictions clipped.
AdaptivePsFit fit_adaptive_ps(const IntVector& a, const Matrix& or_preds, const LearnerSpec& smoother, double floor,
                              std::uint64_t seed = 1);

/// Arm propensities for K arms from sequential binary regressions: first the last
/// arm against the rest, then arms 0, 1, ..., K-3 each among rows not yet accounted
/// for; arm K-2 receives the remainder. Rows sum to one.
struct ArmPropensityFit {
    int n_arms = 2;
    std::vector<int> order;          ///< arm fitted at each step
    std::vector<LearnerPtr> models;  ///< one per step
    Warnings warnings;

    Matrix predict(const Matrix& w) const;
};

ArmPropensityFit fit_arm_propensities(const Matrix& w, const IntVector& a, int n_arms, const LearnerSpec& ps_spec,
                                      std::uint64_t seed = 1);

/// Multiply out conditional probabilities (columns in fitting order, see
/// ArmPropensityFit) into an n x K matrix of arm propensities.
Matrix combine_sequential_propensities(const Matrix& conditional, int n_arms);

/// Nuisance models for the mean under `arm`, fitted on a subset of rows and able to
/// predict anywhere.
struct TsmNuisanceModel {
    int arm = 1;
    PsKind kind = PsKind::adaptive;
    LearnerPtr or_model;
    std::optional<AdaptivePsFit> adaptive;
    std::optional<ArmPropensityFit> standard;
    double or_clip = 1e-6;
    double ps_floor = 1e-6;
    Warnings warnings;
    bool separation = false;

    Vector predict_or(const Matrix& w) const;
    Vector predict_ps(const Matrix& w, const Vector& or_pred) const;
};

/// Fit the OR on rows of `train` in the arm, then the PS on all of `train`.
/// Throws EstimationError when `train` has no rows in the arm.
TsmNuisanceModel fit_tsm_nuisances(const Dataset& ds, const std::vector<std::size_t>& train, int arm,
                                   const NuisanceRecipe& recipe, const EstimatorConfig& cfg, std::uint64_t seed);

/// Joint OR Q(a, w) with a bivariate adaptive PS regressing A on (Q(1,w), Q(0,w)).
struct AteNuisanceModel {
    LearnerPtr or_model;
    AdaptivePsFit ps;
    double or_clip = 1e-6;
    double ps_floor = 1e-6;
    Warnings warnings;

    /// Clipped Q(arm, w).
    Vector predict_or(const Matrix& w, int arm) const;
    /// P(A = 1 | Q(1,w), Q(0,w)), unfloored.
    Vector predict_ps(const Vector& q1, const Vector& q0) const;
};

AteNuisanceModel fit_ate_nuisances(const Dataset& ds, const std::vector<std::size_t>& train,
                                   const NuisanceRecipe& recipe, const EstimatorConfig& cfg, std::uint64_t seed);

/// Scalar MLE of the offset logistic working model logit Q_eps = offset + eps * h,
/// optionally weighted. Solved by safeguarded Newton with bisection on
/// [-bound, bound]; a root outside the bound raises SeparationError.
struct Fluctuation {
    double epsilon = 0.0;
    double score = 0.0;  ///< weighted mean score at the solution
    int iterations = 0;
};

Fluctuation solve_fluctuation(const Vector& offset, const Vector& h, const Vector& y, double bound,
                              const Vector& weights = {});

struct Targeting {
    double epsilon = 0.0;
    Vector targeted;  ///< expit(logit(or_pred) + eps / ps_pred): the fluctuated OR at A = 1
};

/// One targeting step with clever covariate a / ps. `or_pred` is clipped to
/// [cfg.or_clip, 1 - cfg.or_clip] before the logit.
Targeting target_or(const Vector& or_pred, const Vector& ps_pred, const IntVector& a, const Vector& y,
                    const EstimatorConfig& cfg = {});

bool mentions_separation(const Warnings& w);

}  // namespace ctmle
