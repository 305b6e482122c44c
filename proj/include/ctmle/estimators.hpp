#pragma once

#include "ctmle/dataset.hpp"
#include "ctmle/folds.hpp"
#include "ctmle/inference.hpp"
#include "ctmle/learner.hpp"
#include "ctmle/nuisance.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ctmle {

struct EstimateDiagnostics {
    double eif_mean = 0.0;  ///< mean of eif_values (fold-weighted for CV-CTMLE)
    double ps_min = 0.0;
    double ps_max = 0.0;
    bool separation = false;
    Warnings warnings;
};

/// Result of one estimator run. psi, se and the CI are on the original outcome
/// scale; psi_scaled and eif_values are on the unit interval the estimator works in.
struct EstimateReport {
    std::string estimator;
    std::string target = "tsm";  ///< "tsm" (mean under `arm`) or "ate"
    int arm = 1;
    double psi = 0.0;
    double psi_scaled = 0.0;
    std::vector<double> epsilon;
    Vector eif_values;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double level = 0.95;
    std::size_t n = 0;
    std::string se_method;  ///< "cv" or "in-sample"
    int folds = 0;
    std::uint64_t seed = 0;
    EstimateDiagnostics diagnostics;
    Vector cv_if;  ///< cross-validated influence values behind `se` (empty for in-sample)
};

enum class Method { targeted, onestep };

/// Learners for every estimator: `ps_spec` regresses treatment on W (standard
/// propensity), `smoother` regresses treatment on the OR prediction (adaptive).
struct EstimatorSpec {
    LearnerSpec or_spec = LearnerSpec::parse("glm");
    LearnerSpec ps_spec = LearnerSpec::parse("glm");
    LearnerSpec smoother = LearnerSpec::parse("spline:df=2");
    EstimatorConfig cfg;
};

/// Mean outcome under `arm` by targeting or a one-step correction, with the
/// propensity chosen by `recipe`. The building block of the named estimators.
EstimateReport estimate_tsm(const Dataset& ds, int arm, const NuisanceRecipe& recipe, Method method,
                            const EstimatorConfig& cfg, const std::string& name);

EstimateReport ctmle_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                         const EstimatorConfig& cfg = {}, int arm = 1);
EstimateReport tmle_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& ps_spec,
                        const EstimatorConfig& cfg = {}, int arm = 1);
EstimateReport onestep_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& ps_spec,
                           const EstimatorConfig& cfg = {}, int arm = 1);
EstimateReport collab_onestep_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                                  const EstimatorConfig& cfg = {}, int arm = 1);

/// ATE from a joint OR Q(a, w), a PS regressing A on (Q(1,w), Q(0,w)) and a single
/// fluctuation with covariate (2A - 1) / G(A | w).
EstimateReport ctmle_ate_direct(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                                const EstimatorConfig& cfg = {});

/// Combine two arm reports into their difference (treated minus control). The
/// influence values subtract; when both carry CV values the SE uses their difference.
EstimateReport ate_difference(const EstimateReport& treated, const EstimateReport& control, const Dataset& ds,
                              const EstimatorConfig& cfg);

/// CTMLE of the mean under A = 1 minus CTMLE on the relabeled data.
EstimateReport ate_by_relabeling(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                                 const EstimatorConfig& cfg = {});

/// Per-fold nuisances from the training rows, one pooled fluctuation minimizing the
/// summed validation-fold mean loss, and psi averaged over validation folds.
EstimateReport cv_ctmle_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                            const FoldScheme& folds, const EstimatorConfig& cfg = {}, int arm = 1);

struct MultiArmReport {
    std::string estimator;
    std::vector<EstimateReport> arms;
    Matrix covariance;        ///< of the arm means, original outcome scale
    Matrix arm_propensities;  ///< n x K from the sequential decomposition; rows sum to one
    WaldTest wald;
};

/// Mean under every arm with a joint covariance and a test of equal means.
MultiArmReport multiarm_means(const Dataset& ds, const std::string& estimator, const EstimatorSpec& spec);

/// Estimator names accepted by run_estimator.
const std::vector<std::string>& estimator_names();

/// Dispatch by name (ctmle, tmle, onestep, conestep, ctmle-ate, cv-ctmle) for target
/// "tsm" (mean under `arm`) or "ate".
EstimateReport run_estimator(const std::string& name, const Dataset& ds, const EstimatorSpec& spec,
                             const std::string& target = "ate", int arm = 1);

/// Fold scheme used for cross-validated variances of estimates from `cfg`.
FoldScheme variance_folds(std::size_t n, const EstimatorConfig& cfg);

}  // namespace ctmle
