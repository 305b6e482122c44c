#pragma once

#include "ctmle/dataset.hpp"
#include "ctmle/folds.hpp"
#include "ctmle/nuisance.hpp"
#include "ctmle/types.hpp"

#include <utility>
#include <vector>

namespace ctmle {

/// Cross-validated variance of an influence function. Everything is on the scale
/// of the values it was computed from (the unit-interval outcome for estimators).
struct VarianceEstimate {
    double tau2_cv = 0.0;
    double se = 0.0;  ///< sqrt(tau2_cv / n)
    int V = 1;
    std::vector<double> per_fold_variances;
};

/// EIF of the mean under `arm` at every row, evaluated with nuisances trained
/// without that row's fold and centered at the fold's mean OR prediction. A one-fold
/// scheme gives the in-sample EIF.
Vector cv_if_values(const Dataset& ds, const NuisanceRecipe& recipe, const FoldScheme& folds,
                    const EstimatorConfig& cfg, int arm = 1);

/// Same for the ATE with a joint (A, W) outcome regression and the bivariate adaptive PS.
Vector cv_ate_if_values(const Dataset& ds, const NuisanceRecipe& recipe, const FoldScheme& folds,
                        const EstimatorConfig& cfg);

/// Center the values within each fold and average the per-fold mean squares.
VarianceEstimate variance_from_fold_values(const Vector& values, const FoldScheme& folds);

VarianceEstimate cv_if_variance(const Dataset& ds, const NuisanceRecipe& recipe, const FoldScheme& folds,
                                const EstimatorConfig& cfg, int arm = 1);

/// Covariance of the vector of means whose influence functions are the columns of
/// `values`: fold-centered cross products averaged over folds, divided by n.
Matrix cv_covariance(const Matrix& values, const FoldScheme& folds);

double normal_quantile(double p);

/// psi -/+ z_{(1+level)/2} se.
std::pair<double, double> wald_ci(double psi, double se, double level);

struct WaldTest {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    Warnings warnings;
};

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);

/// Joint test that all K means are equal, built on the K-1 consecutive differences.
/// A singular contrast covariance falls back to its pseudo-inverse with df = rank.
WaldTest wald_test_equal_means(const Vector& estimates, const Matrix& covariance);

}  // namespace ctmle
