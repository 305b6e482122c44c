#pragma once

#include "ctmle/folds.hpp"
#include "ctmle/types.hpp"

#include <vector>

namespace ctmle {

/// L1-penalized logistic regression with an unpenalized intercept. The objective is
///
///   F(b0, b) = n^-1 sum_i [log(1 + exp(eta_i)) - y_i eta_i] + lambda * |b|_1,
///   eta_i = b0 + x_i' b,
///
/// with responses in [0,1].
struct LassoFit {
    double intercept = 0.0;
    Vector coefficients;
    double lambda = 0.0;
    double kkt_residual = 0.0;
    double objective = 0.0;
    bool converged = false;
    int outer_iterations = 0;

    Vector linear_predictor(const SparseMatrix& x) const;
    Vector predict(const SparseMatrix& x) const;
};

struct LassoOptions {
    double kkt_tol = 1e-7;
    double cv_kkt_tol = 1e-5;  ///< looser tolerance for the per-fold paths
    int max_outer = 200;
    int max_inner_sweeps = 2000;
    /// Stop the CV path after this many lambdas without a lower held-out risk (0: never).
    int cv_patience = 3;
    /// Objective after each outer (proximal Newton) iteration, for monotonicity checks.
    bool record_objective = false;
};

struct LassoPath {
    std::vector<double> lambdas;   ///< grid actually visited (the CV path may stop early)
    std::vector<double> cv_risk;   ///< mean held-out negative log-likelihood per lambda
    std::size_t chosen = 0;
    LassoFit fit;                  ///< refit on all rows at the chosen lambda
    std::vector<double> objective_trace;
};

/// max_j |x_j' (y - ybar)| / n: the smallest lambda at which every slope is zero.
double lasso_lambda_max(const SparseMatrix& x, const Vector& y);

/// Geometric grid from lambda_max down to ratio * lambda_max.
std::vector<double> lasso_lambda_grid(double lambda_max, int count, double ratio);

double lasso_objective(const SparseMatrix& x, const Vector& y, const LassoFit& fit);

/// Solve at a single lambda, warm-started from `start` when it has matching size.
LassoFit solve_lasso_logistic(const SparseMatrix& x, const Vector& y, double lambda, const LassoFit* start = nullptr,
                              const LassoOptions& opts = {}, std::vector<double>* objective_trace = nullptr);

/// Coordinate descent along a decreasing lambda grid with warm starts; lambda chosen by
/// cross-validated negative log-likelihood over `folds`.
LassoPath fit_lasso_logistic(const SparseMatrix& x, const Vector& y, std::vector<double> lambda_grid,
                             const FoldScheme& folds, const LassoOptions& opts = {});

}  // namespace ctmle
