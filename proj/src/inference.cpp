#include "ctmle/inference.hpp"

#include "ctmle/eif.hpp"
#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"
#include "ctmle/parallel.hpp"
#include "ctmle/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace ctmle {

namespace {

void check_folds(const Dataset& ds, const FoldScheme& folds) {
    if (folds.n() != ds.n()) throw InputError("fold scheme covers " + std::to_string(folds.n()) + " rows, data has " +
                                              std::to_string(ds.n()));
}

}  // namespace

Vector cv_if_values(const Dataset& ds, const NuisanceRecipe& recipe, const FoldScheme& folds,
                    const EstimatorConfig& cfg, int arm) {
    check_folds(ds, folds);
    Vector out(static_cast<Eigen::Index>(ds.n()));
    for_each_fold(folds.V, [&](int v) {
        const auto train = folds.training(v);
        const auto valid = folds.validation(v);
        const auto m = fit_tsm_nuisances(ds, train, arm, recipe, cfg, derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(v)));
        const Matrix w = select_rows(ds.w(), valid);
        EifInputs in;
        in.or_pred = m.predict_or(w);
        in.ps_pred = m.predict_ps(w, in.or_pred);
        in.y = select_rows(ds.y(), valid);
        in.a.resize(static_cast<Eigen::Index>(valid.size()));
        for (std::size_t r = 0; r < valid.size(); ++r) in.a[static_cast<Eigen::Index>(r)] = ds.a()[static_cast<Eigen::Index>(valid[r])] == arm;
        in.psi = plugin_estimate(in.or_pred);
        const Vector d = eif_eval(in);
        for (std::size_t r = 0; r < valid.size(); ++r) out[static_cast<Eigen::Index>(valid[r])] = d[static_cast<Eigen::Index>(r)];
    });
    return out;
}

Vector cv_ate_if_values(const Dataset& ds, const NuisanceRecipe& recipe, const FoldScheme& folds,
                        const EstimatorConfig& cfg) {
    check_folds(ds, folds);
    Vector out(static_cast<Eigen::Index>(ds.n()));
    for_each_fold(folds.V, [&](int v) {
        const auto train = folds.training(v);
        const auto valid = folds.validation(v);
        const auto m = fit_ate_nuisances(ds, train, recipe, cfg, derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(v)));
        const Matrix w = select_rows(ds.w(), valid);
        const Vector q1 = m.predict_or(w, 1), q0 = m.predict_or(w, 0);
        const Vector g = m.predict_ps(q1, q0);
        const double psi = (q1 - q0).mean();
        for (std::size_t r = 0; r < valid.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(valid[r]);
            const auto k = static_cast<Eigen::Index>(r);
            const bool treated = ds.a()[i] == 1;
            const double lg = clip(treated ? g[k] : 1.0 - g[k], cfg.ps_floor, 1.0);
            const double qa = treated ? q1[k] : q0[k];
            out[i] = (treated ? 1.0 : -1.0) / lg * (ds.y()[i] - qa) + q1[k] - q0[k] - psi;
        }
    });
    return out;
}

VarianceEstimate variance_from_fold_values(const Vector& values, const FoldScheme& folds) {
    if (static_cast<std::size_t>(values.size()) != folds.n()) throw InputError("variance_from_fold_values: length mismatch");
    if (values.size() == 0) throw InputError("variance_from_fold_values: no values");
    VarianceEstimate est;
    est.V = folds.V;
    double total = 0.0;
    for (int v = 0; v < folds.V; ++v) {
        const auto rows = folds.validation(v);
        if (rows.empty()) throw FoldError(v, "empty validation fold");
        double mean = 0.0;
        for (auto i : rows) mean += values[static_cast<Eigen::Index>(i)];
        mean /= static_cast<double>(rows.size());
        double ss = 0.0;
        for (auto i : rows) {
            const double d = values[static_cast<Eigen::Index>(i)] - mean;
            ss += d * d;
        }
        est.per_fold_variances.push_back(ss / static_cast<double>(rows.size()));
        total += est.per_fold_variances.back();
    }
    est.tau2_cv = total / folds.V;
    est.se = std::sqrt(est.tau2_cv / static_cast<double>(values.size()));
    return est;
}

VarianceEstimate cv_if_variance(const Dataset& ds, const NuisanceRecipe& recipe, const FoldScheme& folds,
                                const EstimatorConfig& cfg, int arm) {
    return variance_from_fold_values(cv_if_values(ds, recipe, folds, cfg, arm), folds);
}

Matrix cv_covariance(const Matrix& values, const FoldScheme& folds) {
    if (static_cast<std::size_t>(values.rows()) != folds.n()) throw InputError("cv_covariance: row count mismatch");
    const Eigen::Index k = values.cols();
    Matrix acc = Matrix::Zero(k, k);
    for (int v = 0; v < folds.V; ++v) {
        const auto rows = folds.validation(v);
        if (rows.empty()) throw FoldError(v, "empty validation fold");
        Matrix block(static_cast<Eigen::Index>(rows.size()), k);
        for (std::size_t r = 0; r < rows.size(); ++r) block.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(rows[r]));
        block.rowwise() -= block.colwise().mean();
        acc += block.transpose() * block / static_cast<double>(rows.size());
    }
    return acc / (folds.V * static_cast<double>(values.rows()));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("normal_quantile: probability must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

std::pair<double, double> wald_ci(double psi, double se, double level) {
    if (!(se >= 0.0)) throw InputError("wald_ci: standard error must be non-negative");
    if (!(level > 0.0 && level < 1.0)) throw InputError("wald_ci: level must lie in (0,1)");
    const double half = normal_quantile(0.5 * (1.0 + level)) * se;
    return {psi - half, psi + half};
}

double chi_square_sf(double x, double df) {
    if (!(df > 0.0)) throw InputError("chi_square_sf: df must be positive");
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

WaldTest wald_test_equal_means(const Vector& estimates, const Matrix& covariance) {
    const Eigen::Index k = estimates.size();
    if (k < 2) throw InputError("wald_test_equal_means: need at least two estimates");
    if (covariance.rows() != k || covariance.cols() != k) throw InputError("wald_test_equal_means: covariance must be K x K");
    if (!covariance.isApprox(covariance.transpose(), 1e-10)) throw InputError("wald_test_equal_means: covariance is not symmetric");

    Matrix c = Matrix::Zero(k - 1, k);
    for (Eigen::Index j = 0; j + 1 < k; ++j) {
        c(j, j) = 1.0;
        c(j, j + 1) = -1.0;
    }
    const Vector diff = c * estimates;
    const Matrix m = c * covariance * c.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const Vector& lam = eig.eigenvalues();
    const double cutoff = std::max(lam.cwiseAbs().maxCoeff(), 1e-300) * static_cast<double>(k) * 1e-12;

    WaldTest t;
    const Vector proj = eig.eigenvectors().transpose() * diff;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
        if (lam[j] <= cutoff) continue;
        ++t.df;
        t.statistic += proj[j] * proj[j] / lam[j];
    }
    if (t.df < k - 1)
        t.warnings.push_back("contrast covariance is singular (rank " + std::to_string(t.df) + " of " +
                             std::to_string(k - 1) + "); pseudo-inverse used with df = rank");
    t.p_value = t.df > 0 ? chi_square_sf(t.statistic, t.df) : 1.0;
    return t;
}

}  // namespace ctmle
