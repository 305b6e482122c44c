#include "ctmle/lasso.hpp"

#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace ctmle {

namespace {

// Every kNewtonEvery active-set sweeps, take a Newton step on the active coefficients
// (repeated while a sign change truncates it); coordinate descent alone crawls along
// the strongly correlated HAL indicator columns.
constexpr int kNewtonEvery = 50;
constexpr int kNewtonRepeats = 5;
constexpr std::size_t kMaxNewtonActive = 1500;

double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

double smooth_loss(const Vector& y, const Vector& eta) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += log1pexp(eta[i]) - y[i] * eta[i];
    return s / static_cast<double>(y.size());
}

double kkt_residual_of(const SparseMatrix& x, const Vector& y, const Vector& eta, const Vector& beta, double lambda) {
    const double n = static_cast<double>(y.size());
    Vector resid(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) resid[i] = expit(eta[i]) - y[i];
    double r = std::abs(resid.sum() / n);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double g = 0.0;
        for (SparseMatrix::InnerIterator it(x, j); it; ++it) g += it.value() * resid[it.row()];
        g /= n;
        const double v = beta[j] == 0.0 ? std::max(0.0, std::abs(g) - lambda)
                                         : std::abs(g + lambda * (beta[j] > 0 ? 1.0 : -1.0));
        r = std::max(r, v);
    }
    return r;
}

SparseMatrix select_rows(const SparseMatrix& x, const std::vector<std::size_t>& rows) {
    SparseMatrix sel(static_cast<Eigen::Index>(rows.size()), x.rows());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        trips.emplace_back(static_cast<int>(r), static_cast<int>(rows[r]), 1.0);
    sel.setFromTriplets(trips.begin(), trips.end());
    SparseMatrix out = sel * x;
    out.makeCompressed();
    return out;
}

Vector select(const Vector& v, const std::vector<std::size_t>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
    return out;
}

}  // namespace

Vector LassoFit::linear_predictor(const SparseMatrix& x) const {
    Vector eta = x * coefficients;
    eta.array() += intercept;
    return eta;
}

Vector LassoFit::predict(const SparseMatrix& x) const {
    return linear_predictor(x).unaryExpr([](double v) { return expit(v); });
}

double lasso_lambda_max(const SparseMatrix& x, const Vector& y) {
    const double n = static_cast<double>(y.size());
    const Vector centered = y.array() - y.mean();
    double m = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double g = 0.0;
        for (SparseMatrix::InnerIterator it(x, j); it; ++it) g += it.value() * centered[it.row()];
        m = std::max(m, std::abs(g) / n);
    }
    return m;
}

std::vector<double> lasso_lambda_grid(double lambda_max, int count, double ratio) {
    if (count < 1) throw InputError("lasso_lambda_grid: count must be positive");
    std::vector<double> grid;
    if (count == 1) return {lambda_max};
    const double step = std::log(ratio) / (count - 1);
    for (int k = 0; k < count; ++k) grid.push_back(lambda_max * std::exp(step * k));
    return grid;
}

double lasso_objective(const SparseMatrix& x, const Vector& y, const LassoFit& fit) {
    return smooth_loss(y, fit.linear_predictor(x)) + fit.lambda * fit.coefficients.cwiseAbs().sum();
}

LassoFit solve_lasso_logistic(const SparseMatrix& x, const Vector& y, double lambda, const LassoFit* start,
                              const LassoOptions& opts, std::vector<double>* objective_trace) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (y.size() != n) throw InputError("solve_lasso_logistic: row mismatch");
    if (n == 0) throw InputError("solve_lasso_logistic: no observations");
    if (lambda < 0.0) throw InputError("solve_lasso_logistic: negative lambda");
    const double nd = static_cast<double>(n);

    LassoFit fit;
    fit.lambda = lambda;
    if (start != nullptr && start->coefficients.size() == p) {
        fit.intercept = start->intercept;
        fit.coefficients = start->coefficients;
    } else {
        fit.intercept = logit(clip(y.mean(), 1e-6, 1.0 - 1e-6));
        fit.coefficients = Vector::Zero(p);
    }

    Vector& beta = fit.coefficients;
    Vector eta = fit.linear_predictor(x);
    double objective = smooth_loss(y, eta) + lambda * beta.cwiseAbs().sum();
    if (objective_trace) objective_trace->push_back(objective);

    Vector mu(n), v(n), r(n), h(p);
    std::vector<char> nonzero_col(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) nonzero_col[static_cast<std::size_t>(j)] = x.col(j).nonZeros() > 0;

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        fit.outer_iterations = outer;
        const double kkt = kkt_residual_of(x, y, eta, beta, lambda);
        fit.kkt_residual = kkt;
        if (kkt <= opts.kkt_tol) {
            fit.converged = true;
            break;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = expit(eta[i]);
            v[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
            r[i] = (y[i] - mu[i]) / v[i];  // working residual z - eta
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            double s = 0.0;
            for (SparseMatrix::InnerIterator it(x, j); it; ++it) s += v[it.row()] * it.value() * it.value();
            h[j] = s / nd;
        }
        const double vsum = v.sum();

        // Coordinate descent on the penalized quadratic model.
        double b0 = fit.intercept;
        Vector b = beta;
        // Solve the quadratic model only as accurately as the current KKT gap warrants.
        const double inner_tol = std::max(1e-3 * kkt * kkt, 1e-24);
        auto sweep = [&](bool active_only) {
            double max_change = 0.0;
            const double d0 = v.dot(r) / vsum;
            if (d0 != 0.0) {
                b0 += d0;
                r.array() -= d0;
                max_change = std::max(max_change, vsum / nd * d0 * d0);
            }
            for (Eigen::Index j = 0; j < p; ++j) {
                if (!nonzero_col[static_cast<std::size_t>(j)] || h[j] <= 0.0) continue;
                if (active_only && b[j] == 0.0) continue;
                double g = 0.0;
                for (SparseMatrix::InnerIterator it(x, j); it; ++it) g += v[it.row()] * it.value() * r[it.row()];
                g /= nd;
                const double bj = soft_threshold(g + h[j] * b[j], lambda) / h[j];
                const double delta = bj - b[j];
                if (delta != 0.0) {
                    for (SparseMatrix::InnerIterator it(x, j); it; ++it) r[it.row()] -= delta * it.value();
                    b[j] = bj;
                    max_change = std::max(max_change, h[j] * delta * delta);
                }
            }
            return max_change;
        };
        // Coordinate descent crawls on strongly correlated active columns (nested
        // indicators). Every few sweeps, jump toward the minimizer of the quadratic
        // model restricted to the active set with signs held fixed, stopping at the
        // first coefficient that would change sign. The model objective is convex
        // along that segment, so the step never increases it.
        // Returns true when the step was cut short by a sign change.
        auto active_newton = [&]() -> bool {
            std::vector<Eigen::Index> act;
            for (Eigen::Index j = 0; j < p; ++j)
                if (b[j] != 0.0) act.push_back(j);
            if (act.empty() || act.size() > kMaxNewtonActive) return false;
            const auto m = static_cast<Eigen::Index>(act.size()) + 1;
            std::vector<Eigen::Triplet<double>> trips;
            for (Eigen::Index i = 0; i < n; ++i) trips.emplace_back(static_cast<int>(i), 0, 1.0);
            for (Eigen::Index k = 1; k < m; ++k)
                for (SparseMatrix::InnerIterator it(x, act[static_cast<std::size_t>(k - 1)]); it; ++it)
                    trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(k), it.value());
            SparseMatrix xa(n, m);
            xa.setFromTriplets(trips.begin(), trips.end());
            const SparseMatrix wx = v.asDiagonal() * xa;
            const Matrix hess = Matrix(SparseMatrix(xa.transpose() * wx)) / nd;
            Vector rhs = wx.transpose() * r / nd;
            for (Eigen::Index k = 1; k < m; ++k) rhs[k] -= lambda * (b[act[static_cast<std::size_t>(k - 1)]] > 0 ? 1.0 : -1.0);
            const Eigen::LDLT<Matrix> ldlt(hess);
            if (ldlt.info() != Eigen::Success) return false;
            const Vector d = ldlt.solve(rhs);
            if (!d.allFinite() || (hess * d - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) return false;
            double t = 1.0;
            Eigen::Index stop = -1;
            for (Eigen::Index k = 1; k < m; ++k) {
                const double bj = b[act[static_cast<std::size_t>(k - 1)]];
                if (bj * (bj + d[k]) < 0.0 && -bj / d[k] < t) {
                    t = -bj / d[k];
                    stop = k;
                }
            }
            b0 += t * d[0];
            for (Eigen::Index k = 1; k < m; ++k) b[act[static_cast<std::size_t>(k - 1)]] += t * d[k];
            r -= xa * (t * d);
            if (stop > 0) {
                // Snap the crossing coefficient to exactly zero.
                double& bj = b[act[static_cast<std::size_t>(stop - 1)]];
                r += xa.col(stop) * bj;
                bj = 0.0;
            }
            return stop > 0;
        };
        for (int s = 0; s < opts.max_inner_sweeps;) {
            const double full = sweep(false);
            ++s;
            if (full <= inner_tol) break;
            int since_newton = 0;
            while (s < opts.max_inner_sweeps) {
                ++s;
                if (sweep(true) <= inner_tol) break;
                if (++since_newton == kNewtonEvery) {
                    since_newton = 0;
                    for (int rep = 0; rep < kNewtonRepeats && active_newton(); ++rep) {
                    }
                }
            }
        }

        // Line search along the proximal Newton direction; F is convex so halving
        // eventually yields a non-increase.
        const Vector eta_quad = (y - mu).cwiseQuotient(v) - r + eta;  // model-implied new eta
        const Vector d_eta = eta_quad - eta;
        const Vector d_beta = b - beta;
        const double d_b0 = b0 - fit.intercept;
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 50; ++half) {
            const Vector eta_t = eta + t * d_eta;
            const Vector beta_t = beta + t * d_beta;
            const double obj_t = smooth_loss(y, eta_t) + lambda * beta_t.cwiseAbs().sum();
            if (obj_t <= objective) {
                eta = eta_t;
                beta = beta_t;
                fit.intercept += t * d_b0;
                objective = obj_t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (objective_trace) objective_trace->push_back(objective);
        if (!accepted) {
            fit.kkt_residual = kkt_residual_of(x, y, eta, beta, lambda);
            fit.converged = fit.kkt_residual <= opts.kkt_tol;
            break;
        }
    }
    if (!fit.converged) {
        // Exact zeros can drift by rounding in the line search; recompute on exit.
        fit.kkt_residual = kkt_residual_of(x, y, eta, beta, lambda);
        fit.converged = fit.kkt_residual <= opts.kkt_tol;
    }
    fit.objective = objective;
    return fit;
}

LassoPath fit_lasso_logistic(const SparseMatrix& x, const Vector& y, std::vector<double> lambda_grid,
                             const FoldScheme& folds, const LassoOptions& opts) {
    if (lambda_grid.empty()) throw InputError("fit_lasso_logistic: empty lambda grid");
    if (y.size() != x.rows()) throw InputError("fit_lasso_logistic: row mismatch");
    if (y.size() > 0 && (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0))
        throw InputError("fit_lasso_logistic: responses must lie in [0,1]");
    std::sort(lambda_grid.begin(), lambda_grid.end(), std::greater<>());

    LassoPath path;
    path.lambdas = lambda_grid;
    path.cv_risk.assign(lambda_grid.size(), 0.0);

    if (lambda_grid.size() > 1 && folds.V > 1) {
        if (folds.n() != static_cast<std::size_t>(y.size()))
            throw InputError("fit_lasso_logistic: fold scheme does not match the data");
        LassoOptions cv_opts = opts;
        cv_opts.kkt_tol = opts.cv_kkt_tol;
        struct FoldData {
            SparseMatrix xt, xv;
            Vector yt, yv;
            LassoFit warm;
        };
        std::vector<FoldData> fd;
        for (int v = 0; v < folds.V; ++v) {
            const auto train = folds.training(v);
            const auto valid = folds.validation(v);
            if (train.empty()) throw FoldError(v, "empty training set");
            fd.push_back({select_rows(x, train), select_rows(x, valid), select(y, train), select(y, valid), {}});
        }
        // Folds advance along the grid together so the path can stop once the
        // held-out risk has not improved for `cv_patience` consecutive lambdas.
        std::size_t best = 0, computed = 0;
        for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
            double loss = 0.0;
            for (auto& f : fd) {
                f.warm = solve_lasso_logistic(f.xt, f.yt, lambda_grid[k], k == 0 ? nullptr : &f.warm, cv_opts);
                const Vector eta = f.warm.linear_predictor(f.xv);
                for (Eigen::Index i = 0; i < f.yv.size(); ++i) loss += log1pexp(eta[i]) - f.yv[i] * eta[i];
            }
            path.cv_risk[k] = loss / static_cast<double>(y.size());
            computed = k + 1;
            if (path.cv_risk[k] < path.cv_risk[best]) best = k;
            if (opts.cv_patience > 0 && k >= best + static_cast<std::size_t>(opts.cv_patience)) break;
        }
        path.lambdas.resize(computed);
        path.cv_risk.resize(computed);
        path.chosen = best;
    } else {
        path.chosen = lambda_grid.size() - 1;
    }

    LassoFit warm;
    for (std::size_t k = 0; k <= path.chosen; ++k) {
        const bool last = k == path.chosen;
        LassoOptions step_opts = opts;
        if (!last) step_opts.kkt_tol = opts.cv_kkt_tol;
        warm = solve_lasso_logistic(x, y, lambda_grid[k], k == 0 ? nullptr : &warm, step_opts,
                                    last && opts.record_objective ? &path.objective_trace : nullptr);
    }
    path.fit = warm;
    return path;
}

}  // namespace ctmle
