#include "ctmle/error.hpp"
#include "ctmle/folds.hpp"
#include "ctmle/glm.hpp"
#include "ctmle/hal_basis.hpp"
#include "ctmle/lasso.hpp"
#include "ctmle/learner.hpp"
#include "ctmle/numeric.hpp"
#include "ctmle/rng.hpp"
#include "ctmle/splines.hpp"

#include "doctest.h"

#include <Eigen/Dense>
#include <random>

using namespace ctmle;

namespace {

// Plain Newton-Raphson on the logistic log-likelihood with a dense Hessian.
Vector newton_logistic(const Matrix& x, const Vector& y) {
    Matrix d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    Vector b = Vector::Zero(d.cols());
    for (int it = 0; it < 100; ++it) {
        Vector mu(d.rows());
        for (Eigen::Index i = 0; i < d.rows(); ++i) mu[i] = 1.0 / (1.0 + std::exp(-d.row(i).dot(b)));
        const Vector g = d.transpose() * (y - mu);
        const Matrix h = d.transpose() * (mu.array() * (1 - mu.array())).matrix().asDiagonal() * d;
        const Vector step = h.fullPivLu().solve(g);
        b += step;
        if (step.norm() < 1e-14) break;
    }
    return b;
}

// FISTA on the lasso-logistic objective; intercept unpenalized.
std::pair<double, Vector> prox_grad_lasso(const Matrix& x, const Vector& y, double lambda) {
    const double n = static_cast<double>(x.rows());
    Matrix d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    const double L = 0.25 * Eigen::JacobiSVD<Matrix>(d).singularValues()[0] * Eigen::JacobiSVD<Matrix>(d).singularValues()[0] / n;
    Vector b = Vector::Zero(d.cols()), z = b;
    double t = 1.0;
    for (int it = 0; it < 200000; ++it) {
        Vector mu(d.rows());
        for (Eigen::Index i = 0; i < d.rows(); ++i) mu[i] = expit(d.row(i).dot(z));
        const Vector g = d.transpose() * (mu - y) / n;
        Vector nb = z - g / L;
        for (Eigen::Index j = 1; j < nb.size(); ++j) {
            const double v = nb[j];
            nb[j] = std::copysign(std::max(std::abs(v) - lambda / L, 0.0), v);
        }
        const double nt = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        z = nb + (t - 1) / nt * (nb - b);
        if ((nb - b).norm() < 1e-15) {
            b = nb;
            break;
        }
        b = nb;
        t = nt;
    }
    return {b[0], b.tail(x.cols())};
}

double objective_dense(const Matrix& x, const Vector& y, double b0, const Vector& b, double lambda) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double eta = b0 + x.row(i).dot(b);
        s += log1pexp(eta) - y[i] * eta;
    }
    return s / static_cast<double>(x.rows()) + lambda * b.lpNorm<1>();
}

SparseMatrix to_sparse(const Matrix& x) { return x.sparseView(); }

void random_logistic_problem(std::uint64_t seed, int n, int p, Matrix& x, Vector& y) {
    auto rng = make_rng(seed, 0);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u;
    x.resize(n, p);
    for (auto& v : x.reshaped()) v = nd(rng);
    y.resize(n);
    for (int i = 0; i < n; ++i) y[i] = u(rng) < expit(0.5 * x(i, 0) - 0.3 * x(i, p - 1)) ? 1.0 : 0.0;
}

}  // namespace

TEST_CASE("intercept-only logistic on balanced data has intercept 0") {
    const Vector y{{0, 1, 0, 1, 1, 0}};
    const auto fit = fit_glm(Matrix(6, 0), y, Link::logit);
    CHECK(fit.converged);
    CHECK(std::abs(fit.coefficients[0]) < 1e-12);
}

TEST_CASE("identity link reproduces an exact linear relation") {
    Matrix x(5, 1);
    x << 1, 2, 3, 4, 7;
    const auto fit = fit_glm(x, x.col(0), Link::identity);
    CHECK(std::abs(fit.coefficients[0]) < 1e-10);
    CHECK(std::abs(fit.coefficients[1] - 1.0) < 1e-10);
}

TEST_CASE("identity link matches the normal equations") {
    auto rng = make_rng(2, 0);
    std::normal_distribution<double> nd;
    Matrix x(40, 3);
    for (auto& v : x.reshaped()) v = nd(rng);
    Vector y(40);
    for (auto& v : y) v = nd(rng);
    Matrix d(40, 4);
    d.col(0).setOnes();
    d.rightCols(3) = x;
    const Vector ne = (d.transpose() * d).ldlt().solve(d.transpose() * y);
    const auto fit = fit_glm(x, y, Link::identity);
    CHECK((fit.coefficients - ne).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("logistic IRLS agrees with an independent Newton solver on an 10-row problem") {
    // The last two rows repeat the first two with flipped labels, ruling out separation.
    Matrix x(10, 2);
    x << 0.5, 1.0, -1.2, 0.3, 0.8, -0.7, 1.5, 0.2, -0.4, -1.1, 0.1, 0.9, -2.0, 0.4, 1.1, -0.6, 0.5, 1.0, -1.2, 0.3;
    const Vector y{{1, 0, 1, 1, 0, 0, 0, 1, 0, 1}};
    const auto fit = fit_glm(x, y, Link::logit);
    const Vector oracle = newton_logistic(x, y);
    CHECK(fit.converged);
    CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(fit.score_norm <= 1e-8);
}

TEST_CASE("logistic offsets enter additively") {
    Matrix x(6, 1);
    x << -1, -0.5, 0, 0.5, 1, 1.5;
    const Vector y{{0, 1, 0, 1, 1, 1}};
    GlmOptions o;
    o.offset = Vector::Constant(6, 0.7);
    const auto with = fit_glm(x, y, Link::logit, o);
    const auto without = fit_glm(x, y, Link::logit);
    CHECK(std::abs(with.coefficients[0] + 0.7 - without.coefficients[0]) < 1e-8);
    CHECK(std::abs(with.coefficients[1] - without.coefficients[1]) < 1e-8);
}

TEST_CASE("logit predictions stay in (0,1)") {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    const auto fit = fit_glm(x, Vector{{0, 0, 1, 1.0}}, Link::logit, {.throw_on_separation = false});
    Matrix far(3, 1);
    far << -1e6, 0, 1e6;
    const Vector p = fit.predict(far);
    CHECK((p.array() > 0.0).all());
    CHECK((p.array() < 1.0).all());
}

TEST_CASE("separation raises or is flagged") {
    Matrix x(6, 1);
    x << 1, 2, 3, 4, 5, 6;
    const Vector y{{0, 0, 0, 1, 1, 1}};
    CHECK_THROWS_AS(fit_glm(x, y, Link::logit), SeparationError);
    GlmOptions o;
    o.throw_on_separation = false;
    const auto fit = fit_glm(x, y, Link::logit, o);
    CHECK(fit.separated);
    CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("collinear columns are dropped with a warning") {
    Matrix x(6, 2);
    x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
    const Vector y{{1.0, 2.1, 2.9, 4.2, 5.0, 5.8}};
    const auto fit = fit_glm(x, y, Link::identity);
    REQUIRE(fit.dropped.size() == 2);
    CHECK(fit.dropped[1]);
    CHECK(fit.coefficients[2] == 0.0);
    CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("natural spline with df=1 is a single monotone column") {
    Vector x(20);
    for (int i = 0; i < 20; ++i) x[i] = i * 0.3;
    const auto sd = natural_spline_basis(x, 1);
    REQUIRE(sd.design.cols() == 1);
    for (int i = 1; i < 20; ++i) CHECK(sd.design(i, 0) > sd.design(i - 1, 0));
}

TEST_CASE("natural spline on constant input is an error") {
    CHECK_THROWS_AS(natural_spline_basis(Vector::Constant(5, 2.0), 2), InputError);
}

TEST_CASE("natural spline with df=2 on 100 equispaced points has full column rank") {
    Vector x(100);
    for (int i = 0; i < 100; ++i) x[i] = i / 99.0;
    const auto sd = natural_spline_basis(x, 2);
    REQUIRE(sd.design.cols() == 2);
    Matrix d(100, 3);
    d.col(0).setOnes();
    d.rightCols(2) = sd.design;
    Eigen::FullPivLU<Matrix> lu(d);
    CHECK(lu.rank() == 3);
}

TEST_CASE("natural spline falls back when distinct values are scarce") {
    const Vector x{{0, 1, 0, 1, 1, 0}};
    const auto sd = natural_spline_basis(x, 3);
    CHECK(sd.design.cols() == 1);
    CHECK_FALSE(sd.warnings.empty());
}

TEST_CASE("natural spline is linear beyond the boundary knots") {
    Vector x(50);
    for (int i = 0; i < 50; ++i) x[i] = i / 49.0;
    const auto sd = natural_spline_basis(x, 3);
    const Matrix out = sd.basis.evaluate(Vector{{2.0, 3.0, 4.0}});
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        CHECK(std::abs((out(2, j) - out(1, j)) - (out(1, j) - out(0, j))) < 1e-9);
}

TEST_CASE("lasso at lambda 0 matches the unpenalized logistic fit") {
    Matrix x;
    Vector y;
    random_logistic_problem(11, 60, 3, x, y);
    const auto glm = fit_glm(x, y, Link::logit);
    const auto fit = solve_lasso_logistic(to_sparse(x), y, 0.0);
    CHECK(std::abs(fit.intercept - glm.coefficients[0]) < 1e-4);
    CHECK((fit.coefficients - glm.coefficients.tail(3)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("lambda at or above lambda_max zeroes every slope") {
    Matrix x;
    Vector y;
    random_logistic_problem(12, 50, 4, x, y);
    const SparseMatrix xs = to_sparse(x);
    // Formula oracle.
    double lmax = 0.0;
    for (int j = 0; j < 4; ++j) lmax = std::max(lmax, std::abs(x.col(j).dot((y.array() - y.mean()).matrix())) / 50.0);
    CHECK(lasso_lambda_max(xs, y) == doctest::Approx(lmax).epsilon(1e-12));
    for (double lam : {lmax, 1.5 * lmax}) {
        const auto fit = solve_lasso_logistic(xs, y, lam);
        CHECK((fit.coefficients.array() == 0.0).all());
        CHECK(std::abs(fit.intercept - logit(y.mean())) < 1e-6);
    }
}

TEST_CASE("lasso objective agrees with a proximal-gradient oracle on a 20-row problem") {
    Matrix x;
    Vector y;
    random_logistic_problem(13, 20, 3, x, y);
    const double lambda = 0.03;
    const auto fit = solve_lasso_logistic(to_sparse(x), y, lambda);
    const auto [b0, b] = prox_grad_lasso(x, y, lambda);
    const double oracle = objective_dense(x, y, b0, b, lambda);
    CHECK(std::abs(lasso_objective(to_sparse(x), y, fit) - oracle) < 1e-6);
    CHECK(fit.kkt_residual <= 1e-6);
}

TEST_CASE("lasso objective is non-increasing across iterations") {
    Matrix x;
    Vector y;
    random_logistic_problem(14, 80, 6, x, y);
    std::vector<double> trace;
    LassoOptions o;
    o.record_objective = true;
    solve_lasso_logistic(to_sparse(x), y, 0.01, nullptr, o, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1] + 1e-14);
}

TEST_CASE("cross-validated lasso path") {
    Matrix x;
    Vector y;
    random_logistic_problem(15, 100, 5, x, y);
    const SparseMatrix xs = to_sparse(x);
    CHECK_THROWS_AS(fit_lasso_logistic(xs, y, {}, FoldScheme::make(100, 5, 1)), InputError);
    const auto grid = lasso_lambda_grid(lasso_lambda_max(xs, y), 10, 1e-2);
    LassoOptions full;
    full.cv_patience = 0;
    const auto path = fit_lasso_logistic(xs, y, grid, FoldScheme::make(100, 5, 1), full);
    CHECK(path.cv_risk.size() == 10);
    CHECK(path.fit.lambda == path.lambdas[path.chosen]);
    for (std::size_t k = 0; k < path.cv_risk.size(); ++k) CHECK(path.cv_risk[path.chosen] <= path.cv_risk[k]);
    CHECK(path.fit.kkt_residual <= 1e-6);

    // Early stopping visits a prefix of the grid and keeps the best lambda seen.
    const auto early = fit_lasso_logistic(xs, y, grid, FoldScheme::make(100, 5, 1));
    REQUIRE(early.cv_risk.size() <= 10);
    for (std::size_t k = 0; k < early.cv_risk.size(); ++k) CHECK(early.cv_risk[k] == doctest::Approx(path.cv_risk[k]));
    if (early.cv_risk.size() < 10) CHECK(early.chosen + 4 == early.cv_risk.size());
    if (path.chosen < early.cv_risk.size()) CHECK(early.chosen == path.chosen);
}

TEST_CASE("hal basis column counts") {
    Vector w(30);
    for (int i = 0; i < 30; ++i) w[i] = i;
    HalBasisOptions one{1, 2, 4000};
    CHECK(hal_lite_basis(Matrix(w), one).basis.n_columns() == 2);

    Matrix b(10, 1);
    b << 0, 1, 0, 1, 1, 0, 0, 1, 1, 0;
    CHECK(hal_lite_basis(b, {1, 10, 4000}).basis.n_columns() == 1);

    auto rng = make_rng(4, 0);
    std::uniform_real_distribution<double> u;
    Matrix w2(200, 2);
    for (auto& v : w2.reshaped()) v = u(rng);
    // 2 covariates x 3 knots main terms plus 3 x 3 pairwise products.
    CHECK(hal_lite_basis(w2, {2, 3, 4000}).basis.n_columns() == 2 * 3 + 3 * 3);
}

TEST_CASE("hal basis truncates knots to the column budget") {
    auto rng = make_rng(5, 0);
    std::uniform_real_distribution<double> u;
    Matrix w(100, 3);
    for (auto& v : w.reshaped()) v = u(rng);
    const auto hd = hal_lite_basis(w, {2, 10, 50});
    CHECK(hd.basis.n_columns() <= 50);
    CHECK_FALSE(hd.warnings.empty());
    CHECK(hd.design.cols() == static_cast<Eigen::Index>(hd.basis.n_columns()));
}

TEST_CASE("cv_select with a single candidate returns it") {
    Matrix x = Matrix::Random(20, 1);
    Vector y = (x.col(0).array() > 0).cast<double>();
    const auto sel = cv_select({LearnerSpec::parse("mean")}, x, y, FoldScheme::make(20, 4, 1), Loss::squared);
    CHECK(sel.chosen == 0);
    CHECK(sel.risks.size() == 1);
}

TEST_CASE("cv_select errors when every candidate fails") {
    Matrix x = Matrix::Random(20, 1);
    Vector y = Vector::Constant(20, 5.0);
    CHECK_THROWS_AS(cv_select({LearnerSpec::parse("glm"), LearnerSpec::parse("hal")}, x, y, FoldScheme::make(20, 4, 1),
                              Loss::squared),
                    EstimationError);
}

TEST_CASE("cv_select picks the true model with high probability") {
    int hits = 0;
    for (int run = 0; run < 100; ++run) {
        auto rng = make_rng(1000 + run, 0);
        std::normal_distribution<double> nd;
        std::uniform_real_distribution<double> u;
        Matrix x(500, 1);
        Vector y(500);
        for (int i = 0; i < 500; ++i) {
            x(i, 0) = nd(rng);
            y[i] = u(rng) < expit(0.8 * x(i, 0)) ? 1.0 : 0.0;
        }
        const auto sel = cv_select({LearnerSpec::parse("glm"), LearnerSpec::parse("mean")}, x, y,
                                   FoldScheme::make(500, 5, 7 + run), Loss::neg_log_likelihood);
        hits += sel.chosen == 0;
    }
    CHECK(hits > 95);
}

TEST_CASE("cross_fit leave-one-out on three rows") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    const Vector y{{0.1, 0.4, 0.7}};
    const auto folds = FoldScheme::interleaved(3, 3);
    const Vector pred = cross_fit(LearnerSpec::parse("mean"), x, y, folds);
    CHECK(pred[0] == doctest::Approx(0.55));
    CHECK(pred[1] == doctest::Approx(0.4));
    CHECK(pred[2] == doctest::Approx(0.25));
}

TEST_CASE("cross_fit of a constant outcome returns the constant") {
    Matrix x = Matrix::Random(30, 2);
    const Vector y = Vector::Constant(30, 0.3);
    const Vector pred = cross_fit(LearnerSpec::parse("glm:link=identity"), x, y, FoldScheme::make(30, 5, 2));
    CHECK((pred.array() - 0.3).abs().maxCoeff() < 1e-10);
}

TEST_CASE("cross_fit intercept-only predictions are training-fold means") {
    auto rng = make_rng(6, 0);
    std::uniform_real_distribution<double> u;
    Vector y(100);
    for (auto& v : y) v = u(rng);
    const Matrix x = Matrix::Zero(100, 1);
    const auto folds = FoldScheme::make(100, 5, 3);
    const Vector pred = cross_fit(LearnerSpec::parse("mean"), x, y, folds);
    for (int i = 0; i < 100; ++i) {
        double s = 0.0;
        int c = 0;
        for (int j = 0; j < 100; ++j)
            if (folds.assignment[static_cast<std::size_t>(j)] != folds.assignment[static_cast<std::size_t>(i)]) {
                s += y[j];
                ++c;
            }
        CHECK(pred[i] == doctest::Approx(s / c).epsilon(1e-12));
    }
}

TEST_CASE("cross_fit names the fold without eligible training rows") {
    Matrix x = Matrix::Random(6, 1);
    const Vector y{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}};
    FoldScheme folds = FoldScheme::interleaved(6, 2);
    IntVector treated{{1, 0, 1, 0, 1, 0}};  // every treated row sits in fold 0, so fold 0 trains on none
    try {
        cross_fit(LearnerSpec::parse("mean"), x, y, folds, treated);
        FAIL("expected a fold error");
    } catch (const FoldError& e) {
        CHECK(e.fold() == 0);
        CHECK(std::string(e.what()).find("fold 0") != std::string::npos);
    }
}

TEST_CASE("cross_fit is equivariant to row permutation") {
    auto rng = make_rng(8, 0);
    std::normal_distribution<double> nd;
    Matrix x(40, 2);
    for (auto& v : x.reshaped()) v = nd(rng);
    Vector y = x.col(0) + 0.5 * x.col(1);
    const auto folds = FoldScheme::make(40, 4, 9);
    const Vector pred = cross_fit(LearnerSpec::parse("glm:link=identity"), x, y, folds);
    std::vector<std::size_t> perm(40);
    for (std::size_t i = 0; i < 40; ++i) perm[i] = (i * 7) % 40;
    FoldScheme pf = folds;
    for (std::size_t i = 0; i < 40; ++i) pf.assignment[i] = folds.assignment[perm[i]];
    const Vector pp = cross_fit(LearnerSpec::parse("glm:link=identity"), select_rows(x, perm), select_rows(y, perm), pf);
    for (std::size_t i = 0; i < 40; ++i) CHECK(std::abs(pp[static_cast<Eigen::Index>(i)] - pred[static_cast<Eigen::Index>(perm[i])]) < 1e-10);
}

TEST_CASE("learner specs parse and print") {
    const auto s = LearnerSpec::parse("hal:order=1,knots=5");
    CHECK(s.kind == LearnerKind::hal);
    CHECK(s.hal.max_interaction == 1);
    CHECK(s.hal.max_knots_per_dim == 5);
    CHECK(LearnerSpec::parse(s.to_string()).to_string() == s.to_string());
    const auto sel = LearnerSpec::parse("select:glm|mean|spline:df=3");
    CHECK(sel.candidates.size() == 3);
    CHECK_THROWS_AS(LearnerSpec::parse("forest"), InputError);
    CHECK_THROWS_AS(LearnerSpec::parse("glm:bogus=1"), InputError);
}

TEST_CASE("identical hal fits are shared, distinct ones are not") {
    auto rng = make_rng(12, 0);
    std::uniform_real_distribution<double> u;
    Matrix w(80, 2);
    for (auto& v : w.reshaped()) v = u(rng);
    Vector y(80);
    for (int i = 0; i < 80; ++i) y[i] = w(i, 0) > 0.5 ? 0.8 : 0.2;
    const auto spec = LearnerSpec::parse("hal:knots=4");
    const auto a = fit_learner(spec, w, y, 3);
    CHECK(fit_learner(spec, w, y, 3) == a);
    CHECK(fit_learner(spec, w, y, 4) != a);
    CHECK(fit_learner(LearnerSpec::parse("hal:knots=5"), w, y, 3) != a);
    Vector y2 = y;
    y2[0] = 0.5;
    const auto b = fit_learner(spec, w, y2, 3);
    CHECK(b != a);
    CHECK(b->predict(w) != a->predict(w));
}
