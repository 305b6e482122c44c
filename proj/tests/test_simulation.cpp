#include "ctmle/dgp.hpp"
#include "ctmle/error.hpp"
#include "ctmle/kde.hpp"
#include "ctmle/monte_carlo.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace ctmle;

namespace {

McConfig small_sim1(int reps) {
    McConfig cfg;
    cfg.dgp = Dgp::sim1;
    cfg.n = 200;
    cfg.gamma = 2.0;
    cfg.reps = reps;
    cfg.seed = 7;
    cfg.estimators = default_mc_estimators(Dgp::sim1);
    for (auto& e : cfg.estimators) e.spec.cfg.compute_variance = false;
    cfg.kde_points = 64;
    return cfg;
}

double trapezoid(const KdeCurve& c) {
    double s = 0.0;
    for (std::size_t i = 1; i < c.grid.size(); ++i)
        s += 0.5 * (c.density[i] + c.density[i - 1]) * (c.grid[i] - c.grid[i - 1]);
    return s;
}

}  // namespace

TEST_CASE("simulation 1 draws") {
    const auto sim = dgp_sim1(5000, 4.0, 1);
    const Matrix& w = sim.data.w();
    CHECK(w.leftCols(7).minCoeff() >= -1.5);
    CHECK(w.leftCols(7).maxCoeff() <= 1.5);
    CHECK((w.col(7).array() * (1.0 - w.col(7).array())).abs().maxCoeff() == 0.0);
    CHECK(sim.truth.g0.minCoeff() > 0.0);
    CHECK(sim.truth.g0.maxCoeff() < 1.0);
    CHECK(sim.truth.ate == 1.0);
    CHECK((sim.truth.q1 - sim.truth.q0).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    // E[s(W)] = 0, so the arm means are 1 and 0.
    CHECK(std::abs(sim.truth.q1.mean() - 1.0) < 0.05);
    CHECK(std::abs(sim.truth.q0.mean()) < 0.05);
    CHECK(dgp_truth(Dgp::sim1, "ate") == 1.0);
    CHECK(dgp_truth(Dgp::sim1, "tsm") == 1.0);
}

TEST_CASE("simulation 1 draws are reproducible") {
    const auto a = dgp_sim1(100, 1.0, 9);
    const auto b = dgp_sim1(100, 1.0, 9);
    CHECK(a.data.w() == b.data.w());
    CHECK(a.data.y() == b.data.y());
    CHECK(a.data.a() == b.data.a());
}

TEST_CASE("simulation 2 draws") {
    const auto sim = dgp_sim2(20000, 2);
    const Matrix& w = sim.data.w();
    const double edge = 2.0 / (1.0 + std::exp(0.5));
    CHECK(w.col(1).minCoeff() >= 10.0 - edge);
    CHECK(w.col(1).maxCoeff() <= 10.0 + edge);
    CHECK(w.col(0).minCoeff() >= std::exp(0.25));
    CHECK(w.col(0).maxCoeff() <= std::exp(1.0));
    CHECK(sim.truth.ate == 0.0);
    CHECK(sim.truth.psi1 == doctest::Approx(244.25));
    CHECK(std::abs(sim.truth.q1.mean() - 244.25) < 0.5);
    CHECK(sim.truth.q1 == sim.truth.q0);
    CHECK(dgp_truth(Dgp::sim2, "tsm") == doctest::Approx(244.25));
    CHECK_THROWS_AS(parse_dgp("sim3"), InputError);
}

TEST_CASE("KDE integrates to one and is symmetric for symmetric samples") {
    std::vector<double> s;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int i = 0; i < 500; ++i) {
        const double x = z(rng);
        s.push_back(x);
        s.push_back(-x);
    }
    const auto grid = default_kde_grid(s, 1001);
    const auto c = kde(s, grid);
    CHECK(trapezoid(c) == doctest::Approx(1.0).epsilon(1e-3));
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(c.density[i] == doctest::Approx(c.density[grid.size() - 1 - i]).epsilon(1e-9));
}

TEST_CASE("KDE of many normal draws peaks near the normal density") {
    std::vector<double> s;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    for (int i = 0; i < 20000; ++i) s.push_back(z(rng));
    const auto c = kde(s, {0.0});
    CHECK(std::abs(c.density[0] - 1.0 / std::sqrt(2.0 * M_PI)) < 0.02);
}

TEST_CASE("KDE parallel matches serial; bandwidth edge cases") {
    std::vector<double> s{0.1, 0.5, 0.5, 0.9, 2.0, -1.0};
    const auto grid = default_kde_grid(s, 100);
    const auto p = kde(s, grid), q = kde_serial(s, grid);
    CHECK(p.density == q.density);
    CHECK_THROWS_AS(silverman_bandwidth({1.0}), InputError);
    CHECK_THROWS_AS(silverman_bandwidth({1.0, 1.0, 1.0}), InputError);
    // IQR zero falls back to the standard deviation.
    CHECK(silverman_bandwidth({0.0, 0.0, 0.0, 0.0, 0.0, 1.0}) > 0.0);
}

TEST_CASE("Monte Carlo summaries of known estimates") {
    const auto s = summarize_estimates({1.0, 3.0}, {0.1, 0.1}, 1.0, 0.95, 100, 16);
    CHECK(s.bias == doctest::Approx(1.0));
    CHECK(s.variance == doctest::Approx(1.0));
    CHECK(s.mse == doctest::Approx(2.0));
    CHECK(s.oracle_coverage == doctest::Approx(0.5));
    CHECK(s.estimated_se_coverage == doctest::Approx(0.5));

    const auto exact = summarize_estimates({2.0, 2.0, 2.0}, {0.0, 0.0, 0.0}, 2.0, 0.95, 10, 16);
    CHECK(exact.bias == 0.0);
    CHECK(exact.variance == 0.0);
    CHECK(exact.mse == 0.0);

    const auto failed = summarize_estimates({1.0, NAN, 3.0}, {0.1, NAN, 0.1}, 2.0, 0.95, 10, 16);
    CHECK(failed.failures == 1);
    CHECK(failed.bias == doctest::Approx(0.0));
}

TEST_CASE("MSE decomposes into bias and variance") {
    std::vector<double> est, se;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.3, 2.0);
    for (int i = 0; i < 1000; ++i) {
        est.push_back(z(rng));
        se.push_back(1.0);
    }
    const auto s = summarize_estimates(est, se, 0.0, 0.95, 50, 32);
    double mse = 0.0;
    for (double e : est) mse += e * e;
    mse /= static_cast<double>(est.size());
    CHECK(s.mse == doctest::Approx(mse).epsilon(1e-10));
    CHECK(s.kde.grid.size() == 32);
}

TEST_CASE("Monte Carlo reports do not depend on the thread count") {
    auto cfg = small_sim1(6);
    const auto serial = run_mc_serial(cfg);
    for (int threads : {1, 2, 3}) {
        cfg.threads = threads;
        const auto par = run_mc(cfg);
        REQUIRE(par.estimators.size() == serial.estimators.size());
        for (std::size_t e = 0; e < par.estimators.size(); ++e) {
            CHECK(par.estimators[e].estimates == serial.estimators[e].estimates);
            CHECK(par.estimators[e].mse == serial.estimators[e].mse);
            CHECK(par.estimators[e].kde.density == serial.estimators[e].kde.density);
        }
    }
    CHECK(serial.truth == 1.0);
    CHECK(serial.estimators[0].relative_efficiency ==
          doctest::Approx(serial.estimators[0].mse / serial.estimators[1].mse));
    CHECK(serial.estimators[1].relative_efficiency == doctest::Approx(1.0));
}

TEST_CASE("Monte Carlo needs at least two replicates") {
    CHECK_THROWS_AS(run_mc(small_sim1(1)), InputError);
}

TEST_CASE("remainder diagnostic for the treated mean") {
    auto cfg = small_sim1(3);
    cfg.target = "tsm";
    cfg.remainder = true;
    cfg.remainder_draws = 2000;
    const auto r = run_mc(cfg);
    for (const auto& s : r.estimators) CHECK(std::isfinite(s.mean_remainder));
}
