#include "ctmle/eif.hpp"
#include "ctmle/error.hpp"
#include "ctmle/rng.hpp"

#include "doctest.h"

#include <random>

using namespace ctmle;

TEST_CASE("plug-in estimate is the mean prediction") {
    CHECK(plugin_estimate(Vector::Constant(5, 0.3)) == doctest::Approx(0.3));
    CHECK(plugin_estimate(Vector{{0.0, 1.0}}) == 0.5);
    CHECK(plugin_estimate(Vector{{0.2, 0.4, 0.9}}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(plugin_estimate(Vector()), InputError);
}

TEST_CASE("EIF at simple points") {
    // Untreated unit whose prediction equals psi.
    CHECK(eif_eval({Vector{{0.4}}, Vector{{0.5}}, IntVector{{0}}, Vector{{0.9}}, 0.4})[0] == 0.0);
    // No residual and prediction at psi.
    for (int a : {0, 1}) CHECK(eif_eval({Vector{{0.4}}, Vector{{0.5}}, IntVector{{a}}, Vector{{0.4}}, 0.4})[0] == 0.0);
    // 1/0.25 * (1 - 0.5) + 0.5 - 0.4.
    CHECK(eif_eval({Vector{{0.5}}, Vector{{0.25}}, IntVector{{1}}, Vector{{1.0}}, 0.4})[0] == doctest::Approx(2.1));
}

TEST_CASE("EIF rejects zero propensity for a treated unit") {
    CHECK_THROWS_AS(eif_eval({Vector{{0.5}}, Vector{{0.0}}, IntVector{{1}}, Vector{{1.0}}, 0.4}), EstimationError);
    CHECK_NOTHROW(eif_eval({Vector{{0.5}}, Vector{{0.0}}, IntVector{{0}}, Vector{{1.0}}, 0.4}));
}

TEST_CASE("centering terms cancel when psi is the plug-in") {
    auto rng = make_rng(21, 0);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::bernoulli_distribution b(0.5);
    const int n = 50;
    EifInputs in{Vector(n), Vector(n), IntVector(n), Vector(n), 0.0};
    for (int i = 0; i < n; ++i) {
        in.or_pred[i] = u(rng);
        in.ps_pred[i] = u(rng);
        in.a[i] = b(rng);
        in.y[i] = u(rng);
    }
    in.psi = plugin_estimate(in.or_pred);
    double ipw = 0.0;
    for (int i = 0; i < n; ++i) ipw += in.a[i] / in.ps_pred[i] * (in.y[i] - in.or_pred[i]);
    CHECK(eif_eval(in).mean() == doctest::Approx(ipw / n).epsilon(1e-13));

    // Joint permutation.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = (i * 13) % n;
    EifInputs p = in;
    for (int i = 0; i < n; ++i) {
        p.or_pred[i] = in.or_pred[perm[i]];
        p.ps_pred[i] = in.ps_pred[perm[i]];
        p.a[i] = in.a[perm[i]];
        p.y[i] = in.y[perm[i]];
    }
    const Vector d = eif_eval(in), dp = eif_eval(p);
    for (int i = 0; i < n; ++i) CHECK(dp[i] == d[perm[i]]);
}

TEST_CASE("remainder vanishes when either nuisance is exact") {
    const Vector q{{0.2, 0.5, 0.7}}, q0{{0.3, 0.4, 0.6}}, g{{0.3, 0.6, 0.9}}, g0{{0.2, 0.5, 0.8}};
    CHECK(remainder_r2(q, q0, g, g) == 0.0);
    CHECK(remainder_r2(q, q, g, g0) == 0.0);
}

TEST_CASE("remainder two-point example") {
    // (0.5 - 0.25) / 0.5 * 0.1 at both points, equal weights.
    const double r = remainder_r2(Vector{{0.6, 0.7}}, Vector{{0.5, 0.6}}, Vector{{0.5, 0.5}}, Vector{{0.25, 0.25}});
    CHECK(r == doctest::Approx(0.05));
}

TEST_CASE("remainder is bilinear in its two factors") {
    const Vector g{{0.4, 0.5, 0.8}}, g0{{0.3, 0.6, 0.7}}, q0{{0.2, 0.3, 0.4}};
    const Vector dq{{0.1, -0.05, 0.02}};
    const double base = remainder_r2(q0 + dq, q0, g, g0);
    CHECK(remainder_r2(q0 + 2 * dq, q0, g, g0) == doctest::Approx(2 * base));
    CHECK_THROWS_AS(remainder_r2(q0, q0, g, Vector{{0.1}}), InputError);
}
