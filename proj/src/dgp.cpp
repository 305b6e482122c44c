#include "ctmle/dgp.hpp"

#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"

#include <cmath>
#include <random>

namespace ctmle {

Dgp parse_dgp(const std::string& name) {
    if (name == "sim1") return Dgp::sim1;
    if (name == "sim2") return Dgp::sim2;
    throw InputError("unknown dgp '" + name + "' (expected sim1 or sim2)");
}

std::string to_string(Dgp dgp) { return dgp == Dgp::sim1 ? "sim1" : "sim2"; }

namespace {

SimData finish(Matrix w, IntVector a, SimTruth t, std::vector<std::string> names) {
    const Eigen::Index n = a.size();
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = a[i] ? t.y1[i] : t.y0[i];
    SimData out;
    out.data = Dataset::from_raw(std::move(w), std::move(a), y, std::move(names));
    out.truth = std::move(t);
    return out;
}

}  // namespace

SimData dgp_sim1(std::size_t n, double gamma, Rng& rng) {
    if (n < 2) throw InputError("dgp_sim1: n must be at least 2");
    if (!(gamma >= 0.0)) throw InputError("dgp_sim1: gamma must be non-negative");
    std::uniform_real_distribution<double> unif(-1.5, 1.5);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    const auto m = static_cast<Eigen::Index>(n);
    Matrix w(m, 8);
    IntVector a(m);
    SimTruth t;
    t.g0.resize(m);
    t.q1.resize(m);
    t.q0.resize(m);
    t.y1.resize(m);
    t.y0.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) {
            w(i, j) = unif(rng);
            s += std::ldexp(w(i, j), -j);
        }
        w(i, 7) = coin(rng) ? 1.0 : 0.0;
        t.g0[i] = expit(0.5 * gamma - gamma * w(i, 7) + s);
        a[i] = u01(rng) < t.g0[i] ? 1 : 0;
        t.q1[i] = 1.0 - s;
        t.q0[i] = -s;
        t.y1[i] = t.q1[i] + noise(rng);
        t.y0[i] = t.q0[i] + noise(rng);
    }
    t.psi1 = 1.0;
    t.psi0 = 0.0;
    t.ate = 1.0;
    return finish(std::move(w), std::move(a), std::move(t), {"W1", "W2", "W3", "W4", "W5", "W6", "W7", "W8"});
}

SimData dgp_sim1(std::size_t n, double gamma, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    return dgp_sim1(n, gamma, rng);
}

SimData dgp_sim2(std::size_t n, Rng& rng) {
    if (n < 2) throw InputError("dgp_sim2: n must be at least 2");
    std::uniform_real_distribution<double> z1d(0.5, 2.0);
    std::uniform_real_distribution<double> zd(-2.0, 2.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    const auto m = static_cast<Eigen::Index>(n);
    Matrix w(m, 5);
    IntVector a(m);
    SimTruth t;
    t.g0.resize(m);
    t.q1.resize(m);
    t.q0.resize(m);
    t.y1.resize(m);
    t.y0.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double z1 = z1d(rng), z2 = zd(rng), z3 = zd(rng), z4 = zd(rng), z5 = zd(rng);
        t.g0[i] = expit(-z1 + 0.5 * z2 - z3 - 0.1 * z4 + z5 + 0.75 * z5 * z5);
        a[i] = u01(rng) < t.g0[i] ? 1 : 0;
        const double q = 210.0 + 27.4 * z1 + 13.7 * (z2 + z3 + z4);
        t.q1[i] = q;
        t.q0[i] = q;
        t.y1[i] = q + noise(rng);
        t.y0[i] = q + noise(rng);
        w(i, 0) = std::exp(z1 / 2.0);
        w(i, 1) = z2 / (1.0 + std::exp(z1)) + 10.0;
        w(i, 2) = std::pow(z1 * z3 / 25.0 + 0.6, 3);
        w(i, 3) = std::pow(z2 + z4 + 20.0, 2);
        w(i, 4) = z5;
    }
    t.psi1 = t.psi0 = 210.0 + 27.4 * 1.25;
    t.ate = 0.0;
    return finish(std::move(w), std::move(a), std::move(t), {"W1", "W2", "W3", "W4", "W5"});
}

SimData dgp_sim2(std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0);
    return dgp_sim2(n, rng);
}

SimData simulate_dgp(Dgp dgp, std::size_t n, double gamma, Rng& rng) {
    return dgp == Dgp::sim1 ? dgp_sim1(n, gamma, rng) : dgp_sim2(n, rng);
}

double dgp_truth(Dgp dgp, const std::string& target) {
    if (target == "ate") return dgp == Dgp::sim1 ? 1.0 : 0.0;
    if (target == "tsm") return dgp == Dgp::sim1 ? 1.0 : 210.0 + 27.4 * 1.25;
    throw InputError("unknown target '" + target + "'");
}

}  // namespace ctmle
