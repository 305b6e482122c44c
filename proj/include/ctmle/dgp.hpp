#pragma once

#include "ctmle/dataset.hpp"
#include "ctmle/rng.hpp"
#include "ctmle/types.hpp"

#include <cstddef>
#include <string>

namespace ctmle {

enum class Dgp { sim1, sim2 };

Dgp parse_dgp(const std::string& name);
std::string to_string(Dgp dgp);

/// Known truths for a simulated sample, on the raw outcome scale.
struct SimTruth {
    Vector g0;  ///< true propensity per row
    Vector q1;  ///< E[Y | A = 1, W] per row
    Vector q0;  ///< E[Y | A = 0, W] per row
    Vector y1;  ///< drawn potential outcome under treatment
    Vector y0;  ///< drawn potential outcome under control
    double psi1 = 0.0;
    double psi0 = 0.0;
    double ate = 0.0;
};

struct SimData {
    Dataset data;
    SimTruth truth;
};

/// W1..W7 ~ U[-1.5, 1.5], W8 ~ Bernoulli(1/2); P(A = 1 | W) = expit(gamma/2 - gamma W8 + s(W)),
/// Y ~ N(A - s(W), 1) with s(W) = sum_j 2^(1-j) W_j. The ATE is 1.
SimData dgp_sim1(std::size_t n, double gamma, Rng& rng);
SimData dgp_sim1(std::size_t n, double gamma, std::uint64_t seed);

/// Z1 ~ U(0.5, 2), Z2..Z5 ~ U[-2, 2]; only nonlinear transforms of Z are observed.
/// Y ~ N(210 + 27.4 Z1 + 13.7 (Z2 + Z3 + Z4), 1) under both arms, so the ATE is 0.
SimData dgp_sim2(std::size_t n, Rng& rng);
SimData dgp_sim2(std::size_t n, std::uint64_t seed);

SimData simulate_dgp(Dgp dgp, std::size_t n, double gamma, Rng& rng);

/// Truth for the MC target: the ATE or the mean under treatment.
double dgp_truth(Dgp dgp, const std::string& target);

}  // namespace ctmle
