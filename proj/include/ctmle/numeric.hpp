#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctmle {

/// Logistic function, kept strictly inside (0,1) for every finite argument.
inline double expit(double x) noexcept {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    const double v = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::clamp(v, lo, hi);
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) noexcept {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double clip(double x, double lo, double hi) noexcept { return std::clamp(x, lo, hi); }

}  // namespace ctmle
