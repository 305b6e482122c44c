#pragma once

#include "ctmle/types.hpp"

#include <string>
#include <vector>

namespace ctmle {

enum class Link { identity, logit };

std::string to_string(Link link);

struct GlmOptions {
    bool intercept = true;
    Vector offset;   ///< additive on the link scale; empty means none
    Vector weights;  ///< prior weights; empty means unit weights
    int max_iter = 100;
    double tol = 1e-10;                    ///< on the weighted mean score, sup norm
    double separation_threshold = 30.0;    ///< |coefficient| on the logit scale
    bool throw_on_separation = true;       ///< otherwise stop and flag the fit
    double collinearity_tol = 1e-7;
};

/// Generalized linear model fitted by iteratively reweighted least squares.
///
/// For the logit link the response may be any value in [0,1] (quasi-binomial).
/// Columns found to be collinear with earlier columns are dropped, R-style; their
/// coefficients are reported as zero.
struct GlmFit {
    Vector coefficients;         ///< intercept first when `intercept` is set
    std::vector<bool> dropped;   ///< per design column (excluding intercept)
    Link link = Link::identity;
    bool intercept = true;
    bool converged = false;
    bool separated = false;
    int iterations = 0;
    double score_norm = 0.0;
    std::string basis_spec;
    Warnings warnings;

    Vector linear_predictor(const Matrix& x, const Vector& offset = {}) const;
    /// Mean on the response scale; offset is added on the link scale.
    Vector predict(const Matrix& x, const Vector& offset = {}) const;
};

GlmFit fit_glm(const Matrix& x, const Vector& y, Link link, const GlmOptions& opts = {});

}  // namespace ctmle
