#pragma once

#include "ctmle/dgp.hpp"
#include "ctmle/estimators.hpp"
#include "ctmle/kde.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ctmle {

/// One estimator in a Monte Carlo study: a display label, a run_estimator name and
/// its learners. The configuration seed is replaced per replicate.
struct McEstimator {
    std::string label;
    std::string method;
    EstimatorSpec spec;
};

struct McConfig {
    Dgp dgp = Dgp::sim1;
    std::size_t n = 100;
    double gamma = 0.0;
    int reps = 100;
    std::uint64_t seed = 1;
    std::string target = "ate";  ///< "ate" or "tsm" (mean under treatment)
    std::vector<McEstimator> estimators;
    int threads = 0;             ///< 0: OpenMP default
    std::size_t kde_points = 512;
    bool remainder = false;      ///< also report the second-order remainder (tsm target only)
    std::size_t remainder_draws = 100000;
};

struct EstimatorSummary {
    std::string label;
    std::string method;
    double bias = 0.0;
    double variance = 0.0;  ///< divisor: number of successful replicates
    double mse = 0.0;
    double mc_sd = 0.0;
    double relative_efficiency = 0.0;  ///< mse / mse of the reference estimator; NaN without one
    std::string reference;
    double oracle_coverage = 0.0;
    double estimated_se_coverage = 0.0;
    double mean_se = 0.0;
    double mean_remainder = 0.0;  ///< NaN unless requested
    int failures = 0;
    std::vector<std::string> failure_messages;  ///< first few, "rep r: message"
    std::vector<double> estimates;              ///< per replicate; NaN on failure
    std::vector<double> ses;
    KdeCurve kde;                               ///< density of sqrt(n)(estimate - truth)
};

struct SimulationReport {
    std::string dgp;
    std::size_t n = 0;
    double gamma = 0.0;
    int reps = 0;
    std::uint64_t seed = 0;
    std::string target;
    double truth = 0.0;
    double level = 0.95;
    std::vector<EstimatorSummary> estimators;
};

/// CTMLE and TMLE with the default learners for `dgp`: correctly specified
/// parametric models for sim1, the indicator-basis lasso for sim2.
std::vector<McEstimator> default_mc_estimators(Dgp dgp);

/// Replicates run in parallel; each draws from its own stream keyed by (seed, r)
/// and results are aggregated in replicate order, so the report does not depend on
/// the number of threads.
SimulationReport run_mc(const McConfig& cfg);

/// Single-threaded reference for run_mc().
SimulationReport run_mc_serial(const McConfig& cfg);

/// Summary statistics from per-replicate estimates (NaN marks a failure).
EstimatorSummary summarize_estimates(const std::vector<double>& estimates, const std::vector<double>& ses,
                                     double truth, double level, std::size_t n, std::size_t kde_points);

}  // namespace ctmle
