#include "ctmle/monte_carlo.hpp"

#include "ctmle/eif.hpp"
#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"
#include "ctmle/rng.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <omp.h>

namespace ctmle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kRemainderStream = 0xE3A1ULL;

struct ReplicateResult {
    std::vector<double> est, se, remainder;
    std::vector<std::string> error;
};

NuisanceRecipe recipe_for(const McEstimator& e) {
    if (e.method == "ctmle" || e.method == "conestep") return {e.spec.or_spec, PsKind::adaptive, e.spec.smoother};
    return {e.spec.or_spec, PsKind::standard, e.spec.ps_spec};
}

// Remainder of the mean under treatment, integrated over a fresh confounder sample.
double remainder_for(const SimData& sim, const McEstimator& e, const EstimatorSpec& spec, const EstimateReport& rep,
                     const SimData& fresh) {
    const auto& ds = sim.data;
    std::vector<std::size_t> rows(ds.n());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto m = fit_tsm_nuisances(ds, rows, 1, recipe_for(e), spec.cfg, derive_seed(spec.cfg.seed, 11));
    const Vector q = m.predict_or(fresh.data.w());
    const Vector g = m.predict_ps(fresh.data.w(), q);
    const double eps = rep.epsilon.empty() ? 0.0 : rep.epsilon.front();
    Vector qstar(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) qstar[i] = expit(logit(clip(q[i], spec.cfg.or_clip, 1.0 - spec.cfg.or_clip)) + eps / g[i]);
    const auto& sc = ds.y_scale();
    const Vector q0 = (fresh.truth.q1.array() - sc.y_min) / sc.range();
    return remainder_r2(qstar, q0, g, fresh.truth.g0) * sc.range();
}

ReplicateResult run_replicate(const McConfig& cfg, int r, const SimData* fresh) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(r));
    const SimData sim = simulate_dgp(cfg.dgp, cfg.n, cfg.gamma, rng);
    const std::size_t k = cfg.estimators.size();
    ReplicateResult out{std::vector<double>(k, kNaN), std::vector<double>(k, kNaN), std::vector<double>(k, kNaN),
                        std::vector<std::string>(k)};
    for (std::size_t e = 0; e < k; ++e) {
        const auto& est = cfg.estimators[e];
        EstimatorSpec spec = est.spec;
        spec.cfg.seed = derive_seed(cfg.seed, 1'000'000ULL + static_cast<std::uint64_t>(r));
        try {
            const auto rep = run_estimator(est.method, sim.data, spec, cfg.target, 1);
            if (!std::isfinite(rep.psi)) throw EstimationError("non-finite estimate");
            out.est[e] = rep.psi;
            out.se[e] = rep.se;
            if (fresh && cfg.target == "tsm" && est.method != "cv-ctmle" && est.method != "ctmle-ate")
                out.remainder[e] = remainder_for(sim, est, spec, rep, *fresh);
        } catch (const std::exception& ex) {
            out.est[e] = kNaN;
            out.se[e] = kNaN;
            out.error[e] = ex.what();
        }
    }
    return out;
}

void validate(const McConfig& cfg) {
    if (cfg.reps < 2) throw InputError("run_mc: reps must be at least 2 (the MC variance is undefined otherwise)");
    if (cfg.n < 2) throw InputError("run_mc: n must be at least 2");
    if (cfg.estimators.empty()) throw InputError("run_mc: no estimators configured");
    if (cfg.target != "ate" && cfg.target != "tsm") throw InputError("run_mc: target must be ate or tsm");
}

SimulationReport aggregate(const McConfig& cfg, const std::vector<ReplicateResult>& results) {
    SimulationReport rep;
    rep.dgp = to_string(cfg.dgp);
    rep.n = cfg.n;
    rep.gamma = cfg.gamma;
    rep.reps = cfg.reps;
    rep.seed = cfg.seed;
    rep.target = cfg.target;
    rep.truth = dgp_truth(cfg.dgp, cfg.target);
    rep.level = cfg.estimators.front().spec.cfg.level;

    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        std::vector<double> est, se;
        double rsum = 0.0;
        int rcount = 0;
        for (const auto& r : results) {
            est.push_back(r.est[e]);
            se.push_back(r.se[e]);
            if (std::isfinite(r.remainder[e])) {
                rsum += r.remainder[e];
                ++rcount;
            }
        }
        auto s = summarize_estimates(est, se, rep.truth, cfg.estimators[e].spec.cfg.level, cfg.n, cfg.kde_points);
        s.label = cfg.estimators[e].label;
        s.method = cfg.estimators[e].method;
        s.mean_remainder = rcount ? rsum / rcount : kNaN;
        for (std::size_t r = 0; r < results.size(); ++r)
            if (!results[r].error[e].empty() && s.failure_messages.size() < 5)
                s.failure_messages.push_back("rep " + std::to_string(r) + ": " + results[r].error[e]);
        rep.estimators.push_back(std::move(s));
    }
    // Relative efficiency: collaborative one-step against one-step, everything else against TMLE.
    for (auto& s : rep.estimators) {
        const std::string ref = s.method == "conestep" || s.method == "onestep" ? "onestep" : "tmle";
        s.relative_efficiency = kNaN;
        for (const auto& t : rep.estimators)
            if (t.method == ref) {
                s.reference = t.label;
                s.relative_efficiency = t.mse > 0.0 ? s.mse / t.mse : (s.mse == 0.0 ? 1.0 : kNaN);
                break;
            }
    }
    return rep;
}

std::unique_ptr<SimData> remainder_sample(const McConfig& cfg) {
    if (!cfg.remainder) return nullptr;
    Rng rng = make_rng(cfg.seed, kRemainderStream);
    return std::make_unique<SimData>(simulate_dgp(cfg.dgp, cfg.remainder_draws, cfg.gamma, rng));
}

}  // namespace

std::vector<McEstimator> default_mc_estimators(Dgp dgp) {
    EstimatorSpec spec;
    if (dgp == Dgp::sim1) {
        spec.or_spec = LearnerSpec::parse("glm:link=identity");
        spec.ps_spec = LearnerSpec::parse("glm");
    } else {
        spec.or_spec = LearnerSpec::parse("hal");
        spec.ps_spec = LearnerSpec::parse("hal");
    }
    spec.smoother = LearnerSpec::parse("spline:df=2");
    return {{"ctmle", "ctmle", spec}, {"tmle", "tmle", spec}};
}

EstimatorSummary summarize_estimates(const std::vector<double>& estimates, const std::vector<double>& ses,
                                     double truth, double level, std::size_t n, std::size_t kde_points) {
    if (ses.size() != estimates.size()) throw InputError("summarize_estimates: length mismatch");
    EstimatorSummary s;
    s.estimates = estimates;
    s.ses = ses;
    std::vector<double> ok;
    double se_sum = 0.0;
    for (std::size_t r = 0; r < estimates.size(); ++r) {
        if (std::isfinite(estimates[r])) {
            ok.push_back(estimates[r]);
            se_sum += ses[r];
        } else {
            ++s.failures;
        }
    }
    if (ok.empty()) {
        s.bias = s.variance = s.mse = s.mc_sd = s.oracle_coverage = s.estimated_se_coverage = s.mean_se = kNaN;
        return s;
    }
    const double k = static_cast<double>(ok.size());
    double mean = 0.0;
    for (double x : ok) mean += x;
    mean /= k;
    double var = 0.0;
    for (double x : ok) var += (x - mean) * (x - mean);
    var /= k;
    s.bias = mean - truth;
    s.variance = var;
    s.mse = s.bias * s.bias + s.variance;
    s.mc_sd = std::sqrt(var);
    s.mean_se = se_sum / k;

    const double z = normal_quantile(0.5 * (1.0 + level));
    int oracle = 0, estimated = 0;
    for (std::size_t r = 0; r < estimates.size(); ++r) {
        if (!std::isfinite(estimates[r])) continue;
        const double err = std::abs(estimates[r] - truth);
        if (err <= 1.96 * s.mc_sd) ++oracle;
        if (err <= z * ses[r]) ++estimated;
    }
    s.oracle_coverage = oracle / k;
    s.estimated_se_coverage = estimated / k;

    if (ok.size() >= 2 && var > 0.0) {
        std::vector<double> scaled;
        for (double x : ok) scaled.push_back(std::sqrt(static_cast<double>(n)) * (x - truth));
        s.kde = kde_serial(scaled, default_kde_grid(scaled, kde_points));
    }
    return s;
}

SimulationReport run_mc(const McConfig& cfg) {
    validate(cfg);
    const auto fresh = remainder_sample(cfg);
    std::vector<ReplicateResult> results(static_cast<std::size_t>(cfg.reps));
    const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int r = 0; r < cfg.reps; ++r) results[static_cast<std::size_t>(r)] = run_replicate(cfg, r, fresh.get());
    return aggregate(cfg, results);
}

SimulationReport run_mc_serial(const McConfig& cfg) {
    validate(cfg);
    const auto fresh = remainder_sample(cfg);
    std::vector<ReplicateResult> results;
    for (int r = 0; r < cfg.reps; ++r) results.push_back(run_replicate(cfg, r, fresh.get()));
    return aggregate(cfg, results);
}

}  // namespace ctmle
