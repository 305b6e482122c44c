#include "ctmle/estimators.hpp"

#include "ctmle/eif.hpp"
#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"
#include "ctmle/parallel.hpp"
#include "ctmle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctmle {

namespace {

constexpr std::uint64_t kFoldStream = 77;
constexpr std::uint64_t kFitStream = 11;

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

void require_arm(const Dataset& ds, int arm) {
    if (arm < 0 || arm >= ds.n_arms())
        throw InputError("arm " + std::to_string(arm) + " outside 0.." + std::to_string(ds.n_arms() - 1));
    if ((ds.a().array() == arm).count() == 0) throw EstimationError("arm " + std::to_string(arm) + " has no observations");
}

double in_sample_se(const Vector& eif) {
    const double n = static_cast<double>(eif.size());
    const double var = (eif.array() - eif.mean()).square().sum() / n;
    return std::sqrt(var / n);
}

void append(Warnings& into, const Warnings& from) { into.insert(into.end(), from.begin(), from.end()); }

// Fill psi, se and CI on the original scale. `scaled_se` is on the unit interval.
void finish(EstimateReport& r, const Dataset& ds, double scaled_se, const EstimatorConfig& cfg) {
    const auto& sc = ds.y_scale();
    r.psi = r.target == "ate" ? r.psi_scaled * sc.range() : sc.to_raw(r.psi_scaled);
    r.se = scaled_se * sc.range();
    r.level = cfg.level;
    r.n = ds.n();
    r.seed = cfg.seed;
    const auto ci = wald_ci(r.psi, r.se, cfg.level);
    r.ci_lo = ci.first;
    r.ci_hi = ci.second;
}

}  // namespace

FoldScheme variance_folds(std::size_t n, const EstimatorConfig& cfg) {
    const int V = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.folds, 1)), n));
    return FoldScheme::make(n, V, derive_seed(cfg.seed, kFoldStream));
}

EstimateReport estimate_tsm(const Dataset& ds, int arm, const NuisanceRecipe& recipe, Method method,
                            const EstimatorConfig& cfg, const std::string& name) {
    require_arm(ds, arm);
    EstimateReport r;
    r.estimator = name;
    r.target = "tsm";
    r.arm = arm;

    const auto m = fit_tsm_nuisances(ds, all_rows(ds.n()), arm, recipe, cfg, derive_seed(cfg.seed, kFitStream));
    append(r.diagnostics.warnings, m.warnings);
    r.diagnostics.separation = m.separation;
    const IntVector ind = ds.arm_indicator(arm);
    const Vector q = m.predict_or(ds.w());
    Vector g = m.predict_ps(ds.w(), q);

    if (method == Method::targeted) {
        auto t = target_or(q, g, ind, ds.y(), cfg);
        r.epsilon.push_back(t.epsilon);
        for (int it = 1; it < cfg.adaptive_iterations && recipe.ps_kind == PsKind::adaptive; ++it) {
            const auto refit = fit_adaptive_ps(ind, t.targeted, recipe.ps_spec, cfg.ps_floor,
                                               derive_seed(cfg.seed, kFitStream + static_cast<std::uint64_t>(it)));
            append(r.diagnostics.warnings, refit.warnings);
            r.diagnostics.separation = r.diagnostics.separation || refit.separation;
            g = refit.pred;
            t = target_or(t.targeted, g, ind, ds.y(), cfg);
            r.epsilon.push_back(t.epsilon);
        }
        r.psi_scaled = plugin_estimate(t.targeted);
        r.eif_values = eif_eval({t.targeted, g, ind, ds.y(), r.psi_scaled});
    } else {
        const double plug = plugin_estimate(q);
        const Vector d = eif_eval({q, g, ind, ds.y(), plug});
        const double correction = d.mean();
        r.psi_scaled = plug + correction;
        r.eif_values = d.array() - correction;
    }
    r.diagnostics.ps_min = g.minCoeff();
    r.diagnostics.ps_max = g.maxCoeff();
    r.diagnostics.eif_mean = r.eif_values.mean();

    double se = 0.0;
    if (cfg.compute_variance) {
        const auto folds = variance_folds(ds.n(), cfg);
        r.cv_if = cv_if_values(ds, recipe, folds, cfg, arm);
        se = variance_from_fold_values(r.cv_if, folds).se;
        r.se_method = "cv";
        r.folds = folds.V;
    } else {
        se = in_sample_se(r.eif_values);
        r.se_method = "in-sample";
        r.folds = 1;
    }
    finish(r, ds, se, cfg);
    return r;
}

EstimateReport ctmle_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                         const EstimatorConfig& cfg, int arm) {
    return estimate_tsm(ds, arm, {or_spec, PsKind::adaptive, smoother}, Method::targeted, cfg, "ctmle");
}

EstimateReport tmle_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& ps_spec,
                        const EstimatorConfig& cfg, int arm) {
    return estimate_tsm(ds, arm, {or_spec, PsKind::standard, ps_spec}, Method::targeted, cfg, "tmle");
}

EstimateReport onestep_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& ps_spec,
                           const EstimatorConfig& cfg, int arm) {
    return estimate_tsm(ds, arm, {or_spec, PsKind::standard, ps_spec}, Method::onestep, cfg, "onestep");
}

EstimateReport collab_onestep_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                                  const EstimatorConfig& cfg, int arm) {
    return estimate_tsm(ds, arm, {or_spec, PsKind::adaptive, smoother}, Method::onestep, cfg, "conestep");
}

EstimateReport ctmle_ate_direct(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                                const EstimatorConfig& cfg) {
    if (ds.n_arms() != 2) throw InputError("ctmle-ate requires a binary treatment");
    require_arm(ds, 0);
    require_arm(ds, 1);
    const NuisanceRecipe recipe{or_spec, PsKind::adaptive_bivariate, smoother};
    EstimateReport r;
    r.estimator = "ctmle-ate";
    r.target = "ate";

    const auto m = fit_ate_nuisances(ds, all_rows(ds.n()), recipe, cfg, derive_seed(cfg.seed, kFitStream));
    append(r.diagnostics.warnings, m.warnings);
    r.diagnostics.separation = mentions_separation(m.warnings);
    const Vector q1 = m.predict_or(ds.w(), 1), q0 = m.predict_or(ds.w(), 0);
    const Vector g = m.predict_ps(q1, q0);
    const Eigen::Index n = q1.size();
    const IntVector& a = ds.a();

    Vector offset(n), h(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool treated = a[i] == 1;
        offset[i] = logit(treated ? q1[i] : q0[i]);
        h[i] = treated ? 1.0 / clip(g[i], cfg.ps_floor, 1.0) : -1.0 / clip(1.0 - g[i], cfg.ps_floor, 1.0);
    }
    const auto fl = solve_fluctuation(offset, h, ds.y(), cfg.epsilon_bound);
    r.epsilon.push_back(fl.epsilon);

    Vector s1(n), s0(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s1[i] = expit(logit(q1[i]) + fl.epsilon / clip(g[i], cfg.ps_floor, 1.0));
        s0[i] = expit(logit(q0[i]) - fl.epsilon / clip(1.0 - g[i], cfg.ps_floor, 1.0));
    }
    r.psi_scaled = (s1 - s0).mean();
    r.eif_values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        r.eif_values[i] = h[i] * (ds.y()[i] - (a[i] == 1 ? s1[i] : s0[i])) + s1[i] - s0[i] - r.psi_scaled;
    r.diagnostics.ps_min = g.minCoeff();
    r.diagnostics.ps_max = g.maxCoeff();
    r.diagnostics.eif_mean = r.eif_values.mean();

    double se = 0.0;
    if (cfg.compute_variance) {
        const auto folds = variance_folds(ds.n(), cfg);
        r.cv_if = cv_ate_if_values(ds, recipe, folds, cfg);
        se = variance_from_fold_values(r.cv_if, folds).se;
        r.se_method = "cv";
        r.folds = folds.V;
    } else {
        se = in_sample_se(r.eif_values);
        r.se_method = "in-sample";
        r.folds = 1;
    }
    finish(r, ds, se, cfg);
    return r;
}

EstimateReport ate_difference(const EstimateReport& treated, const EstimateReport& control, const Dataset& ds,
                              const EstimatorConfig& cfg) {
    if (treated.eif_values.size() != control.eif_values.size())
        throw InputError("ate_difference: arm reports cover different samples");
    EstimateReport r;
    r.estimator = treated.estimator;
    r.target = "ate";
    r.arm = treated.arm;
    r.psi_scaled = treated.psi_scaled - control.psi_scaled;
    r.epsilon = treated.epsilon;
    r.epsilon.insert(r.epsilon.end(), control.epsilon.begin(), control.epsilon.end());
    r.eif_values = treated.eif_values - control.eif_values;
    r.diagnostics.eif_mean = treated.diagnostics.eif_mean - control.diagnostics.eif_mean;
    r.diagnostics.ps_min = std::min(treated.diagnostics.ps_min, control.diagnostics.ps_min);
    r.diagnostics.ps_max = std::max(treated.diagnostics.ps_max, control.diagnostics.ps_max);
    r.diagnostics.separation = treated.diagnostics.separation || control.diagnostics.separation;
    for (const auto* arm : {&treated, &control})
        for (const auto& w : arm->diagnostics.warnings)
            r.diagnostics.warnings.push_back("arm " + std::to_string(arm->arm) + ": " + w);

    double se = 0.0;
    if (treated.cv_if.size() && control.cv_if.size() && treated.folds == control.folds) {
        const auto folds = variance_folds(ds.n(), cfg);
        r.cv_if = treated.cv_if - control.cv_if;
        se = variance_from_fold_values(r.cv_if, folds).se;
        r.se_method = treated.se_method;
        r.folds = folds.V;
    } else {
        se = in_sample_se(r.eif_values);
        r.se_method = "in-sample";
        r.folds = 1;
    }
    finish(r, ds, se, cfg);
    return r;
}

EstimateReport ate_by_relabeling(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                                 const EstimatorConfig& cfg) {
    if (ds.n_arms() != 2) throw InputError("ATE by relabeling requires a binary treatment");
    const auto treated = ctmle_tsm(ds, or_spec, smoother, cfg, 1);
    auto control = ctmle_tsm(ds.relabeled(), or_spec, smoother, cfg, 1);
    control.arm = 0;
    return ate_difference(treated, control, ds, cfg);
}

EstimateReport cv_ctmle_tsm(const Dataset& ds, const LearnerSpec& or_spec, const LearnerSpec& smoother,
                            const FoldScheme& folds, const EstimatorConfig& cfg, int arm) {
    require_arm(ds, arm);
    if (folds.n() != ds.n()) throw InputError("cv_ctmle_tsm: fold scheme does not match the data");
    const NuisanceRecipe recipe{or_spec, PsKind::adaptive, smoother};
    const auto n = static_cast<Eigen::Index>(ds.n());
    EstimateReport r;
    r.estimator = "cv-ctmle";
    r.target = "tsm";
    r.arm = arm;

    Vector q(n), g(n);
    std::vector<Warnings> fold_warnings(static_cast<std::size_t>(folds.V));
    std::vector<char> fold_separation(static_cast<std::size_t>(folds.V), 0);
    for_each_fold(folds.V, [&](int v) {
        const auto m = fit_tsm_nuisances(ds, folds.training(v), arm, recipe, cfg,
                                         derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(v)));
        const auto valid = folds.validation(v);
        const Matrix w = select_rows(ds.w(), valid);
        const Vector qv = m.predict_or(w);
        const Vector gv = m.predict_ps(w, qv);
        for (std::size_t k = 0; k < valid.size(); ++k) {
            q[static_cast<Eigen::Index>(valid[k])] = qv[static_cast<Eigen::Index>(k)];
            g[static_cast<Eigen::Index>(valid[k])] = gv[static_cast<Eigen::Index>(k)];
        }
        fold_warnings[static_cast<std::size_t>(v)] = m.warnings;
        fold_separation[static_cast<std::size_t>(v)] = m.separation;
    });
    for (int v = 0; v < folds.V; ++v) {
        for (const auto& w : fold_warnings[static_cast<std::size_t>(v)])
            r.diagnostics.warnings.push_back("fold " + std::to_string(v) + ": " + w);
        r.diagnostics.separation = r.diagnostics.separation || fold_separation[static_cast<std::size_t>(v)];
    }

    const IntVector ind = ds.arm_indicator(arm);
    Vector offset(n), h(n), weight(n);
    std::vector<double> fold_size(static_cast<std::size_t>(folds.V), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int v = folds.in_sample() ? 0 : folds.assignment[static_cast<std::size_t>(i)];
        fold_size[static_cast<std::size_t>(v)] += 1.0;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const int v = folds.in_sample() ? 0 : folds.assignment[static_cast<std::size_t>(i)];
        offset[i] = logit(clip(q[i], cfg.or_clip, 1.0 - cfg.or_clip));
        h[i] = ind[i] ? 1.0 / g[i] : 0.0;
        weight[i] = 1.0 / fold_size[static_cast<std::size_t>(v)];
    }
    const auto fl = solve_fluctuation(offset, h, ds.y(), cfg.epsilon_bound, weight);
    r.epsilon.push_back(fl.epsilon);

    Vector targeted(n);
    for (Eigen::Index i = 0; i < n; ++i) targeted[i] = expit(offset[i] + fl.epsilon / g[i]);
    std::vector<double> fold_psi(static_cast<std::size_t>(folds.V), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int v = folds.in_sample() ? 0 : folds.assignment[static_cast<std::size_t>(i)];
        fold_psi[static_cast<std::size_t>(v)] += targeted[i] * weight[i];
    }
    r.psi_scaled = std::accumulate(fold_psi.begin(), fold_psi.end(), 0.0) / folds.V;

    r.eif_values.resize(n);
    double weighted_mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int v = folds.in_sample() ? 0 : folds.assignment[static_cast<std::size_t>(i)];
        r.eif_values[i] = h[i] * (ds.y()[i] - targeted[i]) + targeted[i] - fold_psi[static_cast<std::size_t>(v)];
        weighted_mean += weight[i] * r.eif_values[i];
    }
    r.diagnostics.eif_mean = weighted_mean / folds.V;
    r.diagnostics.ps_min = g.minCoeff();
    r.diagnostics.ps_max = g.maxCoeff();

    r.cv_if = r.eif_values;
    const double se = variance_from_fold_values(r.cv_if, folds).se;
    r.se_method = "cv";
    r.folds = folds.V;
    finish(r, ds, se, cfg);
    return r;
}

namespace {

EstimateReport tsm_by_name(const std::string& name, const Dataset& ds, const EstimatorSpec& spec, int arm) {
    if (name == "ctmle") return ctmle_tsm(ds, spec.or_spec, spec.smoother, spec.cfg, arm);
    if (name == "tmle") return tmle_tsm(ds, spec.or_spec, spec.ps_spec, spec.cfg, arm);
    if (name == "onestep") return onestep_tsm(ds, spec.or_spec, spec.ps_spec, spec.cfg, arm);
    if (name == "conestep") return collab_onestep_tsm(ds, spec.or_spec, spec.smoother, spec.cfg, arm);
    if (name == "cv-ctmle")
        return cv_ctmle_tsm(ds, spec.or_spec, spec.smoother, variance_folds(ds.n(), spec.cfg), spec.cfg, arm);
    if (name == "ctmle-ate") throw InputError("ctmle-ate estimates the ATE only; use --target ate");
    throw InputError("unknown estimator '" + name + "'");
}

}  // namespace

const std::vector<std::string>& estimator_names() {
    static const std::vector<std::string> names{"ctmle", "tmle", "onestep", "conestep", "ctmle-ate", "cv-ctmle"};
    return names;
}

EstimateReport run_estimator(const std::string& name, const Dataset& ds, const EstimatorSpec& spec,
                             const std::string& target, int arm) {
    if (target == "tsm") return tsm_by_name(name, ds, spec, arm);
    if (target != "ate") throw InputError("unknown target '" + target + "' (expected ate or tsm)");
    if (ds.n_arms() != 2) throw InputError("the ATE needs a binary treatment; use --multiarm for more arms");
    if (name == "ctmle-ate") return ctmle_ate_direct(ds, spec.or_spec, spec.smoother, spec.cfg);
    if (name == "ctmle") return ate_by_relabeling(ds, spec.or_spec, spec.smoother, spec.cfg);
    const auto treated = tsm_by_name(name, ds, spec, 1);
    const auto control = tsm_by_name(name, ds, spec, 0);
    return ate_difference(treated, control, ds, spec.cfg);
}

MultiArmReport multiarm_means(const Dataset& ds, const std::string& estimator, const EstimatorSpec& spec) {
    const int k = ds.n_arms();
    if (k < 2) throw InputError("multi-arm analysis needs at least two arms");
    for (int arm = 0; arm < k; ++arm)
        if ((ds.a().array() == arm).count() == 0) throw InputError("arm " + std::to_string(arm) + " has no observations");
    MultiArmReport out;
    out.estimator = estimator;
    for (int arm = 0; arm < k; ++arm) out.arms.push_back(tsm_by_name(estimator, ds, spec, arm));

    const auto props = fit_arm_propensities(ds.w(), ds.a(), k, spec.ps_spec, derive_seed(spec.cfg.seed, 31));
    out.arm_propensities = props.predict(ds.w());

    const auto n = static_cast<Eigen::Index>(ds.n());
    const bool cv = std::all_of(out.arms.begin(), out.arms.end(), [n](const EstimateReport& r) { return r.cv_if.size() == n; });
    Matrix values(n, k);
    for (int arm = 0; arm < k; ++arm) values.col(arm) = cv ? out.arms[static_cast<std::size_t>(arm)].cv_if : out.arms[static_cast<std::size_t>(arm)].eif_values;
    const FoldScheme folds = cv ? variance_folds(ds.n(), spec.cfg) : FoldScheme::make(ds.n(), 1, 0);
    const double range = ds.y_scale().range();
    out.covariance = cv_covariance(values, folds) * range * range;

    Vector psi(k);
    for (int arm = 0; arm < k; ++arm) psi[arm] = out.arms[static_cast<std::size_t>(arm)].psi;
    out.wald = wald_test_equal_means(psi, out.covariance);
    return out;
}

}  // namespace ctmle
