#include "ctmle/nuisance.hpp"

#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"
#include "ctmle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ctmle {

std::string to_string(PsKind kind) {
    switch (kind) {
        case PsKind::standard: return "standard";
        case PsKind::adaptive: return "adaptive";
        case PsKind::adaptive_bivariate: return "adaptive_bivariate";
    }
    return "unknown";
}

bool mentions_separation(const Warnings& w) {
    return std::any_of(w.begin(), w.end(), [](const std::string& s) { return s.find("separation") != std::string::npos; });
}

namespace {

Vector clip_vec(const Vector& v, double lo, double hi) {
    return v.unaryExpr([lo, hi](double x) { return clip(x, lo, hi); });
}

std::vector<int> sequential_order(int n_arms) {
    std::vector<int> order{n_arms - 1};
    for (int k = 0; k + 2 < n_arms; ++k) order.push_back(k);
    return order;
}

Matrix prepend_column(double value, const Matrix& w) {
    Matrix x(w.rows(), w.cols() + 1);
    x.col(0).setConstant(value);
    x.rightCols(w.cols()) = w;
    return x;
}

}  // namespace

Vector AdaptivePsFit::predict(const Matrix& or_preds) const {
    if (!model) return Vector::Constant(or_preds.rows(), clip(constant, floor, 1.0));
    Matrix x(or_preds.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = or_preds.col(columns[k]);
    return clip_vec(model->predict(x), floor, 1.0);
}

AdaptivePsFit fit_adaptive_ps(const IntVector& a, const Matrix& or_preds, const LearnerSpec& smoother, double floor,
                              std::uint64_t seed) {
    const Eigen::Index n = a.size();
    if (or_preds.rows() != n) throw InputError("fit_adaptive_ps: length mismatch");
    if (n == 0) throw InputError("fit_adaptive_ps: no observations");
    if (!or_preds.allFinite()) throw InputError("fit_adaptive_ps: non-finite OR predictions");
    if ((a.array() != 0 && a.array() != 1).any()) throw InputError("fit_adaptive_ps: treatment must be binary");

    AdaptivePsFit fit;
    fit.floor = floor;
    const double abar = a.cast<double>().mean();
    if (abar == 0.0 || abar == 1.0) {
        fit.constant = abar;
        fit.warnings.push_back("adaptive PS: treatment indicator is constant; predictions fixed at " +
                               std::to_string(static_cast<int>(abar)) + " and clipped to [floor, 1]");
        fit.pred = fit.predict(or_preds);
        return fit;
    }
    for (Eigen::Index j = 0; j < or_preds.cols(); ++j)
        if (or_preds.col(j).maxCoeff() > or_preds.col(j).minCoeff()) fit.columns.push_back(j);
    if (fit.columns.empty()) {
        fit.constant = abar;
        fit.warnings.push_back("adaptive PS: OR predictions are constant; intercept-only fit");
        fit.pred = fit.predict(or_preds);
        return fit;
    }
    Matrix x(n, static_cast<Eigen::Index>(fit.columns.size()));
    for (std::size_t k = 0; k < fit.columns.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = or_preds.col(fit.columns[k]);
    fit.model = fit_learner(smoother, x, a.cast<double>(), seed);
    fit.warnings = fit.model->warnings();
    fit.separation = mentions_separation(fit.warnings);
    fit.pred = fit.predict(or_preds);
    return fit;
}

Matrix combine_sequential_propensities(const Matrix& conditional, int n_arms) {
    if (n_arms < 2) throw InputError("combine_sequential_propensities: need at least two arms");
    const auto order = sequential_order(n_arms);
    if (conditional.cols() != static_cast<Eigen::Index>(order.size()))
        throw InputError("combine_sequential_propensities: expected " + std::to_string(order.size()) + " columns");
    Matrix out = Matrix::Zero(conditional.rows(), n_arms);
    Vector remaining = Vector::Ones(conditional.rows());
    for (std::size_t s = 0; s < order.size(); ++s) {
        const Vector g = conditional.col(static_cast<Eigen::Index>(s)).cwiseProduct(remaining);
        out.col(order[s]) = g;
        remaining -= g;
    }
    out.col(n_arms - 2) = remaining;
    return out;
}

Matrix ArmPropensityFit::predict(const Matrix& w) const {
    Matrix cond(w.rows(), static_cast<Eigen::Index>(models.size()));
    for (std::size_t s = 0; s < models.size(); ++s)
        cond.col(static_cast<Eigen::Index>(s)) = clip_vec(models[s]->predict(w), 0.0, 1.0);
    return combine_sequential_propensities(cond, n_arms);
}

ArmPropensityFit fit_arm_propensities(const Matrix& w, const IntVector& a, int n_arms, const LearnerSpec& ps_spec,
                                      std::uint64_t seed) {
    if (w.rows() != a.size()) throw InputError("fit_arm_propensities: length mismatch");
    ArmPropensityFit fit;
    fit.n_arms = n_arms;
    fit.order = sequential_order(n_arms);
    std::set<int> done;
    for (std::size_t s = 0; s < fit.order.size(); ++s) {
        const int arm = fit.order[s];
        std::vector<std::size_t> rows;
        for (Eigen::Index i = 0; i < a.size(); ++i)
            if (!done.contains(a[i])) rows.push_back(static_cast<std::size_t>(i));
        if (rows.empty()) throw EstimationError("fit_arm_propensities: no rows left for arm " + std::to_string(arm));
        Vector ind(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) ind[static_cast<Eigen::Index>(r)] = a[static_cast<Eigen::Index>(rows[r])] == arm ? 1.0 : 0.0;
        auto model = fit_learner(ps_spec, select_rows(w, rows), ind, derive_seed(seed, s));
        fit.warnings.insert(fit.warnings.end(), model->warnings().begin(), model->warnings().end());
        fit.models.push_back(std::move(model));
        done.insert(arm);
    }
    return fit;
}

Vector TsmNuisanceModel::predict_or(const Matrix& w) const {
    return clip_vec(or_model->predict(w), or_clip, 1.0 - or_clip);
}

Vector TsmNuisanceModel::predict_ps(const Matrix& w, const Vector& or_pred) const {
    if (kind == PsKind::adaptive) return adaptive->predict(or_pred);
    return clip_vec(standard->predict(w).col(arm), ps_floor, 1.0);
}

TsmNuisanceModel fit_tsm_nuisances(const Dataset& ds, const std::vector<std::size_t>& train, int arm,
                                   const NuisanceRecipe& recipe, const EstimatorConfig& cfg, std::uint64_t seed) {
    if (recipe.ps_kind == PsKind::adaptive_bivariate)
        throw InputError("fit_tsm_nuisances: the bivariate adaptive PS belongs to the direct ATE estimator");
    TsmNuisanceModel m;
    m.arm = arm;
    m.kind = recipe.ps_kind;
    m.or_clip = cfg.or_clip;
    m.ps_floor = cfg.ps_floor;

    std::vector<std::size_t> in_arm;
    for (auto i : train)
        if (ds.a()[static_cast<Eigen::Index>(i)] == arm) in_arm.push_back(i);
    if (in_arm.empty()) throw EstimationError("no units in arm " + std::to_string(arm) + " among the training rows");
    m.or_model = fit_learner(recipe.or_spec, select_rows(ds.w(), in_arm), select_rows(ds.y(), in_arm),
                             derive_seed(seed, 1));
    m.warnings = m.or_model->warnings();

    const Matrix w_train = select_rows(ds.w(), train);
    if (recipe.ps_kind == PsKind::adaptive) {
        IntVector ind(static_cast<Eigen::Index>(train.size()));
        for (std::size_t r = 0; r < train.size(); ++r) ind[static_cast<Eigen::Index>(r)] = ds.a()[static_cast<Eigen::Index>(train[r])] == arm;
        m.adaptive = fit_adaptive_ps(ind, m.predict_or(w_train), recipe.ps_spec, cfg.ps_floor, derive_seed(seed, 2));
        m.warnings.insert(m.warnings.end(), m.adaptive->warnings.begin(), m.adaptive->warnings.end());
    } else {
        m.standard = fit_arm_propensities(w_train, select_rows(Vector(ds.a().cast<double>()), train).cast<int>(),
                                          ds.n_arms(), recipe.ps_spec, derive_seed(seed, 3));
        m.warnings.insert(m.warnings.end(), m.standard->warnings.begin(), m.standard->warnings.end());
    }
    m.separation = mentions_separation(m.warnings);
    return m;
}

Vector AteNuisanceModel::predict_or(const Matrix& w, int arm) const {
    return clip_vec(or_model->predict(prepend_column(arm, w)), or_clip, 1.0 - or_clip);
}

Vector AteNuisanceModel::predict_ps(const Vector& q1, const Vector& q0) const {
    Matrix q(q1.size(), 2);
    q.col(0) = q1;
    q.col(1) = q0;
    if (!ps.model) return Vector::Constant(q1.size(), ps.constant);
    Matrix x(q.rows(), static_cast<Eigen::Index>(ps.columns.size()));
    for (std::size_t k = 0; k < ps.columns.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = q.col(ps.columns[k]);
    return clip_vec(ps.model->predict(x), 0.0, 1.0);
}

AteNuisanceModel fit_ate_nuisances(const Dataset& ds, const std::vector<std::size_t>& train,
                                   const NuisanceRecipe& recipe, const EstimatorConfig& cfg, std::uint64_t seed) {
    if (ds.n_arms() != 2) throw InputError("direct ATE estimation requires a binary treatment");
    AteNuisanceModel m;
    m.or_clip = cfg.or_clip;
    m.ps_floor = cfg.ps_floor;
    const Matrix w_train = select_rows(ds.w(), train);
    Matrix aw(w_train.rows(), w_train.cols() + 1);
    IntVector a_train(static_cast<Eigen::Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) a_train[static_cast<Eigen::Index>(r)] = ds.a()[static_cast<Eigen::Index>(train[r])];
    aw.col(0) = a_train.cast<double>();
    aw.rightCols(w_train.cols()) = w_train;
    m.or_model = fit_learner(recipe.or_spec, aw, select_rows(ds.y(), train), derive_seed(seed, 1));
    m.warnings = m.or_model->warnings();
    Matrix q(w_train.rows(), 2);
    q.col(0) = m.predict_or(w_train, 1);
    q.col(1) = m.predict_or(w_train, 0);
    m.ps = fit_adaptive_ps(a_train, q, recipe.ps_spec, cfg.ps_floor, derive_seed(seed, 2));
    m.warnings.insert(m.warnings.end(), m.ps.warnings.begin(), m.ps.warnings.end());
    return m;
}

Fluctuation solve_fluctuation(const Vector& offset, const Vector& h, const Vector& y, double bound,
                              const Vector& weights) {
    const Eigen::Index n = offset.size();
    if (h.size() != n || y.size() != n) throw InputError("solve_fluctuation: length mismatch");
    if (weights.size() != 0 && weights.size() != n) throw InputError("solve_fluctuation: weight length mismatch");
    const Vector w = weights.size() == n ? weights : Vector::Ones(n);
    const double wsum = w.sum();

    auto score = [&](double eps, double* deriv) {
        double s = 0.0, d = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (h[i] == 0.0 || w[i] == 0.0) continue;
            const double mu = expit(offset[i] + eps * h[i]);
            s += w[i] * h[i] * (y[i] - mu);
            d -= w[i] * h[i] * h[i] * mu * (1.0 - mu);
        }
        if (deriv) *deriv = d / wsum;
        return s / wsum;
    };

    Fluctuation out;
    double d0 = 0.0;
    const double s0 = score(0.0, &d0);
    out.score = s0;
    if (s0 == 0.0) return out;

    double lo = s0 > 0 ? 0.0 : -bound;
    double hi = s0 > 0 ? bound : 0.0;
    {
        const double edge = score(s0 > 0 ? bound : -bound, nullptr);
        if ((s0 > 0 && edge > 0) || (s0 < 0 && edge < 0))
            throw SeparationError("targeting: fluctuation coefficient diverges beyond +/-" + std::to_string(bound) +
                                  " (mean score " + std::to_string(s0) + " at 0)");
    }
    double eps = 0.0, s = s0, d = d0;
    double best_eps = 0.0, best_s = s0;
    for (int it = 1; it <= 300; ++it) {
        out.iterations = it;
        double next = d < 0.0 ? eps - s / d : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        eps = next;
        s = score(eps, &d);
        if (std::abs(s) < std::abs(best_s)) {
            best_s = s;
            best_eps = eps;
        }
        if (s == 0.0) break;
        if (s > 0) lo = eps;
        else hi = eps;
        if (std::abs(s) <= 1e-15) break;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eps))) break;
    }
    out.epsilon = best_eps;
    out.score = best_s;
    if (std::abs(out.epsilon) >= bound)
        throw SeparationError("targeting: fluctuation coefficient reached the bound " + std::to_string(bound));
    return out;
}

Targeting target_or(const Vector& or_pred, const Vector& ps_pred, const IntVector& a, const Vector& y,
                    const EstimatorConfig& cfg) {
    const Eigen::Index n = or_pred.size();
    if (ps_pred.size() != n || a.size() != n || y.size() != n) throw InputError("target_or: length mismatch");
    if ((ps_pred.array() <= 0.0).any()) throw InputError("target_or: propensity predictions must be positive");
    if (n > 0 && (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0)) throw InputError("target_or: outcomes must lie in [0,1]");
    const Vector offset = or_pred.unaryExpr([&](double q) { return logit(clip(q, cfg.or_clip, 1.0 - cfg.or_clip)); });
    Vector h(n);
    for (Eigen::Index i = 0; i < n; ++i) h[i] = a[i] != 0 ? 1.0 / ps_pred[i] : 0.0;
    const auto fl = solve_fluctuation(offset, h, y, cfg.epsilon_bound);
    Targeting t;
    t.epsilon = fl.epsilon;
    t.targeted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) t.targeted[i] = expit(offset[i] + fl.epsilon / ps_pred[i]);
    return t;
}

}  // namespace ctmle
