#include "ctmle/eif.hpp"

#include "ctmle/error.hpp"

namespace ctmle {

double plugin_estimate(const Vector& or_pred) {
    if (or_pred.size() == 0) throw InputError("plugin_estimate: empty prediction vector");
    return or_pred.mean();
}

Vector eif_eval(const EifInputs& in) {
    const Eigen::Index n = in.or_pred.size();
    if (in.ps_pred.size() != n || in.a.size() != n || in.y.size() != n)
        throw InputError("eif_eval: input lengths differ");
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double weighted_resid = 0.0;
        if (in.a[i] != 0) {
            if (!(in.ps_pred[i] > 0.0))
                throw EstimationError("eif_eval: zero propensity for a treated unit at row " + std::to_string(i));
            weighted_resid = (in.y[i] - in.or_pred[i]) / in.ps_pred[i];
        }
        d[i] = weighted_resid + in.or_pred[i] - in.psi;
    }
    return d;
}

double remainder_r2(const Vector& or_pred, const Vector& or_true, const Vector& ps_pred, const Vector& ps_true,
                    const Vector& weights) {
    const Eigen::Index m = or_pred.size();
    if (or_true.size() != m || ps_pred.size() != m || ps_true.size() != m)
        throw InputError("remainder_r2: input lengths differ");
    if (weights.size() != 0 && weights.size() != m) throw InputError("remainder_r2: weight length mismatch");
    if (m == 0) return 0.0;
    if ((ps_pred.array() <= 0.0).any()) throw InputError("remainder_r2: propensity predictions must be positive");
    const Vector w = weights.size() == m ? weights : Vector::Constant(m, 1.0 / static_cast<double>(m));
    double r = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
        r += w[i] * ((ps_pred[i] - ps_true[i]) / ps_pred[i]) * (or_pred[i] - or_true[i]);
    return r;
}

}  // namespace ctmle
