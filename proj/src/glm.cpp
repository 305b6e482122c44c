#include "ctmle/glm.hpp"

#include "ctmle/error.hpp"
#include "ctmle/numeric.hpp"

#include <cmath>
#include <sstream>

namespace ctmle {

std::string to_string(Link link) { return link == Link::logit ? "logit" : "identity"; }

namespace {

Matrix with_intercept(const Matrix& x, bool intercept) {
    if (!intercept) return x;
    Matrix d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    return d;
}

// Sequential Gram-Schmidt: a column is kept unless it lies (numerically) in the span
// of the columns kept before it.
std::vector<bool> independent_columns(const Matrix& d, const Vector& sqrt_w, double tol) {
    const Eigen::Index n = d.rows();
    std::vector<bool> keep(static_cast<std::size_t>(d.cols()), false);
    Matrix basis(n, 0);
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        Vector v = d.col(j).cwiseProduct(sqrt_w);
        const double norm0 = v.norm();
        if (norm0 == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index k = 0; k < basis.cols(); ++k) v -= basis.col(k).dot(v) * basis.col(k);
        }
        const double norm1 = v.norm();
        if (norm1 > tol * norm0) {
            basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
            basis.col(basis.cols() - 1) = v / norm1;
            keep[static_cast<std::size_t>(j)] = true;
        }
    }
    return keep;
}

double logistic_nll(const Vector& y, const Vector& eta, const Vector& w) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += w[i] * (log1pexp(eta[i]) - y[i] * eta[i]);
    return s;
}

}  // namespace

Vector GlmFit::linear_predictor(const Matrix& x, const Vector& offset) const {
    const Eigen::Index n = x.rows();
    Vector eta = Vector::Zero(n);
    Eigen::Index k = 0;
    if (intercept) eta.array() += coefficients[k++];
    for (Eigen::Index j = 0; j < x.cols(); ++j, ++k) {
        if (coefficients[k] != 0.0) eta.noalias() += coefficients[k] * x.col(j);
    }
    if (offset.size() == n) eta += offset;
    return eta;
}

Vector GlmFit::predict(const Matrix& x, const Vector& offset) const {
    Vector eta = linear_predictor(x, offset);
    if (link == Link::logit) eta = eta.unaryExpr([](double v) { return expit(v); });
    return eta;
}

GlmFit fit_glm(const Matrix& x, const Vector& y, Link link, const GlmOptions& opts) {
    const Eigen::Index n = x.rows();
    if (y.size() != n) throw InputError("fit_glm: design has " + std::to_string(n) + " rows but response has " +
                                        std::to_string(y.size()));
    if (n == 0) throw InputError("fit_glm: no observations");
    if (opts.offset.size() != 0 && opts.offset.size() != n) throw InputError("fit_glm: offset length mismatch");
    if (opts.weights.size() != 0 && opts.weights.size() != n) throw InputError("fit_glm: weight length mismatch");
    if (link == Link::logit && (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0))
        throw InputError("fit_glm: logit link requires responses in [0,1]");

    const Vector w = opts.weights.size() == n ? opts.weights : Vector::Ones(n);
    const Vector offset = opts.offset.size() == n ? opts.offset : Vector::Zero(n);
    const Matrix full = with_intercept(x, opts.intercept);

    GlmFit fit;
    fit.link = link;
    fit.intercept = opts.intercept;
    {
        std::ostringstream os;
        os << "glm(link=" << to_string(link) << ", columns=" << x.cols() << (opts.intercept ? ", intercept" : "") << ")";
        fit.basis_spec = os.str();
    }

    const std::vector<bool> keep = independent_columns(full, w.cwiseSqrt(), opts.collinearity_tol);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < full.cols(); ++j) {
        if (keep[static_cast<std::size_t>(j)]) {
            kept.push_back(j);
        } else {
            fit.warnings.push_back("dropped collinear design column " + std::to_string(j));
        }
    }
    fit.dropped.assign(static_cast<std::size_t>(x.cols()), false);
    for (Eigen::Index j = opts.intercept ? 1 : 0; j < full.cols(); ++j)
        fit.dropped[static_cast<std::size_t>(j - (opts.intercept ? 1 : 0))] = !keep[static_cast<std::size_t>(j)];

    Matrix d(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) d.col(static_cast<Eigen::Index>(k)) = full.col(kept[k]);
    const double wsum = w.sum();

    Vector beta = Vector::Zero(d.cols());
    if (d.cols() == 0) {
        fit.converged = true;
    } else if (link == Link::identity) {
        const Vector sw = w.cwiseSqrt();
        const Matrix dw = sw.asDiagonal() * d;
        const Vector rhs = sw.cwiseProduct(y - offset);
        beta = dw.colPivHouseholderQr().solve(rhs);
        const Vector score = d.transpose() * w.cwiseProduct(y - offset - d * beta);
        fit.score_norm = score.cwiseAbs().maxCoeff() / wsum;
        fit.converged = true;
        fit.iterations = 1;
    } else {
        if (opts.intercept && kept.front() == 0 && opts.offset.size() == 0) {
            const double ybar = clip(w.dot(y) / wsum, 1e-6, 1.0 - 1e-6);
            beta[0] = logit(ybar);
        }
        Vector eta = d * beta + offset;
        double dev = logistic_nll(y, eta, w);
        for (int it = 1; it <= opts.max_iter; ++it) {
            fit.iterations = it;
            Vector mu = eta.unaryExpr([](double v) { return expit(v); });
            Vector score = d.transpose() * w.cwiseProduct(y - mu);
            fit.score_norm = score.cwiseAbs().maxCoeff() / wsum;
            if (fit.score_norm <= opts.tol) {
                fit.converged = true;
                break;
            }
            Vector iw = w.array() * mu.array() * (1.0 - mu.array());
            Matrix info = d.transpose() * iw.asDiagonal() * d;
            Eigen::LDLT<Matrix> ldlt(info);
            Vector step = ldlt.solve(score);
            if (!step.allFinite()) step = info.completeOrthogonalDecomposition().solve(score);
            // step halving keeps the likelihood monotone
            double t = 1.0;
            Vector beta_new, eta_new;
            double dev_new = dev;
            for (int half = 0; half < 40; ++half) {
                beta_new = beta + t * step;
                eta_new = d * beta_new + offset;
                dev_new = logistic_nll(y, eta_new, w);
                if (dev_new <= dev + 1e-12 * std::abs(dev)) break;
                t *= 0.5;
            }
            const bool stalled = (beta_new - beta).cwiseAbs().maxCoeff() < 1e-14;
            beta = beta_new;
            eta = eta_new;
            dev = dev_new;
            if (beta.cwiseAbs().maxCoeff() > opts.separation_threshold) {
                fit.separated = true;
                break;
            }
            if (stalled) break;
        }
        if (!fit.converged && !fit.separated) {
            Vector mu = eta.unaryExpr([](double v) { return expit(v); });
            fit.score_norm = (d.transpose() * w.cwiseProduct(y - mu)).cwiseAbs().maxCoeff() / wsum;
            fit.converged = fit.score_norm <= opts.tol;
            if (!fit.converged) fit.warnings.push_back("IRLS did not reach the score tolerance");
        }
        if (fit.separated) {
            fit.warnings.push_back("separation: logistic coefficients exceeded magnitude " +
                                   std::to_string(opts.separation_threshold));
            if (opts.throw_on_separation)
                throw SeparationError("fit_glm: perfect separation (|coefficient| > " +
                                      std::to_string(opts.separation_threshold) + ")");
        }
    }

    fit.coefficients = Vector::Zero(full.cols());
    for (std::size_t k = 0; k < kept.size(); ++k) fit.coefficients[kept[k]] = beta[static_cast<Eigen::Index>(k)];
    return fit;
}

}  // namespace ctmle
