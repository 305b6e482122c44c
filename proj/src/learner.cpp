#include "ctmle/learner.hpp"

#include "ctmle/error.hpp"
#include "ctmle/parallel.hpp"
#include "ctmle/lasso.hpp"
#include "ctmle/numeric.hpp"
#include "ctmle/rng.hpp"
#include "ctmle/splines.hpp"


#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>

namespace ctmle {

namespace {
constexpr double kHalKktTol = 1e-5;      // statistical accuracy is all a nuisance fit needs
constexpr double kHalCvKktTol = 1e-4;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InputError("learner spec: '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InputError("learner spec: '" + key + "' expects a number, got '" + value + "'");
    }
}

Matrix with_pairwise_products(const Matrix& x) {
    const Eigen::Index p = x.cols();
    Matrix out(x.rows(), p + p * (p - 1) / 2);
    out.leftCols(p) = x;
    Eigen::Index c = p;
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index k = j + 1; k < p; ++k) out.col(c++) = x.col(j).cwiseProduct(x.col(k));
    return out;
}

GlmOptions tolerant_glm() {
    GlmOptions o;
    o.throw_on_separation = false;
    return o;
}

class MeanLearner final : public FittedLearner {
public:
    explicit MeanLearner(double m) : mean_(m) {}
    Vector predict(const Matrix& x) const override { return Vector::Constant(x.rows(), mean_); }
    std::string describe() const override { return "mean(" + std::to_string(mean_) + ")"; }

private:
    double mean_;
};

class GlmLearner final : public FittedLearner {
public:
    GlmLearner(const Matrix& x, const Vector& y, Link link, bool interactions) : interactions_(interactions) {
        fit_ = fit_glm(interactions ? with_pairwise_products(x) : x, y, link, tolerant_glm());
        warnings_ = fit_.warnings;
    }
    Vector predict(const Matrix& x) const override {
        return fit_.predict(interactions_ ? with_pairwise_products(x) : x);
    }
    std::string describe() const override { return fit_.basis_spec; }
    const GlmFit& fit() const noexcept { return fit_; }

private:
    bool interactions_;
    GlmFit fit_;
};

/// Additive natural splines, one block per input column, with a GLM on top.
class SplineLearner final : public FittedLearner {
public:
    SplineLearner(const Matrix& x, const Vector& y, Link link, int df) {
        std::vector<Matrix> blocks;
        Eigen::Index cols = 0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const Vector col = x.col(j);
            if (col.maxCoeff() == col.minCoeff()) {
                bases_.emplace_back();
                warnings_.push_back("spline: input column " + std::to_string(j) + " is constant; omitted");
                continue;
            }
            auto sd = natural_spline_basis(col, df);
            warnings_.insert(warnings_.end(), sd.warnings.begin(), sd.warnings.end());
            cols += sd.design.cols();
            blocks.push_back(std::move(sd.design));
            bases_.push_back(std::move(sd.basis));
        }
        Matrix design(x.rows(), cols);
        Eigen::Index c = 0;
        for (const auto& b : blocks) {
            design.middleCols(c, b.cols()) = b;
            c += b.cols();
        }
        fit_ = fit_glm(design, y, link, tolerant_glm());
        warnings_.insert(warnings_.end(), fit_.warnings.begin(), fit_.warnings.end());
    }
    Vector predict(const Matrix& x) const override {
        Eigen::Index cols = 0;
        for (const auto& b : bases_) cols += b ? b->df() : 0;
        Matrix design(x.rows(), cols);
        Eigen::Index c = 0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const auto& b = bases_[static_cast<std::size_t>(j)];
            if (!b) continue;
            design.middleCols(c, b->df()) = b->evaluate(x.col(j));
            c += b->df();
        }
        return fit_.predict(design);
    }
    std::string describe() const override { return "spline+" + fit_.basis_spec; }
    const GlmFit& fit() const noexcept { return fit_; }

private:
    std::vector<std::optional<NaturalSplineBasis>> bases_;
    GlmFit fit_;
};

class HalLearner final : public FittedLearner {
public:
    HalLearner(const Matrix& x, const Vector& y, const LearnerSpec& spec, std::uint64_t seed) {
        if (y.minCoeff() < 0.0 || y.maxCoeff() > 1.0) throw InputError("hal: responses must lie in [0,1]");
        auto hd = hal_lite_basis(x, spec.hal);
        warnings_ = hd.warnings;
        basis_ = std::move(hd.basis);
        const double lmax = lasso_lambda_max(hd.design, y);
        if (basis_.n_columns() == 0 || !(lmax > 0.0)) {
            fit_.intercept = logit(clip(y.mean(), 1e-6, 1.0 - 1e-6));
            fit_.coefficients = Vector::Zero(static_cast<Eigen::Index>(basis_.n_columns()));
            return;
        }
        const int V = std::min<int>(spec.inner_folds, static_cast<int>(y.size()));
        const auto folds = FoldScheme::make(static_cast<std::size_t>(y.size()), std::max(V, 1), seed);
        LassoOptions opts;
        opts.kkt_tol = kHalKktTol;
        opts.cv_kkt_tol = kHalCvKktTol;
        auto path = fit_lasso_logistic(hd.design, y, lasso_lambda_grid(lmax, spec.n_lambda, spec.lambda_ratio), folds, opts);
        fit_ = std::move(path.fit);
        if (!fit_.converged) warnings_.push_back("hal: lasso did not reach the KKT tolerance");
    }
    Vector predict(const Matrix& x) const override { return fit_.predict(basis_.design(x)); }
    std::string describe() const override {
        std::ostringstream os;
        os << "hal(columns=" << basis_.n_columns() << ", lambda=" << fit_.lambda
           << ", active=" << (fit_.coefficients.array() != 0.0).count() << ")";
        return os.str();
    }

private:
    HalBasis basis_;
    LassoFit fit_;
};

double pointwise_loss(double y, double pred, Loss loss) {
    if (loss == Loss::squared) return (y - pred) * (y - pred);
    const double p = clip(pred, 1e-12, 1.0 - 1e-12);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

}  // namespace

Matrix select_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    return out;
}

Vector select_rows(const Vector& v, const std::vector<std::size_t>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
    return out;
}

LearnerSpec LearnerSpec::parse(std::string_view text) {
    const std::string s = trim(text);
    if (s.empty()) throw InputError("learner spec: empty");
    const auto colon = s.find(':');
    const std::string name = s.substr(0, colon);
    const std::string rest = colon == std::string::npos ? std::string{} : s.substr(colon + 1);

    LearnerSpec spec;
    if (name == "select") {
        spec.kind = LearnerKind::select;
        if (rest.empty()) throw InputError("learner spec: select needs at least one candidate");
        for (const auto& c : split(rest, '|')) spec.candidates.push_back(parse(c));
        return spec;
    }
    if (name == "mean") spec.kind = LearnerKind::mean;
    else if (name == "glm") spec.kind = LearnerKind::glm;
    else if (name == "spline") spec.kind = LearnerKind::spline;
    else if (name == "hal") spec.kind = LearnerKind::hal;
    else throw InputError("learner spec: unknown learner '" + name + "'");

    if (rest.empty()) return spec;
    for (const auto& kv : split(rest, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("learner spec: expected key=value, got '" + kv + "'");
        const std::string key = trim(std::string_view(kv).substr(0, eq));
        const std::string value = trim(std::string_view(kv).substr(eq + 1));
        if (key == "link") {
            if (value == "logit") spec.link = Link::logit;
            else if (value == "identity") spec.link = Link::identity;
            else throw InputError("learner spec: unknown link '" + value + "'");
        } else if (key == "interactions") {
            spec.interactions = parse_int(key, value) != 0;
        } else if (key == "df") {
            spec.df = parse_int(key, value);
            if (spec.df < 1) throw InputError("learner spec: df must be at least 1");
        } else if (key == "order") {
            spec.hal.max_interaction = parse_int(key, value);
            if (spec.hal.max_interaction < 1) throw InputError("learner spec: order must be at least 1");
        } else if (key == "knots") {
            spec.hal.max_knots_per_dim = parse_int(key, value);
            if (spec.hal.max_knots_per_dim < 1) throw InputError("learner spec: knots must be at least 1");
        } else if (key == "max_columns") {
            spec.hal.max_columns = static_cast<std::size_t>(parse_int(key, value));
        } else if (key == "nlambda") {
            spec.n_lambda = parse_int(key, value);
            if (spec.n_lambda < 1) throw InputError("learner spec: nlambda must be at least 1");
        } else if (key == "ratio") {
            spec.lambda_ratio = parse_double(key, value);
            if (!(spec.lambda_ratio > 0.0 && spec.lambda_ratio <= 1.0))
                throw InputError("learner spec: ratio must be in (0,1]");
        } else if (key == "folds") {
            spec.inner_folds = parse_int(key, value);
            if (spec.inner_folds < 2) throw InputError("learner spec: folds must be at least 2");
        } else {
            throw InputError("learner spec: unknown key '" + key + "' for learner '" + name + "'");
        }
    }
    return spec;
}

std::string LearnerSpec::to_string() const {
    std::ostringstream os;
    switch (kind) {
        case LearnerKind::mean: return "mean";
        case LearnerKind::glm:
            os << "glm:link=" << ctmle::to_string(link) << ",interactions=" << (interactions ? 1 : 0);
            break;
        case LearnerKind::spline: os << "spline:df=" << df << ",link=" << ctmle::to_string(link); break;
        case LearnerKind::hal:
            os << "hal:order=" << hal.max_interaction << ",knots=" << hal.max_knots_per_dim
               << ",max_columns=" << hal.max_columns << ",nlambda=" << n_lambda << ",ratio=" << lambda_ratio
               << ",folds=" << inner_folds;
            break;
        case LearnerKind::select:
            os << "select:";
            for (std::size_t k = 0; k < candidates.size(); ++k) os << (k ? "|" : "") << candidates[k].to_string();
            break;
    }
    return os.str();
}

namespace {

// HAL fits are deterministic in (spec, x, y, seed) and dominate the cost of an
// estimate; estimators sharing a replicate often request the very same fit.
class HalFitCache {
public:
    LearnerPtr find(const std::string& key, const Matrix& x, const Vector& y, std::uint64_t seed) {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& e : entries_)
            if (e.seed == seed && e.key == key && e.x.rows() == x.rows() && e.x.cols() == x.cols() && e.x == x &&
                e.y == y)
                return e.model;
        return nullptr;
    }

    void insert(std::string key, const Matrix& x, const Vector& y, std::uint64_t seed, LearnerPtr model) {
        std::lock_guard<std::mutex> lock(mutex_);
        entries_.push_back({std::move(key), x, y, seed, std::move(model)});
        if (entries_.size() > kCapacity) entries_.pop_front();
    }

private:
    static constexpr std::size_t kCapacity = 16;
    struct Entry {
        std::string key;
        Matrix x;
        Vector y;
        std::uint64_t seed;
        LearnerPtr model;
    };
    std::mutex mutex_;
    std::deque<Entry> entries_;
};

LearnerPtr fit_hal_cached(const LearnerSpec& spec, const Matrix& x, const Vector& y, std::uint64_t seed) {
    static HalFitCache cache;
    std::ostringstream os;
    os.precision(17);
    os << spec.to_string() << ';' << spec.lambda_ratio;
    std::string key = os.str();
    if (auto hit = cache.find(key, x, y, seed)) return hit;
    LearnerPtr model = std::make_shared<HalLearner>(x, y, spec, seed);
    cache.insert(std::move(key), x, y, seed, model);
    return model;
}

}  // namespace

LearnerPtr fit_learner(const LearnerSpec& spec, const Matrix& x, const Vector& y, std::uint64_t seed) {
    if (x.rows() != y.size()) throw InputError("fit_learner: row mismatch between covariates and response");
    if (y.size() == 0) throw InputError("fit_learner: no training rows");
    switch (spec.kind) {
        case LearnerKind::mean: return std::make_shared<MeanLearner>(y.mean());
        case LearnerKind::glm: return std::make_shared<GlmLearner>(x, y, spec.link, spec.interactions);
        case LearnerKind::spline: return std::make_shared<SplineLearner>(x, y, spec.link, spec.df);
        case LearnerKind::hal: return fit_hal_cached(spec, x, y, seed);
        case LearnerKind::select: {
            if (spec.candidates.empty()) throw InputError("fit_learner: select has no candidates");
            if (spec.candidates.size() == 1) return fit_learner(spec.candidates.front(), x, y, seed);
            const int V = std::min<int>(spec.inner_folds, static_cast<int>(y.size()));
            const auto folds = FoldScheme::make(static_cast<std::size_t>(y.size()), V, seed);
            const bool unit = y.minCoeff() >= 0.0 && y.maxCoeff() <= 1.0;
            const auto sel = cv_select(spec.candidates, x, y, folds, unit ? Loss::neg_log_likelihood : Loss::squared,
                                       derive_seed(seed, 1));
            return fit_learner(spec.candidates[sel.chosen], x, y, seed);
        }
    }
    throw InputError("fit_learner: unknown learner kind");
}

CvSelection cv_select(const std::vector<LearnerSpec>& candidates, const Matrix& x, const Vector& y,
                      const FoldScheme& folds, Loss loss, std::uint64_t seed) {
    if (candidates.empty()) throw InputError("cv_select: no candidates");
    if (folds.n() != static_cast<std::size_t>(y.size())) throw InputError("cv_select: fold scheme size mismatch");
    CvSelection out;
    out.risks.assign(candidates.size(), 0.0);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        try {
            const Vector pred = cross_fit(candidates[c], x, y, folds, {}, derive_seed(seed, c));
            double risk = 0.0;
            for (Eigen::Index i = 0; i < y.size(); ++i) risk += pointwise_loss(y[i], pred[i], loss);
            out.risks[c] = risk / static_cast<double>(y.size());
            if (!std::isfinite(out.risks[c])) out.risks[c] = std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
            out.risks[c] = std::numeric_limits<double>::infinity();
        }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
        if (out.risks[c] < out.risks[best]) best = c;
    if (!std::isfinite(out.risks[best])) throw EstimationError("cv_select: every candidate failed");
    out.chosen = best;
    return out;
}

Vector cross_fit(const LearnerSpec& spec, const Matrix& x, const Vector& y, const FoldScheme& folds,
                 const IntVector& train_mask, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(y.size());
    if (static_cast<std::size_t>(x.rows()) != n) throw InputError("cross_fit: row mismatch");
    if (folds.n() != n) throw InputError("cross_fit: fold scheme size mismatch");
    if (train_mask.size() != 0 && static_cast<std::size_t>(train_mask.size()) != n)
        throw InputError("cross_fit: training mask size mismatch");

    Vector out(static_cast<Eigen::Index>(n));
    for_each_fold(folds.V, [&](int v) {
        std::vector<std::size_t> train;
        for (auto i : folds.training(v))
            if (train_mask.size() == 0 || train_mask[static_cast<Eigen::Index>(i)] != 0) train.push_back(i);
        if (train.empty()) throw FoldError(v, "no eligible training rows (e.g. no treated units outside the fold)");
        const auto model = fit_learner(spec, select_rows(x, train), select_rows(y, train), derive_seed(seed, static_cast<std::uint64_t>(v)));
        const auto valid = folds.validation(v);
        const Vector pred = model->predict(select_rows(x, valid));
        for (std::size_t r = 0; r < valid.size(); ++r) out[static_cast<Eigen::Index>(valid[r])] = pred[static_cast<Eigen::Index>(r)];
    });
    return out;
}

}  // namespace ctmle
