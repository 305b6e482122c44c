#include "ctmle/report_io.hpp"

#include "ctmle/error.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ctmle {

namespace {

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double get_num(const Json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::string fmt(double x, int prec = 4) {
    if (!std::isfinite(x)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, x);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string target_label(const EstimateReport& r) {
    return r.target == "ate" ? "ATE" : "mean under arm " + std::to_string(r.arm);
}

}  // namespace

Json to_json(const EstimateReport& r) {
    Json j;
    j["estimator"] = r.estimator;
    j["target"] = r.target;
    j["arm"] = r.arm;
    j["psi"] = num(r.psi);
    j["psi_scaled"] = num(r.psi_scaled);
    j["se"] = num(r.se);
    j["se_method"] = r.se_method;
    j["folds"] = r.folds;
    j["ci"] = {{"lo", num(r.ci_lo)}, {"hi", num(r.ci_hi)}, {"level", r.level}};
    Json eps = Json::array();
    for (double e : r.epsilon) eps.push_back(num(e));
    j["epsilon"] = eps;
    j["eif_mean"] = num(r.diagnostics.eif_mean);
    j["ps_range"] = {num(r.diagnostics.ps_min), num(r.diagnostics.ps_max)};
    j["separation"] = r.diagnostics.separation;
    j["warnings"] = r.diagnostics.warnings;
    j["n"] = r.n;
    j["seed"] = r.seed;
    Json eif = Json::array();
    for (Eigen::Index i = 0; i < r.eif_values.size(); ++i) eif.push_back(num(r.eif_values[i]));
    j["eif_values"] = eif;
    return j;
}

EstimateReport estimate_report_from_json(const Json& j) {
    try {
        EstimateReport r;
        r.estimator = j.at("estimator").get<std::string>();
        r.target = j.at("target").get<std::string>();
        r.arm = j.at("arm").get<int>();
        r.psi = get_num(j, "psi");
        r.psi_scaled = get_num(j, "psi_scaled");
        r.se = get_num(j, "se");
        r.se_method = j.at("se_method").get<std::string>();
        r.folds = j.at("folds").get<int>();
        r.ci_lo = get_num(j.at("ci"), "lo");
        r.ci_hi = get_num(j.at("ci"), "hi");
        r.level = j.at("ci").at("level").get<double>();
        for (const auto& e : j.at("epsilon")) r.epsilon.push_back(e.is_null() ? std::nan("") : e.get<double>());
        r.diagnostics.eif_mean = get_num(j, "eif_mean");
        r.diagnostics.ps_min = j.at("ps_range").at(0).is_null() ? std::nan("") : j.at("ps_range").at(0).get<double>();
        r.diagnostics.ps_max = j.at("ps_range").at(1).is_null() ? std::nan("") : j.at("ps_range").at(1).get<double>();
        r.diagnostics.separation = j.at("separation").get<bool>();
        r.diagnostics.warnings = j.at("warnings").get<std::vector<std::string>>();
        r.n = j.at("n").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        const auto& eif = j.at("eif_values");
        r.eif_values.resize(static_cast<Eigen::Index>(eif.size()));
        for (std::size_t i = 0; i < eif.size(); ++i)
            r.eif_values[static_cast<Eigen::Index>(i)] = eif[i].is_null() ? std::nan("") : eif[i].get<double>();
        return r;
    } catch (const Json::exception& e) {
        throw InputError(std::string("malformed estimate report: ") + e.what());
    }
}

Json to_json(const MultiArmReport& r) {
    Json j;
    j["estimator"] = r.estimator;
    Json arms = Json::array();
    for (const auto& a : r.arms) arms.push_back(to_json(a));
    j["arms"] = arms;
    Json cov = Json::array();
    for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < r.covariance.cols(); ++k) row.push_back(num(r.covariance(i, k)));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["wald"] = {{"statistic", num(r.wald.statistic)}, {"df", r.wald.df}, {"p_value", num(r.wald.p_value)},
                 {"warnings", r.wald.warnings}};
    Json ps = Json::array();
    for (Eigen::Index k = 0; k < r.arm_propensities.cols(); ++k)
        ps.push_back({{"arm", k}, {"min", num(r.arm_propensities.col(k).minCoeff())},
                      {"max", num(r.arm_propensities.col(k).maxCoeff())}});
    j["arm_propensity_range"] = ps;
    return j;
}

Json to_json(const SimulationReport& r) {
    Json j;
    j["dgp"] = r.dgp;
    j["n"] = r.n;
    j["gamma"] = r.gamma;
    j["reps"] = r.reps;
    j["seed"] = r.seed;
    j["target"] = r.target;
    j["truth"] = r.truth;
    j["level"] = r.level;
    Json ests = Json::array();
    for (const auto& s : r.estimators) {
        Json e;
        e["label"] = s.label;
        e["method"] = s.method;
        e["bias"] = num(s.bias);
        e["variance"] = num(s.variance);
        e["mse"] = num(s.mse);
        e["mc_sd"] = num(s.mc_sd);
        e["relative_efficiency"] = num(s.relative_efficiency);
        e["reference"] = s.reference;
        e["oracle_coverage"] = num(s.oracle_coverage);
        e["estimated_se_coverage"] = num(s.estimated_se_coverage);
        e["mean_se"] = num(s.mean_se);
        e["mean_remainder"] = num(s.mean_remainder);
        e["failures"] = s.failures;
        e["failure_messages"] = s.failure_messages;
        Json est = Json::array(), se = Json::array();
        for (double x : s.estimates) est.push_back(num(x));
        for (double x : s.ses) se.push_back(num(x));
        e["estimates"] = est;
        e["ses"] = se;
        e["kde"] = {{"bandwidth", num(s.kde.bandwidth)}, {"points", s.kde.grid.size()}};
        ests.push_back(e);
    }
    j["estimators"] = ests;
    return j;
}

std::string simulation_csv(const SimulationReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "estimator,metric,value\n";
    for (const auto& s : r.estimators) {
        const std::pair<const char*, double> rows[] = {
            {"bias", s.bias}, {"variance", s.variance}, {"mse", s.mse}, {"mc_sd", s.mc_sd},
            {"relative_efficiency", s.relative_efficiency}, {"oracle_coverage", s.oracle_coverage},
            {"estimated_se_coverage", s.estimated_se_coverage}, {"mean_se", s.mean_se},
            {"mean_remainder", s.mean_remainder}, {"failures", static_cast<double>(s.failures)}};
        for (const auto& [name, value] : rows) {
            out << s.label << ',' << name << ',';
            if (std::isfinite(value)) out << value;
            else out << "NA";
            out << '\n';
        }
    }
    return out.str();
}

std::string kde_csv(const KdeCurve& c) {
    std::ostringstream out;
    out.precision(17);
    out << "x,density\n";
    for (std::size_t k = 0; k < c.grid.size(); ++k) out << c.grid[k] << ',' << c.density[k] << '\n';
    return out.str();
}

std::string estimate_table(const std::vector<EstimateReport>& reports) {
    std::ostringstream out;
    if (reports.empty()) return "";
    const int pct = static_cast<int>(std::lround(reports.front().level * 100));
    out << pad("Estimator", 12) << pad("Target", 20) << "Estimate (" << pct << "% confidence interval)    SE\n";
    for (const auto& r : reports)
        out << pad(r.estimator, 12) << pad(target_label(r), 20) << fmt(r.psi) << " (" << fmt(r.ci_lo) << ", "
            << fmt(r.ci_hi) << ")    " << fmt(r.se) << '\n';
    return out.str();
}

std::string multiarm_table(const MultiArmReport& r) {
    std::ostringstream out;
    const int pct = r.arms.empty() ? 95 : static_cast<int>(std::lround(r.arms.front().level * 100));
    out << "Estimated average outcome by arm (" << pct << "% confidence interval), estimator " << r.estimator << '\n';
    for (const auto& a : r.arms)
        out << "  arm " << a.arm << ": " << fmt(a.psi) << " (" << fmt(a.ci_lo) << ", " << fmt(a.ci_hi) << ")\n";
    out << "Wald test of equal means: statistic " << fmt(r.wald.statistic) << " on " << r.wald.df
        << " df, p = " << fmt(r.wald.p_value, 6) << '\n';
    for (const auto& w : r.wald.warnings) out << "  warning: " << w << '\n';
    return out.str();
}

std::string simulation_table(const SimulationReport& r) {
    std::ostringstream out;
    out << r.dgp << "  n=" << r.n;
    if (r.dgp == "sim1") out << "  gamma=" << r.gamma;
    out << "  reps=" << r.reps << "  target=" << r.target << "  truth=" << r.truth << '\n';
    out << pad("estimator", 12) << pad("bias", 12) << pad("variance", 12) << pad("mse", 12) << pad("rel.eff", 10)
        << pad("oracle cov", 12) << pad("se cov", 10) << "failures\n";
    for (const auto& s : r.estimators)
        out << pad(s.label, 12) << pad(fmt(s.bias, 5), 12) << pad(fmt(s.variance, 6), 12) << pad(fmt(s.mse, 6), 12)
            << pad(fmt(s.relative_efficiency, 3), 10) << pad(fmt(s.oracle_coverage, 3), 12)
            << pad(fmt(s.estimated_se_coverage, 3), 10) << s.failures << '\n';
    return out.str();
}

}  // namespace ctmle
