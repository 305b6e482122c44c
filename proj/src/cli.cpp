#include "ctmle/cli.hpp"

#include "ctmle/csv.hpp"
#include "ctmle/error.hpp"
#include "ctmle/estimators.hpp"
#include "ctmle/monte_carlo.hpp"
#include "ctmle/report_io.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

namespace ctmle {

namespace {

struct EstimateArgs {
    std::string data;
    std::string treatment = "A";
    std::string outcome = "Y";
    std::vector<std::string> covariates;
    std::vector<std::string> estimators{"ctmle"};
    std::string target = "ate";
    int arm = 1;
    std::string or_learner = "glm";
    std::string ps_learner = "glm";
    std::string smoother = "spline";
    int smoother_df = 2;
    int folds = 5;
    double level = 0.95;
    double ps_floor = 1e-6;
    std::uint64_t seed = 1;
    int iterations = 1;
    bool no_cv_variance = false;
    bool multiarm = false;
    bool impute = false;
    std::string out;
    std::string table;
};

struct SimulateArgs {
    std::string dgp = "sim1";
    std::size_t n = 100;
    double gamma = 0.0;
    int reps = 100;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string target = "ate";
    std::vector<std::string> estimators{"ctmle", "tmle"};
    std::string or_learner, ps_learner, smoother;
    int smoother_df = 2;
    int folds = 5;
    double level = 0.95;
    double ps_floor = 1e-6;
    bool no_cv_variance = false;
    bool remainder = false;
    std::size_t kde_points = 512;
    std::string out_dir = ".";
    std::string prefix;
};

LearnerSpec smoother_spec(const std::string& text, int df) {
    LearnerSpec s = LearnerSpec::parse(text);
    if (s.kind == LearnerKind::spline && text.find("df=") == std::string::npos) s.df = df;
    return s;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write '" + path + "'");
    f << content;
}

void check_common(int folds, double level, double ps_floor, bool needs_cv) {
    if (!(level > 0.0 && level < 1.0)) throw InputError("--level must lie in (0,1)");
    if (!(ps_floor > 0.0 && ps_floor < 0.5)) throw InputError("--ps-floor must lie in (0, 0.5)");
    if (needs_cv && folds < 2) throw InputError("--folds must be at least 2 for cross-validated quantities");
}

Json config_echo(const EstimateArgs& a) {
    return {{"data", a.data}, {"treatment", a.treatment}, {"outcome", a.outcome}, {"covariates", a.covariates},
            {"estimators", a.estimators}, {"target", a.target}, {"arm", a.arm}, {"or_learner", a.or_learner},
            {"ps_learner", a.ps_learner}, {"smoother", a.smoother}, {"smoother_df", a.smoother_df},
            {"folds", a.folds}, {"level", a.level}, {"ps_floor", a.ps_floor}, {"seed", a.seed},
            {"iterations", a.iterations}, {"cv_variance", !a.no_cv_variance}, {"multiarm", a.multiarm},
            {"impute", a.impute}};
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
    EstimatorSpec spec;
    LoadedData loaded;
    try {
        const bool needs_cv = !a.no_cv_variance ||
                              std::find(a.estimators.begin(), a.estimators.end(), "cv-ctmle") != a.estimators.end();
        check_common(a.folds, a.level, a.ps_floor, needs_cv);
        if (a.iterations < 1) throw InputError("--iterations must be at least 1");
        for (const auto& e : a.estimators)
            if (std::find(estimator_names().begin(), estimator_names().end(), e) == estimator_names().end())
                throw InputError("unknown estimator '" + e + "'");
        spec.or_spec = LearnerSpec::parse(a.or_learner);
        spec.ps_spec = LearnerSpec::parse(a.ps_learner);
        spec.smoother = smoother_spec(a.smoother, a.smoother_df);
        spec.cfg.folds = a.folds;
        spec.cfg.level = a.level;
        spec.cfg.ps_floor = a.ps_floor;
        spec.cfg.seed = a.seed;
        spec.cfg.adaptive_iterations = a.iterations;
        spec.cfg.compute_variance = !a.no_cv_variance;
        loaded = load_csv(a.data, {a.treatment, a.outcome, a.covariates}, a.impute);
        if (!a.multiarm && loaded.data.n_arms() > 2)
            throw InputError("treatment has " + std::to_string(loaded.data.n_arms()) + " arms; use --multiarm");
        const auto vr = validate_dataset(loaded.data);
        for (const auto& w : vr.warnings) err << "warning: " << w << '\n';
        for (const auto& w : loaded.report.warnings) err << "note: " << w << '\n';
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }

    Json doc{{"status", "ok"}, {"config", config_echo(a)}};
    Json ingest{{"rows", loaded.report.rows}, {"indicator_columns", loaded.report.indicator_columns}};
    for (const auto& [name, count] : loaded.report.missing_counts) ingest["missing_counts"][name] = count;
    doc["ingestion"] = ingest;
    std::string table;
    try {
        if (a.multiarm) {
            Json arms = Json::array();
            for (const auto& e : a.estimators) {
                const auto r = multiarm_means(loaded.data, e, spec);
                arms.push_back(to_json(r));
                table += multiarm_table(r);
            }
            doc["multiarm"] = arms;
        } else {
            std::vector<EstimateReport> reports;
            for (const auto& e : a.estimators) reports.push_back(run_estimator(e, loaded.data, spec, a.target, a.arm));
            Json list = Json::array();
            for (const auto& r : reports) list.push_back(to_json(r));
            doc["estimates"] = list;
            table = estimate_table(reports);
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "estimation failed: " << e.what() << '\n';
        if (!a.out.empty()) {
            Json fail{{"status", "error"}, {"message", e.what()}, {"config", config_echo(a)}};
            if (const auto* fe = dynamic_cast<const FoldError*>(&e)) fail["fold"] = fe->fold();
            try {
                write_file(a.out, fail.dump(2) + "\n");
            } catch (const std::exception&) {
            }
        }
        return exit_estimation_failure;
    }
    out << table;
    try {
        if (!a.out.empty()) write_file(a.out, doc.dump(2) + "\n");
        if (!a.table.empty()) write_file(a.table, table);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_ok;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    McConfig cfg;
    try {
        check_common(a.folds, a.level, a.ps_floor, !a.no_cv_variance);
        cfg.dgp = parse_dgp(a.dgp);
        if (a.reps < 2) throw InputError("--reps must be at least 2 (the MC variance is undefined otherwise)");
        if (a.n < 2) throw InputError("--n must be at least 2");
        if (a.gamma < 0) throw InputError("--gamma must be non-negative");
        cfg.n = a.n;
        cfg.gamma = a.gamma;
        cfg.reps = a.reps;
        cfg.seed = a.seed;
        cfg.threads = a.threads;
        cfg.target = a.target;
        cfg.remainder = a.remainder;
        cfg.kde_points = a.kde_points;
        if (a.target != "ate" && a.target != "tsm") throw InputError("--target must be ate or tsm");
        EstimatorSpec spec = default_mc_estimators(cfg.dgp).front().spec;
        if (!a.or_learner.empty()) spec.or_spec = LearnerSpec::parse(a.or_learner);
        if (!a.ps_learner.empty()) spec.ps_spec = LearnerSpec::parse(a.ps_learner);
        spec.smoother = smoother_spec(a.smoother.empty() ? "spline" : a.smoother, a.smoother_df);
        spec.cfg.folds = a.folds;
        spec.cfg.level = a.level;
        spec.cfg.ps_floor = a.ps_floor;
        spec.cfg.compute_variance = !a.no_cv_variance;
        for (const auto& e : a.estimators) {
            if (std::find(estimator_names().begin(), estimator_names().end(), e) == estimator_names().end())
                throw InputError("unknown estimator '" + e + "'");
            cfg.estimators.push_back({e, e, spec});
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    SimulationReport rep;
    try {
        rep = run_mc(cfg);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "simulation failed: " << e.what() << '\n';
        return exit_estimation_failure;
    }
    try {
        std::filesystem::create_directories(a.out_dir);
        const std::string prefix = (std::filesystem::path(a.out_dir) / (a.prefix.empty() ? a.dgp : a.prefix)).string();
        write_file(prefix + "_report.json", to_json(rep).dump(2) + "\n");
        write_file(prefix + "_metrics.csv", simulation_csv(rep));
        for (const auto& s : rep.estimators)
            if (!s.kde.grid.empty()) write_file(prefix + "_kde_" + s.label + ".csv", kde_csv(s.kde));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    out << simulation_table(rep);
    return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Collaborative TMLE and related estimators of treatment-specific means and the ATE"};
    app.set_config("--config", "", "INI/TOML file; section names match subcommands; flags override file values");
    app.require_subcommand(1);

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Estimate from a CSV file");
    est->add_option("--data", ea.data, "CSV file with a header row")->required();
    est->add_option("--treatment", ea.treatment, "Treatment column (integer coded 0..K-1)")->capture_default_str();
    est->add_option("--outcome", ea.outcome, "Outcome column")->capture_default_str();
    est->add_option("--covariates", ea.covariates, "Covariate columns (default: all others)")->delimiter(',');
    est->add_option("--estimator", ea.estimators, "ctmle|tmle|onestep|conestep|ctmle-ate|cv-ctmle")
        ->delimiter(',')
        ->capture_default_str();
    est->add_option("--target", ea.target, "ate or tsm")->capture_default_str();
    est->add_option("--arm", ea.arm, "Arm for --target tsm")->capture_default_str();
    est->add_option("--or-learner", ea.or_learner, "Outcome regression learner spec")->capture_default_str();
    est->add_option("--ps-learner", ea.ps_learner, "Propensity learner spec (standard estimators)")->capture_default_str();
    est->add_option("--smoother", ea.smoother, "Adaptive propensity smoother spec")->capture_default_str();
    est->add_option("--smoother-df", ea.smoother_df, "Spline df of the adaptive propensity smoother")->capture_default_str();
    est->add_option("--folds", ea.folds, "Folds for cross-validated variance and CV-CTMLE")->capture_default_str();
    est->add_option("--level", ea.level, "Confidence level")->capture_default_str();
    est->add_option("--ps-floor", ea.ps_floor, "Lower bound for propensities")->capture_default_str();
    est->add_option("--seed", ea.seed, "Random seed")->capture_default_str();
    est->add_option("--iterations", ea.iterations, "Refit the adaptive propensity on the targeted OR this many times")
        ->capture_default_str();
    est->add_flag("--no-cv-variance", ea.no_cv_variance, "Use the in-sample influence-function variance");
    est->add_flag("--multiarm", ea.multiarm, "Mean under every arm with a joint Wald test");
    est->add_flag("--impute", ea.impute, "Mean/mode imputation of covariates with missingness indicators");
    est->add_option("--out", ea.out, "JSON report path");
    est->add_option("--table", ea.table, "Also write the text table here");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study on a built-in data-generating process");
    sim->add_option("--dgp", sa.dgp, "sim1 or sim2")->capture_default_str();
    sim->add_option("--n", sa.n, "Sample size")->capture_default_str();
    sim->add_option("--gamma", sa.gamma, "Positivity knob (sim1)")->capture_default_str();
    sim->add_option("--reps", sa.reps, "Replicates")->capture_default_str();
    sim->add_option("--seed", sa.seed, "Base seed")->capture_default_str();
    sim->add_option("--threads", sa.threads, "Worker threads (0: OpenMP default)")->capture_default_str();
    sim->add_option("--target", sa.target, "ate or tsm (mean under treatment)")->capture_default_str();
    sim->add_option("--estimator", sa.estimators, "Estimators to compare")->delimiter(',')->capture_default_str();
    sim->add_option("--or-learner", sa.or_learner, "Override the DGP's default OR learner");
    sim->add_option("--ps-learner", sa.ps_learner, "Override the DGP's default propensity learner");
    sim->add_option("--smoother", sa.smoother, "Adaptive propensity smoother (default spline)");
    sim->add_option("--smoother-df", sa.smoother_df, "Spline df of the smoother")->capture_default_str();
    sim->add_option("--folds", sa.folds, "Folds for the cross-validated SE")->capture_default_str();
    sim->add_option("--level", sa.level, "Confidence level of estimated-SE intervals")->capture_default_str();
    sim->add_option("--ps-floor", sa.ps_floor, "Lower bound for propensities")->capture_default_str();
    sim->add_flag("--no-cv-variance", sa.no_cv_variance, "Use in-sample influence-function SEs (faster)");
    sim->add_flag("--remainder", sa.remainder, "Report the mean second-order remainder (tsm target)");
    sim->add_option("--kde-points", sa.kde_points, "KDE grid size")->capture_default_str();
    sim->add_option("--out-dir", sa.out_dir, "Directory for report files")->capture_default_str();
    sim->add_option("--prefix", sa.prefix, "File name prefix (default: the dgp name)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
    }
    if (est->parsed()) return cmd_estimate(ea, out, err);
    return cmd_simulate(sa, out, err);
}

}  // namespace ctmle
