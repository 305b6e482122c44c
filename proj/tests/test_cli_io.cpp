#include "ctmle/cli.hpp"
#include "ctmle/csv.hpp"
#include "ctmle/dgp.hpp"
#include "ctmle/error.hpp"
#include "ctmle/report_io.hpp"

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

using namespace ctmle;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ctmle_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int cli(std::initializer_list<std::string> args, std::string* out_text = nullptr) {
    std::vector<std::string> storage{"ctmle"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) argv.push_back(s.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Rows from simulation 1 written as a CSV with columns W1..W8, A, Y.
void write_sim1_csv(const fs::path& p, std::size_t n, std::uint64_t seed) {
    const auto sim = dgp_sim1(n, 1.0, seed);
    std::ofstream f(p);
    f.precision(17);
    for (int j = 1; j <= 8; ++j) f << 'W' << j << ',';
    f << "A,Y\n";
    const auto& ds = sim.data;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (int j = 0; j < 8; ++j) f << ds.w()(r, j) << ',';
        f << ds.a()[r] << ',' << ds.y_scale().to_raw(ds.y()[r]) << '\n';
    }
}

}  // namespace

TEST_CASE("CSV parsing handles quotes") {
    std::istringstream in("a,\"b,c\",d\n1,\"x \"\"y\"\"\",3\n");
    const auto t = read_csv(in);
    CHECK(t.header == std::vector<std::string>{"a", "b,c", "d"});
    CHECK(t.rows[0][1] == "x \"y\"");
    std::istringstream ragged("a,b\n1\n");
    CHECK_THROWS_AS(read_csv(ragged), InputError);
}

TEST_CASE("imputation fills the mean and adds an indicator") {
    std::istringstream in("W1,A,Y\n1,1,0\nNA,0,1\n3,1,1\n");
    const auto loaded = dataset_from_table(read_csv(in), {}, true);
    const auto& w = loaded.data.w();
    REQUIRE(w.cols() == 2);
    CHECK(w(1, 0) == doctest::Approx(2.0));
    CHECK(w.col(1) == Vector{{0.0, 1.0, 0.0}});
    CHECK(loaded.report.indicator_columns == std::vector<std::string>{"W1_missing"});
    CHECK(loaded.report.missing_counts.front().second == 1);
    CHECK(loaded.data.names().back() == "W1_missing");
}

TEST_CASE("binary covariates are imputed with the mode") {
    std::istringstream in("B,A,Y\n1,1,0\n.,0,1\n1,1,1\n0,0,0\n");
    const auto loaded = dataset_from_table(read_csv(in), {}, true);
    CHECK(loaded.data.w()(1, 0) == 1.0);
}

TEST_CASE("missing outcome or treatment is an error naming the row") {
    std::istringstream in("W1,A,Y\n1,1,0\n2,0,NA\n");
    const auto t = read_csv(in);
    try {
        dataset_from_table(t, {}, true);
        FAIL("expected an error");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("Y") != std::string::npos);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    std::istringstream in2("W1,A,Y\nNA,1,0\n2,0,1\n");
    CHECK_THROWS_AS(dataset_from_table(read_csv(in2), {}, false), InputError);
}

TEST_CASE("treatment codes must be integers") {
    std::istringstream in("W1,A,Y\n1,0.5,0\n2,0,1\n");
    CHECK_THROWS_AS(dataset_from_table(read_csv(in), {}, false), InputError);
}

TEST_CASE("estimate report JSON round trip") {
    const auto sim = dgp_sim1(150, 1.0, 3);
    EstimatorSpec spec;
    spec.or_spec = LearnerSpec::parse("glm:link=identity");
    const auto r = run_estimator("ctmle", sim.data, spec, "ate");
    const Json j = to_json(r);
    const auto back = estimate_report_from_json(Json::parse(j.dump()));
    CHECK(back.psi == r.psi);
    CHECK(back.se == r.se);
    CHECK(back.ci_lo == r.ci_lo);
    CHECK(back.estimator == r.estimator);
    CHECK(back.eif_values == r.eif_values);
    CHECK(to_json(back) == j);
}

TEST_CASE("estimate command writes a report") {
    const auto dir = scratch("estimate");
    write_sim1_csv(dir / "d.csv", 300, 5);
    std::string table;
    const int code = cli({"estimate", "--data", (dir / "d.csv").string(), "--or-learner", "glm:link=identity",
                          "--estimator", "ctmle,tmle,ctmle-ate", "--out", (dir / "r.json").string()},
                         &table);
    REQUIRE(code == exit_ok);
    CHECK(table.find("ctmle-ate") != std::string::npos);
    const auto doc = Json::parse(slurp(dir / "r.json"));
    CHECK(doc["status"] == "ok");
    CHECK(doc["estimates"].size() == 3);
    for (const auto& e : doc["estimates"]) {
        CHECK(e["target"] == "ate");
        CHECK(e["ci"]["lo"].get<double>() <= e["psi"].get<double>());
    }
}

TEST_CASE("estimate command usage errors") {
    const auto dir = scratch("usage");
    write_sim1_csv(dir / "d.csv", 50, 6);
    const std::string data = (dir / "d.csv").string();
    CHECK(cli({"estimate", "--data", data, "--treatment", "nope"}) == exit_usage);
    CHECK(cli({"estimate", "--data", data, "--estimator", "bogus"}) == exit_usage);
    CHECK(cli({"estimate", "--data", (dir / "missing.csv").string()}) == exit_usage);
    CHECK(cli({"estimate", "--data", data, "--level", "1.5"}) == exit_usage);
    CHECK(cli({"estimate"}) == exit_usage);
    CHECK(cli({"frobnicate"}) == exit_usage);
    CHECK(cli({"--help"}) == exit_ok);
}

TEST_CASE("estimation failure exits with 1 and writes the error") {
    const auto dir = scratch("failure");
    // Every validation fold's training rows in arm 1 come from one fold only.
    write_text(dir / "d.csv", "W,A,Y\n1,1,0.2\n2,0,0.4\n3,0,0.5\n4,0,0.3\n5,0,0.9\n6,0,0.1\n");
    const int code = cli({"estimate", "--data", (dir / "d.csv").string(), "--estimator", "cv-ctmle", "--folds", "2",
                          "--out", (dir / "r.json").string()});
    CHECK(code == exit_estimation_failure);
    const auto doc = Json::parse(slurp(dir / "r.json"));
    CHECK(doc["status"] == "error");
    CHECK(doc["message"].get<std::string>().size() > 0);
}

TEST_CASE("multi-arm estimate with a Wald test") {
    const auto dir = scratch("multiarm");
    std::ofstream f(dir / "d.csv");
    for (int i = 0; i < 240; ++i) {
        const double w = (i % 17) / 17.0;
        const int a = i % 3;
        const double y = 0.2 + 0.3 * w + 0.1 * a + 0.05 * ((i * 7) % 5);
        f << (i == 0 ? "W,A,Y\n" : "") << w << ',' << a << ',' << y << '\n';
    }
    f.close();
    CHECK(cli({"estimate", "--data", (dir / "d.csv").string()}) == exit_usage);
    const int code = cli({"estimate", "--data", (dir / "d.csv").string(), "--multiarm", "--out",
                          (dir / "r.json").string()});
    REQUIRE(code == exit_ok);
    const auto doc = Json::parse(slurp(dir / "r.json"));
    const auto& m = doc["multiarm"][0];
    CHECK(m["arms"].size() == 3);
    CHECK(m["wald"]["df"] == 2);
    CHECK(m["wald"]["p_value"].get<double>() >= 0.0);
}

TEST_CASE("simulate command is deterministic and reports the truth") {
    const auto d1 = scratch("sim_a"), d2 = scratch("sim_b");
    for (const auto& [dir, threads] : {std::pair{d1, "1"}, std::pair{d2, "2"}}) {
        REQUIRE(cli({"simulate", "--dgp", "sim1", "--n", "150", "--reps", "4", "--seed", "11", "--threads", threads,
                     "--no-cv-variance", "--kde-points", "32", "--out-dir", dir.string()}) == exit_ok);
    }
    CHECK(slurp(d1 / "sim1_metrics.csv") == slurp(d2 / "sim1_metrics.csv"));
    CHECK(slurp(d1 / "sim1_kde_ctmle.csv") == slurp(d2 / "sim1_kde_ctmle.csv"));
    const auto doc = Json::parse(slurp(d1 / "sim1_report.json"));
    CHECK(doc["truth"] == 1.0);
    CHECK(doc["estimators"].size() == 2);
}

TEST_CASE("simulate command usage errors") {
    CHECK(cli({"simulate", "--reps", "1"}) == exit_usage);
    CHECK(cli({"simulate", "--dgp", "sim9"}) == exit_usage);
    CHECK(cli({"simulate", "--target", "att"}) == exit_usage);
}

TEST_CASE("the installed tool returns the documented exit codes") {
    const std::string tool = CTMLE_CLI_PATH;
    CHECK(std::system((tool + " --help > /dev/null").c_str()) == 0);
    const int status = std::system((tool + " estimate --data /nonexistent.csv 2> /dev/null").c_str());
    CHECK(WEXITSTATUS(status) == exit_usage);
}
