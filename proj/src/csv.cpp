#include "ctmle/csv.hpp"

#include "ctmle/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>

namespace ctmle {

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw InputError("csv line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

std::size_t column_index(const CsvTable& t, const std::string& name, const std::string& role) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw InputError(role + " column '" + name + "' not found in the CSV header");
    return static_cast<std::size_t>(it - t.header.begin());
}

std::string cell_ref(std::size_t row, const std::string& col) {
    // Data row r is line r + 2 of the file (1-based, after the header).
    return "row " + std::to_string(row + 1) + " (line " + std::to_string(row + 2) + "), column '" + col + "'";
}

}  // namespace

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (t.header.empty()) {
            if (line.empty()) continue;
            t.header = split_line(line, line_no);
            for (auto& h : t.header) h = trim(h);
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_line(line, line_no);
        if (fields.size() != t.header.size())
            throw InputError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw InputError("csv: missing header row");
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_csv(in);
}

bool is_missing_cell(const std::string& cell) {
    const std::string t = trim(cell);
    return t.empty() || t == "NA" || t == "NaN" || t == ".";
}

LoadedData dataset_from_table(const CsvTable& table, const ColumnRoles& roles, bool impute) {
    const std::size_t n = table.rows.size();
    if (n == 0) throw InputError("csv: no data rows");
    const std::size_t ai = column_index(table, roles.treatment, "treatment");
    const std::size_t yi = column_index(table, roles.outcome, "outcome");
    std::vector<std::size_t> wi;
    std::vector<std::string> names;
    if (roles.covariates.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c)
            if (c != ai && c != yi) {
                wi.push_back(c);
                names.push_back(table.header[c]);
            }
    } else {
        for (const auto& name : roles.covariates) {
            wi.push_back(column_index(table, name, "covariate"));
            names.push_back(name);
        }
    }

    LoadedData out;
    out.report.rows = n;
    IntVector a(static_cast<Eigen::Index>(n));
    Vector y(static_cast<Eigen::Index>(n));
    int max_label = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = table.rows[r];
        if (is_missing_cell(row[ai])) throw InputError("missing treatment at " + cell_ref(r, roles.treatment) + "; only covariates can be imputed");
        if (is_missing_cell(row[yi])) throw InputError("missing outcome at " + cell_ref(r, roles.outcome) + "; only covariates can be imputed");
        double av = 0.0;
        if (!parse_double(row[ai], av) || av != std::floor(av) || av < 0 || av > 1e6)
            throw InputError("treatment must be a non-negative integer label: '" + row[ai] + "' at " + cell_ref(r, roles.treatment));
        a[static_cast<Eigen::Index>(r)] = static_cast<int>(av);
        max_label = std::max(max_label, static_cast<int>(av));
        double yv = 0.0;
        if (!parse_double(row[yi], yv)) throw InputError("cannot parse '" + row[yi] + "' at " + cell_ref(r, roles.outcome));
        y[static_cast<Eigen::Index>(r)] = yv;
    }

    Matrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(wi.size()));
    std::vector<Vector> indicators;
    for (std::size_t j = 0; j < wi.size(); ++j) {
        std::vector<std::size_t> missing;
        for (std::size_t r = 0; r < n; ++r) {
            const auto& cell = table.rows[r][wi[j]];
            if (is_missing_cell(cell)) {
                if (!impute) throw InputError("missing covariate value at " + cell_ref(r, names[j]) + " (use --impute)");
                missing.push_back(r);
                continue;
            }
            double v = 0.0;
            if (!parse_double(cell, v)) throw InputError("cannot parse '" + cell + "' at " + cell_ref(r, names[j]));
            w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
        }
        out.report.missing_counts.emplace_back(names[j], missing.size());
        if (missing.empty()) continue;
        if (missing.size() == n) throw InputError("covariate '" + names[j] + "' has no observed values");
        std::vector<bool> is_missing(n, false);
        for (auto r : missing) is_missing[r] = true;
        double sum = 0.0, ones = 0.0, seen = 0.0;
        bool binary = true;
        for (std::size_t r = 0; r < n; ++r) {
            if (is_missing[r]) continue;
            const double v = w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
            sum += v;
            seen += 1.0;
            if (v == 1.0) ones += 1.0;
            else if (v != 0.0) binary = false;
        }
        const double fill = binary ? (ones > seen - ones ? 1.0 : 0.0) : sum / seen;
        Vector ind = Vector::Zero(static_cast<Eigen::Index>(n));
        for (auto r : missing) {
            w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = fill;
            ind[static_cast<Eigen::Index>(r)] = 1.0;
        }
        indicators.push_back(ind);
        out.report.indicator_columns.push_back(names[j] + "_missing");
        out.report.warnings.push_back("imputed " + std::to_string(missing.size()) + " missing value(s) in '" + names[j] +
                                      "' with the column " + (binary ? "mode" : "mean"));
    }
    if (!indicators.empty()) {
        Matrix wide(w.rows(), w.cols() + static_cast<Eigen::Index>(indicators.size()));
        wide.leftCols(w.cols()) = w;
        for (std::size_t k = 0; k < indicators.size(); ++k) wide.col(w.cols() + static_cast<Eigen::Index>(k)) = indicators[k];
        w = std::move(wide);
        names.insert(names.end(), out.report.indicator_columns.begin(), out.report.indicator_columns.end());
    }
    const int n_arms = std::max(2, max_label + 1);
    out.data = Dataset::from_raw(std::move(w), std::move(a), y, std::move(names), n_arms);
    return out;
}

LoadedData load_csv(const std::string& path, const ColumnRoles& roles, bool impute) {
    return dataset_from_table(read_csv_file(path), roles, impute);
}

}  // namespace ctmle
