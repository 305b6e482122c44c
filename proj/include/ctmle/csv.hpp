#pragma once

#include "ctmle/dataset.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ctmle {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Comma-separated text with a header row; double-quoted fields may contain commas
/// and doubled quotes. Every row must have as many fields as the header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Column roles. Empty `covariates` means every column except treatment and outcome.
struct ColumnRoles {
    std::string treatment = "A";
    std::string outcome = "Y";
    std::vector<std::string> covariates;
};

struct IngestionReport {
    std::size_t rows = 0;
    std::vector<std::pair<std::string, std::size_t>> missing_counts;  ///< per covariate, in column order
    std::vector<std::string> indicator_columns;
    Warnings warnings;
};

struct LoadedData {
    Dataset data;
    IngestionReport report;
};

/// True for the cell spellings treated as missing: "", "NA", "NaN", ".".
bool is_missing_cell(const std::string& cell);

/// Build a dataset from a parsed table. Treatment must be integer coded 0..K-1.
/// With `impute`, missing covariate cells are filled with the column mean (the mode
/// for 0/1 columns) and a `<name>_missing` indicator is appended per affected
/// column; without it any missing cell is an error. Missing treatment or outcome
/// values are always an error.
LoadedData dataset_from_table(const CsvTable& table, const ColumnRoles& roles, bool impute);

LoadedData load_csv(const std::string& path, const ColumnRoles& roles, bool impute);

}  // namespace ctmle
