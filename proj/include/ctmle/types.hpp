#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace ctmle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Non-fatal conditions accumulated while fitting.
using Warnings = std::vector<std::string>;

}  // namespace ctmle
