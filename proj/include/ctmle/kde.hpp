#pragma once

#include <cstddef>
#include <vector>

namespace ctmle {

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to sd when the IQR is zero.
/// Throws InputError for fewer than two samples or zero variance.
double silverman_bandwidth(const std::vector<double>& samples);

/// `points` equispaced values covering the samples plus three bandwidths either side.
std::vector<double> default_kde_grid(const std::vector<double>& samples, std::size_t points = 512);

/// Gaussian kernel density at each grid point; the grid is split across threads.
KdeCurve kde(const std::vector<double>& samples, const std::vector<double>& grid);

/// Single-threaded reference for kde().
KdeCurve kde_serial(const std::vector<double>& samples, const std::vector<double>& grid);

}  // namespace ctmle
