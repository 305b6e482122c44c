#include "ctmle/kde.hpp"

#include "ctmle/error.hpp"
#include "ctmle/splines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ctmle {

double silverman_bandwidth(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw InputError("kde: need at least two samples");
    double mean = 0.0;
    for (double x : samples) {
        if (!std::isfinite(x)) throw InputError("kde: non-finite sample");
        mean += x;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw InputError("kde: samples have zero variance");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

std::vector<double> default_kde_grid(const std::vector<double>& samples, std::size_t points) {
    if (points < 2) throw InputError("kde: grid needs at least two points");
    const double h = silverman_bandwidth(samples);
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    const double a = *lo - 3.0 * h, b = *hi + 3.0 * h;
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) grid[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1);
    return grid;
}

namespace {

double density_at(const std::vector<double>& samples, double x, double h) {
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    double s = 0.0;
    for (double xi : samples) {
        const double u = (x - xi) / h;
        s += std::exp(-0.5 * u * u);
    }
    return s * norm;
}

}  // namespace

KdeCurve kde(const std::vector<double>& samples, const std::vector<double>& grid) {
    KdeCurve c;
    c.bandwidth = silverman_bandwidth(samples);
    c.grid = grid;
    c.density.resize(grid.size());
    const auto m = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
    for (long k = 0; k < m; ++k) c.density[static_cast<std::size_t>(k)] = density_at(samples, grid[static_cast<std::size_t>(k)], c.bandwidth);
    return c;
}

KdeCurve kde_serial(const std::vector<double>& samples, const std::vector<double>& grid) {
    KdeCurve c;
    c.bandwidth = silverman_bandwidth(samples);
    c.grid = grid;
    c.density.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) c.density[k] = density_at(samples, grid[k], c.bandwidth);
    return c;
}

}  // namespace ctmle
