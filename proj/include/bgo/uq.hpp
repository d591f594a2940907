// Epistemic uncertainty of the optimum: particle approximation of the
// distribution of min f and argmin f over a finite grid, and predictive
// bounds on the optimal objective value (PBOO).
#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "acquisition.hpp"
#include "hyper_posterior.hpp"

namespace bgo {

inline constexpr Index kDefaultUqSamples = 100;
inline constexpr Index kDefaultUqGrid = 1000;
inline constexpr Index kMaxUqGrid = 2000;

/// N*M sampled optimal values and their grid locations.
struct QDistribution {
    Matrix grid;                      // one grid point per row
    Vector min_samples;               // sampled min f
    std::vector<Index> argmin_index;  // row of `grid` attaining each sample

    Index size() const noexcept { return min_samples.size(); }
    DesignPoint argmin_sample(Index i) const { return grid.row(argmin_index[static_cast<std::size_t>(i)]).transpose(); }
};

/// Draw m joint function samples from each fitted particle and record the
/// grid minimum and its location for every draw. Aggregated in particle order.
inline QDistribution q_distribution(std::span<const PosteriorGp> fits, const Matrix& grid, Index m, Rng& rng) {
    if (grid.rows() == 0) throw std::invalid_argument("q_distribution: empty grid");
    if (grid.rows() > kMaxUqGrid) throw std::invalid_argument("q_distribution: grid exceeds 2000 points");
    if (m < 1) throw std::invalid_argument("q_distribution: m must be >= 1");
    if (fits.empty()) throw std::invalid_argument("q_distribution: no particles");

    QDistribution q;
    q.grid = grid;
    q.min_samples.resize(static_cast<Index>(fits.size()) * m);
    q.argmin_index.resize(fits.size() * static_cast<std::size_t>(m));
    Index k = 0;
    for (const PosteriorGp& gp : fits) {
        const Matrix draws = sample_functions(gp, grid, m, rng);
        for (Index j = 0; j < m; ++j, ++k) {
            Index at = 0;
            q.min_samples[k] = draws.row(j).minCoeff(&at);
            q.argmin_index[static_cast<std::size_t>(k)] = at;
        }
    }
    return q;
}

inline std::vector<PosteriorGp> fit_particles(const Dataset& data, const ParticleSet& particles) {
    auto shared = std::make_shared<const Dataset>(data);
    std::vector<PosteriorGp> fits;
    fits.reserve(particles.particles.size());
    for (const auto& th : particles.particles) fits.push_back(gp_fit(shared, th));
    return fits;
}

inline QDistribution q_distribution(const ParticleSet& particles, const Dataset& data, const Matrix& grid, Index m, Rng& rng) {
    const auto fits = fit_particles(data, particles);
    return q_distribution(std::span<const PosteriorGp>(fits), grid, m, rng);
}

/// Empirical quantile with linear interpolation between order statistics
/// (type 7): h = (n - 1) p, Q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
    p = std::clamp(p, 0.0, 1.0);
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct PredictiveBounds {
    double lo = 0;
    double hi = 0;
    double median = 0;
    double level = 0.95;

    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

/// Central `level` interval of the sampled optimal values.
inline PredictiveBounds pboo(std::span<const double> samples, double level = 0.95) {
    if (samples.empty()) throw std::invalid_argument("pboo: empty sample set");
    if (!(level >= 0.0 && level < 1.0)) throw std::invalid_argument("pboo: level must lie in [0, 1)");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    return {quantile_sorted(s, 0.5 * (1.0 - level)), quantile_sorted(s, 0.5 * (1.0 + level)), quantile_sorted(s, 0.5), level};
}

inline PredictiveBounds pboo(const QDistribution& q, double level = 0.95) {
    return pboo(std::span<const double>(q.min_samples.data(), static_cast<std::size_t>(q.min_samples.size())), level);
}

/// Histogram of argmin samples along dimension `dim`, `bins` uniform bins over
/// [lower, upper]. Masses sum to one.
inline std::vector<double> argmin_histogram(const QDistribution& q, const BoxBounds& bounds, Index bins, Index dim = 0) {
    if (q.size() == 0) throw std::invalid_argument("argmin_histogram: empty sample set");
    if (bins < 1) throw std::invalid_argument("argmin_histogram: bins must be >= 1");
    if (dim < 0 || dim >= bounds.dim() || dim >= q.grid.cols())
        throw std::invalid_argument("argmin_histogram: dimension out of range");
    std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
    const double lo = bounds.lower[dim];
    const double w = bounds.upper[dim] - lo;
    for (const Index at : q.argmin_index) {
        const double x = q.grid(at, dim);
        auto b = static_cast<Index>(std::floor((x - lo) / w * static_cast<double>(bins)));
        b = std::clamp<Index>(b, 0, bins - 1);
        mass[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& v : mass) v /= static_cast<double>(q.size());
    return mass;
}

}  // namespace bgo
