// Extended expected improvement: expected improvement over the per-particle
// filtered minimum, averaged over the hyperparameter particles.
#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "gp.hpp"

namespace bgo {

/// sd below this is treated as the deterministic limit.
inline constexpr double kSdFloor = 1e-12;

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Minimum of the posterior mean over the observed inputs.
inline double filtered_min(const PosteriorGp& gp) {
    if (gp.size() == 0) throw std::invalid_argument("filtered_min: posterior has no observations");
    const Matrix& x = gp.data().points();
    const Vector m = cross_cov(x, x, gp.theta()) * gp.alpha();
    return m.minCoeff();
}

/// E[max(0, incumbent - f)] for f ~ N(mean, sd^2).
inline double ei_closed_form(double incumbent, double mean, double sd) {
    if (sd < 0 || std::isnan(sd)) throw std::invalid_argument("ei_closed_form: sd must be nonnegative");
    const double gap = incumbent - mean;
    if (sd < kSdFloor) return std::max(0.0, gap);
    const double z = gap / sd;
    return std::max(0.0, sd * normal_pdf(z) + gap * normal_cdf(z));
}

struct AcquisitionScores {
    Matrix candidates;  // one candidate per row
    Vector scores;
    Index best_index = 0;

    double best_score() const { return scores[best_index]; }
    DesignPoint best() const { return candidates.row(best_index).transpose(); }
};

/// Lowest index attaining the maximum.
inline Index argmax_first(const Vector& v) {
    Index best = 0;
    for (Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Per-particle expected improvement, one column per fit.
inline Matrix ei_per_particle(const Matrix& candidates, std::span<const PosteriorGp> fits) {
    if (candidates.rows() == 0) throw std::invalid_argument("eei: empty candidate list");
    if (fits.empty()) throw std::invalid_argument("eei: no particles");
    Matrix out(candidates.rows(), static_cast<Index>(fits.size()));
    for (std::size_t j = 0; j < fits.size(); ++j) {
        const PosteriorGp& gp = fits[j];
        const double incumbent = filtered_min(gp);
        const PredictionBatch pred = predict(gp, candidates);
        for (Index i = 0; i < candidates.rows(); ++i)
            out(i, static_cast<Index>(j)) = ei_closed_form(incumbent, pred.mean[i], std::sqrt(pred.var[i]));
    }
    return out;
}

/// EEI(x) = (1/N) sum_i EI(x; filtered_min(theta_i), m_n(x; theta_i), sigma_n(x; theta_i)).
inline AcquisitionScores eei(const Matrix& candidates, std::span<const PosteriorGp> fits) {
    const Matrix per = ei_per_particle(candidates, fits);
    AcquisitionScores out;
    out.candidates = candidates;
    // fixed-order reduction so the result does not depend on scheduling
    out.scores = Vector::Zero(candidates.rows());
    for (Index j = 0; j < per.cols(); ++j) out.scores += per.col(j);
    out.scores /= static_cast<double>(per.cols());
    out.best_index = argmax_first(out.scores);
    return out;
}

}  // namespace bgo
