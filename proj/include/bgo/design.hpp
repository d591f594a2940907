#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "core.hpp"

namespace bgo {

inline constexpr Index kDefaultCandidates = 1000;

/// Jittered Latin hypercube of `n_points` rows inside `bounds`: along every
/// dimension each of the n equal-width strata holds exactly one point, and
/// the stratum order is an independent permutation per dimension.
inline Matrix lhs(Index n_points, const BoxBounds& bounds, Rng& rng) {
    if (n_points < 1) throw std::invalid_argument("lhs: n_points must be >= 1");
    bounds.validate();
    const Index d = bounds.dim();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Index> perm(static_cast<std::size_t>(n_points));
    Matrix out(n_points, d);
    const double n = static_cast<double>(n_points);
    for (Index k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const double lo = bounds.lower[k];
        const double w = bounds.upper[k] - lo;
        for (Index i = 0; i < n_points; ++i) {
            double x = 0;
            // keep strictly inside the stratum, hence strictly inside the box
            do {
                double u = 0;
                do u = unif(rng);
                while (u <= 0.0);
                x = lo + w * ((static_cast<double>(perm[static_cast<std::size_t>(i)]) + u) / n);
            } while (!(x > lo && x < bounds.upper[k]));
            out(i, k) = x;
        }
    }
    return out;
}

}  // namespace bgo
