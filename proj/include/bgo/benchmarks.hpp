// Synthetic stochastic test objectives with known optima.
//
//   synth1d: V(x, xi) = 4 (1 - sin(6x + 8 e^{6x-7})) + s(x) xi,   x in [0, 1]
//   synth2d: V(x, xi) = 2 + (x2 - x1^2)^2 / 100 + (1 - x1)^2 + 2 (2 - x2)^2
//                       + 7 sin(0.5 x2) sin(0.7 x1 x2) + s(x) xi,  x in [0, 5]^2
//
// xi is standard normal and never exposed to the caller.
#pragma once

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"

namespace bgo::benchmarks {

enum class BenchmarkId { synth1d, synth2d };

inline std::string_view to_string(BenchmarkId id) { return id == BenchmarkId::synth1d ? "synth1d" : "synth2d"; }

inline std::optional<BenchmarkId> parse_benchmark(std::string_view s) {
    if (s == "synth1d") return BenchmarkId::synth1d;
    if (s == "synth2d") return BenchmarkId::synth2d;
    return std::nullopt;
}

inline BoxBounds bounds(BenchmarkId id) {
    if (id == BenchmarkId::synth1d) return BoxBounds::unit(1);
    return {Vector::Zero(2), Vector::Constant(2, 5.0)};
}

/// Noise standard deviation s(x).
struct NoiseModel {
    enum class Kind { constant, heteroscedastic_1d, heteroscedastic_2d };

    Kind kind = Kind::constant;
    double level = 0.0;  // s for the constant kind

    static NoiseModel constant(double s) {
        if (!(s >= 0) || !std::isfinite(s)) throw std::invalid_argument("NoiseModel: s must be >= 0");
        return {Kind::constant, s};
    }
    /// s(x) = ((x - 3) / 3)^2
    static NoiseModel heteroscedastic_1d() { return {Kind::heteroscedastic_1d, 0.0}; }
    /// s(x) = ((x2 - x1) / 3)^2
    static NoiseModel heteroscedastic_2d() { return {Kind::heteroscedastic_2d, 0.0}; }

    double sd(const Eigen::Ref<const Vector>& x) const {
        switch (kind) {
        case Kind::constant:
            return level;
        case Kind::heteroscedastic_1d: {
            const double r = (x[0] - 3.0) / 3.0;
            return r * r;
        }
        case Kind::heteroscedastic_2d: {
            if (x.size() < 2) throw std::invalid_argument("NoiseModel: heteroscedastic_2d needs d = 2");
            const double r = (x[1] - x[0]) / 3.0;
            return r * r;
        }
        }
        return 0.0;
    }

    std::string describe() const {
        switch (kind) {
        case Kind::constant:
            return "constant(" + std::to_string(level) + ")";
        case Kind::heteroscedastic_1d:
            return "heteroscedastic_1d";
        case Kind::heteroscedastic_2d:
            return "heteroscedastic_2d";
        }
        return "?";
    }
};

namespace detail {
inline void require_in(const Eigen::Ref<const Vector>& x, const BoxBounds& box, const char* who) {
    if (x.size() != box.dim()) throw std::invalid_argument(std::string(who) + ": wrong dimension");
    if (!x.allFinite() || !box.contains(x)) throw std::invalid_argument(std::string(who) + ": x outside the domain");
}
}  // namespace detail

inline double synth1d_mean(double x) { return 4.0 * (1.0 - std::sin(6.0 * x + 8.0 * std::exp(6.0 * x - 7.0))); }

inline double synth1d_slope(double x) {
    const double e = std::exp(6.0 * x - 7.0);
    return -4.0 * std::cos(6.0 * x + 8.0 * e) * (6.0 + 48.0 * e);
}

inline double synth2d_mean(double x1, double x2) {
    const double a = x2 - x1 * x1;
    return 2.0 + a * a / 100.0 + (1.0 - x1) * (1.0 - x1) + 2.0 * (2.0 - x2) * (2.0 - x2) +
           7.0 * std::sin(0.5 * x2) * std::sin(0.7 * x1 * x2);
}

inline Eigen::Vector2d synth2d_gradient(double x1, double x2) {
    const double a = x2 - x1 * x1;
    const double s5 = std::sin(0.5 * x2), c5 = std::cos(0.5 * x2);
    const double s7 = std::sin(0.7 * x1 * x2), c7 = std::cos(0.7 * x1 * x2);
    return {-4.0 * x1 * a / 100.0 - 2.0 * (1.0 - x1) + 4.9 * x2 * s5 * c7,
            2.0 * a / 100.0 - 4.0 * (2.0 - x2) + 3.5 * c5 * s7 + 4.9 * x1 * s5 * c7};
}

inline double synth1d(double x, const NoiseModel& noise, Rng& rng) {
    Vector v(1);
    v[0] = x;
    detail::require_in(v, bounds(BenchmarkId::synth1d), "synth1d");
    std::normal_distribution<double> normal;
    return synth1d_mean(x) + noise.sd(v) * normal(rng);
}

inline double synth2d(const Eigen::Ref<const Vector>& x, const NoiseModel& noise, Rng& rng) {
    detail::require_in(x, bounds(BenchmarkId::synth2d), "synth2d");
    std::normal_distribution<double> normal;
    return synth2d_mean(x[0], x[1]) + noise.sd(x) * normal(rng);
}

/// E_xi[V(x, xi)]: the noise is zero-mean, so this is the deterministic part.
inline double true_mean(BenchmarkId id, const Eigen::Ref<const Vector>& x) {
    if (id == BenchmarkId::synth1d) {
        detail::require_in(x, bounds(id), "true_mean");
        return synth1d_mean(x[0]);
    }
    detail::require_in(x, bounds(id), "true_mean");
    return synth2d_mean(x[0], x[1]);
}

/// One noisy draw V(x; xi).
inline double evaluate(BenchmarkId id, const Eigen::Ref<const Vector>& x, const NoiseModel& noise, Rng& rng) {
    return id == BenchmarkId::synth1d ? synth1d(x.size() == 1 ? x[0] : std::nan(""), noise, rng) : synth2d(x, noise, rng);
}

// ---------------------------------------------------------------------------
// Optima

struct Optimum {
    std::vector<DesignPoint> minimizers;
    double value = 0;
};

/// Pinned fixtures from a dense-grid scan plus local refinement
/// (10^6-point grid in 1D, 1001^2 grid in 2D).
inline Optimum pinned_optimum(BenchmarkId id) {
    if (id == BenchmarkId::synth1d) {
        Vector a(1), b(1);
        a << 0.2561456808;
        b << 0.9486192234;
        return {{a, b}, 0.0};
    }
    Vector a(2);
    a << 2.317235996, 2.771323315;
    return {{a}, -1.726339764};
}

namespace detail {

/// Golden-section minimization on [a, b].
template <class F>
double golden_min(F&& f, double a, double b, double tol = 1e-13) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline Optimum oracle_1d() {
    constexpr Index n = 1000000;
    const double h = 1.0 / static_cast<double>(n - 1);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = synth1d_mean(static_cast<double>(i) * h);

    struct Cand {
        double x, f;
    };
    std::vector<Cand> local;
    for (Index i = 1; i + 1 < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (v[k] <= v[k - 1] && v[k] <= v[k + 1]) {
            double lo = static_cast<double>(i - 1) * h, hi = static_cast<double>(i + 1) * h;
            double x = golden_min([](double t) { return synth1d_mean(t); }, lo, hi);
            // bisection on the derivative sign change
            if (synth1d_slope(lo) < 0 && synth1d_slope(hi) > 0) {
                for (int it = 0; it < 200 && hi - lo > 0; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (mid <= lo || mid >= hi) break;
                    (synth1d_slope(mid) < 0 ? lo : hi) = mid;
                }
                x = 0.5 * (lo + hi);
            }
            local.push_back({x, synth1d_mean(x)});
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : local) best = std::min(best, c.f);
    Optimum out;
    out.value = best;
    for (const auto& c : local) {
        if (c.f > best + 1e-6) continue;
        // plateau neighbours collapse onto the same minimizer
        bool dup = false;
        for (const auto& m : out.minimizers) dup = dup || std::abs(m[0] - c.x) < 1e-4;
        if (!dup) out.minimizers.push_back(Vector::Constant(1, c.x));
    }
    return out;
}

inline Optimum oracle_2d() {
    constexpr Index n = 1001;
    const double h = 5.0 / static_cast<double>(n - 1);
    Index bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            const double f = synth2d_mean(static_cast<double>(i) * h, static_cast<double>(j) * h);
            if (f < best) {
                best = f;
                bi = i;
                bj = j;
            }
        }
    // coordinate refinement within one grid cell either side
    double x1 = static_cast<double>(bi) * h, x2 = static_cast<double>(bj) * h;
    for (int sweep = 0; sweep < 200; ++sweep) {
        const double p1 = x1, p2 = x2;
        x1 = golden_min([&](double t) { return synth2d_mean(t, x2); }, std::max(0.0, p1 - h), std::min(5.0, p1 + h));
        x2 = golden_min([&](double t) { return synth2d_mean(x1, t); }, std::max(0.0, p2 - h), std::min(5.0, p2 + h));
        if (std::abs(x1 - p1) + std::abs(x2 - p2) < 1e-14) break;
    }
    // Newton polish on the analytic gradient
    Eigen::Vector2d p(x1, x2);
    for (int it = 0; it < 50; ++it) {
        const Eigen::Vector2d g = synth2d_gradient(p[0], p[1]);
        if (g.norm() < 1e-14) break;
        const double e = 1e-6;
        Eigen::Matrix2d hess;
        hess.col(0) = (synth2d_gradient(p[0] + e, p[1]) - synth2d_gradient(p[0] - e, p[1])) / (2 * e);
        hess.col(1) = (synth2d_gradient(p[0], p[1] + e) - synth2d_gradient(p[0], p[1] - e)) / (2 * e);
        const Eigen::Vector2d step = hess.ldlt().solve(g);
        if (!step.allFinite() || step.norm() > h) break;
        p -= step;
    }
    Vector x(2);
    x << p[0], p[1];
    return {{x}, synth2d_mean(p[0], p[1])};
}

}  // namespace detail

/// Dense-grid + refinement minimization of true_mean. Returns every global
/// minimizer whose value is within 1e-6 of the best.
inline Optimum oracle_optimum(BenchmarkId id) { return id == BenchmarkId::synth1d ? detail::oracle_1d() : detail::oracle_2d(); }

}  // namespace bgo::benchmarks
