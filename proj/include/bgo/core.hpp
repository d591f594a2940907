// Core value types shared by every part of the library: design points,
// datasets, hyperparameters, box bounds, error types and random streams.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace bgo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A point in the design space. Length equals the problem dimension.
using DesignPoint = Eigen::VectorXd;

/// Pseudo-random stream used throughout. Every stochastic routine takes one
/// explicitly; there is no global generator.
using Rng = std::mt19937_64;

/// Raised when a factorization cannot be stabilized by jitter.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double jitter)
        : std::runtime_error(what), jitter_(jitter) {}

    /// Relative jitter (multiple of s^2) at the last attempt.
    double jitter() const noexcept { return jitter_; }

private:
    double jitter_;
};

/// Raised when the objective fails to produce a finite value.
class ObjectiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Warnings

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::clog << "bgo warning: " << msg << '\n'; };
    return sink;
}
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Replace the warning handler, returning the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(detail::warning_mutex());
    return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_sink()) detail::warning_sink()(msg);
}

// ---------------------------------------------------------------------------
// Random streams

/// splitmix64 finalizer; used to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic seed for sub-stream `stream`, occurrence `index`, of `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) noexcept {
    return mix64(mix64(mix64(master) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ index);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0) {
    return Rng(derive_seed(master, stream, index));
}

// ---------------------------------------------------------------------------
// Box bounds

struct BoxBounds {
    Vector lower;
    Vector upper;

    BoxBounds() = default;
    BoxBounds(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

    static BoxBounds unit(Index d) { return {Vector::Zero(d), Vector::Ones(d)}; }

    Index dim() const noexcept { return lower.size(); }
    Vector width() const { return upper - lower; }

    void validate() const {
        if (lower.size() == 0 || lower.size() != upper.size())
            throw std::invalid_argument("BoxBounds: lower and upper must be nonempty and of equal length");
        for (Index i = 0; i < lower.size(); ++i) {
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
                std::ostringstream os;
                os << "BoxBounds: require lower[" << i << "] < upper[" << i << "], got " << lower[i] << " >= " << upper[i];
                throw std::invalid_argument(os.str());
            }
        }
    }

    bool contains(const Eigen::Ref<const Vector>& x) const {
        if (x.size() != dim()) return false;
        return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
    }
};

// ---------------------------------------------------------------------------
// Dataset

/// Observed design points (rows of `x`) and their noisy objective values.
class Dataset {
public:
    explicit Dataset(Index dim = 1) : x_(0, dim), y_(0) {
        if (dim < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
    }

    Dataset(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.cols() < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
        if (x_.rows() != y_.size()) throw std::invalid_argument("Dataset: points and values differ in length");
        if (!y_.allFinite()) throw std::invalid_argument("Dataset: values must be finite");
    }

    Index size() const noexcept { return y_.size(); }
    Index dim() const noexcept { return x_.cols(); }
    bool empty() const noexcept { return y_.size() == 0; }

    const Matrix& points() const noexcept { return x_; }
    const Vector& values() const noexcept { return y_; }
    DesignPoint point(Index i) const { return x_.row(i).transpose(); }

    void add(const Eigen::Ref<const Vector>& point, double value) {
        if (point.size() != dim()) throw std::invalid_argument("Dataset::add: dimension mismatch");
        if (!std::isfinite(value)) throw std::invalid_argument("Dataset::add: value must be finite");
        const Index n = size();
        x_.conservativeResize(n + 1, Eigen::NoChange);
        y_.conservativeResize(n + 1);
        x_.row(n) = point.transpose();
        y_[n] = value;
    }

    /// Same points, different values (used for standardization).
    Dataset with_values(Vector y) const { return {x_, std::move(y)}; }

private:
    Matrix x_;
    Vector y_;
};

// ---------------------------------------------------------------------------
// Hyperparameters

/// theta = {s, l_1..l_d, sigma}: signal strength, lengthscales, noise scale.
struct Hyperparameters {
    double signal = 1.0;
    Vector lengthscales = Vector::Ones(1);
    double noise = 1.0;

    Hyperparameters() = default;
    Hyperparameters(double s, Vector ell, double sigma) : signal(s), lengthscales(std::move(ell)), noise(sigma) {}

    Index dim() const noexcept { return lengthscales.size(); }

    /// Number of free parameters, d + 2.
    Index size() const noexcept { return dim() + 2; }

    bool strictly_positive() const {
        return std::isfinite(signal) && signal > 0 && std::isfinite(noise) && noise > 0 && lengthscales.size() > 0 &&
               lengthscales.allFinite() && (lengthscales.array() > 0).all();
    }

    void require_positive() const {
        if (!strictly_positive())
            throw std::invalid_argument("Hyperparameters: all components must be strictly positive and finite");
    }

    /// Packed as (log s, log l_1..l_d, log sigma).
    Vector to_log() const {
        Vector u(size());
        u[0] = std::log(signal);
        u.segment(1, dim()) = lengthscales.array().log().matrix();
        u[size() - 1] = std::log(noise);
        return u;
    }

    static Hyperparameters from_log(const Eigen::Ref<const Vector>& u) {
        const Index d = u.size() - 2;
        if (d < 1) throw std::invalid_argument("Hyperparameters::from_log: need at least 3 entries");
        return {std::exp(u[0]), u.segment(1, d).array().exp().matrix(), std::exp(u[u.size() - 1])};
    }

    friend bool operator==(const Hyperparameters& a, const Hyperparameters& b) {
        return a.signal == b.signal && a.noise == b.noise && a.lengthscales.size() == b.lengthscales.size() &&
               a.lengthscales == b.lengthscales;
    }
};

inline std::ostream& operator<<(std::ostream& os, const Hyperparameters& t) {
    os << "{s=" << t.signal << ", l=[";
    for (Index i = 0; i < t.dim(); ++i) os << (i ? ", " : "") << t.lengthscales[i];
    return os << "], sigma=" << t.noise << "}";
}

}  // namespace bgo
