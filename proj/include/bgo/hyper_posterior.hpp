// Hyperparameter posterior p(theta | x, y): priors, marginal likelihood,
// MAP estimation and an adaptive random-walk Metropolis particle sampler.
//
// All positive parameters are handled in log space, packed as
// u = (log s, log l_1, ..., log l_d, log sigma). Every component of u is
// confined to [-kLogBound, kLogBound], which makes the (otherwise improper)
// Jeffreys-type posterior proper.
#pragma once

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gp.hpp"

namespace bgo {

inline constexpr double kLogBound = 10.0;

// ---------------------------------------------------------------------------
// Prior

/// log p(theta) up to an additive constant:
/// Jeffreys on s and sigma, log-logistic 1 / (1 + l^2) on each lengthscale.
inline double log_prior(const Hyperparameters& theta) {
    if (!theta.strictly_positive()) throw std::invalid_argument("log_prior: nonpositive hyperparameter");
    return -std::log(theta.signal) - std::log(theta.noise) - (1.0 + theta.lengthscales.array().square()).log().sum();
}

/// Gradient of log_prior with respect to u = log(theta).
inline Vector log_prior_gradient(const Hyperparameters& theta) {
    Vector g(theta.size());
    g[0] = -1.0;
    const auto l2 = theta.lengthscales.array().square();
    g.segment(1, theta.dim()) = (-2.0 * l2 / (1.0 + l2)).matrix();
    g[theta.size() - 1] = -1.0;
    return g;
}

// ---------------------------------------------------------------------------
// Marginal likelihood

/// log N(y | 0, K_n(psi) + sigma^2 I) with per-dimension squared distances
/// cached, so repeated evaluations on one dataset only pay for exp + Cholesky.
class MarginalLikelihood {
public:
    explicit MarginalLikelihood(std::shared_ptr<const Dataset> data) : data_(std::move(data)) {
        if (!data_) throw std::invalid_argument("MarginalLikelihood: null dataset");
        const Index n = data_->size();
        sqdist_.reserve(static_cast<std::size_t>(data_->dim()));
        for (Index k = 0; k < data_->dim(); ++k) {
            const Vector c = data_->points().col(k);
            Matrix dk(n, n);
            for (Index j = 0; j < n; ++j) dk.col(j) = (c.array() - c[j]).square().matrix();
            sqdist_.push_back(std::move(dk));
        }
    }

    explicit MarginalLikelihood(const Dataset& data) : MarginalLikelihood(std::make_shared<const Dataset>(data)) {}

    const Dataset& data() const noexcept { return *data_; }

    double value(const Hyperparameters& theta) const { return evaluate(theta, nullptr); }

    /// Value and gradient with respect to u = log(theta).
    double value_and_gradient(const Hyperparameters& theta, Vector& grad) const { return evaluate(theta, &grad); }

private:
    Matrix kernel(const Hyperparameters& theta) const {
        const Index n = data_->size();
        Matrix r = Matrix::Zero(n, n);
        for (Index k = 0; k < data_->dim(); ++k)
            r.noalias() += sqdist_[static_cast<std::size_t>(k)] / (theta.lengthscales[k] * theta.lengthscales[k]);
        return theta.signal * theta.signal * (-0.5 * r.array()).exp().matrix();
    }

    double evaluate(const Hyperparameters& theta, Vector* grad) const {
        if (theta.dim() != data_->dim()) throw std::invalid_argument("log_marginal_likelihood: dimension mismatch");
        const Index n = data_->size();
        if (grad) grad->setZero(theta.size());
        if (n == 0) return 0.0;

        const Matrix kf = kernel(theta);
        Matrix ky = kf;
        ky.diagonal().array() += theta.noise * theta.noise;
        const auto [llt, jitter] = detail::jittered_llt(ky, theta.signal * theta.signal, "log_marginal_likelihood");
        const Vector alpha = llt.solve(data_->values());
        const double logdet_half = llt.matrixLLT().diagonal().array().log().sum();
        const double value = -0.5 * data_->values().dot(alpha) - logdet_half -
                             0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

        if (grad) {
            // d/du_j = 1/2 tr((alpha alpha^T - Ky^{-1}) dKy/du_j)
            Matrix a = llt.solve(Matrix::Identity(n, n));
            a = alpha * alpha.transpose() - a;
            const Matrix ak = a.cwiseProduct(kf);
            // the jitter is proportional to s^2 and moves with log s
            (*grad)[0] = ak.sum() + jitter * a.trace();
            for (Index k = 0; k < theta.dim(); ++k) {
                const double l2 = theta.lengthscales[k] * theta.lengthscales[k];
                (*grad)[1 + k] = 0.5 * ak.cwiseProduct(sqdist_[static_cast<std::size_t>(k)]).sum() / l2;
            }
            (*grad)[theta.size() - 1] = theta.noise * theta.noise * a.trace();
        }
        return value;
    }

    std::shared_ptr<const Dataset> data_;
    std::vector<Matrix> sqdist_;
};

inline double log_marginal_likelihood(const Dataset& data, const Hyperparameters& theta) {
    return MarginalLikelihood(data).value(theta);
}

/// Unnormalized log p(theta | x, y) = log-evidence + log prior.
inline double log_posterior(const Dataset& data, const Hyperparameters& theta) {
    return log_marginal_likelihood(data, theta) + log_prior(theta);
}

// ---------------------------------------------------------------------------
// MAP estimate

struct MapOptions {
    Index restarts = 5;
    /// Design box; sets the initial lengthscale guess. Defaults to the data range.
    std::optional<BoxBounds> bounds;
    /// Extra starting point tried before the others (e.g. the previous MAP).
    std::optional<Hyperparameters> warm_start;
    Index max_iters = 300;
    double grad_tol = 1e-5;
};

struct MapEstimate {
    Hyperparameters theta;
    double log_posterior = -std::numeric_limits<double>::infinity();
    /// Norm of the projected gradient in log space at `theta`.
    double grad_norm = std::numeric_limits<double>::infinity();
    /// False if the best restart stopped on the iteration cap or a stalled line search.
    bool converged = false;
    Index iterations = 0;
    Index failed_restarts = 0;
};

namespace detail {

inline Vector clip_log(Vector u) { return u.cwiseMax(-kLogBound).cwiseMin(kLogBound); }

/// Zero the components that point out of the box at active bounds.
inline Vector projected_gradient(const Vector& u, const Vector& g) {
    Vector pg = g;
    for (Index i = 0; i < u.size(); ++i) {
        if (u[i] >= kLogBound && g[i] > 0) pg[i] = 0;
        if (u[i] <= -kLogBound && g[i] < 0) pg[i] = 0;
    }
    return pg;
}

/// Projected BFGS ascent of log_posterior over u in [-kLogBound, kLogBound]^p.
inline MapEstimate ascend(const MarginalLikelihood& lml, Vector u, const MapOptions& opts) {
    auto eval = [&](const Vector& at, Vector& grad) {
        const Hyperparameters th = Hyperparameters::from_log(at);
        Vector g;
        const double v = lml.value_and_gradient(th, g) + log_prior(th);
        grad = g + log_prior_gradient(th);
        return v;
    };

    u = clip_log(std::move(u));
    Vector g;
    double f = eval(u, g);
    const Index p = u.size();
    Matrix h = Matrix::Identity(p, p);

    MapEstimate out;
    Index it = 0;
    Index stagnant = 0;
    for (; it < opts.max_iters; ++it) {
        const Vector pg = projected_gradient(u, g);
        if (pg.norm() <= opts.grad_tol) {
            out.converged = true;
            break;
        }
        Vector dir = h * pg;
        if (dir.dot(pg) <= 0) {
            h.setIdentity();
            dir = pg;
        }
        // Long steps in log space are meaningless; cap the trial step.
        const double max_step = 3.0;
        if (dir.norm() > max_step) dir *= max_step / dir.norm();

        double t = 1.0;
        Vector un, gn;
        double fn = -std::numeric_limits<double>::infinity();
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            un = clip_log(u + t * dir);
            try {
                fn = eval(un, gn);
            } catch (const NumericalError&) {
                continue;
            }
            if (std::isfinite(fn) && fn >= f + 1e-4 * pg.dot(un - u)) {
                moved = true;
                break;
            }
        }
        if (!moved || (un - u).norm() == 0) break;

        const Vector s = un - u;
        const Vector yv = g - gn;  // gradient of the minimized function -f
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Matrix eye = Matrix::Identity(p, p);
            h = (eye - rho * s * yv.transpose()) * h * (eye - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        // flat plateaus (e.g. signal collapsing to the bound) make no progress
        stagnant = (fn - f <= 1e-10 * (1.0 + std::abs(f))) ? stagnant + 1 : 0;
        u = un;
        g = gn;
        f = fn;
        if (stagnant >= 5) break;
    }
    out.theta = Hyperparameters::from_log(u);
    out.log_posterior = f;
    out.grad_norm = projected_gradient(u, g).norm();
    out.converged = out.converged || out.grad_norm <= opts.grad_tol;
    out.iterations = it;
    return out;
}

inline double sample_sd(const Vector& y) {
    if (y.size() < 2) return 1.0;
    const double m = y.mean();
    const double sd = std::sqrt((y.array() - m).square().sum() / static_cast<double>(y.size() - 1));
    return sd > 0 && std::isfinite(sd) ? sd : 1.0;
}

/// Draw from the bounded prior in log space: log-uniform s and sigma,
/// half-Cauchy lengthscales.
inline Vector draw_bounded_prior(Index dim, Rng& rng) {
    std::uniform_real_distribution<double> unif(-kLogBound, kLogBound);
    std::cauchy_distribution<double> cauchy;
    Vector u(dim + 2);
    u[0] = unif(rng);
    for (Index k = 0; k < dim; ++k) {
        double l = 0;
        do {
            l = std::abs(cauchy(rng));
        } while (!(l > 0) || std::abs(std::log(l)) > kLogBound);
        u[1 + k] = std::log(l);
    }
    u[dim + 1] = unif(rng);
    return u;
}

}  // namespace detail

/// Best of several local maximizations of log_posterior in log space.
/// Restart 0 is the heuristic start (l_i = box width / 4, s = sd(y),
/// sigma = s / 10); restart k >= 1 draws from the bounded prior with a stream
/// derived from (base seed, k), so more restarts only ever add candidates.
inline MapEstimate map_estimate(const Dataset& data, Rng& rng, const MapOptions& opts = {}) {
    if (opts.restarts < 1) throw std::invalid_argument("map_estimate: restarts must be >= 1");
    const MarginalLikelihood lml(data);
    const Index d = data.dim();

    Vector width;
    if (opts.bounds) {
        if (opts.bounds->dim() != d) throw std::invalid_argument("map_estimate: bounds dimension mismatch");
        width = opts.bounds->width();
    } else if (data.size() >= 2) {
        width = data.points().colwise().maxCoeff() - data.points().colwise().minCoeff();
        for (Index k = 0; k < d; ++k)
            if (!(width[k] > 0)) width[k] = 1.0;
    } else {
        width = Vector::Ones(d);
    }
    const double s0 = detail::sample_sd(data.values());
    const Hyperparameters heuristic(s0, (width / 4.0).eval(), 0.1 * s0);

    std::vector<Vector> starts;
    if (opts.warm_start) {
        if (opts.warm_start->dim() != d) throw std::invalid_argument("map_estimate: warm start dimension mismatch");
        starts.push_back(opts.warm_start->to_log());
    }
    starts.push_back(heuristic.to_log());
    const std::uint64_t base = rng();
    for (Index k = 1; k < opts.restarts; ++k) {
        Rng sub = make_rng(base, static_cast<std::uint64_t>(k));
        starts.push_back(detail::draw_bounded_prior(d, sub));
    }

    MapEstimate best;
    Index failures = 0;
    for (const Vector& u0 : starts) {
        try {
            MapEstimate r = detail::ascend(lml, u0, opts);
            if (std::isfinite(r.log_posterior) && r.log_posterior > best.log_posterior) best = std::move(r);
        } catch (const NumericalError&) {
            ++failures;
        }
    }
    if (!std::isfinite(best.log_posterior))
        throw NumericalError("map_estimate: every restart failed numerically", kJitterMax);
    best.failed_restarts = failures;
    return best;
}

// ---------------------------------------------------------------------------
// Particle approximation

struct McmcConfig {
    Index n_particles = 90;
    Index burn_in = 10000;
    Index post_burn_steps = 90000;
    Index thin = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_particles < 1) throw std::invalid_argument("McmcConfig: n_particles must be >= 1");
        if (burn_in < 0 || post_burn_steps < 1 || thin < 1)
            throw std::invalid_argument("McmcConfig: burn_in >= 0, post_burn_steps >= 1, thin >= 1 required");
        if (post_burn_steps / thin < n_particles)
            throw std::invalid_argument("McmcConfig: post_burn_steps / thin must be >= n_particles");
    }
};

struct McmcDiagnostics {
    double acceptance_rate = 0;  // over the post-burn-in phase
    Index chain_length = 0;
    Index thin = 1;
    bool degenerate = false;     // acceptance below 1% after burn-in
    std::optional<MapEstimate> map;
};

struct ParticleSet {
    std::vector<Hyperparameters> particles;
    McmcDiagnostics diagnostics;

    Index size() const noexcept { return static_cast<Index>(particles.size()); }
    Index dim() const { return particles.empty() ? 0 : particles.front().dim(); }
};

struct SamplerOptions {
    /// Chain start; when absent the MAP estimate is computed first.
    std::optional<Hyperparameters> start;
    MapOptions map;
    /// Adaptive proposal covariance regularization.
    double regularization = 1e-6;
    /// Steps run with the fixed initial proposal before adaptation kicks in.
    Index adapt_after = 100;
    double initial_step = 0.1;
};

/// Adaptive random-walk Metropolis over u = log(theta).
///
/// The target is log_posterior(exp(u)) + sum(u) (Jacobian of the log map),
/// restricted to [-kLogBound, kLogBound]^p. During burn-in the proposal
/// covariance follows the running chain covariance scaled by 2.38^2 / p plus a
/// small ridge; afterwards it is frozen. Every `thin`-th post-burn-in state is
/// recorded and the last `n_particles` records are returned.
inline ParticleSet sample_particles(const Dataset& data, const McmcConfig& cfg, Rng& rng, const SamplerOptions& opts = {}) {
    cfg.validate();
    const MarginalLikelihood lml(data);
    const Index p = data.dim() + 2;

    ParticleSet out;
    Hyperparameters start;
    if (opts.start) {
        start = *opts.start;
    } else {
        MapEstimate map = map_estimate(data, rng, opts.map);
        start = map.theta;
        out.diagnostics.map = std::move(map);
    }
    if (start.dim() != data.dim()) throw std::invalid_argument("sample_particles: start dimension mismatch");

    auto target = [&](const Vector& u) {
        if ((u.array().abs() > kLogBound).any()) return -std::numeric_limits<double>::infinity();
        const Hyperparameters th = Hyperparameters::from_log(u);
        try {
            return lml.value(th) + log_prior(th) + u.sum();
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    Vector u = detail::clip_log(start.to_log());
    double lp = target(u);

    Vector run_mean = Vector::Zero(p);
    Matrix run_m2 = Matrix::Zero(p, p);
    Index run_n = 0;
    Matrix prop_chol = opts.initial_step * Matrix::Identity(p, p);
    const double scale = 2.38 * 2.38 / static_cast<double>(p);

    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    std::vector<Hyperparameters> recorded;
    recorded.reserve(static_cast<std::size_t>(cfg.post_burn_steps / cfg.thin));
    Index accepted_post = 0;
    const Index total = cfg.burn_in + cfg.post_burn_steps;

    for (Index t = 0; t < total; ++t) {
        const bool burning = t < cfg.burn_in;
        if (burning && run_n >= opts.adapt_after && run_n >= 2) {
            Matrix c = scale * (run_m2 / static_cast<double>(run_n - 1));
            c.diagonal().array() += scale * opts.regularization;
            Eigen::LLT<Matrix> llt(c);
            if (llt.info() == Eigen::Success) prop_chol = llt.matrixL();
        }

        Vector z(p);
        for (Index i = 0; i < p; ++i) z[i] = normal(rng);
        const Vector cand = u + prop_chol * z;
        const double lp_cand = target(cand);
        const bool accept = std::isfinite(lp_cand) && (lp_cand >= lp || std::log(unif(rng)) < lp_cand - lp);
        if (accept) {
            u = cand;
            lp = lp_cand;
        }

        if (burning) {
            ++run_n;
            const Vector delta = u - run_mean;
            run_mean += delta / static_cast<double>(run_n);
            run_m2 += delta * (u - run_mean).transpose();
        } else {
            if (accept) ++accepted_post;
            if ((t - cfg.burn_in + 1) % cfg.thin == 0) recorded.push_back(Hyperparameters::from_log(u));
        }
    }

    out.particles.assign(recorded.end() - cfg.n_particles, recorded.end());
    out.diagnostics.chain_length = total;
    out.diagnostics.thin = cfg.thin;
    out.diagnostics.acceptance_rate = static_cast<double>(accepted_post) / static_cast<double>(cfg.post_burn_steps);
    if (out.diagnostics.acceptance_rate < 0.01) {
        out.diagnostics.degenerate = true;
        warn("sample_particles: acceptance rate below 1% after burn-in (degenerate chain)");
    }
    return out;
}

/// Convenience overload seeding the chain from cfg.seed.
inline ParticleSet sample_particles(const Dataset& data, const McmcConfig& cfg, const SamplerOptions& opts = {}) {
    Rng rng(cfg.seed);
    return sample_particles(data, cfg, rng, opts);
}

// ---------------------------------------------------------------------------
// Text serialization: one particle per line, "s l_1 .. l_d sigma".

inline void write_particles(std::ostream& os, const ParticleSet& set) {
    const Index d = set.dim();
    os << "# particles: " << set.size() << " dim: " << d << '\n';
    os << "# s";
    for (Index k = 0; k < d; ++k) os << " l_" << (k + 1);
    os << " sigma\n";
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& th : set.particles) {
        os << th.signal;
        for (Index k = 0; k < d; ++k) os << ' ' << th.lengthscales[k];
        os << ' ' << th.noise << '\n';
    }
    os.precision(old);
}

inline ParticleSet read_particles(std::istream& is) {
    ParticleSet set;
    std::string line;
    Index width = -1;
    Index lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ls(line);
        std::vector<double> vals;
        double v = 0;
        while (ls >> v) vals.push_back(v);
        if (!ls.eof() || vals.size() < 3)
            throw std::invalid_argument("read_particles: malformed record on line " + std::to_string(lineno));
        if (width >= 0 && static_cast<Index>(vals.size()) != width)
            throw std::invalid_argument("read_particles: inconsistent dimension on line " + std::to_string(lineno));
        width = static_cast<Index>(vals.size());
        const Index d = width - 2;
        Hyperparameters th(vals.front(), Eigen::Map<const Vector>(vals.data() + 1, d), vals.back());
        th.require_positive();
        set.particles.push_back(std::move(th));
    }
    return set;
}

}  // namespace bgo
