// Bayesian global optimization driver with the extended expected improvement.
//
// Each iteration rebuilds the hyperparameter particle set on the current
// data, scores a fresh Latin-hypercube candidate set with EEI, stops if the
// best score is below the tolerance and otherwise evaluates the objective at
// the best candidate. Internally the observations are standardized
// (zero mean, unit sample sd) before inference; EEI and the sampled optimal
// values are reported back in the objective's units.
#pragma once

#include <chrono>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "design.hpp"
#include "hyper_posterior.hpp"
#include "uq.hpp"

namespace bgo {

/// y = V(x; xi) with xi drawn internally from the supplied stream.
using StochasticObjective = std::function<double(const DesignPoint&, Rng&)>;

struct BgoConfig {
    Index max_iters = 100;
    double eei_tolerance = 1e-4;
    Index n_candidates = kDefaultCandidates;
    McmcConfig mcmc;
    Index map_restarts = 5;
    Index uq_m = kDefaultUqSamples;
    /// PBOO cadence in iterations; 0 computes it only at termination.
    Index uq_every = 1;
    Index uq_grid = kDefaultUqGrid;
    double pboo_level = 0.95;
    std::uint64_t seed = 0;

    void validate() const {
        if (max_iters < 1) throw std::invalid_argument("BgoConfig: max_iters must be >= 1");
        if (!(eei_tolerance >= 0) || !std::isfinite(eei_tolerance))
            throw std::invalid_argument("BgoConfig: eei_tolerance must be finite and >= 0");
        if (n_candidates < 1) throw std::invalid_argument("BgoConfig: n_candidates must be >= 1");
        if (map_restarts < 1) throw std::invalid_argument("BgoConfig: map_restarts must be >= 1");
        if (uq_m < 1) throw std::invalid_argument("BgoConfig: uq_m must be >= 1");
        if (uq_every < 0) throw std::invalid_argument("BgoConfig: uq_every must be >= 0");
        if (uq_grid < 1 || uq_grid > kMaxUqGrid) throw std::invalid_argument("BgoConfig: uq_grid must lie in [1, 2000]");
        if (!(pboo_level >= 0 && pboo_level < 1)) throw std::invalid_argument("BgoConfig: pboo_level must lie in [0, 1)");
        mcmc.validate();
    }
};

// Independent random sub-streams derived from BgoConfig::seed.
enum Stream : std::uint64_t {
    kStreamMcmc = 1,
    kStreamCandidates = 2,
    kStreamFunctionSamples = 3,
    kStreamObjective = 4,
    kStreamUqGrid = 5,
    kStreamInitialDesign = 6,
};

enum class RunStatus { tolerance_hit, budget_exhausted, objective_failure, numerical_failure };

inline std::string_view to_string(RunStatus s) {
    switch (s) {
    case RunStatus::tolerance_hit:
        return "tolerance-hit";
    case RunStatus::budget_exhausted:
        return "budget-exhausted";
    case RunStatus::objective_failure:
        return "objective-failure";
    case RunStatus::numerical_failure:
        return "numerical-failure";
    }
    return "?";
}

inline std::optional<RunStatus> parse_status(std::string_view s) {
    for (auto st : {RunStatus::tolerance_hit, RunStatus::budget_exhausted, RunStatus::objective_failure,
                    RunStatus::numerical_failure})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

struct IterationRecord {
    Index iteration = 0;          // 1-based
    Index n_data = 0;             // observations available when the iteration started
    DesignPoint chosen;           // argmax-EEI candidate
    std::optional<double> observed;  // absent when the iteration stopped on the tolerance or failed
    double max_eei = 0;
    std::optional<PredictiveBounds> pboo;
    double acceptance_rate = 0;
    bool mcmc_degenerate = false;
    double wall_seconds = 0;
};

struct RunTrace {
    std::vector<IterationRecord> records;
    RunStatus status = RunStatus::budget_exhausted;
    std::string error;
};

struct Recommendation {
    DesignPoint x_best;
    double mean_at_best = 0;  // particle-averaged posterior mean at x_best
    QDistribution values;
    PredictiveBounds pboo;
};

struct RunResult {
    RunTrace trace;
    Dataset data;
    std::optional<Recommendation> recommendation;
    ParticleSet final_particles;
};

/// Affine map y -> (y - shift) / scale.
struct Standardizer {
    double shift = 0;
    double scale = 1;

    static Standardizer fit(const Vector& y) {
        Standardizer s;
        if (y.size() == 0) return s;
        s.shift = y.mean();
        s.scale = detail::sample_sd(y);
        return s;
    }
    Dataset apply(const Dataset& d) const { return d.with_values(((d.values().array() - shift) / scale).matrix()); }
    double restore(double z) const { return shift + scale * z; }
};

/// Grid point with the smallest particle-averaged posterior mean, plus the
/// sampled distribution of the optimal value.
inline Recommendation recommend(std::span<const PosteriorGp> fits, const Matrix& grid, Index m, double level, Rng& rng) {
    if (fits.empty()) throw std::invalid_argument("recommend: no particles");
    Vector avg = Vector::Zero(grid.rows());
    for (const auto& gp : fits) avg += predict(gp, grid).mean;
    avg /= static_cast<double>(fits.size());
    Index best = 0;
    for (Index i = 1; i < avg.size(); ++i)
        if (avg[i] < avg[best]) best = i;
    Recommendation r;
    r.x_best = grid.row(best).transpose();
    r.mean_at_best = avg[best];
    r.values = q_distribution(fits, grid, m, rng);
    r.pboo = pboo(r.values, level);
    return r;
}

inline Recommendation recommend(const Dataset& data, const ParticleSet& particles, const Matrix& grid, Index m, double level,
                                Rng& rng) {
    const auto fits = fit_particles(data, particles);
    return recommend(std::span<const PosteriorGp>(fits), grid, m, level, rng);
}

struct RunHooks {
    /// Called after every completed iteration record (for incremental persistence).
    std::function<void(const IterationRecord&)> on_record;
};

namespace detail {

struct Surrogate {
    Standardizer standardizer;
    ParticleSet particles;
    std::vector<PosteriorGp> fits;
};

inline Surrogate build_surrogate(const Dataset& data, const BoxBounds& bounds, const BgoConfig& cfg, std::uint64_t index,
                                 const std::optional<Hyperparameters>& warm) {
    Surrogate s;
    s.standardizer = Standardizer::fit(data.values());
    const Dataset z = s.standardizer.apply(data);
    Rng rng = make_rng(cfg.seed, kStreamMcmc, index);
    SamplerOptions opts;
    opts.map.restarts = cfg.map_restarts;
    opts.map.bounds = bounds;
    opts.map.warm_start = warm;
    s.particles = sample_particles(z, cfg.mcmc, rng, opts);
    s.fits = fit_particles(z, s.particles);
    return s;
}

/// Recommendation in objective units.
inline Recommendation destandardized_recommendation(const Surrogate& s, const BoxBounds& bounds, const BgoConfig& cfg,
                                                    std::uint64_t index) {
    Rng grid_rng = make_rng(cfg.seed, kStreamUqGrid, index);
    const Matrix grid = lhs(cfg.uq_grid, bounds, grid_rng);
    Rng rng = make_rng(cfg.seed, kStreamFunctionSamples, index);
    Recommendation r = recommend(std::span<const PosteriorGp>(s.fits), grid, cfg.uq_m, cfg.pboo_level, rng);
    r.mean_at_best = s.standardizer.restore(r.mean_at_best);
    for (Index i = 0; i < r.values.min_samples.size(); ++i) r.values.min_samples[i] = s.standardizer.restore(r.values.min_samples[i]);
    r.pboo = pboo(r.values, cfg.pboo_level);
    return r;
}

}  // namespace detail

/// Run the optimization loop from `initial` until the EEI tolerance or the
/// iteration budget is hit. Objective failures end the run with a partial
/// trace and objective-failure status.
inline RunResult run(const StochasticObjective& objective, const Dataset& initial, const BoxBounds& bounds,
                     const BgoConfig& cfg, const RunHooks& hooks = {}) {
    cfg.validate();
    bounds.validate();
    if (initial.empty()) throw std::invalid_argument("run: initial dataset must be nonempty");
    if (initial.dim() != bounds.dim()) throw std::invalid_argument("run: dataset and bounds dimensions differ");
    if (!objective) throw std::invalid_argument("run: empty objective");

    RunResult result{RunTrace{}, initial, std::nullopt, ParticleSet{}};
    Dataset& data = result.data;
    Rng objective_rng = make_rng(cfg.seed, kStreamObjective);
    std::optional<Hyperparameters> warm;
    std::optional<detail::Surrogate> current;  // surrogate matching `data`, if any

    using clock = std::chrono::steady_clock;
    Index s = 0;
    bool stopped = false;
    try {
        while (s < cfg.max_iters) {
            const auto t0 = clock::now();
            const auto index = static_cast<std::uint64_t>(s);
            IterationRecord rec;
            rec.iteration = s + 1;
            rec.n_data = data.size();

            detail::Surrogate sur = detail::build_surrogate(data, bounds, cfg, index, warm);
            if (sur.particles.diagnostics.map) warm = sur.particles.diagnostics.map->theta;
            rec.acceptance_rate = sur.particles.diagnostics.acceptance_rate;
            rec.mcmc_degenerate = sur.particles.diagnostics.degenerate;

            Rng cand_rng = make_rng(cfg.seed, kStreamCandidates, index);
            const Matrix candidates = lhs(cfg.n_candidates, bounds, cand_rng);
            const AcquisitionScores scores = eei(candidates, std::span<const PosteriorGp>(sur.fits));
            rec.chosen = scores.best();
            rec.max_eei = scores.best_score() * sur.standardizer.scale;

            if (cfg.uq_every > 0 && s % cfg.uq_every == 0)
                rec.pboo = detail::destandardized_recommendation(sur, bounds, cfg, index).pboo;

            if (rec.max_eei < cfg.eei_tolerance) {
                result.trace.status = RunStatus::tolerance_hit;
                rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
                result.trace.records.push_back(rec);
                if (hooks.on_record) hooks.on_record(rec);
                current = std::move(sur);
                stopped = true;
                break;
            }

            double y = 0;
            try {
                y = objective(rec.chosen, objective_rng);
                if (!std::isfinite(y)) throw ObjectiveError("objective returned a non-finite value");
            } catch (const std::exception& e) {
                result.trace.status = RunStatus::objective_failure;
                result.trace.error = e.what();
                rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
                result.trace.records.push_back(rec);
                if (hooks.on_record) hooks.on_record(rec);
                return result;
            }
            data.add(rec.chosen, y);
            rec.observed = y;
            rec.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
            result.trace.records.push_back(rec);
            if (hooks.on_record) hooks.on_record(rec);
            ++s;
        }
        if (!stopped) result.trace.status = RunStatus::budget_exhausted;

        // Terminal state of knowledge on the final data.
        const auto final_index = static_cast<std::uint64_t>(cfg.max_iters + 1);
        if (!current) current = detail::build_surrogate(data, bounds, cfg, final_index, warm);
        result.recommendation = detail::destandardized_recommendation(*current, bounds, cfg, final_index);
        result.final_particles = current->particles;
    } catch (const NumericalError& e) {
        result.trace.status = RunStatus::numerical_failure;
        result.trace.error = e.what();
    }
    return result;
}

}  // namespace bgo
