#include <gtest/gtest.h>

#include "bgo/benchmarks.hpp"
#include "bgo/optimizer.hpp"

using namespace bgo;

namespace {

BgoConfig small_config(std::uint64_t seed) {
    BgoConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = 4;
    cfg.eei_tolerance = 0.0;
    cfg.n_candidates = 100;
    cfg.mcmc.n_particles = 5;
    cfg.mcmc.burn_in = 200;
    cfg.mcmc.post_burn_steps = 100;
    cfg.mcmc.thin = 20;
    cfg.map_restarts = 2;
    cfg.uq_m = 10;
    cfg.uq_grid = 100;
    return cfg;
}

StochasticObjective synth1d(double s) {
    return [s](const DesignPoint& x, Rng& rng) { return benchmarks::synth1d(x[0], benchmarks::NoiseModel::constant(s), rng); };
}

Dataset initial_1d(Index n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d(1);
    const Matrix x = lhs(n, BoxBounds::unit(1), rng);
    for (Index i = 0; i < n; ++i) d.add(x.row(i).transpose(), benchmarks::synth1d(x(i, 0), benchmarks::NoiseModel::constant(0.1), rng));
    return d;
}

void expect_same_trace(const RunResult& a, const RunResult& b) {
    ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
    EXPECT_EQ(a.trace.status, b.trace.status);
    for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
        const auto &ra = a.trace.records[i], &rb = b.trace.records[i];
        EXPECT_EQ(ra.chosen, rb.chosen);
        EXPECT_EQ(ra.observed, rb.observed);
        EXPECT_EQ(ra.max_eei, rb.max_eei);
        EXPECT_EQ(ra.acceptance_rate, rb.acceptance_rate);
        ASSERT_EQ(ra.pboo.has_value(), rb.pboo.has_value());
        if (ra.pboo) {
            EXPECT_EQ(ra.pboo->lo, rb.pboo->lo);
            EXPECT_EQ(ra.pboo->hi, rb.pboo->hi);
        }
    }
    EXPECT_EQ(a.data.values(), b.data.values());
    ASSERT_TRUE(a.recommendation && b.recommendation);
    EXPECT_EQ(a.recommendation->x_best, b.recommendation->x_best);
    EXPECT_EQ(a.recommendation->values.min_samples, b.recommendation->values.min_samples);
}

}  // namespace

TEST(BgoConfig, Validation) {
    EXPECT_NO_THROW(BgoConfig{}.validate());
    BgoConfig c;
    c.max_iters = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.eei_tolerance = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.uq_grid = kMaxUqGrid + 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.pboo_level = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(RunStatus, StringRoundTrip) {
    for (auto s : {RunStatus::tolerance_hit, RunStatus::budget_exhausted, RunStatus::objective_failure, RunStatus::numerical_failure})
        EXPECT_EQ(parse_status(to_string(s)), s);
    EXPECT_EQ(to_string(RunStatus::tolerance_hit), "tolerance-hit");
    EXPECT_FALSE(parse_status("done").has_value());
}

TEST(Standardizer, FitAndRestore) {
    const Vector y = (Vector(4) << 1, 2, 3, 6).finished();
    const Standardizer s = Standardizer::fit(y);
    EXPECT_DOUBLE_EQ(s.shift, 3.0);
    EXPECT_NEAR(s.scale, std::sqrt(14.0 / 3.0), 1e-14);
    const Dataset z = s.apply(Dataset(Matrix::Zero(4, 1), y));
    EXPECT_NEAR(z.values().mean(), 0.0, 1e-15);
    EXPECT_NEAR(s.restore(z.values()[3]), 6.0, 1e-14);
    EXPECT_EQ(Standardizer::fit(Vector::Constant(1, 5.0)).scale, 1.0);
    EXPECT_EQ(Standardizer::fit(Vector::Constant(3, 5.0)).scale, 1.0);
}

TEST(Run, HugeToleranceStopsAtFirstIteration) {
    const Dataset init = initial_1d(5, 1);
    BgoConfig probe = small_config(3);
    probe.max_iters = 1;
    const double first = run(synth1d(0.1), init, BoxBounds::unit(1), probe).trace.records.at(0).max_eei;
    ASSERT_GT(first, 0.0);

    BgoConfig cfg = small_config(3);
    cfg.eei_tolerance = 1e6 * first;
    int calls = 0;
    const StochasticObjective counted = [&](const DesignPoint& x, Rng& rng) {
        ++calls;
        return synth1d(0.1)(x, rng);
    };
    const RunResult r = run(counted, init, BoxBounds::unit(1), cfg);
    EXPECT_EQ(r.trace.status, RunStatus::tolerance_hit);
    ASSERT_EQ(r.trace.records.size(), 1u);
    EXPECT_EQ(calls, 0);
    EXPECT_EQ(r.data.size(), init.size());
    EXPECT_FALSE(r.trace.records[0].observed.has_value());
    EXPECT_LT(r.trace.records.back().max_eei, cfg.eei_tolerance);
    EXPECT_TRUE(r.recommendation.has_value());
}

TEST(Run, BudgetAddsExactlyThreeObservations) {
    const Dataset init = initial_1d(5, 2);
    BgoConfig cfg = small_config(4);
    cfg.max_iters = 3;
    const RunResult r = run(synth1d(0.1), init, BoxBounds::unit(1), cfg);
    EXPECT_EQ(r.trace.status, RunStatus::budget_exhausted);
    EXPECT_EQ(r.trace.records.size(), 3u);
    EXPECT_EQ(r.data.size(), init.size() + 3);
    for (std::size_t i = 0; i < r.trace.records.size(); ++i) {
        const auto& rec = r.trace.records[i];
        EXPECT_EQ(rec.iteration, static_cast<Index>(i) + 1);
        EXPECT_EQ(rec.n_data, init.size() + static_cast<Index>(i));
        ASSERT_TRUE(rec.observed.has_value());
        EXPECT_EQ(r.data.values()[rec.n_data], *rec.observed);
        EXPECT_EQ(r.data.point(rec.n_data), rec.chosen);
        EXPECT_GE(rec.max_eei, 0.0);
        EXPECT_TRUE(rec.pboo.has_value());
    }
}

TEST(Run, ChosenPointsComeFromCandidateSets) {
    const Dataset init = initial_1d(4, 5);
    const BgoConfig cfg = small_config(6);
    const RunResult r = run(synth1d(0.1), init, BoxBounds::unit(1), cfg);
    for (std::size_t s = 0; s < r.trace.records.size(); ++s) {
        Rng rng = make_rng(cfg.seed, kStreamCandidates, s);
        const Matrix cand = lhs(cfg.n_candidates, BoxBounds::unit(1), rng);
        bool found = false;
        for (Index i = 0; i < cand.rows() && !found; ++i) found = cand.row(i).transpose() == r.trace.records[s].chosen;
        EXPECT_TRUE(found) << "iteration " << s + 1;
    }
}

TEST(Run, ReproducibleForFixedSeed) {
    const Dataset init = initial_1d(5, 7);
    const BgoConfig cfg = small_config(8);
    expect_same_trace(run(synth1d(0.1), init, BoxBounds::unit(1), cfg), run(synth1d(0.1), init, BoxBounds::unit(1), cfg));
    BgoConfig other = cfg;
    other.seed = 9;
    const RunResult a = run(synth1d(0.1), init, BoxBounds::unit(1), cfg);
    const RunResult b = run(synth1d(0.1), init, BoxBounds::unit(1), other);
    EXPECT_NE(a.trace.records[0].chosen, b.trace.records[0].chosen);
}

TEST(Run, TerminalOnlyUncertainty) {
    const Dataset init = initial_1d(5, 10);
    BgoConfig cfg = small_config(11);
    cfg.uq_every = 0;
    const RunResult r = run(synth1d(0.1), init, BoxBounds::unit(1), cfg);
    for (const auto& rec : r.trace.records) EXPECT_FALSE(rec.pboo.has_value());
    ASSERT_TRUE(r.recommendation.has_value());
    EXPECT_EQ(r.recommendation->values.size(), cfg.mcmc.n_particles * cfg.uq_m);
    EXPECT_LE(r.recommendation->pboo.lo, r.recommendation->pboo.hi);
    EXPECT_EQ(r.final_particles.size(), cfg.mcmc.n_particles);
}

TEST(Run, ObjectiveFailureKeepsPartialTrace) {
    const Dataset init = initial_1d(5, 12);
    const BgoConfig cfg = small_config(13);
    int calls = 0;
    const StochasticObjective flaky = [&](const DesignPoint& x, Rng& rng) {
        if (++calls == 2) throw std::runtime_error("simulator crashed");
        return synth1d(0.1)(x, rng);
    };
    const RunResult r = run(flaky, init, BoxBounds::unit(1), cfg);
    EXPECT_EQ(r.trace.status, RunStatus::objective_failure);
    EXPECT_EQ(r.trace.error, "simulator crashed");
    ASSERT_EQ(r.trace.records.size(), 2u);
    EXPECT_TRUE(r.trace.records[0].observed.has_value());
    EXPECT_FALSE(r.trace.records[1].observed.has_value());
    EXPECT_EQ(r.data.size(), init.size() + 1);
    EXPECT_FALSE(r.recommendation.has_value());

    const StochasticObjective nan = [](const DesignPoint&, Rng&) { return std::nan(""); };
    const RunResult rn = run(nan, init, BoxBounds::unit(1), cfg);
    EXPECT_EQ(rn.trace.status, RunStatus::objective_failure);
    EXPECT_EQ(rn.trace.records.size(), 1u);
}

TEST(Run, HooksSeeEveryRecord) {
    const Dataset init = initial_1d(5, 14);
    const BgoConfig cfg = small_config(15);
    std::vector<Index> seen;
    RunHooks hooks;
    hooks.on_record = [&](const IterationRecord& rec) { seen.push_back(rec.iteration); };
    const RunResult r = run(synth1d(0.1), init, BoxBounds::unit(1), cfg, hooks);
    EXPECT_EQ(seen.size(), r.trace.records.size());
    for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], static_cast<Index>(i) + 1);
}

TEST(Run, RejectsBadInputs) {
    const BgoConfig cfg = small_config(1);
    EXPECT_THROW(run(synth1d(0.1), Dataset(1), BoxBounds::unit(1), cfg), std::invalid_argument);
    EXPECT_THROW(run(synth1d(0.1), initial_1d(3, 1), BoxBounds::unit(2), cfg), std::invalid_argument);
    EXPECT_THROW(run(StochasticObjective{}, initial_1d(3, 1), BoxBounds::unit(1), cfg), std::invalid_argument);
}

TEST(Recommend, SingleLowObservationWins) {
    Dataset data(1);
    data.add(Vector::Constant(1, 0.3), -5.0);
    const std::vector<PosteriorGp> fits{gp_fit(data, Hyperparameters(2.0, Vector::Constant(1, 0.1), 1e-4))};
    const Matrix grid = Vector::LinSpaced(101, 0, 1);
    Rng rng(1);
    const Recommendation r = recommend(fits, grid, 20, 0.95, rng);
    EXPECT_NEAR(r.x_best[0], 0.3, 1e-12);
    EXPECT_NEAR(r.mean_at_best, -5.0, 1e-3);
    EXPECT_EQ(r.values.size(), 20);
}
