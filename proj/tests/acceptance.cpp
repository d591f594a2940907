// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   acceptance                 run all criteria
//   acceptance --criterion 4   run one criterion
//
// Criteria 4-6 run scaled-down reproductions of the 1D and 2D benchmark
// studies: 50 particles from a 2,000-step burn-in (thinning 20), M = 100
// function samples per particle, 1,000 candidates, terminal-only PBOO.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "bgo/experiment.hpp"
#include "oracles.hpp"

using namespace bgo;
namespace ex = bgo::experiment;
using benchmarks::BenchmarkId;
using benchmarks::NoiseModel;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

Hyperparameters theta1(double s, double ell, double sigma) { return {s, Vector::Constant(1, ell), sigma}; }

// ---------------------------------------------------------------------------
// 1. EI oracle equivalence

Outcome ei_oracle() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> loc(-2, 2), scale(0.01, 3), gap(-3, 3);
    int ok = 0;
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        // incumbent within 3 sd of the mean keeps P(improvement) >= 1e-3
        const double mean = loc(rng), sd = scale(rng), inc = mean + sd * gap(rng);
        const auto mc = oracle::mc_expected_improvement(inc, mean, sd, 1000000, rng);
        const double z = std::abs(ei_closed_form(inc, mean, sd) - mc.mean) / mc.se;
        worst = std::max(worst, z);
        if (z <= 4) ++ok;
    }
    std::ostringstream os;
    os << ok << "/50 triples within 4 SE of 1e6-draw Monte Carlo (worst " << worst << " SE)";
    return {ok == 50, os.str()};
}

// ---------------------------------------------------------------------------
// 2. GP correctness

Outcome gp_correctness() {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> z;
    std::ostringstream os;
    bool pass = true;

    // interpolation with noise at jitter level
    double worst_interp = 0;
    for (int t = 0; t < 20; ++t) {
        const Index d = 1 + t % 3, n = 5;
        Matrix x(n, d);
        Vector y(n);
        for (Index i = 0; i < n; ++i) {
            for (Index k = 0; k < d; ++k) x(i, k) = u(rng);
            y[i] = 3 * z(rng);
        }
        const Hyperparameters th(1.5, Vector::Constant(d, 0.1), 1e-6);
        const PosteriorGp gp = gp_fit(Dataset(x, y), th);
        const double tol = 1e-4 * (y.cwiseAbs().maxCoeff() + 1);
        const Vector m = predict(gp, x).mean;
        worst_interp = std::max(worst_interp, (m - y).cwiseAbs().maxCoeff() / tol);
    }
    pass = pass && worst_interp <= 1;
    os << "interpolation error/tolerance " << worst_interp;

    // PSD of the kernel matrix
    double worst_eig = 0;
    for (int t = 0; t < 100; ++t) {
        const Index d = 1 + t % 4, n = 1 + t % 20;
        Matrix x(n, d);
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < d; ++k) x(i, k) = u(rng);
        Vector ell(d);
        for (Index k = 0; k < d; ++k) ell[k] = 0.05 + 2 * u(rng);
        const Hyperparameters th(0.1 + 3 * u(rng), ell, 1.0);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(cov_matrix(x, th));
        worst_eig = std::min(worst_eig, es.eigenvalues().minCoeff() / (th.signal * th.signal));
    }
    pass = pass && worst_eig >= -1e-8;
    os << "; min eigenvalue/s^2 " << worst_eig;

    // moment consistency of joint function draws
    Matrix x(6, 1);
    Vector y(6);
    for (Index i = 0; i < 6; ++i) {
        x(i, 0) = u(rng);
        y[i] = std::sin(5 * x(i, 0)) + 0.1 * z(rng);
    }
    const PosteriorGp gp = gp_fit(Dataset(x, y), theta1(1.0, 0.2, 0.1));
    const Matrix grid = Vector::LinSpaced(8, 0, 1);
    const Index m = 10000;
    const Matrix draws = sample_functions(gp, grid, m, rng);
    const PredictionBatch pred = predict(gp, grid);
    double worst_se = 0;
    for (Index g = 0; g < grid.rows(); ++g) {
        const Vector col = draws.col(g);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(m - 1);
        const double se_mean = std::sqrt(pred.var[g] / static_cast<double>(m));
        const double se_var = pred.var[g] * std::sqrt(2.0 / static_cast<double>(m - 1));
        worst_se = std::max({worst_se, std::abs(mean - pred.mean[g]) / se_mean, std::abs(var - pred.var[g]) / se_var});
    }
    pass = pass && worst_se <= 3;
    os << "; sample moments worst " << worst_se << " SE at 1e4 draws";
    return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 3. MCMC validity

Outcome mcmc_validity() {
    std::ostringstream os;
    McmcConfig prior_cfg;
    prior_cfg.n_particles = 500;
    prior_cfg.burn_in = 5000;
    prior_cfg.thin = 50;
    prior_cfg.post_burn_steps = 500 * 50;
    prior_cfg.seed = 3;
    SamplerOptions opts;
    opts.start = theta1(1, 1, 1);
    const ParticleSet prior = sample_particles(Dataset(1), prior_cfg, opts);
    std::vector<double> ell;
    for (const auto& th : prior.particles) ell.push_back(th.lengthscales[0]);
    const double lo = std::atan(std::exp(-kLogBound)), hi = std::atan(std::exp(kLogBound));
    const double ks = oracle::ks_distance(ell, [&](double l) { return (std::atan(l) - lo) / (hi - lo); });
    os << "prior-recovery KS " << ks << " at 500 particles";
    bool pass = ks <= 0.1;

    // n = 50 draws from a GP with sigma0 = 0.5
    const double sigma0 = 0.5;
    McmcConfig cfg;
    cfg.n_particles = 50;
    cfg.burn_in = 2000;
    cfg.thin = 20;
    cfg.post_burn_steps = 1000;
    os << "; sigma median";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(500 + seed);
        Matrix x(50, 1);
        std::uniform_real_distribution<double> u(0, 1);
        for (Index i = 0; i < 50; ++i) x(i, 0) = u(rng);
        Vector y = oracle::gp_draw(x, 1.0, Vector::Constant(1, 0.2), rng);
        std::normal_distribution<double> z;
        for (Index i = 0; i < 50; ++i) y[i] += sigma0 * z(rng);
        const ParticleSet set = sample_particles(Dataset(x, y), cfg, rng);
        std::vector<double> sig;
        for (const auto& th : set.particles) sig.push_back(th.noise);
        std::sort(sig.begin(), sig.end());
        const double med = 0.5 * (sig[24] + sig[25]);
        os << ' ' << med;
        pass = pass && med >= sigma0 / 2 && med <= 2 * sigma0;
    }
    os << " (truth " << sigma0 << ")";
    return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// 4-6. Benchmark reproductions

struct Study {
    BenchmarkId benchmark;
    NoiseModel noise;
    Index initial;
    Index budget;
    double radius;
    int required;
    std::string label;
};

BgoConfig study_config(Index budget) {
    BgoConfig cfg;
    cfg.max_iters = budget;
    cfg.eei_tolerance = 1e-4;
    cfg.n_candidates = 1000;
    cfg.mcmc.n_particles = 50;
    cfg.mcmc.burn_in = 2000;
    cfg.mcmc.thin = 20;
    cfg.mcmc.post_burn_steps = 50 * 20;
    cfg.uq_m = 100;
    cfg.uq_grid = 1000;
    cfg.uq_every = 0;
    return cfg;
}

constexpr std::uint64_t kFirstSeed = 100;
constexpr int kSeeds = 10;

Outcome run_study(const Study& st) {
    const BoxBounds box = benchmarks::bounds(st.benchmark);
    const auto opt = benchmarks::pinned_optimum(st.benchmark);
    ex::ObjectiveSpec spec;
    spec.benchmark = st.benchmark;
    spec.noise = st.noise;
    const StochasticObjective objective = ex::make_objective(spec);

    int ok = 0;
    std::ostringstream os;
    for (int k = 0; k < kSeeds; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        BgoConfig cfg = study_config(st.budget);
        cfg.seed = kFirstSeed + static_cast<std::uint64_t>(k);
        const Dataset init = ex::initial_design(box, st.initial, objective, cfg.seed);
        const RunResult r = run(objective, init, box, cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool good = false;
        std::ostringstream line;
        line << "  " << st.label << " seed " << cfg.seed << ": " << to_string(r.trace.status) << " after "
             << r.trace.records.size() << " iterations";
        if (r.recommendation) {
            double dist = std::numeric_limits<double>::infinity();
            for (const auto& m : opt.minimizers) dist = std::min(dist, (m - r.recommendation->x_best).norm());
            const bool covers = r.recommendation->pboo.contains(opt.value);
            good = covers && dist <= st.radius;
            line << ", PBOO [" << r.recommendation->pboo.lo << ", " << r.recommendation->pboo.hi << "] "
                 << (covers ? "covers" : "misses") << " " << opt.value << ", x_best (";
            for (Index i = 0; i < r.recommendation->x_best.size(); ++i) line << (i ? ", " : "") << r.recommendation->x_best[i];
            line << ") at distance " << dist;
        } else {
            line << ", error: " << r.trace.error;
        }
        line << " [" << (good ? "ok" : "miss") << ", " << static_cast<int>(secs) << "s]";
        std::cout << line.str() << std::endl;
        if (good) ++ok;
    }
    os << st.label << ": " << ok << "/" << kSeeds << " seeds succeed (need " << st.required << ")";
    return {ok >= st.required, os.str()};
}

Outcome reproduction_1d() {
    return run_study({BenchmarkId::synth1d, NoiseModel::constant(0.1), 5, 60, 0.05, 8, "synth1d s=0.1 S=60"});
}

Outcome noise_sweep_1d() {
    const std::vector<Study> studies{
        {BenchmarkId::synth1d, NoiseModel::constant(0.01), 5, 60, 0.05, 8, "synth1d s=0.01 S=60"},
        {BenchmarkId::synth1d, NoiseModel::constant(1.0), 5, 120, 0.05, 6, "synth1d s=1 S=120"},
        {BenchmarkId::synth1d, NoiseModel::heteroscedastic_1d(), 5, 60, 0.05, 8, "synth1d heteroscedastic S=60"},
    };
    bool pass = true;
    std::string detail;
    for (const auto& st : studies) {
        const Outcome o = run_study(st);
        pass = pass && o.pass;
        detail += (detail.empty() ? "" : "; ") + o.detail;
    }
    return {pass, detail};
}

Outcome reproduction_2d() {
    return run_study({BenchmarkId::synth2d, NoiseModel::constant(0.1), 20, 120, 0.25, 7, "synth2d s=0.1 S=120"});
}

// ---------------------------------------------------------------------------
// 7. loop mechanics

BgoConfig mechanics_config(std::uint64_t seed) {
    BgoConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = 4;
    cfg.eei_tolerance = 0.0;
    cfg.n_candidates = 200;
    cfg.mcmc.n_particles = 10;
    cfg.mcmc.burn_in = 300;
    cfg.mcmc.post_burn_steps = 200;
    cfg.mcmc.thin = 20;
    cfg.uq_m = 20;
    cfg.uq_grid = 200;
    return cfg;
}

bool same_trace(const RunResult& a, const RunResult& b) {
    if (a.trace.records.size() != b.trace.records.size() || a.trace.status != b.trace.status) return false;
    for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
        const auto &ra = a.trace.records[i], &rb = b.trace.records[i];
        if (ra.chosen != rb.chosen || ra.observed != rb.observed || ra.max_eei != rb.max_eei) return false;
        if (ra.pboo.has_value() != rb.pboo.has_value()) return false;
        if (ra.pboo && (ra.pboo->lo != rb.pboo->lo || ra.pboo->hi != rb.pboo->hi)) return false;
    }
    return a.data.values() == b.data.values();
}

Outcome mechanics() {
    ex::ObjectiveSpec spec;
    spec.benchmark = BenchmarkId::synth1d;
    spec.noise = NoiseModel::constant(0.1);
    const StochasticObjective base = ex::make_objective(spec);
    const BoxBounds box = BoxBounds::unit(1);
    int calls = 0;
    const StochasticObjective counted = [&](const DesignPoint& x, Rng& rng) {
        ++calls;
        return base(x, rng);
    };
    const Dataset init = ex::initial_design(box, 5, base, 1);
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };

    // budget: S = 3, eps = 0 gives exactly 3 new observations
    BgoConfig cfg = mechanics_config(2);
    cfg.max_iters = 3;
    calls = 0;
    const RunResult budget = run(counted, init, box, cfg);
    check(budget.trace.status == RunStatus::budget_exhausted, "budget status");
    check(budget.trace.records.size() == 3 && calls == 3 && budget.data.size() == init.size() + 3, "budget count");
    for (std::size_t s = 0; s < budget.trace.records.size(); ++s) {
        const auto& rec = budget.trace.records[s];
        check(rec.n_data == init.size() + static_cast<Index>(s), "data monotonicity");
        check(rec.max_eei >= 0, "nonnegative max EEI");
        Rng crng = make_rng(cfg.seed, kStreamCandidates, s);
        const Matrix cand = lhs(cfg.n_candidates, box, crng);
        bool found = false;
        for (Index i = 0; i < cand.rows() && !found; ++i) found = cand.row(i).transpose() == rec.chosen;
        check(found, "chosen point in candidate set");
    }

    // stopping rule: a huge tolerance stops at iteration 1 without evaluating
    BgoConfig stop = mechanics_config(2);
    stop.eei_tolerance = 1e6 * budget.trace.records[0].max_eei;
    calls = 0;
    const RunResult early = run(counted, init, box, stop);
    check(early.trace.status == RunStatus::tolerance_hit, "tolerance status");
    check(early.trace.records.size() == 1 && calls == 0 && early.data.size() == init.size(), "zero evaluations on stop");
    check(early.trace.records.back().max_eei < stop.eei_tolerance, "stopping soundness");

    // reproducibility
    const BgoConfig rep = mechanics_config(9);
    check(same_trace(run(base, init, box, rep), run(base, init, box, rep)), "reproducibility");
    check(budget.trace.records.size() <= static_cast<std::size_t>(cfg.max_iters), "record count bound");

    std::string detail = "budget, stopping rule, candidate membership, data monotonicity, reproducibility";
    if (!failed.empty()) {
        detail = "failed:";
        for (const auto& f : failed) detail += " [" + f + "]";
    }
    return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// 8. Classic-EI reduction

Outcome classic_ei() {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    Matrix x(10, 1);
    Vector y(10);
    for (Index i = 0; i < 10; ++i) {
        x(i, 0) = u(rng);
        y[i] = benchmarks::synth1d_mean(x(i, 0));
    }
    const Dataset data(x, y);
    const std::vector<PosteriorGp> fits{gp_fit(data, Hyperparameters(2.0, Vector::Constant(1, 0.1), 1e-6))};
    const Matrix cand = lhs(1000, BoxBounds::unit(1), rng);
    const AcquisitionScores sc = eei(cand, fits);
    const double incumbent = y.minCoeff();
    const PredictionBatch pred = predict(fits[0], cand);
    double worst = 0;
    for (Index i = 0; i < cand.rows(); ++i)
        worst = std::max(worst, std::abs(sc.scores[i] - ei_closed_form(incumbent, pred.mean[i], std::sqrt(pred.var[i]))));
    std::ostringstream os;
    os << "max |EEI - classic EI| over 1000 candidates " << worst;
    return {worst <= 1e-6, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
        {1, {"EI oracle equivalence", ei_oracle}},
        {2, {"GP correctness", gp_correctness}},
        {3, {"MCMC validity", mcmc_validity}},
        {4, {"1D reproduction", reproduction_1d}},
        {5, {"1D noise sweep", noise_sweep_1d}},
        {6, {"2D reproduction", reproduction_2d}},
        {7, {"Optimization loop mechanics", mechanics}},
        {8, {"Classic-EI reduction", classic_ei}},
    };

    set_warning_sink([](const std::string&) {});
    bool all = true;
    for (const auto& [id, entry] : criteria) {
        if (only && id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = entry.second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d %s: %s (%s; %.1fs)\n", id, entry.first.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
