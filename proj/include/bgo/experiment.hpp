// Batch experiments: YAML config parsing and validation, objective
// construction, per-seed runs and on-disk artifacts.
//
// Layout of one experiment:
//   <root>/<name>/seed-<k>/config.yaml    fully resolved config (this seed only)
//                          trace.jsonl    one JSON record per iteration, flushed
//                          eei.tsv        iteration, max EEI
//                          pboo.tsv       iteration, lo, median, hi
//                          summary.json   status, terminal PBOO, recommendation, config echo
//                          particles.txt  final hyperparameter particles (standardized units)
//                          data.tsv       final dataset
// <root> is BGO_OUTPUT_ROOT when set, otherwise the config's output_dir.
#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include "benchmarks.hpp"
#include "external_objective.hpp"
#include "optimizer.hpp"

namespace bgo::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kOutputRootEnv = "BGO_OUTPUT_ROOT";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2 };

/// Invalid configuration; `line` is 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& field, const std::string& msg)
        : std::runtime_error(format(source, line, field, msg)), line_(line), field_(field) {}

    int line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    static std::string format(const std::string& source, int line, const std::string& field, const std::string& msg) {
        std::ostringstream os;
        os << (source.empty() ? "<config>" : source);
        if (line > 0) os << ':' << line;
        os << ": " << (field.empty() ? "" : field + ": ") << msg;
        return os.str();
    }
    int line_;
    std::string field_;
};

struct ObjectiveSpec {
    std::optional<benchmarks::BenchmarkId> benchmark;
    benchmarks::NoiseModel noise;
    std::optional<ExternalCommand> external;
};

struct ExperimentConfig {
    std::string name = "experiment";
    ObjectiveSpec objective;
    BoxBounds bounds;
    Index initial_samples = 5;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "runs";
    /// Optimizer settings (the `defaults` section). `seed` is set per run.
    BgoConfig bgo;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) const {
        const int line = node.IsDefined() && node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
        throw ConfigError(source_, line, field, msg);
    }

    void require_map(const YAML::Node& node, const std::string& field) const {
        if (!node.IsMap()) fail(node, field, "expected a mapping");
    }

    void allow_keys(const YAML::Node& node, const std::string& field, std::initializer_list<const char*> keys) const {
        const std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) fail(kv.first, field.empty() ? key : field + "." + key, "unknown key");
        }
    }

    template <class T>
    T scalar(const YAML::Node& node, const std::string& field) const {
        if (!node.IsScalar()) fail(node, field, "expected a scalar");
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, field, "cannot parse '" + node.Scalar() + "'");
        }
    }

    Index count(const YAML::Node& node, const std::string& field, Index min) const {
        const auto v = scalar<long long>(node, field);
        if (v < min) fail(node, field, "must be >= " + std::to_string(min));
        return static_cast<Index>(v);
    }

    double real(const YAML::Node& node, const std::string& field) const {
        const auto v = scalar<double>(node, field);
        if (!std::isfinite(v)) fail(node, field, "must be finite");
        return v;
    }

    Vector vector(const YAML::Node& node, const std::string& field) const {
        if (!node.IsSequence() || node.size() == 0) fail(node, field, "expected a nonempty list of numbers");
        Vector v(static_cast<Index>(node.size()));
        for (std::size_t i = 0; i < node.size(); ++i)
            v[static_cast<Index>(i)] = real(node[i], field + "[" + std::to_string(i) + "]");
        return v;
    }

    const std::string& source() const noexcept { return source_; }

private:
    std::string source_;
};

inline void parse_defaults(const Reader& rd, const YAML::Node& node, BgoConfig& cfg) {
    rd.require_map(node, "defaults");
    rd.allow_keys(node, "defaults",
                  {"max_iters", "eei_tolerance", "n_candidates", "map_restarts", "uq_m", "uq_every", "uq_grid", "pboo_level",
                   "mcmc"});
    if (auto n = node["max_iters"]) cfg.max_iters = rd.count(n, "defaults.max_iters", 1);
    if (auto n = node["eei_tolerance"]) {
        cfg.eei_tolerance = rd.real(n, "defaults.eei_tolerance");
        if (cfg.eei_tolerance < 0) rd.fail(n, "defaults.eei_tolerance", "must be >= 0");
    }
    if (auto n = node["n_candidates"]) cfg.n_candidates = rd.count(n, "defaults.n_candidates", 1);
    if (auto n = node["map_restarts"]) cfg.map_restarts = rd.count(n, "defaults.map_restarts", 1);
    if (auto n = node["uq_m"]) cfg.uq_m = rd.count(n, "defaults.uq_m", 1);
    if (auto n = node["uq_every"]) cfg.uq_every = rd.count(n, "defaults.uq_every", 0);
    if (auto n = node["uq_grid"]) {
        cfg.uq_grid = rd.count(n, "defaults.uq_grid", 1);
        if (cfg.uq_grid > kMaxUqGrid) rd.fail(n, "defaults.uq_grid", "must be <= 2000");
    }
    if (auto n = node["pboo_level"]) {
        cfg.pboo_level = rd.real(n, "defaults.pboo_level");
        if (!(cfg.pboo_level >= 0 && cfg.pboo_level < 1)) rd.fail(n, "defaults.pboo_level", "must lie in [0, 1)");
    }
    if (auto m = node["mcmc"]) {
        rd.require_map(m, "defaults.mcmc");
        rd.allow_keys(m, "defaults.mcmc", {"n_particles", "burn_in", "post_burn_steps", "thin"});
        if (auto n = m["n_particles"]) cfg.mcmc.n_particles = rd.count(n, "defaults.mcmc.n_particles", 1);
        if (auto n = m["burn_in"]) cfg.mcmc.burn_in = rd.count(n, "defaults.mcmc.burn_in", 0);
        if (auto n = m["post_burn_steps"]) cfg.mcmc.post_burn_steps = rd.count(n, "defaults.mcmc.post_burn_steps", 1);
        if (auto n = m["thin"]) cfg.mcmc.thin = rd.count(n, "defaults.mcmc.thin", 1);
        if (cfg.mcmc.post_burn_steps / cfg.mcmc.thin < cfg.mcmc.n_particles)
            rd.fail(m, "defaults.mcmc", "post_burn_steps / thin must be >= n_particles");
    }
}

inline void parse_objective(const Reader& rd, const YAML::Node& node, ObjectiveSpec& obj) {
    rd.require_map(node, "experiment.objective");
    rd.allow_keys(node, "experiment.objective", {"benchmark", "noise", "command", "timeout"});
    const bool has_bench = bool(node["benchmark"]);
    const bool has_cmd = bool(node["command"]);
    if (has_bench == has_cmd) rd.fail(node, "experiment.objective", "specify exactly one of 'benchmark' or 'command'");
    if (has_bench) {
        const auto id_text = rd.scalar<std::string>(node["benchmark"], "experiment.objective.benchmark");
        const auto id = benchmarks::parse_benchmark(id_text);
        if (!id) rd.fail(node["benchmark"], "experiment.objective.benchmark", "unknown benchmark '" + id_text + "'");
        obj.benchmark = id;
        obj.noise = benchmarks::NoiseModel::constant(0.0);
        if (auto n = node["noise"]) {
            const auto text = rd.scalar<std::string>(n, "experiment.objective.noise");
            if (text == "heteroscedastic") {
                obj.noise = *id == benchmarks::BenchmarkId::synth1d ? benchmarks::NoiseModel::heteroscedastic_1d()
                                                                    : benchmarks::NoiseModel::heteroscedastic_2d();
            } else {
                const double s = rd.real(n, "experiment.objective.noise");
                if (s < 0) rd.fail(n, "experiment.objective.noise", "must be >= 0 or 'heteroscedastic'");
                obj.noise = benchmarks::NoiseModel::constant(s);
            }
        }
        if (node["timeout"]) rd.fail(node["timeout"], "experiment.objective.timeout", "only valid with 'command'");
    } else {
        ExternalCommand cmd;
        cmd.command = rd.scalar<std::string>(node["command"], "experiment.objective.command");
        if (cmd.command.empty()) rd.fail(node["command"], "experiment.objective.command", "must be nonempty");
        if (auto t = node["timeout"]) {
            cmd.timeout_seconds = rd.real(t, "experiment.objective.timeout");
            if (!(cmd.timeout_seconds > 0)) rd.fail(t, "experiment.objective.timeout", "must be > 0");
        }
        if (node["noise"]) rd.fail(node["noise"], "experiment.objective.noise", "only valid with 'benchmark'");
        obj.external = cmd;
    }
}

}  // namespace detail

/// Parse and validate a config document. `source` names it in diagnostics.
inline ExperimentConfig parse_config(const YAML::Node& root, const std::string& source = "") {
    const detail::Reader rd(source);
    if (!root.IsMap()) rd.fail(root, "", "top level must be a mapping with 'defaults' and 'experiment'");
    rd.allow_keys(root, "", {"defaults", "experiment"});

    ExperimentConfig cfg;
    if (auto d = root["defaults"]) detail::parse_defaults(rd, d, cfg.bgo);

    const YAML::Node ex = root["experiment"];
    if (!ex) rd.fail(root, "experiment", "missing section");
    rd.require_map(ex, "experiment");
    rd.allow_keys(ex, "experiment", {"name", "objective", "bounds", "initial_samples", "seeds", "output_dir"});

    if (auto n = ex["name"]) {
        cfg.name = rd.scalar<std::string>(n, "experiment.name");
        if (cfg.name.empty() || cfg.name.find('/') != std::string::npos)
            rd.fail(n, "experiment.name", "must be a nonempty name without '/'");
    }
    if (!ex["objective"]) rd.fail(ex, "experiment.objective", "missing");
    detail::parse_objective(rd, ex["objective"], cfg.objective);

    if (auto b = ex["bounds"]) {
        rd.require_map(b, "experiment.bounds");
        rd.allow_keys(b, "experiment.bounds", {"lower", "upper"});
        if (!b["lower"] || !b["upper"]) rd.fail(b, "experiment.bounds", "needs both 'lower' and 'upper'");
        const Vector lo = rd.vector(b["lower"], "experiment.bounds.lower");
        const Vector hi = rd.vector(b["upper"], "experiment.bounds.upper");
        if (lo.size() != hi.size()) rd.fail(b, "experiment.bounds", "lower and upper differ in length");
        for (Index i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i]))
                rd.fail(b["lower"], "experiment.bounds.lower[" + std::to_string(i) + "]",
                        "lower must be < upper (got " + std::to_string(lo[i]) + " >= " + std::to_string(hi[i]) + ")");
        cfg.bounds = BoxBounds(lo, hi);
        if (cfg.objective.benchmark) {
            const BoxBounds dom = benchmarks::bounds(*cfg.objective.benchmark);
            if (dom.dim() != lo.size() || (lo.array() < dom.lower.array()).any() || (hi.array() > dom.upper.array()).any())
                rd.fail(b, "experiment.bounds", "must lie within the benchmark domain");
        }
    } else if (cfg.objective.benchmark) {
        cfg.bounds = benchmarks::bounds(*cfg.objective.benchmark);
    } else {
        rd.fail(ex, "experiment.bounds", "required for external objectives");
    }

    if (auto n = ex["initial_samples"]) cfg.initial_samples = rd.count(n, "experiment.initial_samples", 1);
    if (auto s = ex["seeds"]) {
        if (!s.IsSequence() || s.size() == 0) rd.fail(s, "experiment.seeds", "expected a nonempty list of integers");
        cfg.seeds.clear();
        for (std::size_t i = 0; i < s.size(); ++i)
            cfg.seeds.push_back(rd.scalar<std::uint64_t>(s[i], "experiment.seeds[" + std::to_string(i) + "]"));
    }
    if (auto n = ex["output_dir"]) cfg.output_dir = rd.scalar<std::string>(n, "experiment.output_dir");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw ConfigError(path, 0, "", "cannot open file");
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path, e.mark.line + 1, "", e.msg);
    }
    return parse_config(root, path);
}

inline ExperimentConfig parse_config_string(const std::string& text, const std::string& source = "<string>") {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source, e.mark.line + 1, "", e.msg);
    }
    return parse_config(root, source);
}

/// Fully resolved config (every default materialized) as YAML text.
inline std::string dump_config(const ExperimentConfig& cfg) {
    YAML::Emitter out;
    out.SetDoublePrecision(std::numeric_limits<double>::max_digits10);
    out << YAML::BeginMap;
    out << YAML::Key << "defaults" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "max_iters" << YAML::Value << static_cast<long long>(cfg.bgo.max_iters);
    out << YAML::Key << "eei_tolerance" << YAML::Value << cfg.bgo.eei_tolerance;
    out << YAML::Key << "n_candidates" << YAML::Value << static_cast<long long>(cfg.bgo.n_candidates);
    out << YAML::Key << "map_restarts" << YAML::Value << static_cast<long long>(cfg.bgo.map_restarts);
    out << YAML::Key << "uq_m" << YAML::Value << static_cast<long long>(cfg.bgo.uq_m);
    out << YAML::Key << "uq_every" << YAML::Value << static_cast<long long>(cfg.bgo.uq_every);
    out << YAML::Key << "uq_grid" << YAML::Value << static_cast<long long>(cfg.bgo.uq_grid);
    out << YAML::Key << "pboo_level" << YAML::Value << cfg.bgo.pboo_level;
    out << YAML::Key << "mcmc" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n_particles" << YAML::Value << static_cast<long long>(cfg.bgo.mcmc.n_particles);
    out << YAML::Key << "burn_in" << YAML::Value << static_cast<long long>(cfg.bgo.mcmc.burn_in);
    out << YAML::Key << "post_burn_steps" << YAML::Value << static_cast<long long>(cfg.bgo.mcmc.post_burn_steps);
    out << YAML::Key << "thin" << YAML::Value << static_cast<long long>(cfg.bgo.mcmc.thin);
    out << YAML::EndMap << YAML::EndMap;

    out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << cfg.name;
    out << YAML::Key << "objective" << YAML::Value << YAML::BeginMap;
    if (cfg.objective.benchmark) {
        out << YAML::Key << "benchmark" << YAML::Value << std::string(benchmarks::to_string(*cfg.objective.benchmark));
        out << YAML::Key << "noise" << YAML::Value;
        if (cfg.objective.noise.kind == benchmarks::NoiseModel::Kind::constant)
            out << cfg.objective.noise.level;
        else
            out << "heteroscedastic";
    } else {
        out << YAML::Key << "command" << YAML::Value << YAML::DoubleQuoted << cfg.objective.external->command;
        out << YAML::Key << "timeout" << YAML::Value << cfg.objective.external->timeout_seconds;
    }
    out << YAML::EndMap;
    out << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
    for (const auto* key : {"lower", "upper"}) {
        const Vector& v = std::string(key) == "lower" ? cfg.bounds.lower : cfg.bounds.upper;
        out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (Index i = 0; i < v.size(); ++i) out << v[i];
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    out << YAML::Key << "initial_samples" << YAML::Value << static_cast<long long>(cfg.initial_samples);
    out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (auto s : cfg.seeds) out << static_cast<unsigned long long>(s);
    out << YAML::EndSeq;
    out << YAML::Key << "output_dir" << YAML::Value << cfg.output_dir;
    out << YAML::EndMap << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Objectives and initial data

/// Built-in benchmarks draw their noise from a generator seeded by one draw
/// of the objective stream, the same protocol the external bridge exposes via
/// BGO_EVAL_SEED.
inline StochasticObjective make_objective(const ObjectiveSpec& spec) {
    if (spec.external) return external_objective(*spec.external);
    if (!spec.benchmark) throw std::invalid_argument("make_objective: no objective");
    return [id = *spec.benchmark, noise = spec.noise](const DesignPoint& x, Rng& rng) {
        Rng eval(rng());
        return benchmarks::evaluate(id, x, noise, eval);
    };
}

/// n Latin-hypercube points with one objective draw each.
inline Dataset initial_design(const BoxBounds& bounds, Index n, const StochasticObjective& objective, std::uint64_t seed) {
    Rng design_rng = make_rng(seed, kStreamInitialDesign);
    Rng noise_rng = make_rng(seed, kStreamObjective, 1);
    const Matrix x = lhs(n, bounds, design_rng);
    Dataset data(bounds.dim());
    for (Index i = 0; i < n; ++i) {
        const DesignPoint p = x.row(i).transpose();
        const double y = objective(p, noise_rng);
        if (!std::isfinite(y)) throw ObjectiveError("objective returned a non-finite value in the initial design");
        data.add(p, y);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Serialization of results

inline json to_json(const DesignPoint& x) {
    json a = json::array();
    for (Index i = 0; i < x.size(); ++i) a.push_back(x[i]);
    return a;
}

inline DesignPoint point_from_json(const json& a) {
    DesignPoint x(static_cast<Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) x[static_cast<Index>(i)] = a[i].get<double>();
    return x;
}

inline json to_json(const PredictiveBounds& b) { return {{"lo", b.lo}, {"median", b.median}, {"hi", b.hi}, {"level", b.level}}; }

inline json to_json(const IterationRecord& r) {
    json j;
    j["iteration"] = r.iteration;
    j["n_data"] = r.n_data;
    j["chosen"] = to_json(r.chosen);
    j["observed"] = r.observed ? json(*r.observed) : json(nullptr);
    j["max_eei"] = r.max_eei;
    j["pboo"] = r.pboo ? to_json(*r.pboo) : json(nullptr);
    j["acceptance_rate"] = r.acceptance_rate;
    j["mcmc_degenerate"] = r.mcmc_degenerate;
    j["wall_seconds"] = r.wall_seconds;
    return j;
}

/// Fields of summary.json that round-trip exactly.
struct Summary {
    std::string name;
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::budget_exhausted;
    std::string error;
    Index iterations = 0;
    Index evaluations = 0;
    std::optional<PredictiveBounds> terminal_pboo;
    std::optional<DesignPoint> x_best;
    std::optional<double> mean_at_best;
};

inline json summary_json(const ExperimentConfig& cfg, std::uint64_t seed, const RunResult& res, Index initial_n) {
    json j;
    j["name"] = cfg.name;
    j["seed"] = seed;
    j["status"] = std::string(to_string(res.trace.status));
    j["error"] = res.trace.error;
    j["iterations"] = res.trace.records.size();
    j["evaluations"] = res.data.size() - initial_n;
    j["n_data"] = res.data.size();
    if (res.recommendation) {
        j["terminal_pboo"] = to_json(res.recommendation->pboo);
        j["recommendation"] = {{"x", to_json(res.recommendation->x_best)}, {"mean", res.recommendation->mean_at_best}};
    } else {
        j["terminal_pboo"] = nullptr;
        j["recommendation"] = nullptr;
    }
    if (cfg.objective.benchmark) {
        const auto opt = benchmarks::pinned_optimum(*cfg.objective.benchmark);
        json xs = json::array();
        for (const auto& x : opt.minimizers) xs.push_back(to_json(x));
        j["oracle"] = {{"value", opt.value}, {"minimizers", xs}};
        if (res.recommendation) j["oracle"]["pboo_contains_optimum"] = res.recommendation->pboo.contains(opt.value);
    }
    j["config"] = dump_config(cfg);
    return j;
}

inline Summary parse_summary(const json& j) {
    Summary s;
    s.name = j.at("name").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto st = parse_status(j.at("status").get<std::string>());
    if (!st) throw std::invalid_argument("summary: unknown status");
    s.status = *st;
    s.error = j.at("error").get<std::string>();
    s.iterations = j.at("iterations").get<Index>();
    s.evaluations = j.at("evaluations").get<Index>();
    if (!j.at("terminal_pboo").is_null()) {
        const auto& b = j["terminal_pboo"];
        s.terminal_pboo = PredictiveBounds{b.at("lo").get<double>(), b.at("hi").get<double>(), b.at("median").get<double>(),
                                           b.at("level").get<double>()};
    }
    if (!j.at("recommendation").is_null()) {
        s.x_best = point_from_json(j["recommendation"].at("x"));
        s.mean_at_best = j["recommendation"].at("mean").get<double>();
    }
    return s;
}

inline Summary read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return parse_summary(json::parse(in));
}

// ---------------------------------------------------------------------------
// Running

inline fs::path output_root(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return fs::path(env);
    return fs::path(cfg.output_dir);
}

struct SeedOutcome {
    fs::path dir;
    RunResult result;
    Index initial_n = 0;
};

/// Run one seed and write its artifacts into `dir`.
inline SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir,
                            const StochasticObjective& objective) {
    fs::create_directories(dir);
    ExperimentConfig echo = cfg;
    echo.seeds = {seed};
    {
        std::ofstream(dir / "config.yaml") << dump_config(echo);
    }

    BgoConfig bgo = cfg.bgo;
    bgo.seed = seed;

    std::ofstream trace(dir / "trace.jsonl");
    std::ofstream eei_tab(dir / "eei.tsv");
    std::ofstream pboo_tab(dir / "pboo.tsv");
    eei_tab << "iteration\tmax_eei\n";
    pboo_tab << "iteration\tlo\tmedian\thi\n";
    for (auto* s : {&eei_tab, &pboo_tab}) *s << std::setprecision(std::numeric_limits<double>::max_digits10);

    RunHooks hooks;
    hooks.on_record = [&](const IterationRecord& r) {
        trace << to_json(r).dump() << '\n' << std::flush;
        eei_tab << r.iteration << '\t' << r.max_eei << '\n' << std::flush;
        if (r.pboo) pboo_tab << r.iteration << '\t' << r.pboo->lo << '\t' << r.pboo->median << '\t' << r.pboo->hi << '\n' << std::flush;
    };

    SeedOutcome out{dir, RunResult{RunTrace{}, Dataset(cfg.bounds.dim()), std::nullopt, ParticleSet{}}, cfg.initial_samples};
    try {
        const Dataset initial = initial_design(cfg.bounds, cfg.initial_samples, objective, seed);
        out.result = run(objective, initial, cfg.bounds, bgo, hooks);
    } catch (const ObjectiveError& e) {
        out.result.trace.status = RunStatus::objective_failure;
        out.result.trace.error = e.what();
        out.initial_n = 0;
    } catch (const NumericalError& e) {
        out.result.trace.status = RunStatus::numerical_failure;
        out.result.trace.error = e.what();
    }

    std::ofstream(dir / "summary.json") << summary_json(cfg, seed, out.result, out.initial_n).dump(2) << '\n';
    if (!out.result.final_particles.particles.empty()) {
        std::ofstream p(dir / "particles.txt");
        write_particles(p, out.result.final_particles);
    }
    {
        std::ofstream d(dir / "data.tsv");
        d << std::setprecision(std::numeric_limits<double>::max_digits10);
        for (Index k = 0; k < out.result.data.dim(); ++k) d << "x" << (k + 1) << '\t';
        d << "y\n";
        for (Index i = 0; i < out.result.data.size(); ++i) {
            for (Index k = 0; k < out.result.data.dim(); ++k) d << out.result.data.points()(i, k) << '\t';
            d << out.result.data.values()[i] << '\n';
        }
    }
    return out;
}

inline bool succeeded(RunStatus s) { return s == RunStatus::tolerance_hit || s == RunStatus::budget_exhausted; }

/// Run every seed of a parsed config; returns the process exit code.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    const fs::path base = output_root(cfg) / cfg.name;
    const StochasticObjective objective = make_objective(cfg.objective);
    int code = kExitOk;
    for (const auto seed : cfg.seeds) {
        const fs::path dir = base / ("seed-" + std::to_string(seed));
        const SeedOutcome o = run_seed(cfg, seed, dir, objective);
        log << cfg.name << " seed " << seed << ": " << to_string(o.result.trace.status) << ", "
            << o.result.trace.records.size() << " iterations";
        if (o.result.recommendation) {
            const auto& r = *o.result.recommendation;
            log << ", PBOO [" << r.pboo.lo << ", " << r.pboo.hi << "], x_best (";
            for (Index i = 0; i < r.x_best.size(); ++i) log << (i ? ", " : "") << r.x_best[i];
            log << ")";
        }
        if (!o.result.trace.error.empty()) log << " error: " << o.result.trace.error;
        log << "  -> " << o.dir.string() << '\n';
        if (!succeeded(o.result.trace.status)) code = kExitRuntime;
    }
    return code;
}

inline int run_experiment(const std::string& config_path, std::ostream& log, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        return run_experiment(cfg, log);
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace bgo::experiment
