// bgo: batch front end for noisy Bayesian global optimization experiments.
//
//   bgo run <config.yaml>        run every seed, write artifacts
//   bgo validate <config.yaml>   parse and validate only, print the resolved config
//   bgo oracle <synth1d|synth2d> print the pinned optimum fixture
//
// Exit codes: 0 success, 1 config error, 2 runtime failure.

#include <iomanip>
#include <iostream>

#include "CLI11.hpp"

#include "bgo/experiment.hpp"

namespace {

using namespace bgo;
namespace ex = bgo::experiment;

int cmd_validate(const std::string& path) {
    try {
        const auto cfg = ex::load_config(path);
        std::cout << ex::dump_config(cfg);
        return ex::kExitOk;
    } catch (const ex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return ex::kExitConfig;
    }
}

int cmd_oracle(const std::string& id_text, bool recompute) {
    const auto id = benchmarks::parse_benchmark(id_text);
    if (!id) {
        std::cerr << "unknown benchmark '" << id_text << "' (expected synth1d or synth2d)\n";
        return ex::kExitConfig;
    }
    const auto opt = recompute ? benchmarks::oracle_optimum(*id) : benchmarks::pinned_optimum(*id);
    ex::json j;
    j["benchmark"] = id_text;
    j["value"] = opt.value;
    j["minimizers"] = ex::json::array();
    for (const auto& x : opt.minimizers) j["minimizers"].push_back(ex::to_json(x));
    j["source"] = recompute ? "recomputed" : "pinned";
    std::cout << std::setprecision(10) << j.dump(2) << '\n';
    return ex::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian global optimization of noisy objectives with extended expected improvement"};
    app.require_subcommand(1);

    std::string run_path, validate_path, oracle_id;
    bool recompute = false;

    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("config", run_path, "YAML experiment config")->required();
    auto* validate = app.add_subcommand("validate", "Parse and validate a config, print it fully resolved");
    validate->add_option("config", validate_path, "YAML experiment config")->required();
    auto* oracle = app.add_subcommand("oracle", "Print the known optimum of a benchmark");
    oracle->add_option("benchmark", oracle_id, "synth1d or synth2d")->required();
    oracle->add_flag("--recompute", recompute, "Rerun the dense-grid search instead of printing the pinned fixture");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ex::kExitConfig;
    }

    if (*run) return ex::run_experiment(run_path, std::cout, std::cerr);
    if (*validate) return cmd_validate(validate_path);
    if (*oracle) return cmd_oracle(oracle_id, recompute);
    return ex::kExitConfig;
}
