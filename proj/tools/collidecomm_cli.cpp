// collidecomm: run experiments, sweeps and property batteries.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "collidecomm/checks.hpp"
#include "collidecomm/experiment.hpp"

using namespace collidecomm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfigError = 2;

struct CommonFlags {
    std::string config;
    std::string mode;
    std::string horizon;
    std::string seed;
    std::string replicas;
    std::string jobs;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Experiment config file (YAML)")->required();
    cmd->add_option("--mode", f.mode, "zero or collision");
    cmd->add_option("--horizon", f.horizon, "Number of rounds T");
    cmd->add_option("--seed", f.seed, "Base seed");
    cmd->add_option("--replicas", f.replicas, "Number of replicas");
    cmd->add_option("--jobs", f.jobs, "Replicas run concurrently");
    cmd->add_option("--out", f.out, "Output directory (default: run.out, then $COLLIDECOMM_OUT, then ./results)");
    cmd->add_option("--override", f.overrides, "Set a config field: dotted.key=value (repeatable)");
}

// Flags are overrides on the document, so they go through the same
// validation and error reporting as the file itself.
std::vector<std::string> overrides_of(const CommonFlags& f) {
    std::vector<std::string> out = f.overrides;
    if (!f.mode.empty()) out.push_back("mode=" + f.mode);
    if (!f.horizon.empty()) out.push_back("horizon=" + f.horizon);
    if (!f.seed.empty()) out.push_back("run.seed=" + f.seed);
    if (!f.replicas.empty()) out.push_back("run.replicas=" + f.replicas);
    if (!f.jobs.empty()) out.push_back("run.jobs=" + f.jobs);
    if (!f.out.empty()) out.push_back("run.out=" + f.out);
    return out;
}

int report(const std::vector<checks::CheckResult>& results) {
    int failed = 0;
    for (const auto& r : results) {
        std::printf("%s\n", checks::format(r).c_str());
        failed += r.passed ? 0 : 1;
    }
    std::printf("%zu properties, %d failed\n", results.size(), failed);
    return failed == 0 ? kExitOk : kExitPropertyFailure;
}

int verify(const std::string& suite, std::uint64_t seed, int jobs) {
    using namespace checks;
    std::vector<CheckResult> results;
    if (suite == "oracles") {
        results.push_back(check_unique_power(10000, seed));
        results.push_back(check_components(1000, 12, seed));
        results.push_back(check_bernstein_coverage(1000, 10000, 0.05, seed));
    } else if (suite == "lemmas") {
        const RunSet recovery = message_recovery_runs(100, seed, jobs);
        const RunSet uneven = uneven_gap_runs(50, seed, jobs);
        results.push_back(check_sandwich(recovery));
        results.push_back(check_comm1_ratio(recovery));
        results.push_back(check_witness_interval({&recovery, &uneven}));
        results.push_back(check_gap_ratio({&recovery, &uneven}));
    } else {
        results.push_back(check_encode_decode(10));
        results.push_back(check_one_bit_recovery(500, seed));
        results.push_back(check_message_recovery(message_recovery_runs(100, seed, jobs)));
    }
    return report(results);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized multi-player bandits with collision-based communication"};
    app.require_subcommand(1);
    app.set_version_flag("--version", code_version());

    CommonFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "Run seeded replicas and write metrics");
    add_common(run_cmd, run_flags);

    CommonFlags sweep_flags;
    std::vector<std::uint64_t> horizons;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run the experiment at several horizons");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--horizons", horizons, "Horizons to sweep (overrides sweep.horizons)");

    std::string suite;
    std::uint64_t verify_seed = 1;
    int verify_jobs = 1;
    auto* verify_cmd = app.add_subcommand("verify", "Run a property battery");
    verify_cmd->add_option("suite", suite, "oracles, lemmas or protocol")
        ->required()
        ->check(CLI::IsMember({"oracles", "lemmas", "protocol"}));
    verify_cmd->add_option("--seed", verify_seed, "Seed for the randomized checks");
    verify_cmd->add_option("--jobs", verify_jobs, "Replicas run concurrently")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (*verify_cmd) return verify(suite, verify_seed, verify_jobs);

        const bool sweeping = static_cast<bool>(*sweep_cmd);
        const CommonFlags& flags = sweeping ? sweep_flags : run_flags;
        std::vector<std::string> overrides = overrides_of(flags);
        if (!horizons.empty()) {
            std::string list = "sweep.horizons=[";
            for (std::size_t i = 0; i < horizons.size(); ++i) list += (i ? "," : "") + std::to_string(horizons[i]);
            overrides.push_back(list + "]");
        }
        const ExperimentConfig config = load_config(flags.config, overrides);
        // Parameter-level checks (e.g. the analyzed delta range) before any work.
        config.params();
        config.instance();

        if (sweeping) {
            run_sweep(config, config.out);
            std::printf("sweep over %zu horizons written to %s (config_hash=%s)\n", config.sweep_horizons.size(),
                        config.out.c_str(), config_hash(config).c_str());
            return kExitOk;
        }
        const auto runs = run_experiment(config, config.out);
        double total = 0.0;
        for (const auto& m : runs) total += m.cum_regret;
        std::printf("%zu replicas written to %s (config_hash=%s, mean regret %.6g)\n", runs.size(),
                    config.out.c_str(), config_hash(config).c_str(), total / static_cast<double>(runs.size()));
        return kExitOk;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPropertyFailure;
    }
}
