#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "collidecomm/sim_harness.hpp"

// Experiment configuration files, overrides, and the files a run leaves on
// disk. Used by the command-line tool.

namespace collidecomm {

// A config problem, with the position in the file when there is one
// (line and column are 1-based, 0 when unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, int line = 0, int column = 0);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

struct ExperimentConfig {
    CollisionMode mode = CollisionMode::zero;
    std::vector<double> means;
    double collision_mean = 0.0;
    RewardFamily family = RewardFamily::bernoulli;
    int players = 0;
    double delta = 0.0;
    bool allow_outside_analyzed_regime = false;
    std::uint64_t horizon = 0;
    double blowup = kDefaultBlowup;
    Engine engine = Engine::batched;
    GridSpec grid;
    int replicas = 1;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out = "results";
    std::vector<std::uint64_t> sweep_horizons;

    int arms() const { return static_cast<int>(means.size()); }
    BanditInstance instance() const;
    ConfidenceParams params() const;
    SimConfig sim_config() const;
};

// Parses and validates a config. `overrides` are "dotted.key=value" strings
// applied to the document before validation; values are YAML scalars or
// flow sequences. `source_name` prefixes error messages.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::string& source_name = "config");
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Every field with defaults filled in, in a fixed order. The output
// directory and the thread count are left out: they never change results.
std::string canonical_yaml(const ExperimentConfig& config);
std::uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const ExperimentConfig& config);

std::string code_version();

// Grid rows as CSV, preceded by a '#' line with the config hash, seed and
// replica.
std::string metrics_csv(const RunMetrics& m, const std::string& hash);
// Flat JSON object (scalars only) describing one replica.
std::string replica_summary_json(const RunMetrics& m, const ExperimentConfig& config, const std::string& hash);
std::string aggregate_summary_json(const std::vector<RunMetrics>& runs, const ExperimentConfig& config,
                                   const std::string& hash);

// Runs every replica and writes
//   config.yaml, replica_<r>.csv, replica_<r>.json, summary.json
// into `dir`. Returns the metrics in replica order.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir);

// One row per (horizon, replica) into sweep.csv under `dir`; each horizon
// also gets its own run directory h<T>/.
void run_sweep(const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace collidecomm
