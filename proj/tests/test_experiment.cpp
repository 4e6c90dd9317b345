#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "collidecomm/experiment.hpp"

using namespace collidecomm;
namespace fs = std::filesystem;

namespace {

const char* kMinimal =
    "players: 2\n"
    "delta: 0.005\n"
    "horizon: 100000\n"
    "instance:\n"
    "  means: [0.9, 0.5, 0.1]\n";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("collidecomm_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Runs the command-line tool; returns its exit status, stdout+stderr in `output`.
int cli(const std::string& args, std::string& output, const std::string& env = "") {
    const fs::path log = fs::temp_directory_path() / "collidecomm_test_cli.log";
    const std::string cmd = env + " \"" + std::string(CLI_PATH) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    output = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ConfigError parse_error(const std::string& text, const std::vector<std::string>& overrides = {}) {
    try {
        parse_config(text, overrides, "cfg.yaml");
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "expected a config error";
    return ConfigError("none");
}

}  // namespace

TEST(Config, MinimalFileGetsDefaults) {
    const auto c = parse_config(kMinimal);
    EXPECT_EQ(c.mode, CollisionMode::zero);
    EXPECT_EQ(c.players, 2);
    EXPECT_EQ(c.arms(), 3);
    EXPECT_EQ(c.horizon, 100000u);
    EXPECT_EQ(c.blowup, kDefaultBlowup);
    EXPECT_EQ(c.engine, Engine::batched);
    EXPECT_EQ(c.family, RewardFamily::bernoulli);
    EXPECT_EQ(c.replicas, 1);
    EXPECT_EQ(c.grid.dense_until, 10000u);
    EXPECT_DOUBLE_EQ(c.grid.ratio, 1.1);
}

TEST(Config, MissingMeansNamesTheField) {
    const auto e = parse_error("players: 2\ndelta: 0.005\nhorizon: 10\ninstance:\n  family: bernoulli\n");
    EXPECT_NE(std::string(e.what()).find("instance.means"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos) << e.what();
}

TEST(Config, ErrorsCarryLinePositions) {
    const auto typo = parse_error(std::string(kMinimal) + "run:\n  seeed: 3\n");
    EXPECT_EQ(typo.line(), 7);
    EXPECT_NE(std::string(typo.what()).find("cfg.yaml:7:3"), std::string::npos) << typo.what();
    EXPECT_NE(std::string(typo.what()).find("run.seeed"), std::string::npos);

    const auto bad_type = parse_error("players: 2\ndelta: 0.005\nhorizon: lots\ninstance:\n  means: [0.9, 0.1]\n");
    EXPECT_EQ(bad_type.line(), 3);
    EXPECT_NE(std::string(bad_type.what()).find("horizon"), std::string::npos);

    const auto syntax = parse_error("players: 2\ninstance:\n  means: [0.9, 0.1\n");
    EXPECT_GT(syntax.line(), 0);
}

TEST(Config, UnknownPlayerCountIsOutOfScope) {
    const auto e = parse_error("players: unknown\ndelta: 0.005\nhorizon: 10\ninstance:\n  means: [0.9, 0.1]\n");
    EXPECT_NE(std::string(e.what()).find("out of scope"), std::string::npos) << e.what();
}

TEST(Config, DeltaAboveTheAnalyzedRegimeNeedsTheOverrideFlag) {
    const std::string text = "players: 2\ndelta: 0.05\nhorizon: 10\ninstance:\n  means: [0.9, 0.1]\n";
    const auto e = parse_error(text);
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(std::string(e.what()).find("allow_outside_analyzed_regime"), std::string::npos);
    const auto c = parse_config(text + "allow_outside_analyzed_regime: true\n");
    EXPECT_NO_THROW(c.params());
}

TEST(Config, CollisionMeanRules) {
    const std::string base = "players: 2\ndelta: 0.005\nhorizon: 10\n";
    // Zero mode ignores whatever collision mean is written.
    const auto zero = parse_config(base + "instance:\n  means: [0.9, 0.3]\n  collision_mean: 0.2\n");
    EXPECT_EQ(zero.collision_mean, 0.0);
    const auto e = parse_error(base + "mode: collision\ninstance:\n  means: [0.9, 0.3]\n  collision_mean: 0.4\n");
    EXPECT_EQ(e.line(), 7);
    EXPECT_NO_THROW(parse_config(base + "mode: collision\ninstance:\n  means: [0.9, 0.3]\n  collision_mean: 0.3\n"));
}

TEST(Config, ArmCountMustMatchTheMeans) {
    EXPECT_NO_THROW(parse_config(std::string(kMinimal) + "  arms: 3\n"));
    const auto e = parse_error(std::string(kMinimal) + "  arms: 4\n");
    EXPECT_EQ(e.line(), 6);
    const auto too_many = parse_error("players: 3\ndelta: 0.005\nhorizon: 10\ninstance:\n  means: [0.9, 0.1]\n");
    EXPECT_EQ(too_many.line(), 1);
}

TEST(Config, OverridesReplaceAndCreateFields) {
    const auto c = parse_config(kMinimal, {"run.seed=42", "instance.means=[0.8, 0.2]", "mode=collision",
                                           "instance.collision_mean=0.1", "grid.ratio=2"});
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.means, (std::vector<double>{0.8, 0.2}));
    EXPECT_EQ(c.mode, CollisionMode::collision);
    EXPECT_DOUBLE_EQ(c.collision_mean, 0.1);
    EXPECT_DOUBLE_EQ(c.grid.ratio, 2.0);
    const auto e = parse_error(kMinimal, {"horizon=-5"});
    EXPECT_NE(std::string(e.what()).find("command line: field 'horizon'"), std::string::npos) << e.what();
    EXPECT_THROW(parse_config(kMinimal, {"novalue"}), ConfigError);
    EXPECT_THROW(parse_config(kMinimal, {"players.count=2"}), ConfigError);
}

TEST(Config, HashIgnoresOutputLocationAndThreads) {
    const auto a = parse_config(kMinimal, {"run.out=/tmp/a", "run.jobs=4"});
    const auto b = parse_config(kMinimal, {"run.out=/tmp/b", "run.jobs=1"});
    const auto c = parse_config(kMinimal, {"run.seed=1"});
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(c));
    EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, CanonicalFormReloadsToTheSameConfig) {
    const auto c = parse_config(kMinimal, {"run.seed=9", "mode=collision", "instance.collision_mean=0.05",
                                           "sweep.horizons=[10, 20]"});
    const auto again = parse_config(canonical_yaml(c));
    EXPECT_EQ(canonical_yaml(again), canonical_yaml(c));
    EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(Config, Fnv1aReferenceValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Experiment, WritesEveryArtifactWithHashAndSeed) {
    const fs::path dir = scratch("artifacts");
    const auto c = parse_config(kMinimal, {"run.replicas=2", "run.seed=42"});
    const auto runs = run_experiment(c, dir);
    ASSERT_EQ(runs.size(), 2u);
    const std::string hash = config_hash(c);
    for (const char* f : {"config.yaml", "replica_0.csv", "replica_1.csv", "replica_0.json", "replica_1.json",
                          "summary.json"}) {
        const std::string text = slurp(dir / f);
        ASSERT_FALSE(text.empty()) << f;
        EXPECT_NE(text.find(hash), std::string::npos) << f;
        EXPECT_NE(text.find("42"), std::string::npos) << f;
    }
    const std::string csv = slurp(dir / "replica_0.csv");
    EXPECT_NE(csv.find("\nround,cum_regret,cum_collisions,phase_tag,event\n"), std::string::npos);
    // Re-running from the stored config gives the same bytes.
    const fs::path again = scratch("artifacts_again");
    run_experiment(parse_config(slurp(dir / "config.yaml")), again);
    EXPECT_EQ(slurp(again / "replica_0.csv"), csv);
    EXPECT_EQ(slurp(again / "summary.json"), slurp(dir / "summary.json"));
}

TEST(Cli, MissingMeansExitsWithConfigError) {
    const fs::path dir = scratch("cli_missing");
    std::ofstream(dir / "c.yaml") << "players: 2\ndelta: 0.005\nhorizon: 10\n";
    std::string out;
    EXPECT_EQ(cli("run --config " + (dir / "c.yaml").string(), out), 2);
    EXPECT_NE(out.find("instance.means"), std::string::npos) << out;
}

TEST(Cli, UnknownPlayersIsOutOfScope) {
    const fs::path dir = scratch("cli_unknown");
    std::ofstream(dir / "c.yaml") << "players: unknown\ndelta: 0.005\nhorizon: 10\ninstance:\n  means: [0.5, 0.2]\n";
    std::string out;
    EXPECT_EQ(cli("run --config " + (dir / "c.yaml").string(), out), 2);
    EXPECT_NE(out.find("out of scope"), std::string::npos) << out;
}

TEST(Cli, RunTwiceGivesByteIdenticalMetrics) {
    const fs::path dir = scratch("cli_determinism");
    std::ofstream(dir / "c.yaml") << kMinimal;
    std::string out;
    const std::string base = "run --config " + (dir / "c.yaml").string() + " --replicas 1 --seed 42 --out ";
    ASSERT_EQ(cli(base + (dir / "a").string(), out), 0) << out;
    ASSERT_EQ(cli(base + (dir / "b").string(), out), 0) << out;
    const std::string a = slurp(dir / "a" / "replica_0.csv");
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "b" / "replica_0.csv"));
    EXPECT_NE(a.find("seed=42"), std::string::npos);
}

TEST(Cli, OutputRootFromTheEnvironment) {
    const fs::path dir = scratch("cli_env");
    std::ofstream(dir / "c.yaml") << kMinimal;
    std::string out;
    ASSERT_EQ(cli("run --config " + (dir / "c.yaml").string(), out, "COLLIDECOMM_OUT=" + (dir / "env").string()), 0)
        << out;
    EXPECT_TRUE(fs::exists(dir / "env" / "summary.json"));
}

TEST(Cli, SweepEmitsOneRowPerHorizonAndReplica) {
    const fs::path dir = scratch("cli_sweep");
    std::ofstream(dir / "c.yaml") << kMinimal;
    std::string out;
    ASSERT_EQ(cli("sweep --config " + (dir / "c.yaml").string() + " --replicas 2 --seed 3 --horizons 100000 400000 "
                  "1600000 --out " + (dir / "s").string(),
                  out),
              0)
        << out;
    std::istringstream csv(slurp(dir / "s" / "sweep.csv"));
    std::string line;
    int rows = 0;
    std::getline(csv, line);
    EXPECT_EQ(line.rfind("# config_hash=", 0), 0u);
    std::getline(csv, line);
    EXPECT_EQ(line, "horizon,seed,replica,cum_regret,collisions,all_exploit,exploit_entry_round,good_event_held");
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 6);
    EXPECT_TRUE(fs::exists(dir / "s" / "h400000" / "replica_1.csv"));
}

TEST(Cli, VerifyOraclesPasses) {
    std::string out;
    EXPECT_EQ(cli("verify oracles", out), 0) << out;
    EXPECT_NE(out.find("3 properties, 0 failed"), std::string::npos) << out;
    EXPECT_EQ(cli("verify nonsense", out), 2);
}
