#include "collidecomm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#ifndef COLLIDECOMM_VERSION
#define COLLIDECOMM_VERSION "unknown"
#endif

namespace collidecomm {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string position(const std::string& source, int line, int column) {
    std::string out = source;
    if (line > 0) out += ":" + std::to_string(line) + ":" + std::to_string(column);
    return out;
}

// Walks the document with the source name and the set of keys that came
// from overrides, so every error can say where the value was written.
class Reader {
public:
    Reader(YAML::Node root, std::string source, std::set<std::string> overridden)
        : root_(std::move(root)), source_(std::move(source)), overridden_(std::move(overridden)) {}

    [[noreturn]] void fail(const std::string& key, const YAML::Node& node, const std::string& what) const {
        if (overridden_.count(key)) throw ConfigError("command line: field '" + key + "': " + what);
        int line = 0;
        int column = 0;
        if (node.IsDefined() && node.Mark().line >= 0) {
            line = node.Mark().line + 1;
            column = node.Mark().column + 1;
        }
        throw ConfigError(position(source_, line, column) + ": field '" + key + "': " + what, line, column);
    }

    // The node for a dotted key, or an undefined node.
    // Node::operator= copies content into the target, so walk with reset()
    // on const handles, which never inserts keys either.
    YAML::Node find(const std::string& key) const {
        YAML::Node cur;
        cur.reset(root_);
        std::stringstream ss(key);
        std::string part;
        while (std::getline(ss, part, '.')) {
            if (!cur.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
            const YAML::Node& parent = cur;
            const YAML::Node child = static_cast<const YAML::Node&>(parent)[part];
            if (!child.IsDefined()) return YAML::Node(YAML::NodeType::Undefined);
            cur.reset(child);
        }
        return cur;
    }

    // Parent map node, for positioning "missing field" errors.
    YAML::Node parent(const std::string& key) const {
        const auto dot = key.rfind('.');
        return dot == std::string::npos ? root_ : find(key.substr(0, dot));
    }

    bool has(const std::string& key) const {
        const YAML::Node n = find(key);
        return n.IsDefined() && !n.IsNull();
    }

    template <class T>
    T get(const std::string& key) const {
        const YAML::Node n = find(key);
        if (!n.IsDefined() || n.IsNull()) fail(key, parent(key), "missing required field");
        return as<T>(key, n);
    }

    template <class T>
    T get(const std::string& key, T fallback) const {
        return has(key) ? as<T>(key, find(key)) : fallback;
    }

    template <class T>
    T as(const std::string& key, const YAML::Node& n) const {
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(key, n, "expected " + type_name<T>() + ", got '" + render(n) + "'");
        }
    }

    const YAML::Node& root() const { return root_; }

private:
    template <class T>
    static std::string type_name() {
        if constexpr (std::is_same_v<T, bool>) return "true or false";
        if constexpr (std::is_same_v<T, std::string>) return "a string";
        if constexpr (std::is_integral_v<T>) return "an integer";
        if constexpr (std::is_floating_point_v<T>) return "a number";
        return "a list of numbers";
    }

    static std::string render(const YAML::Node& n) {
        YAML::Emitter e;
        e << YAML::Flow << n;
        return e.c_str();
    }

    YAML::Node root_;
    std::string source_;
    std::set<std::string> overridden_;
};

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"", {"mode", "players", "delta", "allow_outside_analyzed_regime", "horizon", "blowup", "engine",
              "instance", "run", "grid", "sweep"}},
        {"instance", {"means", "collision_mean", "family", "arms"}},
        {"run", {"replicas", "seed", "jobs", "out"}},
        {"grid", {"dense_until", "ratio"}},
        {"sweep", {"horizons"}},
    };
    return keys;
}

void check_keys(const Reader& r) {
    for (const auto& [section, allowed] : known_keys()) {
        const YAML::Node node = section.empty() ? r.root() : r.find(section);
        if (!node.IsDefined() || node.IsNull()) continue;
        if (!node.IsMap()) r.fail(section.empty() ? "<document>" : section, node, "expected a mapping");
        for (const auto& kv : node) {
            const auto name = kv.first.as<std::string>();
            if (!allowed.count(name)) {
                r.fail(section.empty() ? name : section + "." + name, kv.first, "unknown field");
            }
        }
    }
}

void apply_override(YAML::Node& root, const std::string& entry, std::set<std::string>& overridden) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--override expects key=value, got '" + entry + "'");
    const std::string key = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);
    YAML::Node parsed;
    try {
        parsed = YAML::Load(value);
    } catch (const YAML::Exception& e) {
        throw ConfigError("--override " + key + ": cannot parse '" + value + "': " + e.msg);
    }
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    YAML::Node cur;
    cur.reset(root);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        YAML::Node next = cur[parts[i]];
        if (!next.IsDefined() || next.IsNull()) {
            cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
            next.reset(cur[parts[i]]);
        } else if (!next.IsMap()) {
            throw ConfigError("--override " + key + ": '" + parts[i] + "' is not a section");
        }
        cur.reset(next);
    }
    cur[parts.back()] = parsed;
    overridden.insert(key);
}

// Shortest text that reads back as the same double.
std::string exact(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string join_doubles(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ";" : "") + exact(xs[i]);
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}


}  // namespace

ConfigError::ConfigError(const std::string& message, int line, int column)
    : std::runtime_error(message), line_(line), column_(column) {}

BanditInstance ExperimentConfig::instance() const { return BanditInstance(means, collision_mean, family); }

ConfidenceParams ExperimentConfig::params() const {
    return ConfidenceParams(players, arms(), delta, allow_outside_analyzed_regime);
}

SimConfig ExperimentConfig::sim_config() const {
    SimConfig c;
    c.horizon = horizon;
    c.mode = mode;
    c.blowup = blowup;
    c.engine = engine;
    c.grid = grid;
    return c;
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              const std::string& source_name) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(position(source_name, e.mark.line + 1, e.mark.column + 1) + ": " + e.msg,
                          e.mark.line + 1, e.mark.column + 1);
    }
    if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ConfigError(source_name + ": the config must be a mapping of fields");
    std::set<std::string> overridden;
    for (const auto& o : overrides) apply_override(root, o, overridden);

    const Reader r(root, source_name, overridden);
    check_keys(r);
    ExperimentConfig c;

    const auto mode = r.get<std::string>("mode", "zero");
    if (mode == "zero") {
        c.mode = CollisionMode::zero;
    } else if (mode == "collision") {
        c.mode = CollisionMode::collision;
    } else {
        r.fail("mode", r.find("mode"), "expected zero or collision, got '" + mode + "'");
    }

    // Players know M; anything else is a different problem.
    const YAML::Node players = r.find("players");
    if (players.IsDefined() && players.IsScalar()) {
        const auto s = players.as<std::string>();
        if (s == "unknown" || s == "?") {
            r.fail("players", players, "an unknown number of players is out of scope");
        }
    }
    c.players = r.get<int>("players");
    c.means = r.get<std::vector<double>>("instance.means");
    if (c.means.size() < 2) r.fail("instance.means", r.find("instance.means"), "need at least two arms");
    for (double m : c.means) {
        if (!(m >= 0.0 && m <= 1.0)) r.fail("instance.means", r.find("instance.means"), "means must lie in [0, 1]");
    }
    if (r.has("instance.arms") && r.get<int>("instance.arms") != c.arms()) {
        r.fail("instance.arms", r.find("instance.arms"),
               "does not match the " + std::to_string(c.arms()) + " entries of instance.means");
    }
    if (c.players < 1 || c.players > c.arms()) {
        r.fail("players", r.find("players"), "need 1 <= players <= " + std::to_string(c.arms()));
    }
    c.collision_mean = r.get<double>("instance.collision_mean", 0.0);
    if (c.mode == CollisionMode::zero) c.collision_mean = 0.0;
    const double min_mean = *std::min_element(c.means.begin(), c.means.end());
    if (!(c.collision_mean >= 0.0 && c.collision_mean <= min_mean)) {
        r.fail("instance.collision_mean", r.find("instance.collision_mean"),
               "must lie in [0, min(means)] = [0, " + exact(min_mean) + "]");
    }
    try {
        c.family = parse_family(r.get<std::string>("instance.family", "bernoulli"));
    } catch (const DomainError& e) {
        r.fail("instance.family", r.find("instance.family"), e.what());
    }

    c.delta = r.get<double>("delta");
    c.allow_outside_analyzed_regime = r.get<bool>("allow_outside_analyzed_regime", false);
    if (!(c.delta > 0.0 && c.delta < 1.0)) r.fail("delta", r.find("delta"), "must lie in (0, 1)");
    if (c.delta > kAnalyzedDeltaMax && !c.allow_outside_analyzed_regime) {
        r.fail("delta", r.find("delta"),
               "exceeds 1/162; set allow_outside_analyzed_regime: true to run outside the analyzed regime");
    }

    const auto horizon = r.get<std::int64_t>("horizon");
    if (horizon < 1) r.fail("horizon", r.find("horizon"), "must be positive");
    c.horizon = static_cast<std::uint64_t>(horizon);
    c.blowup = r.get<double>("blowup", kDefaultBlowup);
    if (!(c.blowup > 0.0)) r.fail("blowup", r.find("blowup"), "must be positive");
    try {
        c.engine = parse_engine(r.get<std::string>("engine", "batched"));
    } catch (const DomainError& e) {
        r.fail("engine", r.find("engine"), e.what());
    }

    const auto dense = r.get<std::int64_t>("grid.dense_until", 10000);
    if (dense < 0) r.fail("grid.dense_until", r.find("grid.dense_until"), "must be non-negative");
    c.grid.dense_until = static_cast<std::uint64_t>(dense);
    c.grid.ratio = r.get<double>("grid.ratio", 1.1);
    if (!(c.grid.ratio > 1.0)) r.fail("grid.ratio", r.find("grid.ratio"), "must be greater than 1");

    c.replicas = r.get<int>("run.replicas", 1);
    if (c.replicas < 1) r.fail("run.replicas", r.find("run.replicas"), "must be at least 1");
    const auto seed = r.get<std::int64_t>("run.seed", 0);
    if (seed < 0) r.fail("run.seed", r.find("run.seed"), "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.jobs = r.get<int>("run.jobs", 1);
    if (c.jobs < 1) r.fail("run.jobs", r.find("run.jobs"), "must be at least 1");
    const char* env_out = std::getenv("COLLIDECOMM_OUT");
    c.out = r.get<std::string>("run.out", env_out && *env_out ? std::string(env_out) : std::string("results"));

    if (r.has("sweep.horizons")) {
        for (double h : r.get<std::vector<double>>("sweep.horizons")) {
            if (!(h >= 1.0) || h != std::floor(h)) {
                r.fail("sweep.horizons", r.find("sweep.horizons"), "horizons must be positive integers");
            }
            c.sweep_horizons.push_back(static_cast<std::uint64_t>(h));
        }
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides, path.string());
}

std::string canonical_yaml(const ExperimentConfig& c) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "mode" << YAML::Value << (c.mode == CollisionMode::zero ? "zero" : "collision");
    e << YAML::Key << "players" << YAML::Value << c.players;
    e << YAML::Key << "delta" << YAML::Value << exact(c.delta);
    e << YAML::Key << "allow_outside_analyzed_regime" << YAML::Value << c.allow_outside_analyzed_regime;
    e << YAML::Key << "horizon" << YAML::Value << c.horizon;
    e << YAML::Key << "blowup" << YAML::Value << exact(c.blowup);
    e << YAML::Key << "engine" << YAML::Value << std::string(to_string(c.engine));
    e << YAML::Key << "instance" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "means" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double m : c.means) e << exact(m);
    e << YAML::EndSeq;
    e << YAML::Key << "collision_mean" << YAML::Value << exact(c.collision_mean);
    e << YAML::Key << "family" << YAML::Value << std::string(to_string(c.family));
    e << YAML::EndMap;
    e << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "dense_until" << YAML::Value << c.grid.dense_until;
    e << YAML::Key << "ratio" << YAML::Value << exact(c.grid.ratio);
    e << YAML::EndMap;
    e << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "replicas" << YAML::Value << c.replicas;
    e << YAML::Key << "seed" << YAML::Value << c.seed;
    e << YAML::EndMap;
    if (!c.sweep_horizons.empty()) {
        e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "horizons" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (auto h : c.sweep_horizons) e << h;
        e << YAML::EndSeq << YAML::EndMap;
    }
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const ExperimentConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_yaml(config))));
    return buf;
}

std::string code_version() { return COLLIDECOMM_VERSION; }

std::string metrics_csv(const RunMetrics& m, const std::string& hash) {
    std::ostringstream os;
    os << "# config_hash=" << hash << " seed=" << m.seed << " replica=" << m.replica
       << " code_version=" << code_version() << "\n";
    os << "round,cum_regret,cum_collisions,phase_tag,event\n";
    for (const auto& row : m.grid) {
        os << row.round << ',' << exact(row.cum_regret) << ',' << row.cum_collisions << ',' << to_string(row.phase)
           << ',' << row.event << '\n';
    }
    return os.str();
}

std::string replica_summary_json(const RunMetrics& m, const ExperimentConfig& config, const std::string& hash) {
    const BanditInstance inst = config.instance();
    Json j;
    j["config_hash"] = hash;
    j["seed"] = m.seed;
    j["replica"] = m.replica;
    j["code_version"] = code_version();
    j["mode"] = config.mode == CollisionMode::zero ? "zero" : "collision";
    j["horizon"] = config.horizon;
    j["rounds_played"] = m.rounds_played;
    j["cum_regret"] = m.cum_regret;
    j["collision_aware_regret"] = m.collision_aware_regret;
    j["round_robin_baseline_regret"] = round_robin_baseline_regret(inst, config.players, config.horizon);
    j["collisions"] = m.collisions;
    for (int i = 0; i < 3; ++i) {
        const std::string tag(to_string(static_cast<PhaseTag>(i)));
        j["regret_" + tag] = m.regret_by_phase[static_cast<std::size_t>(i)];
        j["collisions_" + tag] = m.collisions_by_phase[static_cast<std::size_t>(i)];
        j["rounds_" + tag] = m.rounds_by_phase[static_cast<std::size_t>(i)];
    }
    j["good_event_held"] = m.good_event_held;
    j["good_event_violation_round"] = m.good_event_violation_round;
    j["any_failure"] = m.any_failure;
    j["recursions"] = m.recursions;
    j["communications"] = m.communications.size();
    std::size_t recovered = 0;
    std::string per_episode;
    std::vector<double> gaps;
    for (const auto& c : m.communications) {
        recovered += c.message_recovered ? 1 : 0;
        per_episode += per_episode.empty() ? "" : ";";
        per_episode += c.message_recovered ? "1" : "0";
        gaps.push_back(c.partition_gap);
    }
    j["messages_recovered"] = recovered;
    j["message_recovered_per_episode"] = per_episode;
    j["partition_gaps"] = join_doubles(gaps);
    j["all_exploit"] = m.all_exploit;
    j["exploit_entry_round"] = m.exploit_entry_round;
    j["regret_at_exploit_entry"] = m.regret_at_exploit_entry;
    std::string phases;
    std::string arms;
    for (std::size_t p = 0; p < m.final_phases.size(); ++p) {
        phases += (p ? ";" : "") + std::string(to_string(m.final_phases[p]));
        arms += p ? ";" : "";
        for (std::size_t a = 0; a < m.final_arms[p].size(); ++a) {
            arms += (a ? "," : "") + std::to_string(m.final_arms[p][a]);
        }
    }
    j["final_phases"] = phases;
    j["final_arms"] = arms;
    return j.dump(2) + "\n";
}

std::string aggregate_summary_json(const std::vector<RunMetrics>& runs, const ExperimentConfig& config,
                                   const std::string& hash) {
    std::vector<double> regret;
    std::size_t exploit = 0;
    std::size_t good = 0;
    std::size_t failures = 0;
    std::size_t episodes = 0;
    std::size_t recovered = 0;
    for (const auto& m : runs) {
        regret.push_back(m.cum_regret);
        exploit += m.all_exploit ? 1 : 0;
        good += m.good_event_held ? 1 : 0;
        failures += m.any_failure ? 1 : 0;
        for (const auto& c : m.communications) {
            ++episodes;
            recovered += c.message_recovered ? 1 : 0;
        }
    }
    std::sort(regret.begin(), regret.end());
    const auto n = static_cast<double>(regret.size());
    double mean = 0.0;
    for (double x : regret) mean += x / n;
    double var = 0.0;
    for (double x : regret) var += (x - mean) * (x - mean);
    const std::size_t mid = regret.size() / 2;
    const double median = regret.size() % 2 ? regret[mid] : 0.5 * (regret[mid - 1] + regret[mid]);

    Json j;
    j["config_hash"] = hash;
    j["seed"] = config.seed;
    j["code_version"] = code_version();
    j["replicas"] = runs.size();
    j["horizon"] = config.horizon;
    j["regret_mean"] = mean;
    j["regret_median"] = median;
    j["regret_min"] = regret.front();
    j["regret_max"] = regret.back();
    j["regret_sd"] = regret.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    j["round_robin_baseline_regret"] =
        round_robin_baseline_regret(config.instance(), config.players, config.horizon);
    j["all_exploit_fraction"] = static_cast<double>(exploit) / n;
    j["good_event_fraction"] = static_cast<double>(good) / n;
    j["failure_fraction"] = static_cast<double>(failures) / n;
    j["communications"] = episodes;
    j["messages_recovered"] = recovered;
    return j.dump(2) + "\n";
}

std::vector<RunMetrics> run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir) {
    const std::string hash = config_hash(config);
    const auto runs = run_replicas(config.sim_config(), config.instance(), config.params(), config.seed,
                                   config.replicas, config.jobs);
    fs::create_directories(dir);
    write_file(dir / "config.yaml", "# config_hash=" + hash + " seed=" + std::to_string(config.seed) +
                                        " code_version=" + code_version() + "\n" + canonical_yaml(config));
    for (const auto& m : runs) {
        const std::string stem = "replica_" + std::to_string(m.replica);
        write_file(dir / (stem + ".csv"), metrics_csv(m, hash));
        write_file(dir / (stem + ".json"), replica_summary_json(m, config, hash));
    }
    write_file(dir / "summary.json", aggregate_summary_json(runs, config, hash));
    return runs;
}

void run_sweep(const ExperimentConfig& config, const std::filesystem::path& dir) {
    if (config.sweep_horizons.empty()) throw ConfigError("sweep needs sweep.horizons (or --horizons)");
    const std::string hash = config_hash(config);
    std::ostringstream os;
    os << "# config_hash=" << hash << " seed=" << config.seed << " code_version=" << code_version() << "\n";
    os << "horizon,seed,replica,cum_regret,collisions,all_exploit,exploit_entry_round,good_event_held\n";
    for (std::uint64_t h : config.sweep_horizons) {
        ExperimentConfig one = config;
        one.horizon = h;
        one.sweep_horizons.clear();
        for (const auto& m : run_experiment(one, dir / ("h" + std::to_string(h)))) {
            os << h << ',' << m.seed << ',' << m.replica << ',' << exact(m.cum_regret) << ',' << m.collisions << ','
               << (m.all_exploit ? 1 : 0) << ',' << m.exploit_entry_round << ',' << (m.good_event_held ? 1 : 0)
               << '\n';
        }
    }
    fs::create_directories(dir);
    write_file(dir / "sweep.csv", os.str());
}

}  // namespace collidecomm
