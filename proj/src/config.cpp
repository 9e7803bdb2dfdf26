#include "chirpsound/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chirpsound/error.hpp"

namespace chirpsound {

using json = nlohmann::ordered_json;

namespace {

const char* to_cstr(ChannelPolicy policy)
{
    return policy == ChannelPolicy::fixed ? "fixed" : "per-trial";
}

const char* to_cstr(MuPolicy policy)
{
    return policy == MuPolicy::fixed ? "fixed" : "uniform";
}

void check_keys(const json& object, const std::string& where, const std::set<std::string>& allowed)
{
    if (!object.is_object()) {
        throw ValidationError(where + " must be an object");
    }
    std::vector<std::string> unknown;
    for (const auto& item : object.items()) {
        if (!allowed.contains(item.key())) {
            unknown.push_back(item.key());
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown key(s) in " + where + ":";
        for (const auto& key : unknown) {
            msg += " '" + key + "'";
        }
        throw ValidationError(msg);
    }
}

template <typename T>
T get_as(const json& value, const std::string& where)
{
    try {
        return value.get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

template <typename T>
std::vector<T> read_grid(const json& value, int rows, int cols, const std::string& where)
{
    if (!value.is_array()) {
        return std::vector<T>(static_cast<std::size_t>(rows * cols), get_as<T>(value, where));
    }
    if (static_cast<int>(value.size()) != rows) {
        throw ValidationError(where + ": expected " + std::to_string(rows) + " rows (one per tx antenna), got " +
                              std::to_string(value.size()));
    }
    std::vector<T> grid;
    grid.reserve(static_cast<std::size_t>(rows * cols));
    for (int r = 0; r < rows; ++r) {
        const json& row = value[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols) {
            throw ValidationError(where + ": row " + std::to_string(r) + " must hold " + std::to_string(cols) +
                                  " entries (one per rx antenna)");
        }
        for (const auto& entry : row) {
            grid.push_back(get_as<T>(entry, where));
        }
    }
    return grid;
}

template <typename T>
json write_grid(const std::vector<T>& grid, int rows, int cols)
{
    json out = json::array();
    for (int r = 0; r < rows; ++r) {
        json row = json::array();
        for (int c = 0; c < cols; ++c) {
            row.push_back(grid[static_cast<std::size_t>(r * cols + c)]);
        }
        out.push_back(std::move(row));
    }
    return out;
}

int node_count(const std::vector<int>& nodes)
{
    return nodes.empty() ? 0 : *std::max_element(nodes.begin(), nodes.end()) + 1;
}

}  // namespace

std::string to_string(LoTopology topology)
{
    switch (topology) {
        case LoTopology::configured: return "configured";
        case LoTopology::single_tx: return "single-tx";
        case LoTopology::single_rx: return "single-rx";
        case LoTopology::multi: return "multi";
    }
    return "unknown";
}

int ScenarioConfig::mt() const { return node_count(tx_nodes); }
int ScenarioConfig::mr() const { return node_count(rx_nodes); }

int ScenarioConfig::pmax() const
{
    return p.empty() ? 0 : *std::max_element(p.begin(), p.end());
}

int ScenarioConfig::lmax() const
{
    int best = 0;
    for (std::size_t k = 0; k < active_taps.size() && k < offsets.size(); ++k) {
        best = std::max(best, active_taps[k] + offsets[k]);
    }
    return std::max(best, 1);
}

ScenarioKind ScenarioConfig::scenario_kind() const
{
    ScenarioKind kind;
    // The matched filter resolves the full modeled length L, which must
    // cover every link's offset plus active taps.
    kind.lmax = L;
    if (fractional) {
        kind.tag = Scenario::async_fractional;
        kind.M = M;
    } else {
        kind.tag = Scenario::async_integer;
    }
    return kind;
}

void validate(const ScenarioConfig& cfg)
{
    std::vector<std::string> problems;
    auto check_nodes = [&](const std::vector<int>& nodes, const char* side) {
        if (nodes.empty()) {
            problems.push_back(std::string(side) + "_nodes must list at least one antenna");
            return;
        }
        std::set<int> seen(nodes.begin(), nodes.end());
        if (*seen.begin() < 0) {
            problems.push_back(std::string(side) + "_nodes contains a negative node id");
        }
        if (static_cast<int>(seen.size()) != node_count(nodes)) {
            problems.push_back(std::string(side) + "_nodes must use every node id from 0 to max");
        }
    };
    check_nodes(cfg.tx_nodes, "tx");
    check_nodes(cfg.rx_nodes, "rx");

    const auto links = static_cast<std::size_t>(cfg.nt() * cfg.nr());
    if (cfg.L < 1) {
        problems.push_back("channel.L must be >= 1");
    }
    if (cfg.active_taps.size() != links || cfg.offsets.size() != links) {
        problems.push_back("channel grids must be Nt x Nr");
    } else {
        for (int i = 0; i < cfg.nt(); ++i) {
            for (int m = 0; m < cfg.nr(); ++m) {
                const int k = cfg.link_index(i, m);
                const std::string tag = "link (" + std::to_string(i) + "," + std::to_string(m) + ")";
                if (cfg.active_taps[k] < 0 || cfg.offsets[k] < 0) {
                    problems.push_back(tag + ": active taps and offset must be nonnegative");
                }
                if (cfg.active_taps[k] + cfg.offsets[k] > cfg.L) {
                    problems.push_back(tag + ": active taps + offset = " +
                                       std::to_string(cfg.active_taps[k] + cfg.offsets[k]) + " exceeds L = " +
                                       std::to_string(cfg.L));
                }
            }
        }
        // Antennas on the same pair of nodes see the same clock delay.
        std::map<std::pair<int, int>, std::pair<int, double>> shared;
        const bool fixed_mu = cfg.fractional && cfg.mu_policy == MuPolicy::fixed && cfg.mu.size() == links;
        for (int i = 0; i < cfg.nt() && problems.empty(); ++i) {
            for (int m = 0; m < cfg.nr(); ++m) {
                const int k = cfg.link_index(i, m);
                const auto key = std::make_pair(cfg.tx_nodes[i], cfg.rx_nodes[m]);
                const std::pair<int, double> value{cfg.offsets[k], fixed_mu ? cfg.mu[k] : 0.0};
                auto [it, inserted] = shared.emplace(key, value);
                if (!inserted && it->second != value) {
                    problems.push_back("link (" + std::to_string(i) + "," + std::to_string(m) +
                                       "): offset differs from another link between tx node " +
                                       std::to_string(key.first) + " and rx node " + std::to_string(key.second));
                }
            }
        }
    }
    if (cfg.fractional && cfg.mu_policy == MuPolicy::fixed) {
        if (cfg.mu.size() != links) {
            problems.push_back("fractional.mu must be given (scalar or Nt x Nr) when mu_policy is fixed");
        }
        for (double mu : cfg.mu) {
            if (!(mu > 0.0 && mu <= 0.5)) {
                problems.push_back("fractional.mu values must lie in (0, 0.5]");
                break;
            }
        }
    }

    if (static_cast<int>(cfg.p.size()) != cfg.nt()) {
        problems.push_back("waveform.p must list one chirp index per tx antenna");
    }
    std::set<int> distinct(cfg.p.begin(), cfg.p.end());
    if (distinct.size() != cfg.p.size()) {
        problems.push_back("waveform.p entries must be distinct");
    }
    if (!is_power_of_two(cfg.N)) {
        problems.push_back("waveform.N must be a power of 2");
    }
    for (int p : cfg.p) {
        if (!is_power_of_two(p) || cfg.N <= 2 * p) {
            problems.push_back("waveform.p = " + std::to_string(p) + " must be a power of 2 with N > 2p");
        }
    }
    if (!(cfg.rolloff >= 0.0 && cfg.rolloff <= 1.0)) {
        problems.push_back("pulse.rolloff must lie in [0, 1]");
    }
    if (cfg.M < 1) {
        problems.push_back("pulse.M must be >= 1");
    }
    if (static_cast<int>(cfg.snr_db.size()) != cfg.nr()) {
        problems.push_back("snr_db must be a scalar or list one value per rx antenna");
    }
    if (cfg.trials < 1) {
        problems.push_back("trials must be >= 1");
    }
    if (cfg.K < cfg.L) {
        problems.push_back("capacity.K must be >= channel.L");
    }
    for (double rho : cfg.rho_db) {
        if (std::isnan(rho) || rho == INFINITY) {
            problems.push_back("capacity.rho_db values must be finite or null");
            break;
        }
    }

    if (!problems.empty()) {
        std::string msg = "invalid config '" + cfg.name + "':";
        for (const auto& problem : problems) {
            msg += "\n  - " + problem;
        }
        throw ValidationError(msg);
    }
}

void require_design_constraints(const ScenarioConfig& cfg)
{
    const ConstraintReport report = check_design_constraints(cfg.pmax(), cfg.N, cfg.scenario_kind());
    if (!report.satisfied) {
        throw ConstraintError("waveform design constraint violated (" + to_string(cfg.scenario_kind().tag) +
                              "): " + report.condition);
    }
}

ScenarioConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(doc, "config",
               {"name", "tx_nodes", "rx_nodes", "channel", "fractional", "waveform", "pulse", "snr_db", "trials",
                "seed", "capacity"});

    ScenarioConfig cfg;
    if (doc.contains("name")) {
        cfg.name = get_as<std::string>(doc["name"], "name");
    }
    if (!doc.contains("tx_nodes") || !doc.contains("rx_nodes") || !doc.contains("channel") ||
        !doc.contains("waveform")) {
        throw ValidationError("config requires tx_nodes, rx_nodes, channel and waveform");
    }
    cfg.tx_nodes = get_as<std::vector<int>>(doc["tx_nodes"], "tx_nodes");
    cfg.rx_nodes = get_as<std::vector<int>>(doc["rx_nodes"], "rx_nodes");
    const int nt = cfg.nt();
    const int nr = cfg.nr();

    const json& channel = doc["channel"];
    check_keys(channel, "channel", {"L", "active_taps", "offsets", "normalize", "policy"});
    if (!channel.contains("L") || !channel.contains("active_taps")) {
        throw ValidationError("channel requires L and active_taps");
    }
    cfg.L = get_as<int>(channel["L"], "channel.L");
    cfg.active_taps = read_grid<int>(channel["active_taps"], nt, nr, "channel.active_taps");
    cfg.offsets = channel.contains("offsets") ? read_grid<int>(channel["offsets"], nt, nr, "channel.offsets")
                                              : std::vector<int>(static_cast<std::size_t>(nt * nr), 0);
    if (channel.contains("normalize")) {
        cfg.normalize_taps = get_as<bool>(channel["normalize"], "channel.normalize");
    }
    if (channel.contains("policy")) {
        const auto policy = get_as<std::string>(channel["policy"], "channel.policy");
        if (policy == "fixed") {
            cfg.channel_policy = ChannelPolicy::fixed;
        } else if (policy == "per-trial") {
            cfg.channel_policy = ChannelPolicy::per_trial;
        } else {
            throw ValidationError("channel.policy must be 'fixed' or 'per-trial'");
        }
    }

    if (doc.contains("fractional")) {
        const json& frac = doc["fractional"];
        check_keys(frac, "fractional", {"enabled", "mu_policy", "mu"});
        if (frac.contains("enabled")) {
            cfg.fractional = get_as<bool>(frac["enabled"], "fractional.enabled");
        }
        if (frac.contains("mu_policy")) {
            const auto policy = get_as<std::string>(frac["mu_policy"], "fractional.mu_policy");
            if (policy == "fixed") {
                cfg.mu_policy = MuPolicy::fixed;
            } else if (policy == "uniform") {
                cfg.mu_policy = MuPolicy::uniform;
            } else {
                throw ValidationError("fractional.mu_policy must be 'fixed' or 'uniform'");
            }
        }
        if (frac.contains("mu")) {
            cfg.mu = read_grid<double>(frac["mu"], nt, nr, "fractional.mu");
        }
    }

    const json& waveform = doc["waveform"];
    check_keys(waveform, "waveform", {"N", "p"});
    if (!waveform.contains("N") || !waveform.contains("p")) {
        throw ValidationError("waveform requires N and p");
    }
    cfg.N = get_as<int>(waveform["N"], "waveform.N");
    cfg.p = get_as<std::vector<int>>(waveform["p"], "waveform.p");

    if (doc.contains("pulse")) {
        const json& pulse = doc["pulse"];
        check_keys(pulse, "pulse", {"kind", "rolloff", "M"});
        if (pulse.contains("kind")) {
            cfg.pulse_kind = pulse_kind_from_string(get_as<std::string>(pulse["kind"], "pulse.kind"));
        }
        if (pulse.contains("rolloff")) {
            cfg.rolloff = get_as<double>(pulse["rolloff"], "pulse.rolloff");
        }
        if (pulse.contains("M")) {
            cfg.M = get_as<int>(pulse["M"], "pulse.M");
        }
    }

    if (!doc.contains("snr_db")) {
        throw ValidationError("config requires snr_db");
    }
    if (doc["snr_db"].is_array()) {
        cfg.snr_db = get_as<std::vector<double>>(doc["snr_db"], "snr_db");
    } else {
        cfg.snr_db.assign(static_cast<std::size_t>(nr), get_as<double>(doc["snr_db"], "snr_db"));
    }
    if (doc.contains("trials")) {
        cfg.trials = get_as<int>(doc["trials"], "trials");
    }
    if (doc.contains("seed")) {
        cfg.seed = get_as<std::uint64_t>(doc["seed"], "seed");
    }

    if (doc.contains("capacity")) {
        const json& cap = doc["capacity"];
        check_keys(cap, "capacity", {"rho_db", "K", "lo_topology"});
        if (cap.contains("rho_db")) {
            // null stands for rho = 0 (-inf dB)
            const json& list = cap["rho_db"];
            if (!list.is_array()) {
                throw ValidationError("capacity.rho_db must be a list");
            }
            for (const auto& entry : list) {
                cfg.rho_db.push_back(entry.is_null() ? -INFINITY : get_as<double>(entry, "capacity.rho_db"));
            }
        }
        if (cap.contains("K")) {
            cfg.K = get_as<int>(cap["K"], "capacity.K");
        }
        if (cap.contains("lo_topology")) {
            const auto name = get_as<std::string>(cap["lo_topology"], "capacity.lo_topology");
            bool found = false;
            for (LoTopology t : {LoTopology::configured, LoTopology::single_tx, LoTopology::single_rx,
                                 LoTopology::multi}) {
                if (to_string(t) == name) {
                    cfg.lo_topology = t;
                    found = true;
                }
            }
            if (!found) {
                throw ValidationError("capacity.lo_topology must be configured, single-tx, single-rx or multi");
            }
        }
    }

    validate(cfg);
    return cfg;
}

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string emit_config(const ScenarioConfig& cfg)
{
    const int nt = cfg.nt();
    const int nr = cfg.nr();
    json doc;
    doc["name"] = cfg.name;
    doc["tx_nodes"] = cfg.tx_nodes;
    doc["rx_nodes"] = cfg.rx_nodes;
    doc["channel"] = {
        {"L", cfg.L},
        {"active_taps", write_grid(cfg.active_taps, nt, nr)},
        {"offsets", write_grid(cfg.offsets, nt, nr)},
        {"normalize", cfg.normalize_taps},
        {"policy", to_cstr(cfg.channel_policy)},
    };
    json frac = {{"enabled", cfg.fractional}, {"mu_policy", to_cstr(cfg.mu_policy)}};
    if (!cfg.mu.empty()) {
        frac["mu"] = write_grid(cfg.mu, nt, nr);
    }
    doc["fractional"] = std::move(frac);
    doc["waveform"] = {{"N", cfg.N}, {"p", cfg.p}};
    doc["pulse"] = {{"kind", to_string(cfg.pulse_kind)}, {"rolloff", cfg.rolloff}, {"M", cfg.M}};
    doc["snr_db"] = cfg.snr_db;
    doc["trials"] = cfg.trials;
    doc["seed"] = cfg.seed;
    doc["capacity"] = {{"rho_db", cfg.rho_db}, {"K", cfg.K}, {"lo_topology", to_string(cfg.lo_topology)}};
    return doc.dump(2) + "\n";
}

namespace {

// Two transmit nodes (one with a single antenna, one with two) and three
// single-antenna receive nodes; every link has 10 nonzero taps, the first
// user has integer offset 0 and the second 5.
ScenarioConfig sec5_base()
{
    ScenarioConfig cfg;
    cfg.name = "paper-sec5";
    cfg.tx_nodes = {0, 1, 1};
    cfg.rx_nodes = {0, 1, 2};
    cfg.L = 15;
    cfg.active_taps.assign(9, 10);
    cfg.offsets = {0, 0, 0, 5, 5, 5, 5, 5, 5};
    cfg.N = 128;
    cfg.p = {1, 2, 4};
    cfg.snr_db.assign(3, 25.0);
    cfg.trials = 10000;
    cfg.seed = 20120101;
    cfg.rho_db = {0.0, 5.0, 10.0, 20.0};
    cfg.K = 256;
    return cfg;
}

}  // namespace

std::vector<std::string> preset_names()
{
    return {"paper-sec5", "paper-sec5-fractional", "capacity-single-tx", "capacity-single-rx",
            "capacity-multi-2x2"};
}

ScenarioConfig preset(const std::string& name)
{
    ScenarioConfig cfg = sec5_base();
    if (name == "paper-sec5") {
        return cfg;
    }
    if (name == "paper-sec5-fractional") {
        // With M = 4 and L = 15 the fractional window is 22 lags, so the
        // three chirps (pmax = 4) need N > 176.
        cfg.name = name;
        cfg.fractional = true;
        cfg.mu_policy = MuPolicy::uniform;
        cfg.N = 256;
        return cfg;
    }
    if (name == "capacity-single-tx" || name == "capacity-single-rx") {
        cfg.name = name;
        cfg.lo_topology = name == "capacity-single-tx" ? LoTopology::single_tx : LoTopology::single_rx;
        return cfg;
    }
    if (name == "capacity-multi-2x2") {
        cfg.name = name;
        cfg.tx_nodes = {0, 1};
        cfg.rx_nodes = {0, 1};
        cfg.active_taps.assign(4, 10);
        cfg.offsets.assign(4, 0);
        cfg.p = {1, 2};
        cfg.snr_db.assign(2, 25.0);
        cfg.lo_topology = LoTopology::multi;
        return cfg;
    }
    std::string known;
    for (const auto& n : preset_names()) {
        known += " " + n;
    }
    throw ValidationError("unknown preset '" + name + "'; known presets:" + known);
}

}  // namespace chirpsound
