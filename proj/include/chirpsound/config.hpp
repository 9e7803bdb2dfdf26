#pragma once

// ScenarioConfig and its JSON representation.
//
// Link grids are indexed [tx antenna][rx antenna]. A scalar in the file is
// broadcast to the whole grid (or to every receive antenna for snr_db).
// Unknown keys anywhere in the document are rejected. See
// docs/config-schema.md for the full schema.

#include <cstdint>
#include <string>
#include <vector>

#include "chirpsound/pulse.hpp"
#include "chirpsound/waveform.hpp"

namespace chirpsound {

enum class ChannelPolicy { fixed, per_trial };
enum class MuPolicy { fixed, uniform };
// How clock delays are assigned for the capacity comparison: taken from the
// configured (d, mu) grid, or drawn at random with one LO on the transmit
// side, one LO on the receive side, or one LO per node on both sides.
enum class LoTopology { configured, single_tx, single_rx, multi };

struct ScenarioConfig {
    std::string name = "custom";
    std::vector<int> tx_nodes;  // tx antenna -> tx node
    std::vector<int> rx_nodes;  // rx antenna -> rx node

    int L = 1;                        // modeled channel length
    std::vector<int> active_taps;     // Nt*Nr, index i*Nr + m
    std::vector<int> offsets;         // Nt*Nr integer offsets d
    bool normalize_taps = true;
    ChannelPolicy channel_policy = ChannelPolicy::fixed;

    bool fractional = false;
    MuPolicy mu_policy = MuPolicy::uniform;
    std::vector<double> mu;  // Nt*Nr, used when mu_policy is fixed

    int N = 128;
    std::vector<int> p;  // one chirp index per tx antenna

    PulseKind pulse_kind = PulseKind::raised_cosine;
    double rolloff = 0.25;
    int M = 4;

    std::vector<double> snr_db;  // per rx antenna
    int trials = 1;
    std::uint64_t seed = 1;

    std::vector<double> rho_db;
    int K = 256;
    LoTopology lo_topology = LoTopology::configured;

    int nt() const { return static_cast<int>(tx_nodes.size()); }
    int nr() const { return static_cast<int>(rx_nodes.size()); }
    int mt() const;
    int mr() const;
    int pmax() const;
    // max over links of active + d
    int lmax() const;
    ScenarioKind scenario_kind() const;
    int link_index(int i, int m) const { return i * nr() + m; }

    bool operator==(const ScenarioConfig&) const = default;
};

// Structural validation; throws ValidationError listing every violation.
// Waveform design constraints are checked separately by the runners.
void validate(const ScenarioConfig& cfg);

// Throws ConstraintError with the violated inequality.
void require_design_constraints(const ScenarioConfig& cfg);

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::string& path);
std::string emit_config(const ScenarioConfig& cfg);

std::vector<std::string> preset_names();
ScenarioConfig preset(const std::string& name);

std::string to_string(LoTopology topology);

}  // namespace chirpsound
