#pragma once

// Monte-Carlo experiments, result persistence and the CSV/record writers
// used by the command-line tool.
//
// Randomness is split by (seed, trial, purpose): fixed channels come from
// trial 0 of the channel stream, and trial t draws its fractional offsets
// and noise from its own streams. Trials run on a thread pool; per-trial
// results land in trial-indexed slots and are summed in trial order, so
// outputs do not depend on scheduling.

#include <filesystem>
#include <string>
#include <vector>

#include "chirpsound/config.hpp"
#include "chirpsound/types.hpp"

namespace chirpsound {

struct LinkMse {
    int tx = 0;
    int rx = 0;
    double mse = 0.0;
    double crb = 0.0;
    double ratio = 0.0;
};

// rx = -1 marks the all-antenna aggregate.
struct AntennaMse {
    int rx = 0;
    double mse = 0.0;
    double crb = 0.0;
    double ratio = 0.0;
};

struct CapacityRow {
    double rho_db = 0.0;
    double c_syn = 0.0;
    double c_asyn = 0.0;
    double max_bin_gap = 0.0;
    bool equal = false;
};

struct SegmentTrace {
    int tx = 0;
    int rx = 0;
    int segments = 0;
    CVector output;  // N-length matched-filter output
};

struct LinkEstimate {
    int tx = 0;
    int rx = 0;
    CVector h_true;
    CVector h_hat;
    double mu_true = 0.0;
    double mu_hat = 0.0;
    bool converged = true;
};

struct RunResult {
    std::string kind;  // "mse", "capacity" or "sound"
    std::string run_id;
    std::string config_echo;
    int trials = 0;
    std::uint64_t seed = 0;
    bool fractional = false;

    std::vector<LinkMse> links;
    std::vector<AntennaMse> antennas;  // per rx antenna, then the aggregate
    std::vector<int> p;                // chirp index per transmit waveform
    std::vector<double> papr;          // per transmit waveform
    std::vector<CapacityRow> capacity;
    std::vector<SegmentTrace> traces;
    std::vector<LinkEstimate> estimates;

    int nonconverged = 0;           // fractional trials flagged by the joint estimator
    double mean_abs_mu_error = 0.0; // fractional only
    double wall_clock_s = 0.0;
};

// Deterministic 16-hex-digit id derived from the run kind and config echo.
std::string make_run_id(const std::string& kind, const std::string& config_echo);

// `config_echo` is the ingested config text; empty means emit_config(cfg).
// Both runners validate the config and throw ConstraintError before any
// trial runs when the design inequality fails.
RunResult run_mse_experiment(const ScenarioConfig& cfg, const std::string& config_echo = "");
RunResult run_capacity_experiment(const ScenarioConfig& cfg, const std::string& config_echo = "");
// One realization (trial 0): full-length matched-filter traces and estimates.
RunResult run_sound(const ScenarioConfig& cfg, const std::string& config_echo = "");

enum class OutputFormat { csv, record };
OutputFormat output_format_from_string(const std::string& name);

// Writes the result files plus config.json (the echo) and run.json (run id,
// timestamp, wall clock). Returns the paths written. Throws IoError.
std::vector<std::filesystem::path> emit_results(const RunResult& result, const std::filesystem::path& dir,
                                                OutputFormat format);

// Shared number formatting for every CSV: 17 significant digits.
std::string format_number(double value);

void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string waveform_csv(const SoundingWaveform& w);
// tau, R_p for each waveform, then C_p_q for each ordered pair p < q.
std::string correlation_csv(const std::vector<SoundingWaveform>& waveforms);
std::string segments_csv(const std::vector<SegmentTrace>& traces);
std::string mse_csv(const RunResult& result);
std::string capacity_csv(const RunResult& result);

}  // namespace chirpsound
