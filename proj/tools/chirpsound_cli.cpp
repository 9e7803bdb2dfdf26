// chirpsound: chirp channel-sounding waveforms for asynchronous MU-MIMO.
//
// Exit codes: 0 success, 2 config/constraint error, 3 numerical failure
// (including joint-estimator non-convergence), 4 I/O error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "chirpsound/config.hpp"
#include "chirpsound/error.hpp"
#include "chirpsound/harness.hpp"
#include "chirpsound/waveform.hpp"

using namespace chirpsound;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
    std::string config_path;
    std::string preset_name;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string out_dir = "out";
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOptions& opts)
{
    cmd->add_option("--config", opts.config_path, "Scenario config file (JSON)");
    cmd->add_option("--preset", opts.preset_name, "Built-in scenario preset");
    cmd->add_option("--seed", opts.seed, "Override the config seed");
    cmd->add_option("--trials", opts.trials, "Override the Monte-Carlo trial count");
    cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--format", opts.format, "csv or record")->check(CLI::IsMember({"csv", "record"}))
        ->capture_default_str();
}

// Returns the config and its echo: the file bytes when read unmodified,
// otherwise the canonical emitted form.
std::pair<ScenarioConfig, std::string> load(const CommonOptions& opts)
{
    if (!opts.config_path.empty() && !opts.preset_name.empty()) {
        throw ValidationError("pass either --config or --preset, not both");
    }
    ScenarioConfig cfg;
    std::string echo;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path, std::ios::binary);
        if (!in) {
            throw IoError("cannot open config file '" + opts.config_path + "'");
        }
        std::ostringstream buffer;
        buffer << in.rdbuf();
        echo = buffer.str();
        cfg = parse_config(echo);
    } else {
        cfg = preset(opts.preset_name.empty() ? "paper-sec5" : opts.preset_name);
    }
    bool modified = echo.empty();
    if (opts.seed) {
        cfg.seed = *opts.seed;
        modified = true;
    }
    if (opts.trials) {
        cfg.trials = *opts.trials;
        modified = true;
    }
    validate(cfg);
    if (modified) {
        echo = emit_config(cfg);
    }
    return {cfg, echo};
}

void report_written(const std::vector<std::filesystem::path>& paths)
{
    for (const auto& path : paths) {
        std::cout << "wrote " << path.string() << "\n";
    }
}

int cmd_generate(const CommonOptions& opts)
{
    const auto [cfg, echo] = load(opts);
    std::filesystem::create_directories(opts.out_dir);
    for (int p : cfg.p) {
        const SoundingWaveform w = generate_chirp(p, cfg.N);
        const auto path = std::filesystem::path(opts.out_dir) /
                          ("waveform_p" + std::to_string(p) + "_N" + std::to_string(cfg.N) + ".csv");
        write_text_file(path, waveform_csv(w));
        std::cout << "wrote " << path.string() << " (PAPR " << format_number(papr(w.samples)) << ")\n";
    }
    return 0;
}

int cmd_correlate(const CommonOptions& opts)
{
    const auto [cfg, echo] = load(opts);
    std::vector<SoundingWaveform> waveforms;
    for (int p : cfg.p) {
        waveforms.push_back(generate_chirp(p, cfg.N));
    }
    std::filesystem::create_directories(opts.out_dir);
    const auto path = std::filesystem::path(opts.out_dir) / "correlation.csv";
    write_text_file(path, correlation_csv(waveforms));
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_check(const CommonOptions& opts)
{
    const auto [cfg, echo] = load(opts);
    const ScenarioKind kind = cfg.scenario_kind();
    const ConstraintReport report = check_design_constraints(cfg.pmax(), cfg.N, kind);
    std::cout << "scenario: " << to_string(kind.tag) << "\n"
              << "condition: " << report.condition << "\n"
              << "slack: " << report.slack << "\n"
              << "result: " << (report.satisfied ? "PASS" : "FAIL") << "\n";
    return report.satisfied ? 0 : kExitConfig;
}

int cmd_sound(const CommonOptions& opts)
{
    const auto [cfg, echo] = load(opts);
    const RunResult result = run_sound(cfg, echo);
    report_written(emit_results(result, opts.out_dir, output_format_from_string(opts.format)));
    return result.nonconverged > 0 ? kExitNumerical : 0;
}

int cmd_mse(const CommonOptions& opts)
{
    const auto [cfg, echo] = load(opts);
    const RunResult result = run_mse_experiment(cfg, echo);
    for (const auto& row : result.antennas) {
        std::cout << "rx " << (row.rx < 0 ? std::string("all") : std::to_string(row.rx))
                  << ": mse " << format_number(row.mse) << "  crb " << format_number(row.crb) << "  mse/crb "
                  << format_number(row.ratio) << "\n";
    }
    if (result.fractional) {
        std::cout << "mean |mu_hat - mu|: " << format_number(result.mean_abs_mu_error)
                  << "  non-converged estimates: " << result.nonconverged << "\n";
    }
    report_written(emit_results(result, opts.out_dir, output_format_from_string(opts.format)));
    if (result.nonconverged > 0) {
        std::cerr << "warning: " << result.nonconverged << " joint estimates did not converge\n";
        return kExitNumerical;
    }
    return 0;
}

int cmd_capacity(const CommonOptions& opts)
{
    const auto [cfg, echo] = load(opts);
    const RunResult result = run_capacity_experiment(cfg, echo);
    for (const auto& row : result.capacity) {
        std::cout << "rho " << format_number(row.rho_db) << " dB: c_syn " << format_number(row.c_syn)
                  << "  c_asyn " << format_number(row.c_asyn) << "  max bin gap " << format_number(row.max_bin_gap)
                  << (row.equal ? "  (equal)" : "  (different)") << "\n";
    }
    report_written(emit_results(result, opts.out_dir, output_format_from_string(opts.format)));
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Chirp channel-sounding waveforms for asynchronous multi-user MIMO"};
    app.require_subcommand(1);

    std::string presets;
    for (const auto& name : preset_names()) {
        presets += (presets.empty() ? "" : ", ") + name;
    }
    app.footer("Presets: " + presets);

    CommonOptions opts;
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const CommonOptions&);
    };
    const Command commands[] = {
        {"generate", "Write each configured chirp waveform to CSV", cmd_generate},
        {"correlate", "Write periodic auto/cross-correlation tables", cmd_correlate},
        {"check", "Report the waveform design constraint", cmd_check},
        {"sound", "Run one sounding realization and emit matched-filter traces", cmd_sound},
        {"mse", "Monte-Carlo MSE vs Cramer-Rao bound", cmd_mse},
        {"capacity", "Synchronous vs asynchronous capacity report", cmd_capacity},
    };
    std::vector<std::pair<CLI::App*, const Command*>> registered;
    for (const auto& command : commands) {
        CLI::App* sub = app.add_subcommand(command.name, command.help);
        add_common(sub, opts);
        registered.emplace_back(sub, &command);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        for (const auto& [sub, command] : registered) {
            if (sub->parsed()) {
                return command->run(opts);
            }
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
