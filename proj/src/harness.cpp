#include "chirpsound/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "chirpsound/channel.hpp"
#include "chirpsound/error.hpp"
#include "chirpsound/estimator.hpp"
#include "chirpsound/metrics.hpp"
#include "chirpsound/rng.hpp"
#include "chirpsound/waveform.hpp"

namespace chirpsound {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<SoundingWaveform> make_waveforms(const ScenarioConfig& cfg)
{
    std::vector<SoundingWaveform> waveforms;
    waveforms.reserve(cfg.p.size());
    for (int p : cfg.p) {
        waveforms.push_back(generate_chirp(p, cfg.N));
    }
    return waveforms;
}

// Runs body(t) for t in [0, count) on a small pool and rethrows the first
// failure after all workers have stopped.
void parallel_for(int count, const std::function<void(int)>& body)
{
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(std::max(count, 1))));
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (int t = next++; t < count && !failed; t = next++) {
            try {
                body(t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                failed = true;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& thread : pool) {
            thread.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

MimoScenario fixed_scenario(const ScenarioConfig& cfg, const std::vector<SoundingWaveform>& waveforms)
{
    RandomStream rng(cfg.seed, 0, StreamId::channel_taps);
    MimoScenario scenario = synthesize_channels(cfg, rng);
    calibrate_noise(scenario, waveforms, cfg.snr_db);
    return scenario;
}

// Moves a link's active taps so they start at lag d.
void set_integer_offset(LinkChannel& link, int d)
{
    const CVector active = link.taps.segment(link.d, link.active);
    link.taps.setZero();
    link.taps.segment(d, link.active) = active;
    link.d = d;
}

void assign_lo_delays(MimoScenario& scenario, LoTopology topology, RandomStream& rng)
{
    if (topology == LoTopology::configured) {
        return;
    }
    int max_active = 0;
    for (const auto& link : scenario.links) {
        max_active = std::max(max_active, link.active);
    }
    const int max_d = scenario.L - max_active;
    // One clock delay per independent LO pairing.
    std::map<std::pair<int, int>, std::pair<int, double>> delays;
    auto delay_for = [&](int a, int b) {
        const std::pair<int, int> key{topology == LoTopology::single_tx ? 0 : a,
                                      topology == LoTopology::single_rx ? 0 : b};
        auto it = delays.find(key);
        if (it == delays.end()) {
            const int d = rng.uniform_int(0, max_d);
            const double mu = 0.5 * rng.uniform();
            it = delays.emplace(key, std::make_pair(d, mu)).first;
        }
        return it->second;
    };
    for (int a = 0; a < scenario.mt; ++a) {
        for (int b = 0; b < scenario.mr; ++b) {
            delay_for(a, b);
        }
    }
    for (int i = 0; i < scenario.nt(); ++i) {
        for (int m = 0; m < scenario.nr(); ++m) {
            const auto [d, mu] = delay_for(scenario.tx_node[i], scenario.rx_node[m]);
            LinkChannel& link = scenario.link(i, m);
            set_integer_offset(link, d);
            link.mu = mu;
        }
    }
}

std::string iso_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream out;
    out << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

struct TrialOutcome {
    std::vector<double> link_error;  // squared error per link
    std::vector<double> noise_var;   // per rx antenna
    int nonconverged = 0;
    double mu_error = 0.0;
};

}  // namespace

std::string make_run_id(const std::string& kind, const std::string& config_echo)
{
    // FNV-1a, 64 bit
    std::uint64_t hash = 0xcbf29ce484222325ull;
    auto mix = [&hash](const std::string& text) {
        for (unsigned char c : text) {
            hash ^= c;
            hash *= 0x100000001b3ull;
        }
    };
    mix(kind);
    mix("\n");
    mix(config_echo);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

RunResult run_mse_experiment(const ScenarioConfig& cfg, const std::string& config_echo)
{
    const auto start = Clock::now();
    validate(cfg);
    require_design_constraints(cfg);

    RunResult result;
    result.kind = "mse";
    result.config_echo = config_echo.empty() ? emit_config(cfg) : config_echo;
    result.run_id = make_run_id(result.kind, result.config_echo);
    result.trials = cfg.trials;
    result.seed = cfg.seed;
    result.fractional = cfg.fractional;

    const auto waveforms = make_waveforms(cfg);
    result.p = cfg.p;
    for (const auto& w : waveforms) {
        result.papr.push_back(papr(w.samples));
    }
    const PulseShape pulse = build_pulse(cfg.pulse_kind, cfg.rolloff, cfg.M);
    std::vector<SoundingMatrix> filters;
    for (const auto& w : waveforms) {
        filters.push_back(cfg.fractional ? build_sounding_matrix(w, cfg.L, SoundingKind::fractional, cfg.M)
                                         : build_sounding_matrix(w, cfg.L, SoundingKind::integer));
    }
    const MimoScenario base = fixed_scenario(cfg, waveforms);
    const int nt = cfg.nt();
    const int nr = cfg.nr();

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cfg.trials));
    parallel_for(cfg.trials, [&](int t) {
        MimoScenario scenario = base;
        if (cfg.channel_policy == ChannelPolicy::per_trial) {
            RandomStream chan_rng(cfg.seed, static_cast<std::uint64_t>(t), StreamId::channel_taps);
            scenario = synthesize_channels(cfg, chan_rng);
            calibrate_noise(scenario, waveforms, cfg.snr_db);
        }
        if (cfg.fractional && cfg.mu_policy == MuPolicy::uniform) {
            RandomStream mu_rng(cfg.seed, static_cast<std::uint64_t>(t), StreamId::fractional_offsets);
            draw_fractional_offsets(scenario, mu_rng);
        }
        RandomStream noise(cfg.seed, static_cast<std::uint64_t>(t), StreamId::noise);
        const auto received = cfg.fractional ? receive_fractional(scenario, waveforms, pulse, noise)
                                             : receive_integer(scenario, waveforms, noise);

        TrialOutcome& out = outcomes[static_cast<std::size_t>(t)];
        out.noise_var = scenario.noise_var;
        out.link_error.resize(static_cast<std::size_t>(nt * nr));
        for (int i = 0; i < nt; ++i) {
            for (int m = 0; m < nr; ++m) {
                const LinkChannel& link = scenario.link(i, m);
                const CVector& r = received[static_cast<std::size_t>(m)];
                CVector h_hat;
                if (cfg.fractional) {
                    const CVector raw = matched_filter_fractional(filters[static_cast<std::size_t>(i)], r);
                    const EstimateReport est = joint_estimate(raw, pulse, cfg.L, cfg.M);
                    if (!est.converged) {
                        ++out.nonconverged;
                    }
                    out.mu_error += std::abs(est.mu_hat.value_or(0.0) - link.mu);
                    h_hat = est.h_hat;
                } else {
                    h_hat = matched_filter_integer(filters[static_cast<std::size_t>(i)], r);
                }
                out.link_error[static_cast<std::size_t>(cfg.link_index(i, m))] = (link.taps - h_hat).squaredNorm();
            }
        }
    });

    // Ordered reduction.
    std::vector<double> err_sum(static_cast<std::size_t>(nt * nr), 0.0);
    std::vector<double> var_sum(static_cast<std::size_t>(nr), 0.0);
    double mu_error = 0.0;
    for (const auto& out : outcomes) {
        for (std::size_t k = 0; k < err_sum.size(); ++k) {
            err_sum[k] += out.link_error[k];
        }
        for (std::size_t m = 0; m < var_sum.size(); ++m) {
            var_sum[m] += out.noise_var[m];
        }
        result.nonconverged += out.nonconverged;
        mu_error += out.mu_error;
    }
    const double trials = cfg.trials;
    if (cfg.fractional) {
        result.mean_abs_mu_error = mu_error / (trials * nt * nr);
    }

    double all_mse = 0.0;
    double all_crb = 0.0;
    for (int i = 0; i < nt; ++i) {
        for (int m = 0; m < nr; ++m) {
            LinkMse row;
            row.tx = i;
            row.rx = m;
            row.mse = err_sum[static_cast<std::size_t>(cfg.link_index(i, m))] / trials;
            row.crb = crb(cfg.L, var_sum[static_cast<std::size_t>(m)] / trials);
            row.ratio = row.crb > 0.0 ? row.mse / row.crb : 0.0;
            result.links.push_back(row);
        }
    }
    for (int m = 0; m < nr; ++m) {
        AntennaMse row;
        row.rx = m;
        for (int i = 0; i < nt; ++i) {
            row.mse += result.links[static_cast<std::size_t>(cfg.link_index(i, m))].mse;
        }
        row.mse /= nt;
        row.crb = crb(cfg.L, var_sum[static_cast<std::size_t>(m)] / trials);
        row.ratio = row.crb > 0.0 ? row.mse / row.crb : 0.0;
        all_mse += row.mse;
        all_crb += row.crb;
        result.antennas.push_back(row);
    }
    AntennaMse aggregate;
    aggregate.rx = -1;
    aggregate.mse = all_mse / nr;
    aggregate.crb = all_crb / nr;
    aggregate.ratio = aggregate.crb > 0.0 ? aggregate.mse / aggregate.crb : 0.0;
    result.antennas.push_back(aggregate);

    result.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

RunResult run_capacity_experiment(const ScenarioConfig& cfg, const std::string& config_echo)
{
    const auto start = Clock::now();
    validate(cfg);
    require_design_constraints(cfg);

    RunResult result;
    result.kind = "capacity";
    result.config_echo = config_echo.empty() ? emit_config(cfg) : config_echo;
    result.run_id = make_run_id(result.kind, result.config_echo);
    result.trials = 1;
    result.seed = cfg.seed;
    result.fractional = cfg.fractional;

    RandomStream chan_rng(cfg.seed, 0, StreamId::channel_taps);
    MimoScenario scenario = synthesize_channels(cfg, chan_rng);
    RandomStream delay_rng(cfg.seed, 0, StreamId::capacity_delays);
    assign_lo_delays(scenario, cfg.lo_topology, delay_rng);

    const FrequencyGrid grid{cfg.K};
    for (double rho_db : cfg.rho_db) {
        const EquivalenceReport report = capacity_equivalence_report(scenario, grid, db_to_linear(rho_db));
        result.capacity.push_back({rho_db, report.c_syn, report.c_asyn, report.max_bin_gap, report.equal});
    }
    result.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

RunResult run_sound(const ScenarioConfig& cfg, const std::string& config_echo)
{
    const auto start = Clock::now();
    validate(cfg);
    require_design_constraints(cfg);

    RunResult result;
    result.kind = "sound";
    result.config_echo = config_echo.empty() ? emit_config(cfg) : config_echo;
    result.run_id = make_run_id(result.kind, result.config_echo);
    result.trials = 1;
    result.seed = cfg.seed;
    result.fractional = cfg.fractional;

    const auto waveforms = make_waveforms(cfg);
    result.p = cfg.p;
    for (const auto& w : waveforms) {
        result.papr.push_back(papr(w.samples));
    }
    const PulseShape pulse = build_pulse(cfg.pulse_kind, cfg.rolloff, cfg.M);
    MimoScenario scenario = fixed_scenario(cfg, waveforms);
    if (cfg.fractional && cfg.mu_policy == MuPolicy::uniform) {
        RandomStream mu_rng(cfg.seed, 0, StreamId::fractional_offsets);
        draw_fractional_offsets(scenario, mu_rng);
    }
    RandomStream noise(cfg.seed, 0, StreamId::noise);
    const auto received = cfg.fractional ? receive_fractional(scenario, waveforms, pulse, noise)
                                         : receive_integer(scenario, waveforms, noise);

    const int offset = cfg.fractional ? cfg.M : 0;
    for (int i = 0; i < cfg.nt(); ++i) {
        const auto& w = waveforms[static_cast<std::size_t>(i)];
        const SoundingMatrix full = build_full_sounding_matrix(w, offset);
        const SoundingMatrix filter = cfg.fractional
                                          ? build_sounding_matrix(w, cfg.L, SoundingKind::fractional, cfg.M)
                                          : build_sounding_matrix(w, cfg.L, SoundingKind::integer);
        for (int m = 0; m < cfg.nr(); ++m) {
            const CVector& r = received[static_cast<std::size_t>(m)];
            const SegmentedOutput seg = segmented_output(full, r);
            result.traces.push_back({i, m, seg.segments, seg.output});

            const LinkChannel& link = scenario.link(i, m);
            LinkEstimate est;
            est.tx = i;
            est.rx = m;
            est.h_true = link.taps;
            est.mu_true = link.mu;
            if (cfg.fractional) {
                const EstimateReport report = joint_estimate(matched_filter_fractional(filter, r), pulse, cfg.L, cfg.M);
                est.h_hat = report.h_hat;
                est.mu_hat = report.mu_hat.value_or(0.0);
                est.converged = report.converged;
                if (!report.converged) {
                    ++result.nonconverged;
                }
            } else {
                est.h_hat = matched_filter_integer(filter, r);
            }
            result.estimates.push_back(std::move(est));
        }
    }
    result.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

OutputFormat output_format_from_string(const std::string& name)
{
    if (name == "csv") {
        return OutputFormat::csv;
    }
    if (name == "record") {
        return OutputFormat::record;
    }
    throw ValidationError("unknown output format '" + name + "' (expected csv or record)");
}

std::string format_number(double value)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

std::string waveform_csv(const SoundingWaveform& w)
{
    std::string out = "n,re,im\n";
    for (long n = 0; n < w.samples.size(); ++n) {
        out += std::to_string(n) + "," + format_number(w.samples[n].real()) + "," +
               format_number(w.samples[n].imag()) + "\n";
    }
    return out;
}

std::string correlation_csv(const std::vector<SoundingWaveform>& waveforms)
{
    if (waveforms.empty()) {
        return "tau\n";
    }
    std::string out = "tau";
    for (const auto& w : waveforms) {
        out += ",R_p" + std::to_string(w.p) + "_re,R_p" + std::to_string(w.p) + "_im";
    }
    for (std::size_t a = 0; a < waveforms.size(); ++a) {
        for (std::size_t b = a + 1; b < waveforms.size(); ++b) {
            out += ",C_p" + std::to_string(waveforms[a].p) + "_p" + std::to_string(waveforms[b].p) + "_abs";
        }
    }
    out += "\n";
    const int N = waveforms.front().N;
    for (int tau = 0; tau < N; ++tau) {
        out += std::to_string(tau);
        for (const auto& w : waveforms) {
            const cplx R = periodic_autocorrelation(w, tau);
            out += "," + format_number(R.real()) + "," + format_number(R.imag());
        }
        for (std::size_t a = 0; a < waveforms.size(); ++a) {
            for (std::size_t b = a + 1; b < waveforms.size(); ++b) {
                out += "," + format_number(std::abs(periodic_crosscorrelation(waveforms[a], waveforms[b], tau)));
            }
        }
        out += "\n";
    }
    return out;
}

std::string segments_csv(const std::vector<SegmentTrace>& traces)
{
    std::string out = "n";
    for (const auto& trace : traces) {
        out += ",tx" + std::to_string(trace.tx) + "_rx" + std::to_string(trace.rx);
    }
    out += "\n";
    const long N = traces.empty() ? 0 : traces.front().output.size();
    for (long n = 0; n < N; ++n) {
        out += std::to_string(n);
        for (const auto& trace : traces) {
            out += "," + format_number(std::abs(trace.output[n]));
        }
        out += "\n";
    }
    return out;
}

std::string mse_csv(const RunResult& result)
{
    std::string out = "link_tx,link_rx,mse,crb,ratio\n";
    for (const auto& row : result.links) {
        out += std::to_string(row.tx) + "," + std::to_string(row.rx) + "," + format_number(row.mse) + "," +
               format_number(row.crb) + "," + format_number(row.ratio) + "\n";
    }
    for (const auto& row : result.antennas) {
        out += std::string("all,") + (row.rx < 0 ? "all" : std::to_string(row.rx)) + "," + format_number(row.mse) +
               "," + format_number(row.crb) + "," + format_number(row.ratio) + "\n";
    }
    return out;
}

std::string capacity_csv(const RunResult& result)
{
    std::string out = "rho_db,c_syn,c_asyn,max_bin_gap\n";
    for (const auto& row : result.capacity) {
        out += format_number(row.rho_db) + "," + format_number(row.c_syn) + "," + format_number(row.c_asyn) + "," +
               format_number(row.max_bin_gap) + "\n";
    }
    return out;
}

namespace {

std::string estimates_csv(const RunResult& result)
{
    std::string out = "link_tx,link_rx,tap,h_re,h_im,h_hat_re,h_hat_im,mu,mu_hat\n";
    for (const auto& est : result.estimates) {
        for (long l = 0; l < est.h_true.size(); ++l) {
            out += std::to_string(est.tx) + "," + std::to_string(est.rx) + "," + std::to_string(l) + "," +
                   format_number(est.h_true[l].real()) + "," + format_number(est.h_true[l].imag()) + "," +
                   format_number(est.h_hat[l].real()) + "," + format_number(est.h_hat[l].imag()) + "," +
                   format_number(est.mu_true) + "," + format_number(est.mu_hat) + "\n";
        }
    }
    return out;
}

std::string papr_csv(const RunResult& result)
{
    std::string out = "p,papr\n";
    for (std::size_t k = 0; k < result.papr.size(); ++k) {
        out += std::to_string(result.p[k]) + "," + format_number(result.papr[k]) + "\n";
    }
    return out;
}

nlohmann::ordered_json record_json(const RunResult& result)
{
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["kind"] = result.kind;
    doc["run_id"] = result.run_id;
    doc["trials"] = result.trials;
    doc["seed"] = result.seed;
    doc["fractional"] = result.fractional;
    ordered_json links = ordered_json::array();
    for (const auto& row : result.links) {
        links.push_back({{"tx", row.tx}, {"rx", row.rx}, {"mse", row.mse}, {"crb", row.crb}, {"ratio", row.ratio}});
    }
    doc["links"] = links;
    ordered_json antennas = ordered_json::array();
    for (const auto& row : result.antennas) {
        ordered_json entry = {{"mse", row.mse}, {"crb", row.crb}, {"ratio", row.ratio}};
        entry["rx"] = row.rx < 0 ? ordered_json("all") : ordered_json(row.rx);
        antennas.push_back(entry);
    }
    doc["antennas"] = antennas;
    doc["p"] = result.p;
    doc["papr"] = result.papr;
    ordered_json cap = ordered_json::array();
    for (const auto& row : result.capacity) {
        cap.push_back({{"rho_db", row.rho_db},
                       {"c_syn", row.c_syn},
                       {"c_asyn", row.c_asyn},
                       {"max_bin_gap", row.max_bin_gap},
                       {"equal", row.equal}});
    }
    doc["capacity"] = cap;
    ordered_json traces = ordered_json::array();
    for (const auto& trace : result.traces) {
        std::vector<double> magnitude(static_cast<std::size_t>(trace.output.size()));
        for (long n = 0; n < trace.output.size(); ++n) {
            magnitude[static_cast<std::size_t>(n)] = std::abs(trace.output[n]);
        }
        traces.push_back({{"tx", trace.tx}, {"rx", trace.rx}, {"segments", trace.segments}, {"magnitude", magnitude}});
    }
    doc["traces"] = traces;
    ordered_json estimates = ordered_json::array();
    for (const auto& est : result.estimates) {
        std::vector<std::array<double, 2>> h, h_hat;
        for (long l = 0; l < est.h_true.size(); ++l) {
            h.push_back({est.h_true[l].real(), est.h_true[l].imag()});
            h_hat.push_back({est.h_hat[l].real(), est.h_hat[l].imag()});
        }
        estimates.push_back({{"tx", est.tx},
                             {"rx", est.rx},
                             {"h", h},
                             {"h_hat", h_hat},
                             {"mu", est.mu_true},
                             {"mu_hat", est.mu_hat},
                             {"converged", est.converged}});
    }
    doc["estimates"] = estimates;
    doc["nonconverged"] = result.nonconverged;
    doc["mean_abs_mu_error"] = result.mean_abs_mu_error;
    doc["wall_clock_s"] = result.wall_clock_s;
    doc["config_echo"] = result.config_echo;
    return doc;
}

}  // namespace

std::vector<std::filesystem::path> emit_results(const RunResult& result, const std::filesystem::path& dir,
                                                OutputFormat format)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
        const auto path = dir / name;
        write_text_file(path, text);
        written.push_back(path);
    };

    if (format == OutputFormat::csv) {
        if (result.kind == "mse") {
            emit("mse.csv", mse_csv(result));
        } else if (result.kind == "capacity") {
            emit("capacity.csv", capacity_csv(result));
        } else if (result.kind == "sound") {
            emit("segments.csv", segments_csv(result.traces));
            emit("estimates.csv", estimates_csv(result));
        }
        if (!result.papr.empty()) {
            emit("papr.csv", papr_csv(result));
        }
    } else {
        emit("result.json", record_json(result).dump(2) + "\n");
    }
    emit("config.json", result.config_echo);

    nlohmann::ordered_json sidecar = {
        {"run_id", result.run_id},
        {"kind", result.kind},
        {"timestamp", iso_timestamp()},
        {"wall_clock_s", result.wall_clock_s},
    };
    emit("run.json", sidecar.dump(2) + "\n");
    return written;
}

}  // namespace chirpsound
