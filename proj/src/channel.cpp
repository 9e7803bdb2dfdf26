#include "chirpsound/channel.hpp"

#include <cmath>
#include <map>

#include "chirpsound/error.hpp"

namespace chirpsound {

namespace {

void check_waveforms(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms)
{
    if (static_cast<int>(waveforms.size()) != scenario.nt()) {
        throw DimensionError("need one waveform per transmit antenna: got " + std::to_string(waveforms.size()) +
                             " for Nt = " + std::to_string(scenario.nt()));
    }
    for (const auto& w : waveforms) {
        if (w.N != waveforms.front().N) {
            throw DimensionError("all sounding waveforms must share one period N");
        }
    }
}

inline long wrap(long k, long N)
{
    const long r = k % N;
    return r < 0 ? r + N : r;
}

}  // namespace

MimoScenario synthesize_channels(const ScenarioConfig& cfg, RandomStream& rng)
{
    validate(cfg);

    MimoScenario scenario;
    scenario.mt = cfg.mt();
    scenario.mr = cfg.mr();
    scenario.tx_node = cfg.tx_nodes;
    scenario.rx_node = cfg.rx_nodes;
    scenario.L = cfg.L;
    scenario.noise_var.assign(static_cast<std::size_t>(cfg.nr()), 0.0);
    scenario.links.resize(static_cast<std::size_t>(cfg.nt() * cfg.nr()));

    for (int i = 0; i < cfg.nt(); ++i) {
        for (int m = 0; m < cfg.nr(); ++m) {
            const int k = cfg.link_index(i, m);
            LinkChannel& link = scenario.link(i, m);
            link.d = cfg.offsets[k];
            link.active = cfg.active_taps[k];
            link.taps = CVector::Zero(cfg.L);
            for (int l = 0; l < link.active; ++l) {
                link.taps[link.d + l] = rng.complex_normal(0.5);
            }
            const double energy = link.taps.squaredNorm();
            if (cfg.normalize_taps && energy > 0.0) {
                link.taps /= std::sqrt(energy);
            }
            if (cfg.fractional && cfg.mu_policy == MuPolicy::fixed) {
                link.mu = cfg.mu[k];
            }
        }
    }
    if (cfg.fractional && cfg.mu_policy == MuPolicy::uniform) {
        draw_fractional_offsets(scenario, rng);
    }
    return scenario;
}

void draw_fractional_offsets(MimoScenario& scenario, RandomStream& rng)
{
    // Pairs are visited in a fixed order so draws are reproducible.
    std::map<std::pair<int, int>, double> per_pair;
    for (int a = 0; a < scenario.mt; ++a) {
        for (int b = 0; b < scenario.mr; ++b) {
            // uniform() is on (0, 1], so mu lands in (0, 1/2].
            per_pair[{a, b}] = 0.5 * rng.uniform();
        }
    }
    for (int i = 0; i < scenario.nt(); ++i) {
        for (int m = 0; m < scenario.nr(); ++m) {
            scenario.link(i, m).mu = per_pair.at({scenario.tx_node[i], scenario.rx_node[m]});
        }
    }
}

double snr_to_noise_var(double received_power, double snr_db)
{
    return received_power / (2.0 * std::pow(10.0, snr_db / 10.0));
}

void calibrate_noise(MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                     std::span<const double> snr_db)
{
    if (static_cast<int>(snr_db.size()) != scenario.nr()) {
        throw DimensionError("need one SNR per receive antenna");
    }
    const auto clean = noiseless_integer(scenario, waveforms);
    scenario.noise_var.resize(static_cast<std::size_t>(scenario.nr()));
    for (int m = 0; m < scenario.nr(); ++m) {
        const double power = clean[static_cast<std::size_t>(m)].squaredNorm() / static_cast<double>(clean[0].size());
        scenario.noise_var[static_cast<std::size_t>(m)] = snr_to_noise_var(power, snr_db[static_cast<std::size_t>(m)]);
    }
}

std::vector<CVector> noiseless_integer(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms)
{
    check_waveforms(scenario, waveforms);
    const long N = waveforms.front().N;
    std::vector<CVector> streams(static_cast<std::size_t>(scenario.nr()), CVector::Zero(N));
    for (int m = 0; m < scenario.nr(); ++m) {
        CVector& r = streams[static_cast<std::size_t>(m)];
        for (int i = 0; i < scenario.nt(); ++i) {
            const CVector& s = waveforms[static_cast<std::size_t>(i)].samples;
            const CVector& h = scenario.link(i, m).taps;
            for (long l = 0; l < h.size(); ++l) {
                if (h[l] == cplx{}) {
                    continue;
                }
                for (long n = 0; n < N; ++n) {
                    r[n] += h[l] * s[wrap(n - l, N)];
                }
            }
        }
    }
    return streams;
}

std::vector<CVector> noiseless_fractional(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                                          const PulseShape& pulse)
{
    check_waveforms(scenario, waveforms);
    const long N = waveforms.front().N;
    const int M = pulse.half_support();
    std::vector<CVector> streams(static_cast<std::size_t>(scenario.nr()), CVector::Zero(N));
    for (int m = 0; m < scenario.nr(); ++m) {
        CVector& r = streams[static_cast<std::size_t>(m)];
        for (int i = 0; i < scenario.nt(); ++i) {
            const CVector& s = waveforms[static_cast<std::size_t>(i)].samples;
            const LinkChannel& link = scenario.link(i, m);
            const long L = link.taps.size();
            // r[n] += sum_l sum_y s[n - y] g(y + mu - l) h[l],  y = -M .. M+L-2
            for (long l = 0; l < L; ++l) {
                const cplx h = link.taps[l];
                if (h == cplx{}) {
                    continue;
                }
                for (long y = -M; y <= M + L - 2; ++y) {
                    const double g = pulse(static_cast<double>(y) + link.mu - static_cast<double>(l));
                    if (g == 0.0) {
                        continue;
                    }
                    const cplx weight = g * h;
                    for (long n = 0; n < N; ++n) {
                        r[n] += weight * s[wrap(n - y, N)];
                    }
                }
            }
        }
    }
    return streams;
}

void add_noise(std::vector<CVector>& streams, std::span<const double> noise_var, RandomStream& rng)
{
    if (streams.size() != noise_var.size()) {
        throw DimensionError("need one noise variance per receive stream");
    }
    for (std::size_t m = 0; m < streams.size(); ++m) {
        for (long n = 0; n < streams[m].size(); ++n) {
            streams[m][n] += rng.complex_normal(noise_var[m]);
        }
    }
}

std::vector<CVector> receive_integer(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                                     RandomStream& rng)
{
    auto streams = noiseless_integer(scenario, waveforms);
    add_noise(streams, scenario.noise_var, rng);
    return streams;
}

std::vector<CVector> receive_fractional(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                                        const PulseShape& pulse, RandomStream& rng)
{
    auto streams = noiseless_fractional(scenario, waveforms, pulse);
    add_noise(streams, scenario.noise_var, rng);
    return streams;
}

}  // namespace chirpsound
