#pragma once

// Asynchronous MU-MIMO multipath channel and received-sample synthesis.
//
// Each Tx-antenna -> Rx-antenna link carries L taps whose first d are zero
// (the integer clock offset folded into the response) and an optional
// fractional offset mu in (0, 1/2]; mu = 0 marks an integer-only link.
// Waveform indices wrap modulo N throughout (cyclic sounding).

#include <span>
#include <vector>

#include "chirpsound/config.hpp"
#include "chirpsound/pulse.hpp"
#include "chirpsound/rng.hpp"
#include "chirpsound/types.hpp"
#include "chirpsound/waveform.hpp"

namespace chirpsound {

struct LinkChannel {
    CVector taps;     // length L, taps[0..d-1] == 0
    int d = 0;
    double mu = 0.0;
    int active = 0;   // number of taps drawn nonzero

    int length() const { return static_cast<int>(taps.size()); }
    // Taps with the integer offset removed, length L - d.
    CVector aligned_taps() const { return taps.segment(d, taps.size() - d); }
};

struct MimoScenario {
    int mt = 0;
    int mr = 0;
    std::vector<int> tx_node;
    std::vector<int> rx_node;
    int L = 0;
    std::vector<LinkChannel> links;  // index i * nr + m
    std::vector<double> noise_var;   // sigma_m^2 per real dimension, per rx antenna

    int nt() const { return static_cast<int>(tx_node.size()); }
    int nr() const { return static_cast<int>(rx_node.size()); }
    LinkChannel& link(int i, int m) { return links[static_cast<std::size_t>(i * nr() + m)]; }
    const LinkChannel& link(int i, int m) const { return links[static_cast<std::size_t>(i * nr() + m)]; }
};

// Draws taps (and, for a fractional config with uniform policy, one mu per
// node pair) from `rng`. Noise variances are left at zero; see calibrate_noise.
MimoScenario synthesize_channels(const ScenarioConfig& cfg, RandomStream& rng);

// Redraws mu uniformly in (0, 1/2], one value per (tx node, rx node) pair.
void draw_fractional_offsets(MimoScenario& scenario, RandomStream& rng);

// Sets sigma_m^2 = P_m / (2 * 10^(snr_m/10)) where P_m is the mean power of
// the noiseless integer-offset stream at antenna m.
void calibrate_noise(MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                     std::span<const double> snr_db);

double snr_to_noise_var(double received_power, double snr_db);

std::vector<CVector> noiseless_integer(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms);
std::vector<CVector> noiseless_fractional(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                                          const PulseShape& pulse);

// Adds circular complex Gaussian noise with variance 2 sigma_m^2 per sample.
void add_noise(std::vector<CVector>& streams, std::span<const double> noise_var, RandomStream& rng);

std::vector<CVector> receive_integer(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                                     RandomStream& rng);
std::vector<CVector> receive_fractional(const MimoScenario& scenario, std::span<const SoundingWaveform> waveforms,
                                        const PulseShape& pulse, RandomStream& rng);

}  // namespace chirpsound
