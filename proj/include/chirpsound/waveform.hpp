#pragma once

// Chirp sounding waveforms
//
// s_p[n] = exp{j 2 pi (p/N) (n+1)(n+2)} / sqrt(N),  n = 0..N-1
//
// With p and N powers of two and N > 2p the periodic autocorrelation is
// +1 at multiples of N/p, -1 at odd multiples of N/(2p) and zero elsewhere,
// and any two members with different p are orthogonal at every cyclic lag.
// All lag arguments are reduced modulo N.

#include <span>
#include <string>

#include "chirpsound/types.hpp"

namespace chirpsound {

struct SoundingWaveform {
    int p = 0;
    int N = 0;
    CVector samples;  // one period, |samples[n]| = 1/sqrt(N)
};

bool is_power_of_two(long value);

// Throws ConstraintError naming the failed condition.
SoundingWaveform generate_chirp(int p, int N);

// Cyclic autocorrelation R[tau] = sum_n s[n] conj(s[(n + tau) mod N]).
cplx periodic_autocorrelation(const SoundingWaveform& w, long tau);

// Cyclic crosscorrelation C[tau] = sum_n wi[n] conj(wv[(n + tau) mod N]).
// Throws DimensionError on mismatched N and ValidationError when wi.p == wv.p.
cplx periodic_crosscorrelation(const SoundingWaveform& wi, const SoundingWaveform& wv, long tau);

// Same sum without the distinct-p precondition; used for the Gram blocks.
cplx cyclic_correlation(const CVector& a, const CVector& b, long tau);

// Peak power over mean power. Throws ValidationError for empty or all-zero input.
double papr(std::span<const cplx> samples);
double papr(const CVector& samples);

// Closed-form autocorrelation of the chirp: +1, -1 or 0.
int closed_form_autocorrelation(int p, int N, long tau);

enum class Scenario { su_siso, sync_mu_mimo, async_integer, async_fractional };

std::string to_string(Scenario tag);
Scenario scenario_from_string(const std::string& name);

struct ScenarioKind {
    Scenario tag = Scenario::async_integer;
    int lmax = 1;  // max over links of L_active + d (or of L_active when synchronous)
    int M = 0;     // pulse half-support, fractional only
};

struct ConstraintReport {
    bool satisfied = false;
    long bound = 0;   // right-hand side the period must exceed
    long slack = 0;   // N - bound
    std::string condition;
};

// Integer-offset scenarios require N > 2 pmax Lmax, the fractional scenario
// requires N > 2 pmax (2M + Lmax - 1). A violation is a normal result.
ConstraintReport check_design_constraints(int pmax, int N, const ScenarioKind& scenario);

}  // namespace chirpsound
