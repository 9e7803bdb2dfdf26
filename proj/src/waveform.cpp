#include "chirpsound/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "chirpsound/error.hpp"

namespace chirpsound {

namespace {

long wrap(long tau, long N)
{
    const long r = tau % N;
    return r < 0 ? r + N : r;
}

}  // namespace

bool is_power_of_two(long value)
{
    return value > 0 && (value & (value - 1)) == 0;
}

SoundingWaveform generate_chirp(int p, int N)
{
    if (!is_power_of_two(p)) {
        throw ConstraintError("chirp index p = " + std::to_string(p) + " is not a power of 2");
    }
    if (!is_power_of_two(N)) {
        throw ConstraintError("period N = " + std::to_string(N) + " is not a power of 2");
    }
    if (N <= 2L * p) {
        throw ConstraintError("N > 2p violated: N = " + std::to_string(N) + ", 2p = " + std::to_string(2L * p));
    }

    SoundingWaveform w;
    w.p = p;
    w.N = N;
    w.samples.resize(N);
    const double amplitude = 1.0 / std::sqrt(static_cast<double>(N));
    for (long n = 0; n < N; ++n) {
        // Reduce the integer phase numerator exactly before scaling.
        const long k = (static_cast<long>(p) * (((n + 1) * (n + 2)) % N)) % N;
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / N;
        w.samples[n] = std::polar(amplitude, phase);
    }
    return w;
}

cplx cyclic_correlation(const CVector& a, const CVector& b, long tau)
{
    if (a.size() != b.size()) {
        throw DimensionError("cyclic correlation of sequences with lengths " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()));
    }
    const long N = a.size();
    const long t = wrap(tau, N);
    cplx acc{0.0, 0.0};
    for (long n = 0; n < N - t; ++n) {
        acc += a[n] * std::conj(b[n + t]);
    }
    for (long n = N - t; n < N; ++n) {
        acc += a[n] * std::conj(b[n + t - N]);
    }
    return acc;
}

cplx periodic_autocorrelation(const SoundingWaveform& w, long tau)
{
    return cyclic_correlation(w.samples, w.samples, tau);
}

cplx periodic_crosscorrelation(const SoundingWaveform& wi, const SoundingWaveform& wv, long tau)
{
    if (wi.N != wv.N) {
        throw DimensionError("crosscorrelation needs a common period, got N = " + std::to_string(wi.N) + " and " +
                             std::to_string(wv.N));
    }
    if (wi.p == wv.p) {
        throw ValidationError("crosscorrelation needs distinct chirp indices, both have p = " + std::to_string(wi.p));
    }
    return cyclic_correlation(wi.samples, wv.samples, tau);
}

double papr(std::span<const cplx> samples)
{
    if (samples.empty()) {
        throw ValidationError("PAPR of an empty sequence is undefined");
    }
    double peak = 0.0;
    double total = 0.0;
    for (const cplx& x : samples) {
        const double power = std::norm(x);
        peak = std::max(peak, power);
        total += power;
    }
    if (total == 0.0) {
        throw ValidationError("PAPR of an all-zero sequence is undefined");
    }
    return peak / (total / static_cast<double>(samples.size()));
}

double papr(const CVector& samples)
{
    return papr(std::span<const cplx>(samples.data(), static_cast<std::size_t>(samples.size())));
}

int closed_form_autocorrelation(int p, int N, long tau)
{
    const long t = wrap(tau, N);
    const long half_spacing = N / (2L * p);
    if (t % half_spacing != 0) {
        return 0;
    }
    return (t / half_spacing) % 2 == 0 ? 1 : -1;
}

std::string to_string(Scenario tag)
{
    switch (tag) {
        case Scenario::su_siso: return "su-siso";
        case Scenario::sync_mu_mimo: return "sync-mu-mimo";
        case Scenario::async_integer: return "async-integer";
        case Scenario::async_fractional: return "async-fractional";
    }
    return "unknown";
}

Scenario scenario_from_string(const std::string& name)
{
    for (Scenario s : {Scenario::su_siso, Scenario::sync_mu_mimo, Scenario::async_integer, Scenario::async_fractional}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ValidationError("unknown scenario '" + name + "'");
}

ConstraintReport check_design_constraints(int pmax, int N, const ScenarioKind& scenario)
{
    if (scenario.lmax < 1) {
        throw ValidationError("scenario Lmax must be at least 1");
    }
    if (scenario.tag == Scenario::async_fractional && scenario.M < 1) {
        throw ValidationError("fractional scenario needs pulse half-support M >= 1");
    }
    ConstraintReport report;
    std::ostringstream cond;
    if (scenario.tag == Scenario::async_fractional) {
        const long window = 2L * scenario.M + scenario.lmax - 1;
        report.bound = 2L * pmax * window;
        cond << "N > 2*pmax*(2M+Lmax-1): " << N << " > 2*" << pmax << "*(2*" << scenario.M << "+" << scenario.lmax
             << "-1) = " << report.bound;
    } else {
        report.bound = 2L * pmax * scenario.lmax;
        cond << "N > 2*pmax*Lmax: " << N << " > 2*" << pmax << "*" << scenario.lmax << " = " << report.bound;
    }
    report.slack = N - report.bound;
    report.satisfied = report.slack > 0;
    report.condition = cond.str();
    return report;
}

}  // namespace chirpsound
