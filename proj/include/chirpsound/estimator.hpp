#pragma once

// Matched-filter channel estimation.
//
// The integer-offset sounding matrix is the N x L cyclic Toeplitz matrix
// S(r, c) = s[(r - c) mod N]; the fractional one is N x (2M+L-1) with
// S(r, c) = s[(M + r - c) mod N]. When the design constraints hold, the
// Gram blocks S_i^H S_v are identity (i == v) or zero, so the matched filter
// S_i^H r_m isolates one link.

#include <optional>

#include "chirpsound/pulse.hpp"
#include "chirpsound/types.hpp"
#include "chirpsound/waveform.hpp"

namespace chirpsound {

enum class SoundingKind { integer, fractional, full };

struct SoundingMatrix {
    CMatrix entries;
    SoundingKind kind = SoundingKind::integer;
    int offset = 0;  // row shift: 0 for integer, M for fractional/full
    int p = 0;
    int N = 0;
};

// Throws DimensionError for L < 1 or fewer rows than columns.
SoundingMatrix build_sounding_matrix(const SoundingWaveform& w, int L, SoundingKind kind, int M = 0);

// N x N matched filter with the given row offset (M, or 0 for integer offsets).
SoundingMatrix build_full_sounding_matrix(const SoundingWaveform& w, int offset);

CVector matched_filter_integer(const SoundingMatrix& S, const CVector& r);
CVector matched_filter_fractional(const SoundingMatrix& S, const CVector& r);

// (2M+L-1) x L pulse-shaping matrix, G(r, c) = g(r - M + mu - c).
// Throws ValidationError for mu outside [0, 1/2].
RMatrix build_shaping_matrix(const PulseShape& pulse, double mu, int L, int M);

// How the mu-step treats the taps. `projected` minimizes over mu with h
// re-solved by least squares at every candidate mu; `fixed_taps` holds the
// previous h fixed, which is plain coordinate descent and converges slowly.
enum class OffsetStep { projected, fixed_taps };

struct JointOptions {
    OffsetStep offset_step = OffsetStep::projected;
    double mu_init = 0.25;
    double tol_mu = 1e-8;
    // on |residual change| / ||h^F||^2
    double tol_residual = 1e-10;
    int max_iters = 50;
    // condition-number ceiling for the least-squares h-step
    double max_condition = 1e12;
};

struct EstimateReport {
    CVector h_hat;
    std::optional<double> mu_hat;  // empty when the input carries no signal
    CVector raw_output;
    int iterations = 0;
    double residual = 0.0;  // ||h^F - G(mu_hat) h_hat||^2
    bool converged = false;
};

// Alternating minimization of ||h^F - G(mu) h||^2 over mu in [0, 1/2] and h.
// Throws NumericalError when G^T G is numerically singular.
EstimateReport joint_estimate(const CVector& raw_output, const PulseShape& pulse, int L, int M,
                              const JointOptions& opts = {});

// The pieces of the joint estimator, exposed for oracles and diagnostics.
double shaping_residual(const CVector& raw_output, const PulseShape& pulse, double mu, const CVector& h, int M);
double shaping_residual_derivative(const CVector& raw_output, const PulseShape& pulse, double mu, const CVector& h,
                                   int M);
// Least-squares h for fixed mu via column-pivoted QR.
CVector solve_taps(const CVector& raw_output, const RMatrix& G, double max_condition = 1e12);
// Safeguarded Newton minimization of the mu-step objective on [0, 1/2].
double minimize_offset(const CVector& raw_output, const PulseShape& pulse, const CVector& h, int M, double start);
// Same search on the reduced objective min_h ||h^F - G(mu) h||^2.
double minimize_projected_offset(const CVector& raw_output, const PulseShape& pulse, int L, int M, double start,
                                 double max_condition = 1e12);

// N-length matched-filter output split into 2p segments of length N/(2p).
// Noise-free, segment j starts with (-1)^j G(mu) h.
struct SegmentedOutput {
    CVector output;
    int segment_length = 0;
    int segments = 0;

    CVector segment(int j) const { return output.segment(static_cast<long>(j) * segment_length, segment_length); }
    int sign(int j) const { return j % 2 == 0 ? 1 : -1; }
    // Mean of the sign-corrected leading `length` entries of every segment.
    CVector sign_corrected_average(int length) const;
};

SegmentedOutput segmented_output(const SoundingMatrix& full, const CVector& r);

}  // namespace chirpsound
