#include "chirpsound/estimator.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "chirpsound/error.hpp"

namespace chirpsound {

namespace {

inline long wrap(long k, long N)
{
    const long r = k % N;
    return r < 0 ? r + N : r;
}

CMatrix toeplitz_columns(const CVector& s, long rows, long cols, long offset)
{
    const long N = s.size();
    CMatrix S(rows, cols);
    for (long c = 0; c < cols; ++c) {
        for (long r = 0; r < rows; ++r) {
            S(r, c) = s[wrap(offset + r - c, N)];
        }
    }
    return S;
}

// G(r, c) depends only on r - c, so fill from the 2M + 2L - 2 distinct
// pulse samples g(k + mu), k = -(M + L - 1) .. M + L - 2.
template <typename Sample>
RMatrix toeplitz_shaping(Sample&& sample, double mu, int L, int M)
{
    const int rows = 2 * M + L - 1;
    const int first = -(M + L - 1);
    std::vector<double> values(static_cast<std::size_t>(2 * M + 2 * L - 2));
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = sample(static_cast<double>(first + static_cast<int>(k)) + mu);
    }
    RMatrix G(rows, L);
    for (int c = 0; c < L; ++c) {
        for (int r = 0; r < rows; ++r) {
            G(r, c) = values[static_cast<std::size_t>(r - M - c - first)];
        }
    }
    return G;
}

RMatrix shaping_derivative(const PulseShape& pulse, double mu, int L, int M)
{
    return toeplitz_shaping([&](double t) { return pulse.derivative(t); }, mu, L, M);
}

RMatrix shaping_unchecked(const PulseShape& pulse, double mu, int L, int M)
{
    return toeplitz_shaping([&](double t) { return pulse.evaluate(t); }, mu, L, M);
}

// Newton on f'(mu) = 0 inside a bracket where f' goes from negative to
// positive; steps that leave the bracket fall back to bisection.
template <typename Derivative>
double bracketed_newton(Derivative&& deriv, double lo, double hi, double start)
{
    constexpr double step = 1e-6;
    double x = (start > lo && start < hi) ? start : 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double slope = deriv(x);
        if (slope == 0.0) {
            return x;
        }
        if (slope < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double curvature = (deriv(x + step) - deriv(x - step)) / (2.0 * step);
        double next = x - slope / curvature;
        if (!(curvature > 0.0) || !(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - x) < 1e-14 || hi - lo < 1e-14) {
            return next;
        }
        x = next;
    }
    return x;
}

// Scan f' on a coarse grid of [0, 1/2], refine every - to + sign change,
// and keep the best of those minima and the two endpoints.
template <typename Derivative, typename Objective>
double scan_and_refine(Derivative&& deriv, Objective&& objective, double start)
{
    constexpr double lo = 0.0;
    constexpr double hi = 0.5;
    constexpr int scan = 16;

    std::vector<double> candidates{lo, hi};
    double prev_mu = lo;
    double prev_slope = deriv(lo);
    for (int k = 1; k <= scan; ++k) {
        const double mu = lo + (hi - lo) * k / scan;
        const double slope = deriv(mu);
        if (prev_slope < 0.0 && slope >= 0.0) {
            candidates.push_back(bracketed_newton(deriv, prev_mu, mu, start));
        }
        prev_mu = mu;
        prev_slope = slope;
    }

    double best = candidates.front();
    double best_value = objective(best);
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        const double value = objective(candidates[k]);
        if (value < best_value) {
            best = candidates[k];
            best_value = value;
        }
    }
    return best;
}

}  // namespace

SoundingMatrix build_sounding_matrix(const SoundingWaveform& w, int L, SoundingKind kind, int M)
{
    if (L < 1) {
        throw DimensionError("sounding matrix needs L >= 1, got " + std::to_string(L));
    }
    SoundingMatrix S;
    S.kind = kind;
    S.p = w.p;
    S.N = w.N;
    long cols = L;
    if (kind == SoundingKind::fractional) {
        if (M < 1) {
            throw DimensionError("fractional sounding matrix needs M >= 1");
        }
        cols = 2L * M + L - 1;
        S.offset = M;
    } else if (kind == SoundingKind::full) {
        throw DimensionError("use build_full_sounding_matrix for the N x N matched filter");
    }
    if (w.N < cols) {
        throw DimensionError("sounding matrix would have " + std::to_string(cols) + " columns but only N = " +
                             std::to_string(w.N) + " rows");
    }
    S.entries = toeplitz_columns(w.samples, w.N, cols, S.offset);
    return S;
}

SoundingMatrix build_full_sounding_matrix(const SoundingWaveform& w, int offset)
{
    SoundingMatrix S;
    S.kind = SoundingKind::full;
    S.offset = offset;
    S.p = w.p;
    S.N = w.N;
    S.entries = toeplitz_columns(w.samples, w.N, w.N, offset);
    return S;
}

CVector matched_filter_integer(const SoundingMatrix& S, const CVector& r)
{
    if (S.entries.rows() != r.size()) {
        throw DimensionError("matched filter expects " + std::to_string(S.entries.rows()) +
                             " received samples, got " + std::to_string(r.size()));
    }
    return S.entries.adjoint() * r;
}

CVector matched_filter_fractional(const SoundingMatrix& S, const CVector& r)
{
    if (S.kind != SoundingKind::fractional) {
        throw DimensionError("fractional matched filter needs an N x (2M+L-1) sounding matrix");
    }
    return matched_filter_integer(S, r);
}

RMatrix build_shaping_matrix(const PulseShape& pulse, double mu, int L, int M)
{
    if (!(mu >= 0.0 && mu <= 0.5)) {
        throw ValidationError("fractional offset must lie in [0, 1/2], got " + std::to_string(mu));
    }
    if (L < 1 || M < 1) {
        throw DimensionError("shaping matrix needs L >= 1 and M >= 1");
    }
    return shaping_unchecked(pulse, mu, L, M);
}

double shaping_residual(const CVector& raw_output, const PulseShape& pulse, double mu, const CVector& h, int M)
{
    const RMatrix G = shaping_unchecked(pulse, mu, static_cast<int>(h.size()), M);
    return (raw_output - G.cast<cplx>() * h).squaredNorm();
}

double shaping_residual_derivative(const CVector& raw_output, const PulseShape& pulse, double mu, const CVector& h,
                                   int M)
{
    const int L = static_cast<int>(h.size());
    const RMatrix G = shaping_unchecked(pulse, mu, L, M);
    const RMatrix dG = shaping_derivative(pulse, mu, L, M);
    const CVector residual = raw_output - G.cast<cplx>() * h;
    const CVector slope = dG.cast<cplx>() * h;
    return -2.0 * residual.dot(slope).real();
}

CVector solve_taps(const CVector& raw_output, const RMatrix& G, double max_condition)
{
    if (G.rows() != raw_output.size()) {
        throw DimensionError("shaping matrix rows do not match the matched-filter output length");
    }
    Eigen::ColPivHouseholderQR<RMatrix> qr(G);
    const double top = std::abs(qr.matrixQR()(0, 0));
    const double bottom = std::abs(qr.matrixQR()(G.cols() - 1, G.cols() - 1));
    const double condition = bottom > 0.0 ? top / bottom : INFINITY;
    if (!(condition <= max_condition)) {
        std::ostringstream msg;
        msg << "shaping matrix is ill-conditioned (condition estimate " << condition << ")";
        throw NumericalError(msg.str());
    }
    const RVector re = qr.solve(RVector(raw_output.real()));
    const RVector im = qr.solve(RVector(raw_output.imag()));
    CVector h(G.cols());
    for (long k = 0; k < h.size(); ++k) {
        h[k] = cplx{re[k], im[k]};
    }
    return h;
}

double minimize_offset(const CVector& raw_output, const PulseShape& pulse, const CVector& h, int M, double start)
{
    return scan_and_refine([&](double mu) { return shaping_residual_derivative(raw_output, pulse, mu, h, M); },
                           [&](double mu) { return shaping_residual(raw_output, pulse, mu, h, M); }, start);
}

double minimize_projected_offset(const CVector& raw_output, const PulseShape& pulse, int L, int M, double start,
                                 double max_condition)
{
    auto taps = [&](double mu) { return solve_taps(raw_output, shaping_unchecked(pulse, mu, L, M), max_condition); };
    // h(mu) zeroes the gradient in h, so the reduced derivative is the partial in mu.
    return scan_and_refine(
        [&](double mu) { return shaping_residual_derivative(raw_output, pulse, mu, taps(mu), M); },
        [&](double mu) { return shaping_residual(raw_output, pulse, mu, taps(mu), M); }, start);
}

EstimateReport joint_estimate(const CVector& raw_output, const PulseShape& pulse, int L, int M,
                              const JointOptions& opts)
{
    if (L < 1 || M < 1) {
        throw DimensionError("joint estimation needs L >= 1 and M >= 1");
    }
    if (raw_output.size() != 2L * M + L - 1) {
        throw DimensionError("joint estimation expects a matched-filter output of length 2M+L-1 = " +
                             std::to_string(2 * M + L - 1) + ", got " + std::to_string(raw_output.size()));
    }

    EstimateReport report;
    report.raw_output = raw_output;
    const double energy = raw_output.squaredNorm();
    if (energy == 0.0) {
        report.h_hat = CVector::Zero(L);
        report.converged = true;
        return report;
    }

    double mu = opts.mu_init;
    CVector h = solve_taps(raw_output, shaping_unchecked(pulse, mu, L, M), opts.max_condition);
    double residual = shaping_residual(raw_output, pulse, mu, h, M);

    for (int it = 1; it <= opts.max_iters; ++it) {
        const double next_mu = opts.offset_step == OffsetStep::projected
                                   ? minimize_projected_offset(raw_output, pulse, L, M, mu, opts.max_condition)
                                   : minimize_offset(raw_output, pulse, h, M, mu);
        h = solve_taps(raw_output, shaping_unchecked(pulse, next_mu, L, M), opts.max_condition);
        const double next_residual = shaping_residual(raw_output, pulse, next_mu, h, M);
        const double mu_step = std::abs(next_mu - mu);
        const double residual_change = std::abs(residual - next_residual) / energy;
        mu = next_mu;
        residual = next_residual;
        report.iterations = it;
        if (mu_step < opts.tol_mu && residual_change < opts.tol_residual) {
            report.converged = true;
            break;
        }
    }

    report.h_hat = std::move(h);
    report.mu_hat = mu;
    report.residual = residual;
    return report;
}

CVector SegmentedOutput::sign_corrected_average(int length) const
{
    CVector acc = CVector::Zero(length);
    for (int j = 0; j < segments; ++j) {
        acc += static_cast<double>(sign(j)) * segment(j).head(length);
    }
    return acc / static_cast<double>(segments);
}

SegmentedOutput segmented_output(const SoundingMatrix& full, const CVector& r)
{
    if (full.entries.rows() != full.entries.cols() || full.entries.rows() != full.N) {
        throw DimensionError("segmented output needs the N x N matched filter");
    }
    SegmentedOutput out;
    out.output = matched_filter_integer(full, r);
    out.segments = 2 * full.p;
    out.segment_length = full.N / out.segments;
    return out;
}

}  // namespace chirpsound
