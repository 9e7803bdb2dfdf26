#include "chirpsound/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "chirpsound/error.hpp"

namespace chirpsound {

double mse(const CVector& h_true, std::span<const CVector> estimates)
{
    if (estimates.empty()) {
        throw ValidationError("MSE needs at least one trial");
    }
    double total = 0.0;
    for (const CVector& h : estimates) {
        if (h.size() != h_true.size()) {
            throw DimensionError("estimate length differs from the true channel length");
        }
        total += (h_true - h).squaredNorm();
    }
    return total / static_cast<double>(estimates.size());
}

double crb(int L, double sigma2)
{
    return 2.0 * L * sigma2;
}

CVector frequency_response(const LinkChannel& link, const FrequencyGrid& grid, ResponseMode mode)
{
    const CVector taps = link.aligned_taps();
    const double delay = link.d + link.mu;
    CVector response(grid.K);
    for (int k = 0; k < grid.K; ++k) {
        const double f = grid.frequency(k);
        cplx acc{0.0, 0.0};
        for (long l = 0; l < taps.size(); ++l) {
            acc += taps[l] * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(l));
        }
        if (mode == ResponseMode::async) {
            acc *= std::polar(1.0, -2.0 * std::numbers::pi * f * delay);
        }
        response[k] = acc;
    }
    return response;
}

std::vector<CMatrix> channel_matrices(const MimoScenario& scenario, const FrequencyGrid& grid, ResponseMode mode)
{
    std::vector<CMatrix> H(static_cast<std::size_t>(grid.K), CMatrix::Zero(scenario.nr(), scenario.nt()));
    for (int i = 0; i < scenario.nt(); ++i) {
        for (int m = 0; m < scenario.nr(); ++m) {
            const CVector response = frequency_response(scenario.link(i, m), grid, mode);
            for (int k = 0; k < grid.K; ++k) {
                H[static_cast<std::size_t>(k)](m, i) = response[k];
            }
        }
    }
    return H;
}

double capacity_integrand(const CMatrix& H, double rho)
{
    const long nt = H.cols();
    const CMatrix A = CMatrix::Identity(nt, nt) + (rho / static_cast<double>(nt)) * (H.adjoint() * H);
    // A is Hermitian positive definite, so log det = 2 sum log diag(chol).
    Eigen::LLT<CMatrix> chol(A);
    if (chol.info() != Eigen::Success) {
        throw NumericalError("capacity matrix is not positive definite");
    }
    double log_det = 0.0;
    for (long k = 0; k < nt; ++k) {
        log_det += 2.0 * std::log2(chol.matrixL()(k, k).real());
    }
    return log_det;
}

CapacityResult capacity(std::span<const CMatrix> H_grid, double rho)
{
    if (!(rho >= 0.0) || !std::isfinite(rho)) {
        throw ValidationError("capacity needs a finite rho >= 0");
    }
    if (H_grid.empty()) {
        throw ValidationError("capacity needs at least one frequency bin");
    }
    CapacityResult result;
    result.integrand.reserve(H_grid.size());
    for (const CMatrix& H : H_grid) {
        if (!H.allFinite()) {
            throw ValidationError("channel matrix has non-finite entries");
        }
        result.integrand.push_back(capacity_integrand(H, rho));
    }
    double total = 0.0;
    for (double v : result.integrand) {
        total += v;
    }
    result.value = total / static_cast<double>(H_grid.size());
    return result;
}

EquivalenceReport capacity_equivalence_report(const MimoScenario& scenario, const FrequencyGrid& grid, double rho)
{
    const auto H_sync = channel_matrices(scenario, grid, ResponseMode::sync);
    const auto H_async = channel_matrices(scenario, grid, ResponseMode::async);
    const CapacityResult syn = capacity(H_sync, rho);
    const CapacityResult asyn = capacity(H_async, rho);

    EquivalenceReport report;
    report.c_syn = syn.value;
    report.c_asyn = asyn.value;
    for (std::size_t k = 0; k < syn.integrand.size(); ++k) {
        report.max_bin_gap = std::max(report.max_bin_gap, std::abs(syn.integrand[k] - asyn.integrand[k]));
    }
    report.equal = report.max_bin_gap < 1e-9;
    return report;
}

}  // namespace chirpsound
