#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "chirpsound/channel.hpp"
#include "chirpsound/types.hpp"

namespace chirpsound {

// Sample mean of ||h_true - h_hat||^2 over the trials.
double mse(const CVector& h_true, std::span<const CVector> estimates);

// Cramer-Rao bound 2 L sigma^2 on the total squared error of L complex taps,
// with sigma^2 the per-real-dimension noise variance.
double crb(int L, double sigma2);

// K uniform bins over the normalized bandwidth, f_k = k / K.
struct FrequencyGrid {
    int K = 256;
    double frequency(int k) const { return static_cast<double>(k) / K; }
};

enum class ResponseMode { sync, async };

// sync: DTFT of the offset-stripped taps; async: the same times
// exp(-j 2 pi f (d + mu)).
CVector frequency_response(const LinkChannel& link, const FrequencyGrid& grid, ResponseMode mode);

// Per-bin Nr x Nt channel matrices, H(f)[m][i] = h_{i,m}(f).
std::vector<CMatrix> channel_matrices(const MimoScenario& scenario, const FrequencyGrid& grid, ResponseMode mode);

// log2 det(I + (rho/Nt) H^H H)
double capacity_integrand(const CMatrix& H, double rho);

struct CapacityResult {
    double value = 0.0;             // bits/s/Hz
    std::vector<double> integrand;  // per bin
};

// Bin average of the equal-power log-det integrand; rho is linear.
// Throws ValidationError for rho < 0 or non-finite channel entries.
CapacityResult capacity(std::span<const CMatrix> H_grid, double rho);

struct EquivalenceReport {
    double c_syn = 0.0;
    double c_asyn = 0.0;
    double max_bin_gap = 0.0;
    bool equal = false;
};

// equal := largest per-bin integrand gap < 1e-9.
EquivalenceReport capacity_equivalence_report(const MimoScenario& scenario, const FrequencyGrid& grid, double rho);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace chirpsound
