#pragma once
#include "afrelay/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace afrelay {

/// Power split of one OFDM frame: mu(i) is the share of the total budget on
/// subcarrier i, beta(k, i) the share of that subcarrier's power spent by
/// transmitting node k (node k feeds hop k+1).
struct Allocation {
    Vector mu;
    Matrix beta;

    int hops() const noexcept { return static_cast<int>(beta.rows()); }
    int subcarriers() const noexcept { return static_cast<int>(beta.cols()); }
    Matrix alpha() const { return beta.rowwise() * mu.transpose(); }
};

struct RateReport {
    Vector snr;     // end-to-end SNR per subcarrier
    double rate = 0;  // bit/s/Hz
    std::optional<double> approx_rate;
};

// Squared AF gain keeping the relay output at target_power.
double relay_gain(double prev_power, double gain_sq, double noise, double target_power);

// End-to-end SNR of an AF chain from its per-hop SNRs, product form.
// Any zero hop gives 0; negative entries throw DomainError.
double end_to_end_snr(std::span<const double> hop_snrs);

// Same quantity by folding the two-hop composition g1*g2/(g1+g2+1) left to right.
double cascade_snr(std::span<const double> hop_snrs);

// Elementary symmetric polynomials e_1..e_N of x, i.e. coefficients of
// prod_k (t + x_k) = t^N + e_1 t^(N-1) + ... + e_N.
std::vector<double> elementary_symmetric(std::span<const double> x);

// A_m for one subcarrier with x_k = 1/(beta_k * gamma_{k+1}).
std::vector<double> a_coefficients(std::span<const double> beta_col, std::span<const double> gamma_col);

// Per-hop SNRs beta(k,i) * mu(i) * gamma(k,i) for subcarrier i.
std::vector<double> allocated_hop_snrs(const ChannelRealization& realization, const Allocation& allocation, int subcarrier);

RateReport instantaneous_rate(const ChannelRealization& realization, const Allocation& allocation);

// High-SNR rate keeping only the A_1 term. Subcarriers with mu = 0 contribute 0.
double approx_rate(const ChannelRealization& realization, const Allocation& allocation);

// Throws DomainError if shapes disagree or entries are negative / non-finite.
void check_allocation(const ChannelRealization& realization, const Allocation& allocation);

} // namespace afrelay
