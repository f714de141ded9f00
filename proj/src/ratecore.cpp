#include "afrelay/ratecore.hpp"

#include "afrelay/errors.hpp"

#include <cmath>
#include <string>

namespace afrelay {

double relay_gain(double prev_power, double gain_sq, double noise, double target_power)
{
    if (!(noise > 0)) throw DomainError("relay_gain: noise power must be > 0");
    if (prev_power < 0 || gain_sq < 0 || target_power < 0)
        throw DomainError("relay_gain: powers and channel gain must be >= 0");
    return target_power / (prev_power * gain_sq + noise);
}

namespace {

// true when some hop is dead
bool check_hops(std::span<const double> hop_snrs)
{
    if (hop_snrs.empty()) throw DomainError("end-to-end SNR of an empty chain");
    bool dead = false;
    for (double g : hop_snrs) {
        if (std::isnan(g) || g < 0) throw DomainError("hop SNR must be >= 0");
        dead = dead || g == 0.0;
    }
    return dead;
}

} // namespace

double end_to_end_snr(std::span<const double> hop_snrs)
{
    if (check_hops(hop_snrs)) return 0.0;
    if (hop_snrs.size() == 1) return hop_snrs[0];
    // prod(1 + 1/g) - 1 without cancellation at high SNR
    double log_prod = 0;
    for (double g : hop_snrs) log_prod += std::log1p(1.0 / g);
    return 1.0 / std::expm1(log_prod);
}

double cascade_snr(std::span<const double> hop_snrs)
{
    if (check_hops(hop_snrs)) return 0.0;
    double acc = hop_snrs[0];
    for (std::size_t k = 1; k < hop_snrs.size(); ++k) {
        const double g = hop_snrs[k];
        if (std::isinf(acc)) acc = g;
        else if (!std::isinf(g)) acc = acc * g / (acc + g + 1.0);
    }
    return acc;
}

std::vector<double> elementary_symmetric(std::span<const double> x)
{
    // multiply out (t + x_0)(t + x_1)...; e[m] holds the t^(n-m) coefficient
    std::vector<double> e(x.size() + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t m = k + 1; m >= 1; --m) e[m] += x[k] * e[m - 1];
    return {e.begin() + 1, e.end()};
}

std::vector<double> a_coefficients(std::span<const double> beta_col, std::span<const double> gamma_col)
{
    if (beta_col.size() != gamma_col.size() || beta_col.empty())
        throw DomainError("a_coefficients: beta and gamma columns must have equal non-zero length");
    std::vector<double> x(beta_col.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double p = beta_col[k] * gamma_col[k];
        if (!(p > 0) || !std::isfinite(p)) throw DomainError("a_coefficients: beta*gamma must be positive and finite");
        x[k] = 1.0 / p;
    }
    return elementary_symmetric(x);
}

void check_allocation(const ChannelRealization& r, const Allocation& a)
{
    if (a.mu.size() != r.subcarriers() || a.beta.cols() != r.subcarriers() || a.beta.rows() != r.hops())
        throw DomainError("allocation shape does not match the realization (" + std::to_string(r.hops()) + "x" +
                          std::to_string(r.subcarriers()) + ")");
    if (!(a.mu.isFinite().all() && (a.mu >= 0).all() && a.beta.isFinite().all() && (a.beta >= 0).all()))
        throw DomainError("allocation entries must be finite and >= 0");
}

std::vector<double> allocated_hop_snrs(const ChannelRealization& r, const Allocation& a, int i)
{
    std::vector<double> h(static_cast<std::size_t>(r.hops()));
    for (int k = 0; k < r.hops(); ++k) h[static_cast<std::size_t>(k)] = a.beta(k, i) * a.mu(i) * r.gamma(k, i);
    return h;
}

RateReport instantaneous_rate(const ChannelRealization& r, const Allocation& a)
{
    check_allocation(r, a);
    RateReport out;
    out.snr.resize(r.subcarriers());
    double sum = 0;
    for (int i = 0; i < r.subcarriers(); ++i) {
        const auto hops = allocated_hop_snrs(r, a, i);
        out.snr(i) = end_to_end_snr(hops);
        sum += std::log2(1.0 + out.snr(i));
    }
    out.rate = sum / r.hops();
    return out;
}

double approx_rate(const ChannelRealization& r, const Allocation& a)
{
    check_allocation(r, a);
    double sum = 0;
    for (int i = 0; i < r.subcarriers(); ++i) {
        if (a.mu(i) == 0.0) continue;
        double load = 0;
        for (int k = 0; k < r.hops(); ++k) {
            const double p = a.beta(k, i) * r.gamma(k, i);
            if (!(p > 0)) throw DomainError("approx_rate: zero beta or gamma on an active subcarrier");
            load += 1.0 / p;
        }
        sum += std::log2(1.0 + a.mu(i) / load);
    }
    return sum / r.hops();
}

} // namespace afrelay
