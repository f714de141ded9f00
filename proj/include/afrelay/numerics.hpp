#pragma once
#include "afrelay/errors.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace afrelay::numerics {

struct RootConfig {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_iter = 200;
};

/*
 * Plain bisection. Stops once |f(mid)| <= abs_tol or the bracket is narrower
 * than abs_tol. f(lo) and f(hi) must not share a sign.
 */
template <class F>
double bisect(F&& f, double lo, double hi, const RootConfig& cfg = {})
{
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (std::isnan(flo) || std::isnan(fhi) || (flo > 0) == (fhi > 0))
        throw BracketError("bisect: f(lo) and f(hi) do not bracket a root");
    double best = std::abs(flo) < std::abs(fhi) ? lo : hi;
    double best_abs = std::min(std::abs(flo), std::abs(fhi));
    for (int it = 0; it < cfg.max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::abs(fm) < best_abs) {
            best_abs = std::abs(fm);
            best = mid;
        }
        if (std::abs(fm) <= cfg.abs_tol || std::abs(hi - lo) <= cfg.abs_tol) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    throw ConvergenceError("bisect: no convergence after " + std::to_string(cfg.max_iter) + " iterations", best);
}

/// Bracketed root by TOMS 748; converges to rel_tol relative bracket width.
template <class F>
double solve_bracketed(F&& f, double lo, double hi, const RootConfig& cfg = {})
{
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (std::isnan(flo) || std::isnan(fhi) || (flo > 0) == (fhi > 0))
        throw BracketError("solve_bracketed: f(lo) and f(hi) do not bracket a root");
    std::uintmax_t iters = static_cast<std::uintmax_t>(cfg.max_iter);
    const double rel = cfg.rel_tol;
    const double abs = cfg.abs_tol;
    auto tol = [rel, abs](double a, double b) { return std::abs(b - a) <= std::max(abs, rel * std::min(std::abs(a), std::abs(b))); };
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    if (iters >= static_cast<std::uintmax_t>(cfg.max_iter))
        throw ConvergenceError("solve_bracketed: no convergence", 0.5 * (a + b));
    return 0.5 * (a + b);
}

/*
 * Finds the positive multiplier lambda where a non-increasing residual(lambda)
 * changes sign. The search runs in log(lambda) starting from [1e-12, 1e12]
 * and widens the bracket geometrically when needed.
 */
template <class F>
double solve_multiplier(F&& residual, const RootConfig& cfg = {}, double lo = 1e-12, double hi = 1e12)
{
    auto in_log = [&](double s) { return residual(std::exp(s)); };
    double slo = std::log(lo), shi = std::log(hi);
    for (int widen = 0; in_log(slo) < 0; ++widen) {
        if (widen >= 20) throw BracketError("solve_multiplier: residual negative at the smallest multiplier tried");
        slo -= std::log(1e3);
    }
    for (int widen = 0; in_log(shi) > 0; ++widen) {
        if (widen >= 20) throw BracketError("solve_multiplier: residual positive at the largest multiplier tried");
        shi += std::log(1e3);
    }
    RootConfig log_cfg = cfg;
    log_cfg.abs_tol = 1e-13;  // in log space: relative accuracy on lambda
    log_cfg.rel_tol = 1e-15;
    return std::exp(solve_bracketed(in_log, slo, shi, log_cfg));
}

struct Estimate {
    double value = 0;
    double std_error = 0;
};

// E[g(X)] for X exponential with the given mean. Composite rule: Gauss-Legendre
// on decade panels of t = X/mean in [0, 1] and shifted Gauss-Laguerre on [1, inf).
Estimate expect_exponential_quadrature(const std::function<double(double)>& g, double mean);

// Sample mean over `samples` draws, reproducible from the seed.
Estimate expect_exponential_mc(const std::function<double(double)>& g, double mean, std::int64_t samples,
                               std::uint64_t seed);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Golub-Welsch rules.
QuadratureRule gauss_legendre(int n);  // on [-1, 1]
QuadratureRule gauss_laguerre(int n);  // weight e^-t on [0, inf)

/*
 * Per-subcarrier exact sub-problem: maximize
 *     h(mu) = ln(1 + mu^N / D(mu)) - level * mu,   D(mu) = sum_m A_m mu^(N-m)
 * over [0, mu_max]. For N >= 2 the utility is S-shaped (zero slope at 0), so
 * the candidates are 0 and the root of h' on the decreasing branch of the
 * marginal utility. The peak of the marginal utility depends only on A and is
 * located once at construction.
 */
class StationaryMu {
public:
    StationaryMu(std::span<const double> a, double mu_max);

    int order() const noexcept { return static_cast<int>(a_.size()); }
    double mu_max() const noexcept { return mu_max_; }

    double utility(double mu) const;
    double marginal(double mu) const;

    double peak_mu() const noexcept { return peak_mu_; }
    double peak_level() const noexcept { return peak_level_; }

    // Point on the decreasing branch where marginal == level, clamped to
    // [peak_mu, mu_max]. Continuous and non-increasing in level.
    double branch_root(double level) const;

    // Global maximizer of h on [0, mu_max].
    double solve(double level) const;

private:
    std::vector<double> a_;
    double mu_max_;
    double peak_mu_ = 0;
    double peak_level_ = 0;
};

double solve_stationary_mu(std::span<const double> a, double level, double mu_max);

} // namespace afrelay::numerics
