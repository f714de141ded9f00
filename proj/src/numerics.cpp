#include "afrelay/numerics.hpp"

#include "afrelay/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>

namespace afrelay::numerics {

namespace {

QuadratureRule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0)
{
    const auto n = diag.size();
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    jacobi.diagonal() = diag;
    for (Eigen::Index k = 0; k + 1 < n; ++k) jacobi(k, k + 1) = jacobi(k + 1, k) = offdiag(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        rule.nodes[static_cast<std::size_t>(j)] = es.eigenvalues()(j);
        const double v0 = es.eigenvectors()(0, j);
        rule.weights[static_cast<std::size_t>(j)] = mu0 * v0 * v0;
    }
    return rule;
}

struct CompositeRule {
    std::vector<double> t;  // points in units of the mean
    std::vector<double> w;  // weights including e^-t
};

const CompositeRule& composite_rule()
{
    static const CompositeRule rule = [] {
        CompositeRule r;
        const auto legendre = gauss_legendre(16);
        std::vector<double> edges{0.0};
        for (int e = -16; e <= 0; ++e) edges.push_back(std::pow(10.0, e));
        for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
            const double a = edges[p], b = edges[p + 1];
            const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (std::size_t j = 0; j < legendre.nodes.size(); ++j) {
                const double t = mid + half * legendre.nodes[j];
                r.t.push_back(t);
                r.w.push_back(half * legendre.weights[j] * std::exp(-t));
            }
        }
        const auto laguerre = gauss_laguerre(64);
        const double tail = std::exp(-1.0);
        for (std::size_t j = 0; j < laguerre.nodes.size(); ++j) {
            r.t.push_back(1.0 + laguerre.nodes[j]);
            r.w.push_back(tail * laguerre.weights[j]);
        }
        return r;
    }();
    return rule;
}

} // namespace

QuadratureRule gauss_legendre(int n)
{
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n), e(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) e(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    return golub_welsch(d, e, 2.0);
}

QuadratureRule gauss_laguerre(int n)
{
    Eigen::VectorXd d(n), e(std::max(n - 1, 0));
    for (int k = 0; k < n; ++k) d(k) = 2.0 * k + 1.0;
    for (int k = 1; k < n; ++k) e(k - 1) = k;
    return golub_welsch(d, e, 1.0);
}

Estimate expect_exponential_quadrature(const std::function<double(double)>& g, double mean)
{
    if (!(mean > 0) || !std::isfinite(mean)) throw DomainError("expect_exponential: mean must be positive and finite");
    const auto& rule = composite_rule();
    double sum = 0;
    for (std::size_t j = 0; j < rule.t.size(); ++j) {
        const double v = g(mean * rule.t[j]);
        if (!std::isfinite(v)) throw NumericalError("expect_exponential: integrand is not finite");
        sum += rule.w[j] * v;
    }
    return {sum, 0.0};
}

Estimate expect_exponential_mc(const std::function<double(double)>& g, double mean, std::int64_t samples,
                               std::uint64_t seed)
{
    if (!(mean > 0) || !std::isfinite(mean)) throw DomainError("expect_exponential: mean must be positive and finite");
    if (samples < 2) throw DomainError("expect_exponential: need at least two samples");
    RandomStream stream(seed, StreamPurpose::auxiliary, 0);
    // Welford
    double m = 0, s2 = 0;
    for (std::int64_t j = 0; j < samples; ++j) {
        const double v = g(mean * stream.exponential());
        if (!std::isfinite(v)) throw NumericalError("expect_exponential: integrand is not finite");
        const double d = v - m;
        m += d / static_cast<double>(j + 1);
        s2 += d * (v - m);
    }
    const double var = s2 / static_cast<double>(samples - 1);
    return {m, std::sqrt(var / static_cast<double>(samples))};
}

StationaryMu::StationaryMu(std::span<const double> a, double mu_max) : a_(a.begin(), a.end()), mu_max_(mu_max)
{
    if (!(mu_max > 0) || !std::isfinite(mu_max)) throw DomainError("solve_stationary_mu: mu_max must be > 0");
    if (a_.empty()) throw DomainError("solve_stationary_mu: empty coefficient list");
    for (double v : a_)
        if (!(v > 0) || !std::isfinite(v)) throw DomainError("solve_stationary_mu: coefficients must be positive and finite");

    if (a_.size() == 1) {
        peak_mu_ = 0;
        peak_level_ = 1.0 / a_[0];
        return;
    }

    // The marginal rises from 0 like mu^(N-1) and falls like 1/mu; its peak
    // sits where S is of order one, i.e. between the extreme A_m^(1/m).
    double r_min = HUGE_VAL, r_max = 0;
    for (std::size_t m = 0; m < a_.size(); ++m) {
        const double r = std::pow(a_[m], 1.0 / static_cast<double>(m + 1));
        r_min = std::min(r_min, r);
        r_max = std::max(r_max, r);
    }
    double lo = 1e-3 * r_min;
    double hi = std::min(mu_max_, 1e3 * r_max);
    if (!(lo < hi)) lo = 1e-3 * hi;
    const double decades = std::log10(hi / lo);
    const int points = std::max(16, static_cast<int>(std::ceil(8 * decades)) + 1);
    const double step = std::log(hi / lo) / (points - 1);

    int best = 0;
    double best_val = -1;
    for (int j = 0; j < points; ++j) {
        const double v = marginal(lo * std::exp(step * j));
        if (v > best_val) {
            best_val = v;
            best = j;
        }
    }
    // golden section on log(mu) around the best grid point
    double sa = std::log(lo) + step * std::max(best - 1, 0);
    double sb = std::log(lo) + step * std::min(best + 1, points - 1);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double s1 = sb - inv_phi * (sb - sa), s2 = sa + inv_phi * (sb - sa);
    double f1 = marginal(std::exp(s1)), f2 = marginal(std::exp(s2));
    for (int it = 0; it < 60 && sb - sa > 1e-12; ++it) {
        if (f1 < f2) {
            sa = s1;
            s1 = s2;
            f1 = f2;
            s2 = sa + inv_phi * (sb - sa);
            f2 = marginal(std::exp(s2));
        } else {
            sb = s2;
            s2 = s1;
            f2 = f1;
            s1 = sb - inv_phi * (sb - sa);
            f1 = marginal(std::exp(s1));
        }
    }
    peak_mu_ = std::min(std::exp(0.5 * (sa + sb)), mu_max_);
    peak_level_ = marginal(peak_mu_);
    if (best_val > peak_level_) {
        peak_mu_ = lo * std::exp(step * best);
        peak_level_ = best_val;
    }
}

double StationaryMu::utility(double mu) const
{
    if (mu <= 0) return 0.0;
    if (a_.size() == 1) return std::log1p(mu / a_[0]);
    // S = sum_m A_m mu^-m, utility = ln(1 + 1/S)
    const double inv = 1.0 / mu;
    double p = inv, s = 0;
    for (double am : a_) {
        s += am * p;
        p *= inv;
    }
    if (!std::isfinite(s)) return 0.0;
    return std::log1p(1.0 / s);
}

double StationaryMu::marginal(double mu) const
{
    if (a_.size() == 1) return 1.0 / (std::max(mu, 0.0) + a_[0]);
    if (mu <= 0) return 0.0;
    // d/dmu ln(1 + 1/S) = (sum_m m A_m mu^-m) / (mu S (1 + S))
    const double inv = 1.0 / mu;
    double p = inv, s = 0, w = 0;
    for (std::size_t m = 0; m < a_.size(); ++m) {
        const double term = a_[m] * p;
        s += term;
        w += static_cast<double>(m + 1) * term;
        p *= inv;
    }
    if (!std::isfinite(s) || !std::isfinite(w)) return 0.0;
    return w / (mu * s * (1.0 + s));
}

double StationaryMu::branch_root(double level) const
{
    if (a_.size() == 1) return std::clamp(1.0 / level - a_[0], 0.0, mu_max_);
    if (level >= peak_level_) return peak_mu_;
    if (marginal(mu_max_) >= level) return mu_max_;
    auto f = [&](double s) { return marginal(std::exp(s)) - level; };
    RootConfig cfg;
    cfg.abs_tol = 1e-14;
    cfg.rel_tol = 1e-15;
    cfg.max_iter = 100;
    return std::exp(solve_bracketed(f, std::log(peak_mu_), std::log(mu_max_), cfg));
}

double StationaryMu::solve(double level) const
{
    if (!(level > 0) || std::isnan(level)) throw DomainError("solve_stationary_mu: level must be > 0");
    if (a_.size() == 1) return branch_root(level);
    if (level >= peak_level_) return 0.0;
    const double root = branch_root(level);
    return utility(root) - level * root > 0 ? root : 0.0;
}

double solve_stationary_mu(std::span<const double> a, double level, double mu_max)
{
    return StationaryMu(a, mu_max).solve(level);
}

} // namespace afrelay::numerics
