#include "afrelay/errors.hpp"
#include "afrelay/numerics.hpp"
#include "afrelay/model.hpp"

#include <boost/math/special_functions/expint.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace afrelay;
using namespace afrelay::numerics;

TEST(Bisect, Examples)
{
    EXPECT_NEAR(bisect([](double x) { return x - 2; }, 0, 10), 2.0, 1e-12);
    EXPECT_NEAR(bisect([](double x) { return x * x - 2; }, 0, 2), std::sqrt(2.0), 1e-10);
    EXPECT_THROW(bisect([](double x) { return x + 1; }, 0, 1), BracketError);
}

TEST(Bisect, ConvergenceErrorCarriesBestIterate)
{
    RootConfig cfg;
    cfg.max_iter = 5;
    try {
        bisect([](double x) { return x - 1.0 / 3.0; }, 0, 1, cfg);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_NEAR(e.best_iterate(), 1.0 / 3.0, 1.0 / 32);
    }
}

TEST(SolveBracketed, SmoothRoots)
{
    EXPECT_NEAR(solve_bracketed([](double x) { return std::cos(x) - x; }, 0, 1), 0.7390851332151607, 1e-12);
    EXPECT_THROW(solve_bracketed([](double x) { return x * x + 1; }, -1, 1), BracketError);
}

TEST(SolveMultiplier, DecreasingResidualWithWideRange)
{
    for (double target : {1e-9, 1e-3, 1.0, 1e4, 1e10}) {
        const double l = solve_multiplier([target](double lambda) { return 1.0 / lambda - target; });
        EXPECT_NEAR(l * target, 1.0, 1e-10) << target;
    }
    // needs the bracket widened past 1e12
    const double l = solve_multiplier([](double lambda) { return 1e-14 / lambda - 1.0; });
    EXPECT_NEAR(l, 1e-14, 1e-23);
}

TEST(GaussRules, Exactness)
{
    const auto gl = gauss_legendre(5);
    double s = 0;
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) s += gl.weights[j] * std::pow(gl.nodes[j], 8);
    EXPECT_NEAR(s, 2.0 / 9.0, 1e-14);
    const auto la = gauss_laguerre(10);
    s = 0;
    for (std::size_t j = 0; j < la.nodes.size(); ++j) s += la.weights[j] * std::pow(la.nodes[j], 5);
    EXPECT_NEAR(s, 120.0, 1e-10);
}

TEST(ExpectExponential, QuadratureExamples)
{
    EXPECT_NEAR(expect_exponential_quadrature([](double g) { return g; }, 81).value, 81.0, 1e-9);
    EXPECT_NEAR(expect_exponential_quadrature([](double g) { return 1 / std::sqrt(g); }, 1).value,
                std::sqrt(std::numbers::pi), 1e-8);
    EXPECT_NEAR(expect_exponential_quadrature([](double g) { return g < 1.0 ? 1.0 : 0.0; }, 1).value,
                1 - std::exp(-1.0), 1e-12);
    for (double mean : {0.1, 1.0, 81.0, 1e4}) {
        const double exact = std::exp(1 / mean) * boost::math::expint(1, 1 / mean);
        EXPECT_NEAR(expect_exponential_quadrature([](double g) { return std::log1p(g); }, mean).value, exact,
                    1e-9 * std::max(1.0, exact));
        EXPECT_NEAR(expect_exponential_quadrature([](double g) { return 1 / std::sqrt(g); }, mean).value,
                    std::sqrt(std::numbers::pi / mean), 1e-8 / std::sqrt(mean));
    }
}

TEST(ExpectExponential, MonteCarloAgreesWithQuadrature)
{
    auto g = [](double x) { return std::log1p(x); };
    const auto q = expect_exponential_quadrature(g, 5.0);
    const auto m = expect_exponential_mc(g, 5.0, 200000, 17);
    EXPECT_GT(m.std_error, 0);
    EXPECT_NEAR(m.value, q.value, 3 * m.std_error);
    const auto again = expect_exponential_mc(g, 5.0, 200000, 17);
    EXPECT_EQ(again.value, m.value);
}

TEST(ExpectExponential, NonFiniteIntegrandIsReported)
{
    EXPECT_THROW(expect_exponential_quadrature([](double) { return std::nan(""); }, 1.0), NumericalError);
    EXPECT_THROW(expect_exponential_mc([](double) { return INFINITY; }, 1.0, 10, 1), NumericalError);
}

namespace {

double h(const StationaryMu& p, double level, double mu) { return p.utility(mu) - level * mu; }

// Dense scan, then a second scan across the best cell's neighbourhood.
double grid_argmax(const StationaryMu& p, double level, double lo, double hi, int points)
{
    double best = lo, best_v = h(p, level, lo);
    const double step = (hi - lo) / (points - 1);
    for (int j = 1; j < points; ++j) {
        const double x = lo + j * step;
        if (const double v = h(p, level, x); v > best_v) {
            best_v = v;
            best = x;
        }
    }
    if (step < 1e-9) return best;
    return grid_argmax(p, level, std::max(lo, best - step), std::min(hi, best + step), points);
}

} // namespace

TEST(StationaryMu, SingleHopIsWaterfilling)
{
    for (double a : {0.01, 0.5, 3.0})
        for (double level : {0.01, 0.3, 1.0, 10.0}) {
            const double mu = solve_stationary_mu(std::vector<double>{a}, level, 1e6);
            EXPECT_NEAR(mu, std::max(0.0, 1 / level - a), 1e-12 * std::max(1.0, 1 / level));
        }
}

TEST(StationaryMu, PriceAboveMarginalGivesZero)
{
    for (const auto& a : {std::vector<double>{0.3}, std::vector<double>{6, 8}, std::vector<double>{1e-3, 1e-6, 1e-9}})
        EXPECT_EQ(solve_stationary_mu(a, 1e6, 1.0), 0.0);
}

TEST(StationaryMu, TwoHopMatchesDenseGrid)
{
    const std::vector<double> a{6, 8};
    const double level = 0.05;
    const double mu_max = 100;
    const StationaryMu p(a, mu_max);
    const double mu = p.solve(level);
    const double grid = grid_argmax(p, level, 0, mu_max, 1'000'000);
    EXPECT_NEAR(mu, grid, 1e-6);
    EXPECT_GT(mu, 0);
}

TEST(StationaryMu, MaximizesOverRandomProbes)
{
    RandomStream s(21);
    for (int t = 0; t < 300; ++t) {
        const int n = 1 + t % 4;
        std::vector<double> a(static_cast<std::size_t>(n));
        for (auto& v : a) v = db_to_linear(-30 + 40 * s.uniform());
        const double mu_max = t % 2 ? 1.0 : 1e3;
        const StationaryMu p(a, mu_max);
        const double level = db_to_linear(-20 + 40 * s.uniform()) * p.marginal(p.peak_mu() + 1e-9);
        const double mu = p.solve(level);
        ASSERT_GE(mu, 0);
        ASSERT_LE(mu, mu_max);
        const double best = h(p, level, mu);
        for (int j = 0; j < 1000; ++j) {
            const double x = mu_max * s.uniform();
            EXPECT_GE(best, h(p, level, x) - 1e-12 * std::max(1.0, std::abs(best))) << "n=" << n << " x=" << x;
        }
    }
}

TEST(StationaryMu, MonotoneInPrice)
{
    RandomStream s(22);
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + t % 4;
        std::vector<double> a(static_cast<std::size_t>(n));
        for (auto& v : a) v = db_to_linear(-20 + 30 * s.uniform());
        const StationaryMu p(a, 1.0);
        double prev = -1;
        for (int j = 60; j >= -60; --j) {
            const double mu = p.solve(std::pow(10.0, j / 10.0));
            EXPECT_GE(mu, prev);
            prev = mu;
        }
    }
}

TEST(StationaryMu, DomainErrors)
{
    EXPECT_THROW(solve_stationary_mu(std::vector<double>{1, 1}, 0.1, 0.0), DomainError);
    EXPECT_THROW(solve_stationary_mu(std::vector<double>{1, 1}, 0.0, 1.0), DomainError);
    EXPECT_THROW(solve_stationary_mu(std::vector<double>{1, -1}, 0.1, 1.0), DomainError);
}

TEST(StationaryMu, MarginalMatchesFiniteDifference)
{
    const StationaryMu p(std::vector<double>{0.4, 0.05, 0.002}, 10.0);
    for (double mu : {0.01, 0.1, 0.7, 3.0}) {
        const double hstep = 1e-6 * mu;
        const double fd = (p.utility(mu + hstep) - p.utility(mu - hstep)) / (2 * hstep);
        EXPECT_NEAR(p.marginal(mu), fd, 1e-6 * std::abs(fd));
    }
}
