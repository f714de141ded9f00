#include "afrelay/errors.hpp"
#include "afrelay/ratecore.hpp"
#include "afrelay/relaypa.hpp"
#include "afrelay/subpa.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace afrelay;
using namespace afrelay::subpa;

namespace {

ChannelRealization draw(const LinkBudget& b, std::uint64_t seed, std::uint64_t index,
                        StreamPurpose p = StreamPurpose::evaluation)
{
    RandomStream s(seed, p, index);
    return sample_realization(b, s);
}

double rate(const ChannelRealization& r, const Vector& mu, const Matrix& beta)
{
    return instantaneous_rate(r, Allocation{mu, beta}).rate;
}

} // namespace

TEST(Waterfill, Examples)
{
    const auto a = waterfill(std::vector<double>{0.5, 1.0}, 1.0);
    EXPECT_NEAR(a.mu(0), 0.75, 1e-15);
    EXPECT_NEAR(a.mu(1), 0.25, 1e-15);
    EXPECT_NEAR(a.level, 1.25, 1e-15);
    const auto b = waterfill(std::vector<double>{0.5, 3.0}, 1.0);
    EXPECT_NEAR(b.mu(0), 1.0, 1e-15);
    EXPECT_EQ(b.mu(1), 0.0);
    EXPECT_NEAR(b.level, 1.5, 1e-15);
}

TEST(Waterfill, TiesAndDeadSubcarriers)
{
    const auto a = waterfill(std::vector<double>{2.0, 2.0, 2.0}, 0.9);
    EXPECT_TRUE(((a.mu - 0.3).abs() < 1e-15).all());
    const auto b = waterfill(std::vector<double>{INFINITY, 0.2, INFINITY}, 1.0);
    EXPECT_EQ(b.mu(0), 0.0);
    EXPECT_NEAR(b.mu(1), 1.0, 1e-15);
    EXPECT_THROW(waterfill(std::vector<double>{INFINITY, INFINITY}, 1.0), InfeasibleError);
}

TEST(Waterfill, ComplementarySlackness)
{
    RandomStream s(41);
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> y(1 + t % 12);
        for (auto& v : y) v = db_to_linear(-20 + 30 * s.uniform());
        const auto wf = waterfill(y, 1.0);
        EXPECT_NEAR(wf.mu.sum(), 1.0, 1e-12);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double mu = wf.mu(static_cast<Eigen::Index>(i));
            EXPECT_GE(mu, 0);
            if (mu > 0)
                EXPECT_NEAR(wf.level - y[i], mu, 1e-8);
            else
                EXPECT_GE(y[i], wf.level - 1e-8);
        }
    }
}

TEST(WeightedExcess, SolvesPiecewiseLinearEquation)
{
    RandomStream s(42);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> y(1 + t % 9), w(y.size());
        for (std::size_t j = 0; j < y.size(); ++j) {
            y[j] = 3 * s.uniform();
            w[j] = j % 4 == 3 ? 0.0 : s.uniform();
        }
        if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0; })) w[0] = 1;
        const double target = 0.1 + s.uniform();
        const double level = level_for_weighted_excess(y, w, target);
        double f = 0;
        for (std::size_t j = 0; j < y.size(); ++j) f += w[j] * std::max(level - y[j], 0.0);
        EXPECT_NEAR(f, target, 1e-12);
    }
}

TEST(MuExactStpc, SingleSubcarrierTakesEverything)
{
    const LinkBudget b(Matrix::Constant(3, 1, 20.0));
    for (int t = 0; t < 20; ++t) {
        const auto r = draw(b, 1, static_cast<std::uint64_t>(t));
        const auto mu = solve_mu_exact_stpc(r, Matrix::Constant(3, 1, 1.0 / 3));
        EXPECT_EQ(mu(0), 1.0);
    }
}

TEST(MuExactStpc, IdenticalSubcarriersSplitEvenly)
{
    ChannelRealization r{Matrix(2, 2)};
    r.gamma << 3, 3, 7, 7;
    const auto mu = solve_mu_exact_stpc(r, Matrix::Constant(2, 2, 0.5));
    EXPECT_NEAR(mu(0), 0.5, 1e-9);
    EXPECT_NEAR(mu(1), 0.5, 1e-9);
}

TEST(MuExactStpc, MatchesGridOracle)
{
    for (double g0_db : {-10.0, 0.0, 10.0}) {
        const LinkBudget b(Matrix::Constant(2, 2, 81 * db_to_linear(g0_db)));
        for (int t = 0; t < 100; ++t) {
            const auto r = draw(b, 2, static_cast<std::uint64_t>(t));
            Matrix beta(2, 2);
            RandomStream s(3, StreamPurpose::auxiliary, static_cast<std::uint64_t>(t));
            for (int i = 0; i < 2; ++i) {
                beta(0, i) = 0.1 + 0.8 * s.uniform();
                beta(1, i) = 1 - beta(0, i);
            }
            const auto mu = solve_mu_exact_stpc(r, beta);
            EXPECT_NEAR(mu.sum(), 1.0, 1e-8);
            double grid = 0;
            for (int j = 0; j <= 1000; ++j) {
                Vector m(2);
                m << j / 1000.0, 1 - j / 1000.0;
                grid = std::max(grid, rate(r, m, beta));
            }
            EXPECT_GE(rate(r, mu, beta), grid - 1e-3) << "gamma0 " << g0_db << " dB, draw " << t;
        }
    }
}

TEST(MuExactStpc, NeverWorseThanWaterfilling)
{
    for (int n : {2, 3}) {
        const LinkBudget b(Matrix::Constant(n, 8, 16.0));
        for (int t = 0; t < 300; ++t) {
            const auto r = draw(b, 4, static_cast<std::uint64_t>(t));
            const auto beta = relaypa::solve_beta_asy(Constraint::stpc, r, b);
            const auto ex = solve_mu_exact_stpc(r, beta);
            const auto as = solve_mu_asy_stpc(r, beta);
            EXPECT_GE(rate(r, ex, beta), rate(r, as, beta) - 1e-12) << "N=" << n << " draw " << t;
            EXPECT_NEAR(ex.sum(), 1.0, 1e-8);
            EXPECT_TRUE((ex >= 0).all());
        }
    }
}

TEST(MuExactStpc, AgreesWithWaterfillingAtHighSnr)
{
    const LinkBudget b(Matrix::Constant(2, 4, 1e7));
    for (int t = 0; t < 100; ++t) {
        auto r = draw(b, 5, static_cast<std::uint64_t>(t));
        r.gamma = r.gamma.max(1e6);  // keeps every allocated hop SNR above 1e4
        const Matrix beta = Matrix::Constant(2, 4, 0.5);
        const auto ex = solve_mu_exact_stpc(r, beta);
        const auto as = solve_mu_asy_stpc(r, beta);
        EXPECT_LT((ex - as).abs().maxCoeff(), 0.02);
    }
}

TEST(MuExactStpc, DeadSubcarriers)
{
    ChannelRealization r{Matrix(2, 3)};
    r.gamma << 1, 0, 4, 0, 5, 0;
    EXPECT_THROW(solve_mu_exact_stpc(r, Matrix::Constant(2, 3, 0.5)), InfeasibleError);
    r.gamma(1, 2) = 3;
    const auto mu = solve_mu_exact_stpc(r, Matrix::Constant(2, 3, 0.5));
    EXPECT_EQ(mu(0), 0.0);
    EXPECT_EQ(mu(1), 0.0);
    EXPECT_NEAR(mu(2), 1.0, 1e-12);
    r.gamma(1, 0) = 2;
    const auto mu2 = solve_mu_exact_stpc(r, Matrix::Constant(2, 3, 0.5));
    EXPECT_EQ(mu2(1), 0.0);
    EXPECT_NEAR(mu2.sum(), 1.0, 1e-12);
}

TEST(SubcarrierObjective, ConcaveInMu)
{
    RandomStream s(43);
    for (int t = 0; t < 10000; ++t) {
        const double g = db_to_linear(-20 + 60 * s.uniform());
        const double mu = 0.01 + s.uniform();
        const double h = 1e-4 * mu;
        auto f = [g](double m) { return std::log1p(m * g); };
        const double fd = (f(mu + h) - 2 * f(mu) + f(mu - h)) / (h * h);
        const double closed = -g * g / std::pow(1 + mu * g, 2);
        EXPECT_LT(closed, 0);
        EXPECT_NEAR(fd, closed, 1e-3 * std::abs(closed) + 1e-9);
    }
}

namespace {

struct Fresh {
    Vector mean;
    Vector se;
};

template <class F>
Fresh fresh_mean(const LinkBudget& b, int samples, F&& mu_of)
{
    const int nf = b.subcarriers();
    Vector mean = Vector::Zero(nf), m2 = Vector::Zero(nf);
    for (int t = 0; t < samples; ++t) {
        const auto r = draw(b, 77, static_cast<std::uint64_t>(t));
        const Vector x = mu_of(r);
        const Vector d = x - mean;
        mean += d / (t + 1);
        m2 += d * (x - mean);
    }
    return {mean, (m2 / (samples - 1) / samples).sqrt()};
}

} // namespace

TEST(MuAsyCalibration, LttpcSingleSubcarrier)
{
    const LinkBudget b(Matrix::Constant(2, 1, 30.0));
    const Matrix beta = Matrix::Constant(2, 1, 0.5);
    std::vector<Vector> loads;
    for (int m = 0; m < 100000; ++m) loads.push_back(subcarrier_load(draw(b, 9, m, StreamPurpose::training), beta));
    const auto lm = calibrate_mu_asy(Constraint::lttpc, loads, 9);
    EXPECT_EQ(lm.kind, MultiplierKind::global);
    const auto f = fresh_mean(b, 100000, [&](const ChannelRealization& r) { return solve_mu_asy(Constraint::lttpc, r, beta, &lm); });
    EXPECT_LT(std::abs(f.mean(0) - 1.0), 0.01);
}

TEST(MuAsyCalibration, LtipcPerSubcarrier)
{
    Matrix avg(2, 3);
    avg << 10, 40, 200, 30, 3, 60;
    const LinkBudget b(avg);
    const Matrix beta = Matrix::Constant(2, 3, 0.5);
    std::vector<Vector> loads;
    for (int m = 0; m < 50000; ++m) loads.push_back(subcarrier_load(draw(b, 10, m, StreamPurpose::training), beta));
    const auto lm = calibrate_mu_asy(Constraint::ltipc, loads, 10);
    ASSERT_EQ(lm.values.cols(), 3);
    // exact on the training ensemble
    Vector train = Vector::Zero(3);
    for (const auto& y : loads) train += apply_mu_asy(lm, y);
    train /= static_cast<double>(loads.size());
    EXPECT_TRUE(((train - 1.0 / 3).abs() < 1e-12).all()) << train;
    const auto f = fresh_mean(b, 50000, [&](const ChannelRealization& r) { return solve_mu_asy(Constraint::ltipc, r, beta, &lm); });
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(f.mean(i), 1.0 / 3, 4 * std::sqrt(2.0) * f.se(i));
}

TEST(MuExactCalibration, MeetsExpectationConstraints)
{
    Matrix avg(2, 2);
    avg << 25, 60, 90, 8;
    const LinkBudget b(avg);
    std::vector<ChannelRealization> train;
    std::vector<Matrix> betas;
    for (int m = 0; m < 20000; ++m) {
        train.push_back(draw(b, 11, m, StreamPurpose::training));
        betas.push_back(relaypa::solve_beta_asy(Constraint::lttpc, train.back(), b));
    }
    for (auto c : {Constraint::ltipc, Constraint::lttpc}) {
        std::vector<Vector> train_mu;
        const auto lm = calibrate_mu_exact(c, train, betas, 11, {}, &train_mu);
        EXPECT_EQ(lm.kind, mu_multiplier_kind(c));
        Vector tm = Vector::Zero(2);
        for (const auto& v : train_mu) tm += v;
        tm /= static_cast<double>(train_mu.size());
        if (c == Constraint::ltipc)
            EXPECT_TRUE(((tm - 0.5).abs() < 1e-3).all()) << tm;
        else
            EXPECT_NEAR(tm.sum(), 1.0, 1e-3);
        // training and fresh ensembles contribute comparable sampling error
        const auto f = fresh_mean(b, 20000, [&](const ChannelRealization& r) {
            const Vector mu = solve_mu_exact(c, r, relaypa::solve_beta_asy(Constraint::lttpc, r, b), &lm);
            return c == Constraint::ltipc ? mu : Vector::Constant(1, mu.sum());
        });
        if (c == Constraint::ltipc)
            for (int i = 0; i < 2; ++i) EXPECT_NEAR(f.mean(i), 0.5, 4 * std::sqrt(2.0) * f.se(i));
        else
            EXPECT_NEAR(f.mean(0), 1.0, 4 * std::sqrt(2.0) * f.se(0));
    }
}

TEST(MuSolvers, UsageErrors)
{
    ChannelRealization r{Matrix::Constant(2, 2, 5.0)};
    const Matrix beta = Matrix::Constant(2, 2, 0.5);
    EXPECT_THROW(solve_mu_asy(Constraint::lttpc, r, beta), UsageError);
    EXPECT_THROW(solve_mu_exact(Constraint::ltipc, r, beta), UsageError);
    CalibratedMultipliers wrong;
    wrong.kind = MultiplierKind::per_node_per_subcarrier;
    wrong.stage = MultiplierStage::beta;
    wrong.values = Matrix::Ones(2, 2);
    EXPECT_THROW(solve_mu_asy(Constraint::ltipc, r, beta, &wrong), UsageError);
    EXPECT_THROW(mu_multiplier_kind(Constraint::stpc), UsageError);
}
