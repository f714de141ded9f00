#include "afrelay/relaypa.hpp"

#include "afrelay/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace afrelay::relaypa {

double beta_from_multiplier(double c, double lambda)
{
    // rationalized form of (-1 + sqrt(1 + 4c/lambda)) / (2c)
    return 2.0 / (lambda * (1.0 + std::sqrt(1.0 + 4.0 * c / lambda)));
}

MultiplierKind beta_multiplier_kind(Constraint constraint)
{
    switch (constraint) {
    case Constraint::ltipc: return MultiplierKind::per_node_per_subcarrier;
    case Constraint::lttpc: return MultiplierKind::per_subcarrier;
    case Constraint::stpc: break;
    }
    throw UsageError("STPC node allocation is solved per realization, not calibrated");
}

namespace {

void check_mu(const ChannelRealization& r, const Vector& mu)
{
    if (mu.size() != r.subcarriers()) throw DomainError("mu length does not match the number of subcarriers");
    if (!(mu.isFinite().all() && (mu >= 0).all())) throw DomainError("mu entries must be finite and >= 0");
    if (!(r.gamma.isFinite().all() && (r.gamma >= 0).all())) throw DomainError("gamma entries must be finite and >= 0");
}

} // namespace

Matrix solve_beta_exact_stpc(const ChannelRealization& r, const Vector& mu, const numerics::RootConfig& cfg)
{
    check_mu(r, mu);
    const int n = r.hops();
    Matrix beta(n, r.subcarriers());
    for (int i = 0; i < r.subcarriers(); ++i) {
        if (mu(i) == 0.0) {
            beta.col(i).setConstant(1.0 / n);
            continue;
        }
        if (n == 1) {
            beta(0, i) = 1.0;
            continue;
        }
        const Vector c = mu(i) * r.gamma.col(i);
        auto residual = [&](double lambda) {
            double s = 0;
            for (int k = 0; k < n; ++k) s += beta_from_multiplier(c(k), lambda);
            return s - 1.0;
        };
        const double lambda = numerics::solve_multiplier(residual, cfg);
        for (int k = 0; k < n; ++k) beta(k, i) = beta_from_multiplier(c(k), lambda);
        beta.col(i) /= beta.col(i).sum();  // removes the last ulp-level residual
    }
    return beta;
}

CalibratedMultipliers calibrate_beta_exact(Constraint constraint, const LinkBudget& budget, const Vector& mu,
                                           const numerics::RootConfig& cfg)
{
    const auto kind = beta_multiplier_kind(constraint);
    const int n = budget.hops(), nf = budget.subcarriers();
    if (mu.size() != nf || !(mu > 0).all()) throw DomainError("quadrature calibration needs mu > 0 on every subcarrier");
    const auto& avg = budget.average();

    CalibratedMultipliers out;
    out.kind = kind;
    out.stage = MultiplierStage::beta;
    out.constraint = constraint;
    out.samples = 0;

    auto expected_beta = [&](int k, int i, double lambda) {
        const double m = mu(i);
        return numerics::expect_exponential_quadrature(
                   [m, lambda](double g) { return beta_from_multiplier(m * g, lambda); }, avg(k, i))
            .value;
    };

    if (kind == MultiplierKind::per_node_per_subcarrier) {
        out.values.resize(n, nf);
        for (int i = 0; i < nf; ++i)
            for (int k = 0; k < n; ++k)
                out.values(k, i) = numerics::solve_multiplier(
                    [&](double lambda) { return expected_beta(k, i, lambda) - 1.0 / n; }, cfg);
    } else {
        out.values.resize(1, nf);
        for (int i = 0; i < nf; ++i)
            out.values(0, i) = numerics::solve_multiplier(
                [&](double lambda) {
                    double s = 0;
                    for (int k = 0; k < n; ++k) s += expected_beta(k, i, lambda);
                    return s - 1.0;
                },
                cfg);
    }
    return out;
}

CalibratedMultipliers calibrate_beta_exact(Constraint constraint, std::span<const ChannelRealization> training,
                                           std::span<const Vector> mu, std::uint64_t seed,
                                           const numerics::RootConfig& cfg)
{
    const auto kind = beta_multiplier_kind(constraint);
    if (training.empty()) throw DomainError("calibration needs at least one training realization");
    if (training.size() != mu.size()) throw DomainError("one mu vector per training realization is required");
    const int n = training.front().hops(), nf = training.front().subcarriers();
    const auto m = static_cast<std::ptrdiff_t>(training.size());
    for (std::ptrdiff_t r = 0; r < m; ++r) check_mu(training[r], mu[r]);

    CalibratedMultipliers out;
    out.kind = kind;
    out.stage = MultiplierStage::beta;
    out.constraint = constraint;
    out.seed = seed;
    out.samples = m;
    out.values.resize(kind == MultiplierKind::per_node_per_subcarrier ? n : 1, nf);

    // c = mu*gamma per realization and node; inactive subcarriers keep the 1/N placeholder
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m)));
    std::vector<char> active(static_cast<std::size_t>(m));
    auto mean_beta = [&](const std::vector<double>& ck, double lambda) {
        double s = 0;
        for (std::size_t r = 0; r < ck.size(); ++r) s += active[r] ? beta_from_multiplier(ck[r], lambda) : 1.0 / n;
        return s / static_cast<double>(ck.size());
    };

    for (int i = 0; i < nf; ++i) {
        for (std::ptrdiff_t r = 0; r < m; ++r) {
            active[static_cast<std::size_t>(r)] = mu[r](i) > 0;
            for (int k = 0; k < n; ++k) c[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)] = mu[r](i) * training[r].gamma(k, i);
        }
        if (kind == MultiplierKind::per_node_per_subcarrier) {
            for (int k = 0; k < n; ++k) {
                const auto& ck = c[static_cast<std::size_t>(k)];
                out.values(k, i) = numerics::solve_multiplier([&](double l) { return mean_beta(ck, l) - 1.0 / n; }, cfg);
            }
        } else {
            out.values(0, i) = numerics::solve_multiplier(
                [&](double l) {
                    double s = 0;
                    for (const auto& ck : c) s += mean_beta(ck, l);
                    return s - 1.0;
                },
                cfg);
        }
    }
    return out;
}

Matrix apply_beta_exact(const CalibratedMultipliers& lm, const ChannelRealization& r, const Vector& mu)
{
    check_mu(r, mu);
    lm.validate();
    const int n = r.hops();
    if (lm.kind == MultiplierKind::per_node_per_subcarrier && (lm.values.rows() != n || lm.values.cols() != r.subcarriers()))
        throw UsageError("multiplier shape does not match the realization");
    if (lm.kind == MultiplierKind::per_subcarrier && lm.values.cols() != r.subcarriers())
        throw UsageError("multiplier shape does not match the realization");
    Matrix beta(n, r.subcarriers());
    for (int i = 0; i < r.subcarriers(); ++i)
        for (int k = 0; k < n; ++k)
            beta(k, i) = mu(i) == 0.0 ? 1.0 / n : beta_from_multiplier(mu(i) * r.gamma(k, i), lm.at(k, i));
    return beta;
}

Matrix solve_beta_exact(Constraint constraint, const ChannelRealization& r, const Vector& mu,
                        const CalibratedMultipliers* lm, const numerics::RootConfig& cfg)
{
    if (constraint == Constraint::stpc) return solve_beta_exact_stpc(r, mu, cfg);
    if (lm == nullptr) throw UsageError("long-term node allocation needs calibrated multipliers");
    if (lm->kind != beta_multiplier_kind(constraint) || lm->stage != MultiplierStage::beta)
        throw UsageError("multiplier kind " + to_string(lm->kind) + " does not match " + to_string(constraint));
    return apply_beta_exact(*lm, r, mu);
}

Matrix solve_beta_asy(Constraint constraint, const ChannelRealization& r, const LinkBudget& budget)
{
    if (budget.hops() != r.hops() || budget.subcarriers() != r.subcarriers())
        throw DomainError("budget shape does not match the realization");
    if (!(r.gamma.isFinite().all() && (r.gamma > 0).all()))
        throw DomainError("high-SNR node allocation needs every gamma > 0");
    const int n = r.hops();
    const auto& avg = budget.average();
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    Matrix beta(n, r.subcarriers());
    for (int i = 0; i < r.subcarriers(); ++i) {
        switch (constraint) {
        case Constraint::ltipc:
            for (int k = 0; k < n; ++k) beta(k, i) = std::sqrt(avg(k, i)) / (n * sqrt_pi * std::sqrt(r.gamma(k, i)));
            break;
        case Constraint::lttpc: {
            const double inv_root_sum = avg.col(i).rsqrt().sum();
            for (int k = 0; k < n; ++k) beta(k, i) = 1.0 / (sqrt_pi * std::sqrt(r.gamma(k, i)) * inv_root_sum);
            break;
        }
        case Constraint::stpc: {
            const double inv_root_sum = r.gamma.col(i).rsqrt().sum();
            for (int k = 0; k < n; ++k) beta(k, i) = 1.0 / (std::sqrt(r.gamma(k, i)) * inv_root_sum);
            break;
        }
        }
    }
    return beta;
}

Vector coupled_split_exact(const Vector& c, const Vector& lambda)
{
    const auto n = c.size();
    Vector beta = Vector::Zero(n);
    if (!(c > 0).all()) return beta;
    // The map t -> gamma_T(beta(t)) is increasing and lies below t at
    // t = min_k c_k / lambda_k, so Newton from there descends onto the largest
    // fixed point; g' >= 0 on the way means there is none.
    double t = (c / lambda).minCoeff();
    const double t_asy = 1.0 / std::pow((lambda / c).sqrt().sum(), 2);
    double gt = 0;
    auto evaluate = [&](double tt, double& slope) {
        double s = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            beta(k) = beta_from_multiplier(c(k), lambda(k) / tt);
            s += std::log1p(1.0 / (beta(k) * c(k)));
        }
        gt = 1.0 / std::expm1(s);
        slope = 0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double g = beta(k) * c(k);
            slope += gt * (1.0 + gt) / (g * (1.0 + g)) * c(k) / (lambda(k) * (1.0 + 2.0 * g));
        }
        return gt - tt;
    };
    if (double slope = 0; 2 * t_asy < t && evaluate(2 * t_asy, slope) < 0) t = 2 * t_asy;
    for (int it = 0; it < 100; ++it) {
        double slope = 0;
        const double g = evaluate(t, slope);
        if (g >= 0) break;
        if (slope >= 1.0) return Vector::Zero(n);
        const double next = t - g / (slope - 1.0);
        if (!(next > 1e-300)) return Vector::Zero(n);
        const bool done = std::abs(next - t) <= 1e-13 * t;
        t = next;
        if (done) break;
    }
    double slope = 0;
    evaluate(t, slope);
    if (!(std::log1p(gt) - (lambda * beta).sum() > 0)) return Vector::Zero(n);
    return beta;
}

Vector coupled_split_asy(const Vector& gamma, const Vector& lambda)
{
    if (!(gamma.isFinite().all() && (gamma > 0).all())) throw DomainError("high-SNR node allocation needs every gamma > 0");
    const double denom = (lambda / gamma).sqrt().sum();
    return 1.0 / ((lambda * gamma).sqrt() * denom);
}

namespace {

// lambda in log space around a starting guess; the bracket widens as needed
template <class F>
double solve_log_multiplier(F&& residual, double guess, const numerics::RootConfig& cfg)
{
    double lo = guess / 4, hi = guess * 4;
    for (int widen = 0; residual(lo) < 0; ++widen) {
        if (widen >= 60) throw BracketError("coupled split: residual negative at the smallest multiplier tried");
        hi = lo;
        lo /= 16;
    }
    for (int widen = 0; residual(hi) > 0; ++widen) {
        if (widen >= 60) throw BracketError("coupled split: residual positive at the largest multiplier tried");
        lo = hi;
        hi *= 16;
    }
    numerics::RootConfig log_cfg = cfg;
    log_cfg.abs_tol = 1e-10;
    log_cfg.rel_tol = 0;
    return std::exp(numerics::solve_bracketed([&](double s) { return residual(std::exp(s)); }, std::log(lo),
                                              std::log(hi), log_cfg));
}

} // namespace

CalibratedMultipliers calibrate_beta_coupled(SplitModel model, Constraint constraint,
                                             std::span<const ChannelRealization> training, std::span<const Vector> mu,
                                             std::uint64_t seed, const numerics::RootConfig& cfg)
{
    const auto kind = beta_multiplier_kind(constraint);
    if (training.empty()) throw DomainError("calibration needs at least one training realization");
    if (training.size() != mu.size()) throw DomainError("one mu vector per training realization is required");
    const int n = training.front().hops(), nf = training.front().subcarriers();
    const auto m = training.size();
    for (std::size_t r = 0; r < m; ++r) check_mu(training[r], mu[r]);

    CalibratedMultipliers out;
    out.kind = kind;
    out.stage = MultiplierStage::beta;
    out.constraint = constraint;
    out.seed = seed;
    out.samples = static_cast<std::int64_t>(m);
    out.values.resize(kind == MultiplierKind::per_node_per_subcarrier ? n : 1, nf);

    std::vector<Vector> cols;
    cols.reserve(m);
    for (int i = 0; i < nf; ++i) {
        // switched-off subcarriers carry no power and are left out of the budget
        cols.clear();
        for (std::size_t r = 0; r < m; ++r) {
            if (!(mu[r](i) > 0)) continue;
            cols.push_back(model == SplitModel::high_snr ? Vector(training[r].gamma.col(i))
                                                         : Vector(mu[r](i) * training[r].gamma.col(i)));
        }
        if (cols.empty()) throw InfeasibleError("subcarrier " + std::to_string(i) + " is switched off in every training realization");
        auto mean_split = [&](const Vector& lambda) {
            Vector sum = Vector::Zero(n);
            for (const auto& col : cols)
                sum += model == SplitModel::exact ? coupled_split_exact(col, lambda) : coupled_split_asy(col, lambda);
            return Vector(sum / static_cast<double>(m));
        };

        const double common = solve_log_multiplier(
            [&](double l) { return mean_split(Vector::Constant(n, l)).sum() - 1.0; }, 1.0, cfg);
        if (kind == MultiplierKind::per_subcarrier) {
            out.values(0, i) = common;
            continue;
        }
        // per node: damped Newton in log(lambda) from the common multiplier,
        // Jacobian by forward differences
        Eigen::VectorXd x = Eigen::VectorXd::Constant(n, std::log(common));
        auto residual = [&](const Eigen::VectorXd& v) {
            return Eigen::VectorXd((mean_split(Vector(v.array().exp())) * n - 1.0).matrix());
        };
        Eigen::VectorXd f = residual(x);
        double worst = f.cwiseAbs().maxCoeff();
        for (int it = 0; it < 50 && worst > 1e-6; ++it) {
            const double h = 1e-5;
            Eigen::MatrixXd jac(n, n);
            for (int j = 0; j < n; ++j) {
                Eigen::VectorXd xj = x;
                xj(j) += h;
                jac.col(j) = (residual(xj) - f) / h;
            }
            const Eigen::VectorXd dx = -jac.partialPivLu().solve(f);
            bool moved = false;
            for (double step = 1; step > 1e-4 && !moved; step /= 2) {
                const Eigen::VectorXd xn = x + step * dx;
                const Eigen::VectorXd fn = residual(xn);
                if (fn.allFinite() && fn.cwiseAbs().maxCoeff() < worst) {
                    x = xn;
                    f = fn;
                    worst = fn.cwiseAbs().maxCoeff();
                    moved = true;
                }
            }
            if (!moved) break;
        }
        // single columns switching off make the mean jump, which can stall
        // Newton; finish with one-node-at-a-time bracketed solves
        for (int sweep = 0; sweep < 100 && worst > 1e-6; ++sweep) {
            Eigen::VectorXd xn = x;
            for (int k = 0; k < n; ++k) {
                auto own = [&](double l) {
                    Eigen::VectorXd v = xn;
                    v(k) = std::log(l);
                    return residual(v)(k);
                };
                xn(k) = std::log(solve_log_multiplier(own, std::exp(xn(k)), cfg));
            }
            const Eigen::VectorXd fn = residual(xn);
            if (!(fn.cwiseAbs().maxCoeff() < 0.999 * worst)) break;
            x = xn;
            f = fn;
            worst = fn.cwiseAbs().maxCoeff();
        }
        if (worst > 1e-3)
            throw ConvergenceError("per-node multipliers did not settle; worst relative residual " + std::to_string(worst),
                                   worst);
        const Vector lambda = x.array().exp();
        out.values.col(i) = lambda;
    }
    return out;
}

Matrix apply_beta_coupled(SplitModel model, const CalibratedMultipliers& lm, const ChannelRealization& r,
                          const Vector& mu)
{
    check_mu(r, mu);
    lm.validate();
    const int n = r.hops();
    if (lm.stage != MultiplierStage::beta || (lm.kind != MultiplierKind::per_node_per_subcarrier &&
                                              lm.kind != MultiplierKind::per_subcarrier))
        throw UsageError("node split needs per-node or per-subcarrier beta multipliers");
    if (lm.values.cols() != r.subcarriers() ||
        (lm.kind == MultiplierKind::per_node_per_subcarrier && lm.values.rows() != n))
        throw UsageError("multiplier shape does not match the realization");
    Matrix beta(n, r.subcarriers());
    Vector lambda(n);
    for (int i = 0; i < r.subcarriers(); ++i) {
        for (int k = 0; k < n; ++k) lambda(k) = lm.at(k, i);
        if (mu(i) == 0.0)
            beta.col(i).setConstant(1.0 / n);
        else if (model == SplitModel::high_snr)
            beta.col(i) = coupled_split_asy(r.gamma.col(i), lambda);
        else
            beta.col(i) = coupled_split_exact(mu(i) * r.gamma.col(i), lambda);
    }
    return beta;
}

} // namespace afrelay::relaypa
