#include "afrelay/subpa.hpp"

#include "afrelay/errors.hpp"
#include "afrelay/ratecore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace afrelay::subpa {

MultiplierKind mu_multiplier_kind(Constraint constraint)
{
    switch (constraint) {
    case Constraint::ltipc: return MultiplierKind::per_subcarrier;
    case Constraint::lttpc: return MultiplierKind::global;
    case Constraint::stpc: break;
    }
    throw UsageError("STPC subcarrier allocation is solved per realization, not calibrated");
}

Vector subcarrier_load(const ChannelRealization& r, const Matrix& beta)
{
    if (beta.rows() != r.hops() || beta.cols() != r.subcarriers()) throw DomainError("beta shape does not match the realization");
    Vector y(r.subcarriers());
    for (int i = 0; i < r.subcarriers(); ++i) {
        double s = 0;
        for (int k = 0; k < r.hops(); ++k) {
            const double p = beta(k, i) * r.gamma(k, i);
            if (std::isnan(p) || p < 0) throw DomainError("beta*gamma must be >= 0");
            s += p > 0 ? 1.0 / p : std::numeric_limits<double>::infinity();
        }
        y(i) = s;
    }
    return y;
}

double level_for_weighted_excess(std::span<const double> loads, std::span<const double> weights, double target)
{
    if (loads.size() != weights.size()) throw DomainError("loads and weights differ in length");
    if (!(target > 0)) throw DomainError("target must be > 0");
    std::vector<std::size_t> order;
    order.reserve(loads.size());
    for (std::size_t j = 0; j < loads.size(); ++j)
        if (std::isfinite(loads[j]) && weights[j] > 0) order.push_back(j);
    if (order.empty()) throw InfeasibleError("no subcarrier can carry power");
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return loads[a] < loads[b]; });

    double w_sum = 0, wy_sum = 0;
    for (std::size_t m = 0; m < order.size(); ++m) {
        w_sum += weights[order[m]];
        wy_sum += weights[order[m]] * loads[order[m]];
        const double level = (target + wy_sum) / w_sum;
        if (m + 1 == order.size() || level <= loads[order[m + 1]]) return level;
    }
    return (target + wy_sum) / w_sum;
}

Waterfill waterfill(std::span<const double> loads, double budget)
{
    const std::vector<double> ones(loads.size(), 1.0);
    Waterfill out;
    out.level = level_for_weighted_excess(loads, ones, budget);
    out.mu.resize(static_cast<Eigen::Index>(loads.size()));
    for (std::size_t j = 0; j < loads.size(); ++j)
        out.mu(static_cast<Eigen::Index>(j)) = std::isfinite(loads[j]) ? std::max(out.level - loads[j], 0.0) : 0.0;
    return out;
}

Vector solve_mu_asy_stpc(const ChannelRealization& r, const Matrix& beta)
{
    const Vector y = subcarrier_load(r, beta);
    return waterfill({y.data(), static_cast<std::size_t>(y.size())}, 1.0).mu;
}

CalibratedMultipliers calibrate_mu_asy(Constraint constraint, std::span<const Vector> loads, std::uint64_t seed)
{
    const auto kind = mu_multiplier_kind(constraint);
    if (loads.empty()) throw DomainError("calibration needs at least one training realization");
    const auto nf = loads.front().size();
    const auto m = loads.size();
    CalibratedMultipliers out;
    out.kind = kind;
    out.stage = MultiplierStage::mu;
    out.constraint = constraint;
    out.seed = seed;
    out.samples = static_cast<std::int64_t>(m);

    if (kind == MultiplierKind::per_subcarrier) {
        out.values.resize(1, nf);
        std::vector<double> y(m), w(m, 1.0);
        for (Eigen::Index i = 0; i < nf; ++i) {
            for (std::size_t r = 0; r < m; ++r) y[r] = loads[r](i);
            // sum over realizations of (w - Y)^+ = M / N_F
            out.values(0, i) = 1.0 / level_for_weighted_excess(y, w, static_cast<double>(m) / static_cast<double>(nf));
        }
    } else {
        std::vector<double> y;
        y.reserve(m * static_cast<std::size_t>(nf));
        for (const auto& l : loads) y.insert(y.end(), l.data(), l.data() + l.size());
        const std::vector<double> w(y.size(), 1.0);
        out.values.resize(1, 1);
        out.values(0, 0) = 1.0 / level_for_weighted_excess(y, w, static_cast<double>(m));
    }
    return out;
}

Vector apply_mu_asy(const CalibratedMultipliers& lm, const Vector& load)
{
    lm.validate();
    if (lm.kind == MultiplierKind::per_subcarrier && lm.values.cols() != load.size())
        throw UsageError("multiplier shape does not match the number of subcarriers");
    Vector mu(load.size());
    for (Eigen::Index i = 0; i < load.size(); ++i)
        mu(i) = std::isfinite(load(i)) ? std::max(1.0 / lm.at(0, static_cast<int>(i)) - load(i), 0.0) : 0.0;
    return mu;
}

Vector solve_mu_asy(Constraint constraint, const ChannelRealization& r, const Matrix& beta, const CalibratedMultipliers* lm)
{
    if (constraint == Constraint::stpc) return solve_mu_asy_stpc(r, beta);
    if (lm == nullptr) throw UsageError("long-term subcarrier allocation needs calibrated multipliers");
    if (lm->kind != mu_multiplier_kind(constraint) || lm->stage != MultiplierStage::mu)
        throw UsageError("multiplier kind " + to_string(lm->kind) + " does not match " + to_string(constraint));
    return apply_mu_asy(*lm, subcarrier_load(r, beta));
}

std::vector<std::optional<numerics::StationaryMu>> stationary_problems(const ChannelRealization& r, const Matrix& beta,
                                                                       double mu_max)
{
    if (beta.rows() != r.hops() || beta.cols() != r.subcarriers()) throw DomainError("beta shape does not match the realization");
    std::vector<std::optional<numerics::StationaryMu>> out(static_cast<std::size_t>(r.subcarriers()));
    std::vector<double> b(static_cast<std::size_t>(r.hops())), g(b.size());
    for (int i = 0; i < r.subcarriers(); ++i) {
        bool live = true;
        for (int k = 0; k < r.hops(); ++k) {
            b[static_cast<std::size_t>(k)] = beta(k, i);
            g[static_cast<std::size_t>(k)] = r.gamma(k, i);
            live = live && beta(k, i) * r.gamma(k, i) > 0 && std::isfinite(beta(k, i) * r.gamma(k, i));
        }
        if (live) out[static_cast<std::size_t>(i)].emplace(a_coefficients(b, g), mu_max);
    }
    return out;
}

namespace {

using Problems = std::vector<std::optional<numerics::StationaryMu>>;

double total_utility(const Problems& p, const Vector& mu)
{
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i]) s += p[i]->utility(mu(static_cast<Eigen::Index>(i)));
    return s;
}

double fill(const Problems& p, double level, Vector& mu)
{
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = p[i] ? p[i]->solve(level) : 0.0;
        mu(static_cast<Eigen::Index>(i)) = v;
        s += v;
    }
    return s;
}

// Branch roots over a fixed active set, zero elsewhere.
double fill_branch(const Problems& p, const std::vector<char>& active, double level, Vector& mu)
{
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = active[i] ? p[i]->branch_root(level) : 0.0;
        mu(static_cast<Eigen::Index>(i)) = v;
        s += v;
    }
    return s;
}

// Level in [lo, hi] (log-bisection) where the branch-root sum over `active` hits 1.
std::optional<Vector> close_budget_on_branch(const Problems& p, const std::vector<char>& active, double lo, double hi)
{
    Vector mu(static_cast<Eigen::Index>(p.size()));
    const double s_lo = fill_branch(p, active, lo, mu);
    const double s_hi = fill_branch(p, active, hi, mu);
    if (!(s_lo >= 1.0 && s_hi <= 1.0)) return std::nullopt;
    numerics::RootConfig cfg;
    cfg.abs_tol = 1e-15;
    cfg.max_iter = 200;
    double s = 0;
    try {
        s = numerics::bisect([&](double t) { return fill_branch(p, active, std::exp(t), mu) - 1.0; }, std::log(lo),
                             std::log(hi), cfg);
    } catch (const ConvergenceError& e) {
        s = e.best_iterate();
    }
    const double sum = fill_branch(p, active, std::exp(s), mu);
    if (!(sum > 0)) return std::nullopt;
    return Vector(mu / sum);
}

} // namespace

Vector solve_mu_exact_stpc(const ChannelRealization& r, const Matrix& beta, const numerics::RootConfig& cfg)
{
    const auto p = stationary_problems(r, beta, 1.0);
    const auto nf = static_cast<Eigen::Index>(p.size());
    const auto live = std::count_if(p.begin(), p.end(), [](const auto& q) { return q.has_value(); });
    if (live == 0) throw InfeasibleError("every subcarrier has a dead hop; the budget cannot be placed");

    Vector mu = Vector::Zero(nf);
    if (live == 1) {
        for (Eigen::Index i = 0; i < nf; ++i) mu(i) = p[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        return mu;
    }

    double hi = 0, lo = std::numeric_limits<double>::infinity();
    for (const auto& q : p)
        if (q) {
            hi = std::max(hi, q->peak_level());
            lo = std::min({lo, q->marginal(1.0), q->utility(1.0)});
        }
    hi *= 1.0 + 1e-9;
    lo *= 0.5;
    Vector mu_lo(nf), mu_hi(nf);
    double s_lo = fill(p, lo, mu_lo);
    for (int guard = 0; s_lo < 1.0; ++guard) {
        if (guard > 60) throw InfeasibleError("subcarrier budget unreachable: allocations saturate below 1");
        lo *= 0.1;
        s_lo = fill(p, lo, mu_lo);
    }
    double s_hi = fill(p, hi, mu_hi);

    // log-bisection on the level; sum is non-increasing with jumps
    for (int it = 0; it < cfg.max_iter && std::log(hi / lo) > 1e-13; ++it) {
        const double mid = std::sqrt(lo * hi);
        Vector tmp(nf);
        const double s = fill(p, mid, tmp);
        if (s >= 1.0) {
            lo = mid;
            s_lo = s;
            mu_lo = tmp;
        } else {
            hi = mid;
            s_hi = s;
            mu_hi = tmp;
        }
    }

    const double tol = cfg.abs_tol > 0 ? std::max(cfg.abs_tol, 1e-10) : 1e-10;
    if (std::abs(s_lo - 1.0) <= tol) return mu_lo / s_lo;
    if (std::abs(s_hi - 1.0) <= tol && s_hi > 0) return mu_hi / s_hi;

    // The level sits on a jump. Candidates: scale the over-full side down, or
    // close the budget on the continuous branch roots of either active set.
    std::vector<Vector> candidates{mu_lo / s_lo};
    std::vector<char> active_hi(p.size()), active_lo(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        active_hi[i] = mu_hi(static_cast<Eigen::Index>(i)) > 0;
        active_lo[i] = mu_lo(static_cast<Eigen::Index>(i)) > 0;
    }
    if (std::any_of(active_hi.begin(), active_hi.end(), [](char c) { return c; }))
        if (auto v = close_budget_on_branch(p, active_hi, lo * 1e-12, hi)) candidates.push_back(std::move(*v));
    double top = lo;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (active_lo[i]) top = std::max(top, p[i]->peak_level());
    if (auto v = close_budget_on_branch(p, active_lo, lo, top * (1.0 + 1e-9))) candidates.push_back(std::move(*v));

    std::size_t best = 0;
    double best_u = -1;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double u = total_utility(p, candidates[c]);
        if (u > best_u) {
            best_u = u;
            best = c;
        }
    }
    return candidates[best];
}

CalibratedMultipliers calibrate_mu_exact(Constraint constraint, std::span<const ChannelRealization> training,
                                         std::span<const Matrix> beta, std::uint64_t seed,
                                         const numerics::RootConfig& cfg, std::vector<Vector>* training_mu)
{
    const auto kind = mu_multiplier_kind(constraint);
    if (training.empty()) throw DomainError("calibration needs at least one training realization");
    if (training.size() != beta.size()) throw DomainError("one beta matrix per training realization is required");
    const auto m = training.size();
    const int nf = training.front().subcarriers();

    std::vector<Problems> problems;
    problems.reserve(m);
    for (std::size_t r = 0; r < m; ++r) problems.push_back(stationary_problems(training[r], beta[r], long_term_mu_cap));

    CalibratedMultipliers out;
    out.kind = kind;
    out.stage = MultiplierStage::mu;
    out.constraint = constraint;
    out.seed = seed;
    out.samples = static_cast<std::int64_t>(m);

    auto mean_mu = [&](int i, double level) {
        double s = 0;
        for (const auto& pr : problems) {
            const auto& q = pr[static_cast<std::size_t>(i)];
            if (q) s += q->solve(level);
        }
        return s / static_cast<double>(m);
    };

    if (kind == MultiplierKind::per_subcarrier) {
        out.values.resize(1, nf);
        for (int i = 0; i < nf; ++i)
            out.values(0, i) = numerics::solve_multiplier([&](double l) { return mean_mu(i, l) - 1.0 / nf; }, cfg);
    } else {
        out.values.resize(1, 1);
        out.values(0, 0) = numerics::solve_multiplier(
            [&](double l) {
                double s = 0;
                for (int i = 0; i < nf; ++i) s += mean_mu(i, l);
                return s - 1.0;
            },
            cfg);
    }

    if (training_mu != nullptr) {
        training_mu->assign(m, Vector());
        for (std::size_t r = 0; r < m; ++r) {
            Vector mu = Vector::Zero(nf);
            for (int i = 0; i < nf; ++i)
                if (const auto& q = problems[r][static_cast<std::size_t>(i)]) mu(i) = q->solve(out.at(0, i));
            (*training_mu)[r] = std::move(mu);
        }
    }
    return out;
}

Vector apply_mu_exact(const CalibratedMultipliers& lm, const ChannelRealization& r, const Matrix& beta)
{
    lm.validate();
    if (lm.kind == MultiplierKind::per_subcarrier && lm.values.cols() != r.subcarriers())
        throw UsageError("multiplier shape does not match the number of subcarriers");
    const auto p = stationary_problems(r, beta, long_term_mu_cap);
    Vector mu = Vector::Zero(r.subcarriers());
    for (int i = 0; i < r.subcarriers(); ++i)
        if (const auto& q = p[static_cast<std::size_t>(i)]) mu(i) = q->solve(lm.at(0, i));
    return mu;
}

Vector solve_mu_exact(Constraint constraint, const ChannelRealization& r, const Matrix& beta,
                      const CalibratedMultipliers* lm, const numerics::RootConfig& cfg)
{
    if (constraint == Constraint::stpc) return solve_mu_exact_stpc(r, beta, cfg);
    if (lm == nullptr) throw UsageError("long-term subcarrier allocation needs calibrated multipliers");
    if (lm->kind != mu_multiplier_kind(constraint) || lm->stage != MultiplierStage::mu)
        throw UsageError("multiplier kind " + to_string(lm->kind) + " does not match " + to_string(constraint));
    return apply_mu_exact(*lm, r, beta);
}

} // namespace afrelay::subpa
