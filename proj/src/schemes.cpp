#include "afrelay/schemes.hpp"

#include "afrelay/errors.hpp"
#include "afrelay/relaypa.hpp"
#include "afrelay/subpa.hpp"

#include <cmath>
#include <limits>

namespace afrelay::schemes {

std::string to_string(StopReason s)
{
    return s == StopReason::tolerance ? "tolerance" : "max_iterations";
}

numerics::RootConfig root_config(const SolverTolerances& tol)
{
    numerics::RootConfig cfg;
    cfg.abs_tol = tol.root_abs_tol;
    cfg.rel_tol = tol.root_rel_tol;
    cfg.max_iter = tol.root_max_iter;
    return cfg;
}

IterateOptions options_from(const SystemConfig& config)
{
    IterateOptions opt;
    opt.epsilon = config.tolerances.iteration_eps;
    opt.max_iterations = config.tolerances.max_iterations;
    opt.root = root_config(config.tolerances);
    return opt;
}

Allocation epa(int hops, int subcarriers)
{
    if (hops < 1 || subcarriers < 1) throw DomainError("epa: hops and subcarriers must be >= 1");
    return {Vector::Constant(subcarriers, 1.0 / subcarriers), Matrix::Constant(hops, subcarriers, 1.0 / hops)};
}

Allocation epa(const SystemConfig& config)
{
    return epa(config.hops, config.subcarriers);
}

namespace {

double rate_of(const ChannelRealization& r, const Allocation& a)
{
    const double c = instantaneous_rate(r, a).rate;
    if (!std::isfinite(c)) throw NumericalError("rate evaluated to a non-finite value");
    return c;
}

[[noreturn]] void rethrow_at(int iteration, const SolverError& e)
{
    const std::string msg = "iteration " + std::to_string(iteration) + ": " + e.what();
    if (const auto* c = dynamic_cast<const ConvergenceError*>(&e)) throw ConvergenceError(msg, c->best_iterate());
    if (dynamic_cast<const BracketError*>(&e) != nullptr) throw BracketError(msg);
    if (dynamic_cast<const InfeasibleError*>(&e) != nullptr) throw InfeasibleError(msg);
    if (dynamic_cast<const NumericalError*>(&e) != nullptr) throw NumericalError(msg);
    throw SolverError(msg);
}

struct AsyTerms {
    Matrix b;  // high-SNR node split
    Vector y;  // load under b
    Vector s;  // column sums of b
};

AsyTerms asy_terms(Constraint constraint, const ChannelRealization& r, const LinkBudget& budget)
{
    AsyTerms t;
    t.b = relaypa::solve_beta_asy(constraint, r, budget);
    t.y = subpa::subcarrier_load(r, t.b);
    t.s = t.b.colwise().sum().transpose();
    return t;
}

relaypa::SplitModel split_model(Mode mode)
{
    return mode == Mode::exact ? relaypa::SplitModel::exact : relaypa::SplitModel::high_snr;
}

std::vector<double> to_std(const Vector& v)
{
    return {v.data(), v.data() + v.size()};
}

} // namespace

CalibratedMultipliers calibrate_asy(Constraint constraint, std::span<const ChannelRealization> training,
                                    const LinkBudget& budget, std::uint64_t seed)
{
    const auto kind = subpa::mu_multiplier_kind(constraint);
    if (training.empty()) throw DomainError("calibration needs at least one training realization");
    const auto m = training.size();
    const int nf = budget.subcarriers();

    std::vector<AsyTerms> terms;
    terms.reserve(m);
    for (const auto& r : training) terms.push_back(asy_terms(constraint, r, budget));

    CalibratedMultipliers out;
    out.kind = kind;
    out.stage = MultiplierStage::alpha;
    out.constraint = constraint;
    out.seed = seed;
    out.samples = static_cast<std::int64_t>(m);

    if (kind == MultiplierKind::per_subcarrier) {
        out.values.resize(1, nf);
        std::vector<double> y(m), w(m);
        for (int i = 0; i < nf; ++i) {
            for (std::size_t r = 0; r < m; ++r) {
                y[r] = terms[r].s(i) * terms[r].y(i);
                w[r] = 1.0;
            }
            out.values(0, i) = 1.0 / subpa::level_for_weighted_excess(y, w, static_cast<double>(m) / nf);
        }
    } else {
        std::vector<double> y, w;
        y.reserve(m * static_cast<std::size_t>(nf));
        w.reserve(y.capacity());
        for (const auto& t : terms)
            for (int i = 0; i < nf; ++i) {
                y.push_back(t.s(i) * t.y(i));
                w.push_back(1.0);
            }
        out.values.resize(1, 1);
        out.values(0, 0) = 1.0 / subpa::level_for_weighted_excess(y, w, static_cast<double>(m));
    }
    return out;
}

Allocation asy_noniterative(Constraint constraint, const ChannelRealization& r, const LinkBudget& budget,
                            const CalibratedMultipliers* lm)
{
    const AsyTerms t = asy_terms(constraint, r, budget);
    const int nf = r.subcarriers();
    Vector level(nf);
    if (constraint == Constraint::stpc) {
        level.setConstant(subpa::level_for_weighted_excess(to_std(t.s.cwiseProduct(t.y)), std::vector<double>(nf, 1.0), 1.0));
    } else {
        if (lm == nullptr) throw UsageError("long-term ASY allocation needs calibrated multipliers");
        if (lm->stage != MultiplierStage::alpha || lm->kind != subpa::mu_multiplier_kind(constraint))
            throw UsageError("multiplier kind " + to_string(lm->kind) + " does not match ASY under " + to_string(constraint));
        lm->validate();
        if (lm->kind == MultiplierKind::per_subcarrier && lm->values.cols() != nf)
            throw UsageError("multiplier shape does not match the number of subcarriers");
        for (int i = 0; i < nf; ++i) level(i) = 1.0 / lm->at(0, i);
    }
    Allocation a;
    a.mu.resize(nf);
    a.beta.resize(r.hops(), nf);
    for (int i = 0; i < nf; ++i) {
        a.mu(i) = std::isfinite(t.y(i)) ? std::max(level(i) - t.s(i) * t.y(i), 0.0) : 0.0;
        a.beta.col(i) = t.b.col(i) / t.s(i);
    }
    return a;
}

IterateResult iterate(Mode mode, Constraint constraint, const ChannelRealization& r, const LinkBudget& budget,
                      const IterateOptions& opt)
{
    if (is_long_term(constraint)) throw UsageError("long-term constraints are iterated over an ensemble; use train_policy");
    if (opt.max_iterations < 0) throw DomainError("max_iterations must be >= 0");
    if (!(opt.epsilon > 0)) throw DomainError("epsilon must be > 0");

    IterateResult res;
    Allocation cur = epa(r.hops(), r.subcarriers());
    double rate = rate_of(r, cur);
    res.trace.rates.push_back(rate);
    res.trace.snapshots.push_back(cur);

    for (int it = 1; it <= opt.max_iterations; ++it) {
        Allocation next = cur;
        double half = 0, full = 0;
        try {
            next.beta = mode == Mode::exact ? relaypa::solve_beta_exact_stpc(r, cur.mu, opt.root)
                                            : relaypa::solve_beta_asy(constraint, r, budget);
            half = rate_of(r, next);
            if (mode == Mode::exact && half < rate) {
                next.beta = cur.beta;
                half = rate;
            }
            next.mu = mode == Mode::exact ? subpa::solve_mu_exact_stpc(r, next.beta, opt.root)
                                          : subpa::solve_mu_asy_stpc(r, next.beta);
            full = rate_of(r, next);
            if (mode == Mode::exact && full < half) {
                next.mu = cur.mu;
                full = half;
            }
        } catch (const SolverError& e) {
            rethrow_at(it, e);
        }
        res.trace.half_rates.push_back(half);
        res.trace.rates.push_back(full);
        res.trace.snapshots.push_back(next);
        cur = std::move(next);
        rate = full;
        if (!opt.force_iterations && std::abs(full - half) < opt.epsilon) {
            res.trace.stop = StopReason::tolerance;
            break;
        }
    }
    res.allocation = cur;
    return res;
}

std::vector<CalibratedMultipliers> Policy::multiplier_sets() const
{
    std::vector<CalibratedMultipliers> out;
    for (const auto& s : stages)
        if (s.multipliers) out.push_back(*s.multipliers);
    return out;
}

Policy train_policy(Mode mode, Constraint constraint, const LinkBudget& budget,
                    std::span<const ChannelRealization> training, std::uint64_t seed, const IterateOptions& opt)
{
    if (!is_long_term(constraint)) throw UsageError("STPC needs no trained policy; use iterate");
    if (training.empty()) throw DomainError("training ensemble is empty");
    if (opt.max_iterations < 0) throw DomainError("max_iterations must be >= 0");
    const int n = budget.hops(), nf = budget.subcarriers();
    const auto m = training.size();

    std::vector<Vector> mu(m, Vector::Constant(nf, 1.0 / nf));
    std::vector<Matrix> beta(m, Matrix::Constant(n, nf, 1.0 / n));

    auto ensemble_rate = [&](double& stderr_out) {
        double mean = 0, m2 = 0;
        for (std::size_t r = 0; r < m; ++r) {
            const double c = rate_of(training[r], Allocation{mu[r], beta[r]});
            const double d = c - mean;
            mean += d / static_cast<double>(r + 1);
            m2 += d * (c - mean);
        }
        stderr_out = m > 1 ? std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
        return mean;
    };

    Policy p;
    p.mode = mode;
    p.constraint = constraint;
    double se = 0;
    p.training_rate.push_back(ensemble_rate(se));
    p.training_stderr.push_back(se);

    for (int it = 1; it <= opt.max_iterations; ++it) {
        PolicyStage bs{MultiplierStage::beta, std::nullopt};
        PolicyStage ms{MultiplierStage::mu, std::nullopt};
        try {
            {
                const auto model = split_model(mode);
                auto lm = relaypa::calibrate_beta_coupled(model, constraint, training, mu, seed, opt.root);
                lm.iteration = it;
                for (std::size_t r = 0; r < m; ++r) beta[r] = relaypa::apply_beta_coupled(model, lm, training[r], mu[r]);
                bs.multipliers = std::move(lm);
            }
            p.training_half_rate.push_back(ensemble_rate(se));

            if (mode == Mode::exact) {
                auto lm = subpa::calibrate_mu_exact(constraint, training, beta, seed, opt.root, &mu);
                lm.iteration = it;
                ms.multipliers = std::move(lm);
            } else {
                std::vector<Vector> loads(m);
                for (std::size_t r = 0; r < m; ++r) loads[r] = subpa::subcarrier_load(training[r], beta[r]);
                auto lm = subpa::calibrate_mu_asy(constraint, loads, seed);
                lm.iteration = it;
                for (std::size_t r = 0; r < m; ++r) mu[r] = subpa::apply_mu_asy(lm, loads[r]);
                ms.multipliers = std::move(lm);
            }
            p.training_rate.push_back(ensemble_rate(se));
            p.training_stderr.push_back(se);
        } catch (const SolverError& e) {
            rethrow_at(it, e);
        }
        p.stages.push_back(std::move(bs));
        p.stages.push_back(std::move(ms));
        if (!opt.force_iterations && std::abs(p.training_rate.back() - p.training_half_rate.back()) < opt.epsilon) {
            p.stop = StopReason::tolerance;
            break;
        }
    }
    return p;
}

IterateResult apply_policy(const Policy& p, const ChannelRealization& r, const LinkBudget& budget)
{
    if (budget.hops() != r.hops() || budget.subcarriers() != r.subcarriers())
        throw DomainError("budget shape does not match the realization");
    IterateResult res;
    Allocation cur = epa(r.hops(), r.subcarriers());
    res.trace.rates.push_back(rate_of(r, cur));
    res.trace.snapshots.push_back(cur);
    for (std::size_t s = 0; s + 1 < p.stages.size(); s += 2) {
        const int it = static_cast<int>(s / 2) + 1;
        try {
            const auto& bs = p.stages[s];
            if (!bs.multipliers) throw UsageError("policy is missing node multipliers");
            cur.beta = relaypa::apply_beta_coupled(split_model(p.mode), *bs.multipliers, r, cur.mu);
            res.trace.half_rates.push_back(rate_of(r, cur));
            const auto& ms = p.stages[s + 1];
            if (!ms.multipliers) throw UsageError("policy is missing subcarrier multipliers");
            cur.mu = p.mode == Mode::exact ? subpa::apply_mu_exact(*ms.multipliers, r, cur.beta)
                                           : subpa::apply_mu_asy(*ms.multipliers, subpa::subcarrier_load(r, cur.beta));
            res.trace.rates.push_back(rate_of(r, cur));
        } catch (const SolverError& e) {
            rethrow_at(it, e);
        }
        res.trace.snapshots.push_back(cur);
    }
    res.trace.stop = p.stop;
    res.allocation = std::move(cur);
    return res;
}

void write_trace_csv_header(std::ostream& out)
{
    out << "trial,iteration,rate,scheme,constraint\n";
}

void write_trace_csv(std::ostream& out, long trial, const IterationTrace& trace, Scheme scheme, Constraint constraint)
{
    const auto old = out.precision(17);
    for (std::size_t j = 0; j < trace.rates.size(); ++j)
        out << trial << ',' << j << ',' << trace.rates[j] << ',' << afrelay::to_string(scheme) << ','
            << afrelay::to_string(constraint) << '\n';
    out.precision(old);
}

} // namespace afrelay::schemes
