#include "afrelay/simkit.hpp"

#include "afrelay/errors.hpp"
#include "afrelay/subpa.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace afrelay::simkit {

int resolve_threads(int requested)
{
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void write_csv(std::ostream& out, const ExperimentResult& result)
{
    out << csv_header << '\n';
    const auto old = out.precision(17);
    for (const auto& r : result.rows)
        out << r.experiment << ',' << to_string(r.scheme) << ',' << to_string(r.constraint) << ',' << r.hops << ','
            << r.subcarriers << ',' << to_string(r.topology) << ',' << r.gamma0_db << ',' << r.metric << ','
            << r.value << ',' << r.stderr_value << ',' << r.trials << ',' << r.seed << '\n';
    out.precision(old);
}

std::vector<ChannelRealization> training_set(const LinkBudget& budget, std::uint64_t seed, int samples)
{
    if (samples < 1) throw ConfigError("training_samples must be >= 1");
    std::vector<ChannelRealization> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int m = 0; m < samples; ++m) {
        RandomStream s(seed, StreamPurpose::training, static_cast<std::uint64_t>(m));
        out.push_back(sample_realization(budget, s));
    }
    return out;
}

ChannelRealization evaluation_draw(const LinkBudget& budget, std::uint64_t seed, std::uint64_t trial)
{
    RandomStream s(seed, StreamPurpose::evaluation, trial);
    return sample_realization(budget, s);
}

SchemeRunner::SchemeRunner(const SystemConfig& config, Scheme scheme, const LinkBudget& budget,
                           const schemes::IterateOptions& options)
    : scheme_(scheme), constraint_(config.constraint), budget_(budget), options_(options)
{
    if (!is_long_term(constraint_) || scheme_ == Scheme::epa) return;
    const auto training = training_set(budget_, config.seed, config.training_samples);
    if (scheme_ == Scheme::asy) {
        asy_ = schemes::calibrate_asy(constraint_, training, budget_, config.seed);
    } else {
        const auto mode = scheme_ == Scheme::it_exa ? schemes::Mode::exact : schemes::Mode::asy;
        policy_ = schemes::train_policy(mode, constraint_, budget_, training, config.seed, options_);
    }
}

schemes::IterateResult SchemeRunner::run(const ChannelRealization& r) const
{
    schemes::IterateResult res;
    switch (scheme_) {
    case Scheme::epa:
        res.allocation = schemes::epa(r.hops(), r.subcarriers());
        break;
    case Scheme::asy:
        res.allocation = schemes::asy_noniterative(constraint_, r, budget_, asy_ ? &*asy_ : nullptr);
        break;
    case Scheme::it_exa:
    case Scheme::it_asy:
        if (policy_) return schemes::apply_policy(*policy_, r, budget_);
        return schemes::iterate(scheme_ == Scheme::it_exa ? schemes::Mode::exact : schemes::Mode::asy, constraint_, r,
                                budget_, options_);
    }
    const double c = instantaneous_rate(r, res.allocation).rate;
    if (!std::isfinite(c)) throw NumericalError("rate evaluated to a non-finite value");
    res.trace.rates.push_back(c);
    res.trace.snapshots.push_back(res.allocation);
    res.trace.stop = schemes::StopReason::tolerance;
    return res;
}

namespace {

std::string point_label(Scheme scheme, double gamma0_db)
{
    std::ostringstream os;
    os << to_string(scheme) << " at " << gamma0_db << " dB";
    return os.str();
}

PointOutcome evaluate_with(const SystemConfig& config, const SchemeRunner& runner, const LinkBudget& budget,
                           std::ostream* trace_out, double gamma0_db)
{
    const auto t_count = static_cast<std::size_t>(config.trials);
    PointOutcome out;
    out.traces.assign(t_count, {});
    std::vector<char> failed(t_count, 0);
    parallel_for(t_count, config.threads, [&](std::size_t t) {
        try {
            const auto r = evaluation_draw(budget, config.seed, t);
            out.traces[t] = runner.run(r).trace.rates;
        } catch (const SolverError&) {
            failed[t] = 1;
        }
    });
    out.failures = std::count(failed.begin(), failed.end(), 1);
    if (out.failures * 100 > static_cast<long>(t_count))
        throw SolverError(point_label(runner.scheme(), gamma0_db) + ": " + std::to_string(out.failures) + " of " +
                          std::to_string(t_count) + " trials failed");
    if (trace_out != nullptr)
        for (std::size_t t = 0; t < t_count; ++t) {
            if (out.traces[t].empty()) continue;
            schemes::IterationTrace tr;
            tr.rates = out.traces[t];
            schemes::write_trace_csv(*trace_out, static_cast<long>(t), tr, runner.scheme(), config.constraint);
        }
    return out;
}

struct Moments {
    double mean = 0;
    double stderr_value = 0;
    long count = 0;
};

template <class G>
Moments moments(const PointOutcome& p, G&& value_of)
{
    Moments m;
    double m2 = 0;
    for (const auto& tr : p.traces) {
        if (tr.empty()) continue;
        const double x = value_of(tr);
        ++m.count;
        const double d = x - m.mean;
        m.mean += d / static_cast<double>(m.count);
        m2 += d * (x - m.mean);
    }
    if (m.count > 1) m.stderr_value = std::sqrt(m2 / static_cast<double>(m.count - 1) / static_cast<double>(m.count));
    return m;
}

ResultRow row_for(const SystemConfig& c, const char* experiment, Scheme scheme, double g0, std::string metric,
                  const Moments& m)
{
    ResultRow r;
    r.experiment = experiment;
    r.scheme = scheme;
    r.constraint = c.constraint;
    r.hops = c.hops;
    r.subcarriers = c.subcarriers;
    r.topology = c.topology;
    r.gamma0_db = g0;
    r.metric = std::move(metric);
    r.value = m.mean;
    r.stderr_value = m.stderr_value;
    r.trials = m.count;
    r.seed = c.seed;
    return r;
}

} // namespace

PointOutcome evaluate_point(const SystemConfig& config, Scheme scheme, double gamma0_db,
                            const schemes::IterateOptions& options)
{
    config.validate();
    const auto budget = build_link_budget(config, db_to_linear(gamma0_db));
    const SchemeRunner runner(config, scheme, budget, options);
    return evaluate_with(config, runner, budget, nullptr, gamma0_db);
}

ExperimentResult run_sweep(const SystemConfig& config)
{
    config.validate();
    const auto opt = schemes::options_from(config);
    ExperimentResult res;
    for (const double g0 : config.direct_snr_db)
        for (const Scheme s : config.schemes) {
            const auto p = evaluate_point(config, s, g0, opt);
            res.rows.push_back(
                row_for(config, "sweep", s, g0, "mean_rate", moments(p, [](const auto& tr) { return tr.back(); })));
        }
    return res;
}

ExperimentResult run_outage(const SystemConfig& config)
{
    config.validate();
    if (config.trials < 100) throw ConfigError("outage needs trials >= 100");
    const auto opt = schemes::options_from(config);
    const double r0 = config.outage_threshold;
    ExperimentResult res;
    for (const double g0 : config.direct_snr_db)
        for (const Scheme s : config.schemes) {
            const auto p = evaluate_point(config, s, g0, opt);
            auto m = moments(p, [r0](const auto& tr) { return tr.back() < r0 ? 1.0 : 0.0; });
            // binomial standard error
            m.stderr_value = m.count > 0 ? std::sqrt(m.mean * (1.0 - m.mean) / static_cast<double>(m.count)) : 0.0;
            res.rows.push_back(row_for(config, "outage", s, g0, "outage", m));
        }
    return res;
}

ExperimentResult run_convergence(const SystemConfig& config, std::ostream* trace_out)
{
    config.validate();
    if (config.iterations < 1) throw ConfigError("iterations must be >= 1");
    auto opt = schemes::options_from(config);
    opt.force_iterations = true;
    opt.max_iterations = config.iterations;
    std::vector<Scheme> iterative;
    for (const Scheme s : config.schemes)
        if (s == Scheme::it_exa || s == Scheme::it_asy) iterative.push_back(s);
    if (iterative.empty()) throw ConfigError("convergence study needs IT-EXA or IT-ASY in the scheme list");

    if (trace_out != nullptr) schemes::write_trace_csv_header(*trace_out);
    ExperimentResult res;
    for (const double g0 : config.direct_snr_db)
        for (const Scheme s : iterative) {
            const auto budget = build_link_budget(config, db_to_linear(g0));
            const SchemeRunner runner(config, s, budget, opt);
            const auto p = evaluate_with(config, runner, budget, trace_out, g0);
            for (int i = 0; i <= config.iterations; ++i) {
                const auto idx = static_cast<std::size_t>(i);
                // a forced run has every entry; a short trace holds its final value
                const auto m = moments(p, [idx](const auto& tr) { return tr[std::min(idx, tr.size() - 1)]; });
                res.rows.push_back(row_for(config, "convergence", s, g0, "rate_iter_" + std::to_string(i), m));
            }
        }
    return res;
}

OracleResult oracle_grid_search(const ChannelRealization& r, double h)
{
    const int n = r.hops(), nf = r.subcarriers();
    if (n > 2 || nf > 2) throw SizeError("oracle grid search is limited to N <= 2 and N_F <= 2");
    if (!(h >= 1e-4 && h <= 1e-2)) throw SizeError("oracle resolution must lie in [1e-4, 1e-2]");
    const long steps = std::lround(1.0 / h);
    const double step = 1.0 / static_cast<double>(steps);

    // The rate is separable across subcarriers once mu is fixed, so the best
    // node split is scanned per subcarrier for each mu on the grid.
    auto best_subcarrier = [&](int i, double mu, double& beta0) {
        double best = -1;
        const long bsteps = n == 1 ? 0 : steps;
        for (long b = 0; b <= bsteps; ++b) {
            const double b0 = n == 1 ? 1.0 : static_cast<double>(b) * step;
            double hop[2] = {b0 * mu * r.gamma(0, i), 0};
            if (n == 2) hop[1] = (1.0 - b0) * mu * r.gamma(1, i);
            const double v = std::log2(1.0 + end_to_end_snr({hop, static_cast<std::size_t>(n)}));
            if (v > best) {
                best = v;
                beta0 = b0;
            }
        }
        return best;
    };

    OracleResult res;
    res.rate = -1;
    res.allocation.mu.resize(nf);
    res.allocation.beta.resize(n, nf);
    const long msteps = nf == 1 ? 0 : steps;
    for (long j = 0; j <= msteps; ++j) {
        const double mu0 = nf == 1 ? 1.0 : static_cast<double>(j) * step;
        double b[2] = {0, 0};
        double total = best_subcarrier(0, mu0, b[0]);
        if (nf == 2) total += best_subcarrier(1, 1.0 - mu0, b[1]);
        total /= n;
        if (total > res.rate) {
            res.rate = total;
            res.allocation.mu(0) = mu0;
            if (nf == 2) res.allocation.mu(1) = 1.0 - mu0;
            for (int i = 0; i < nf; ++i) {
                res.allocation.beta(0, i) = b[i];
                if (n == 2) res.allocation.beta(1, i) = 1.0 - b[i];
            }
        }
    }
    return res;
}

std::vector<Check> run_validation(const SystemConfig& config, int oracle_trials, double h)
{
    config.validate();
    std::vector<Check> checks;
    const double g0 = db_to_linear(config.direct_snr_db.front());
    const auto opt = schemes::options_from(config);

    {
        Check c{"snr_cascade_equivalence", true, ""};
        RandomStream s(config.seed, StreamPurpose::validation, 1u << 20);
        double worst = 0;
        for (int t = 0; t < 1000; ++t) {
            const int n = 1 + t % 5;
            std::vector<double> g(static_cast<std::size_t>(n));
            for (auto& v : g) v = std::exp(8.0 * s.uniform() - 4.0);
            const double a = end_to_end_snr(g), b = cascade_snr(g);
            worst = std::max(worst, std::abs(a - b) / b);
        }
        c.passed = worst < 1e-12;
        c.detail = "max relative gap " + std::to_string(worst);
        checks.push_back(c);
    }

    {
        SystemConfig small = config;
        small.hops = std::min(config.hops, 2);
        small.subcarriers = std::min(config.subcarriers, 2);
        if (small.topology == Topology::explicit_matrix &&
            (small.hops != config.hops || small.subcarriers != config.subcarriers))
            small.topology = Topology::balanced;
        const auto budget = build_link_budget(small, g0);
        std::vector<double> gap(static_cast<std::size_t>(oracle_trials)), over_epa(gap.size());
        parallel_for(gap.size(), config.threads, [&](std::size_t t) {
            RandomStream s(config.seed, StreamPurpose::validation, t);
            const auto r = sample_realization(budget, s);
            const double it = schemes::iterate(schemes::Mode::exact, Constraint::stpc, r, budget, opt).trace.rates.back();
            const double grid = oracle_grid_search(r, h).rate;
            const double epa = instantaneous_rate(r, schemes::epa(small)).rate;
            gap[t] = grid - it;
            over_epa[t] = it - epa;
        });
        const double worst_gap = gap.empty() ? 0 : *std::max_element(gap.begin(), gap.end());
        const double worst_epa = over_epa.empty() ? 0 : *std::min_element(over_epa.begin(), over_epa.end());
        checks.push_back({"oracle_optimality", worst_gap <= 1e-3,
                          "max (grid - IT-EXA) " + std::to_string(worst_gap) + " bit/s/Hz over " +
                              std::to_string(oracle_trials) + " draws"});
        checks.push_back({"exact_beats_equal_split", worst_epa >= -1e-9,
                          "min (IT-EXA - EPA) " + std::to_string(worst_epa) + " bit/s/Hz"});
    }

    {
        const auto budget = build_link_budget(config, g0);
        double worst_sum = 0, worst_drop = 0;
        for (int t = 0; t < 20; ++t) {
            RandomStream s(config.seed, StreamPurpose::validation, (1u << 21) + static_cast<unsigned>(t));
            const auto r = sample_realization(budget, s);
            const auto ex = schemes::iterate(schemes::Mode::exact, Constraint::stpc, r, budget, opt);
            const auto as = schemes::iterate(schemes::Mode::asy, Constraint::stpc, r, budget, opt);
            const auto na = schemes::asy_noniterative(Constraint::stpc, r, budget);
            for (const Allocation* a : {&ex.allocation, &as.allocation, &na}) {
                worst_sum = std::max(worst_sum, std::abs(a->mu.sum() - 1.0));
                for (int i = 0; i < a->subcarriers(); ++i)
                    if (a->mu(i) > 0) worst_sum = std::max(worst_sum, std::abs(a->beta.col(i).sum() - 1.0));
            }
            for (std::size_t j = 1; j < ex.trace.rates.size(); ++j)
                worst_drop = std::max(worst_drop, ex.trace.rates[j - 1] - ex.trace.rates[j]);
        }
        checks.push_back({"stpc_budget_sums", worst_sum <= 1e-8, "max |sum - 1| " + std::to_string(worst_sum)});
        checks.push_back({"exact_trace_monotone", worst_drop <= 1e-9, "max drop " + std::to_string(worst_drop)});
    }

    {
        RandomStream s(config.seed, StreamPurpose::validation, (1u << 22));
        double worst = 0;
        for (int t = 0; t < 200; ++t) {
            std::vector<double> y(8);
            for (auto& v : y) v = 2.0 * s.uniform();
            const auto wf = subpa::waterfill(y, 1.0);
            for (std::size_t i = 0; i < y.size(); ++i) {
                const double mu = wf.mu(static_cast<Eigen::Index>(i));
                worst = std::max(worst, mu > 0 ? std::abs(wf.level - y[i] - mu) : std::max(0.0, wf.level - y[i]));
            }
            worst = std::max(worst, std::abs(wf.mu.sum() - 1.0));
        }
        checks.push_back({"waterfilling_slackness", worst <= 1e-8, "max violation " + std::to_string(worst)});
    }
    return checks;
}

} // namespace afrelay::simkit
