#pragma once
#include "afrelay/model.hpp"
#include "afrelay/ratecore.hpp"
#include "afrelay/schemes.hpp"

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace afrelay::simkit {

int resolve_threads(int requested);

// Calls f(i) for i in [0, n) on up to `threads` workers. Each index is handled
// exactly once; callers write into per-index slots, so the reduction order is
// fixed by index and independent of the worker count. The first exception is
// rethrown after all workers stop.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f)
{
    const auto workers = static_cast<std::size_t>(std::max(1, resolve_threads(threads)));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct ResultRow {
    std::string experiment;
    Scheme scheme = Scheme::epa;
    Constraint constraint = Constraint::stpc;
    int hops = 0;
    int subcarriers = 0;
    Topology topology = Topology::balanced;
    double gamma0_db = 0;
    std::string metric;
    double value = 0;
    double stderr_value = 0;
    long trials = 0;
    std::uint64_t seed = 0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
};

inline constexpr const char* csv_header =
    "experiment,scheme,constraint,N,N_F,topology,gamma0_db,metric,value,stderr,trials,seed";

void write_csv(std::ostream& out, const ExperimentResult& result);

// Training draws come from the (seed, training, m) streams, evaluation draws
// from (seed, evaluation, t). Both are scaled by the budget, so every scheme and
// every sweep point sees the same unit-mean fading.
std::vector<ChannelRealization> training_set(const LinkBudget& budget, std::uint64_t seed, int samples);
ChannelRealization evaluation_draw(const LinkBudget& budget, std::uint64_t seed, std::uint64_t trial);

// A scheme prepared for one link budget: long-term variants are calibrated on
// the training ensemble at construction.
class SchemeRunner {
public:
    SchemeRunner(const SystemConfig& config, Scheme scheme, const LinkBudget& budget,
                 const schemes::IterateOptions& options);

    Scheme scheme() const noexcept { return scheme_; }
    const std::optional<schemes::Policy>& policy() const noexcept { return policy_; }
    const std::optional<CalibratedMultipliers>& asy_multipliers() const noexcept { return asy_; }

    schemes::IterateResult run(const ChannelRealization& realization) const;

private:
    Scheme scheme_;
    Constraint constraint_;
    LinkBudget budget_;
    schemes::IterateOptions options_;
    std::optional<schemes::Policy> policy_;
    std::optional<CalibratedMultipliers> asy_;
};

struct PointOutcome {
    std::vector<std::vector<double>> traces;  // per trial; empty when the trial failed
    long failures = 0;
};

// Runs T evaluation trials of one scheme at one Gamma_0. More than 1% failed
// trials raise SolverError.
PointOutcome evaluate_point(const SystemConfig& config, Scheme scheme, double gamma0_db,
                            const schemes::IterateOptions& options);

ExperimentResult run_sweep(const SystemConfig& config);
ExperimentResult run_outage(const SystemConfig& config);
// Iterative schemes only; rows carry metric rate_iter_<i> for i = 0..iterations.
ExperimentResult run_convergence(const SystemConfig& config, std::ostream* trace_out = nullptr);

struct OracleResult {
    double rate = 0;
    Allocation allocation;
};

// Exhaustive STPC search over the product of simplices (mu, beta_{.,1}, ...,
// beta_{.,N_F}) at step h. Needs N <= 2, N_F <= 2 and 1e-4 <= h <= 1e-2.
OracleResult oracle_grid_search(const ChannelRealization& realization, double h);

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Grid-oracle and property checks; oracle checks use min(N, 2) hops and
// min(N_F, 2) subcarriers.
std::vector<Check> run_validation(const SystemConfig& config, int oracle_trials, double h);

} // namespace afrelay::simkit
