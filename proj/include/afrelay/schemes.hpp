#pragma once
#include "afrelay/model.hpp"
#include "afrelay/multipliers.hpp"
#include "afrelay/numerics.hpp"
#include "afrelay/ratecore.hpp"

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace afrelay::schemes {

enum class Mode { exact, asy };
enum class StopReason { tolerance, max_iterations };

std::string to_string(StopReason s);

struct IterateOptions {
    double epsilon = 1e-4;   // bit/s/Hz
    int max_iterations = 20;
    bool force_iterations = false;  // ignore the tolerance rule (convergence studies)
    numerics::RootConfig root;
};

IterateOptions options_from(const SystemConfig& config);
numerics::RootConfig root_config(const SolverTolerances& tol);

struct IterationTrace {
    std::vector<double> rates;       // [0] is the equal-split rate, then one per iteration
    std::vector<double> half_rates;  // rate after each node-split step
    std::vector<Allocation> snapshots;
    StopReason stop = StopReason::max_iterations;
};

struct IterateResult {
    Allocation allocation;
    IterationTrace trace;
};

// mu = 1/N_F, beta = 1/N.
Allocation epa(int hops, int subcarriers);
Allocation epa(const SystemConfig& config);

// ---- non-iterative high-SNR scheme -----------------------------------------
//
// alpha_{k,i} = [1/(lambda s_i) - Y_i]^+ * b_{k,i} with b the high-SNR node
// split, s_i = sum_k b_{k,i} and Y_i = sum_k 1/(b_{k,i} gamma_{k+1,i}). The
// multiplier prices the power actually spent, so the bracket carries 1/s_i.
// Returned as mu_i = sum_k alpha_{k,i}, beta = b / s.

// LTTPC: one lambda with E[sum alpha] = 1. LTIPC: lambda_i with
// sum_k E[alpha_{k,i}] = 1/N_F (each node gets 1/(N N_F) when hops are
// statistically alike).
CalibratedMultipliers calibrate_asy(Constraint constraint, std::span<const ChannelRealization> training,
                                    const LinkBudget& budget, std::uint64_t seed);

Allocation asy_noniterative(Constraint constraint, const ChannelRealization& realization, const LinkBudget& budget,
                            const CalibratedMultipliers* multipliers = nullptr);

// ---- alternating drivers ----------------------------------------------------

// Per-realization alternation under STPC. Starts from the equal split, then
// repeats (node split, subcarrier split) until the rate gain of a subcarrier
// step drops below epsilon. In exact mode a step that would lower the rate
// keeps the incumbent.
IterateResult iterate(Mode mode, Constraint constraint, const ChannelRealization& realization,
                      const LinkBudget& budget, const IterateOptions& options);

struct PolicyStage {
    MultiplierStage stage = MultiplierStage::beta;
    std::optional<CalibratedMultipliers> multipliers;  // empty for the closed-form node split
};

// Long-term alternation trained on an ensemble. Each stage's multipliers are
// frozen after training and replayed on fresh realizations.
struct Policy {
    Mode mode = Mode::exact;
    Constraint constraint = Constraint::lttpc;
    std::vector<PolicyStage> stages;  // beta, mu, beta, mu, ...
    std::vector<double> training_rate;    // mean over the ensemble, [0] = equal split
    std::vector<double> training_stderr;
    std::vector<double> training_half_rate;
    StopReason stop = StopReason::max_iterations;

    int iterations() const noexcept { return static_cast<int>(stages.size() / 2); }
    std::vector<CalibratedMultipliers> multiplier_sets() const;
};

Policy train_policy(Mode mode, Constraint constraint, const LinkBudget& budget,
                    std::span<const ChannelRealization> training, std::uint64_t seed, const IterateOptions& options);

IterateResult apply_policy(const Policy& policy, const ChannelRealization& realization, const LinkBudget& budget);

void write_trace_csv_header(std::ostream& out);
void write_trace_csv(std::ostream& out, long trial, const IterationTrace& trace, Scheme scheme, Constraint constraint);

} // namespace afrelay::schemes
