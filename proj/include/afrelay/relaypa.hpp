#pragma once
#include "afrelay/model.hpp"
#include "afrelay/multipliers.hpp"
#include "afrelay/numerics.hpp"

#include <span>

// Sub-problem 1: split each subcarrier's power across the N transmitting nodes.
namespace afrelay::relaypa {

// Stationary point of ln(1 + 1/(beta*c)) + lambda*beta in beta, with c = mu*gamma:
// beta = (-1 + sqrt(1 + 4c/lambda)) / (2c). Returns 1/lambda at c = 0.
double beta_from_multiplier(double c, double lambda);

// Exact STPC: for each subcarrier a common lambda_i such that sum_k beta = 1.
// Subcarriers with mu_i = 0 get the inert 1/N column.
Matrix solve_beta_exact_stpc(const ChannelRealization& realization, const Vector& mu,
                             const numerics::RootConfig& cfg = {});

// LTIPC: lambda_{k,i} with E[beta_{k,i}] = 1/N. LTTPC: lambda_i with
// sum_k E[beta_{k,i}] = 1. Expectation over gamma ~ Exp(Gamma_{k+1,i}) by
// quadrature, mu held fixed.
CalibratedMultipliers calibrate_beta_exact(Constraint constraint, const LinkBudget& budget, const Vector& mu,
                                           const numerics::RootConfig& cfg = {});

// Same constraints with the expectation taken over a training ensemble, each
// realization paired with its own mu.
CalibratedMultipliers calibrate_beta_exact(Constraint constraint, std::span<const ChannelRealization> training,
                                           std::span<const Vector> mu, std::uint64_t seed,
                                           const numerics::RootConfig& cfg = {});

Matrix apply_beta_exact(const CalibratedMultipliers& multipliers, const ChannelRealization& realization,
                        const Vector& mu);

// Dispatch on the constraint. Long-term constraints need calibrated multipliers
// of the matching kind (UsageError otherwise); STPC ignores them.
Matrix solve_beta_exact(Constraint constraint, const ChannelRealization& realization, const Vector& mu,
                        const CalibratedMultipliers* multipliers = nullptr, const numerics::RootConfig& cfg = {});

// High-SNR closed forms. Independent of mu.
//   LTIPC: sqrt(Gamma_k) / (N sqrt(pi gamma_k))
//   LTTPC: 1 / (sqrt(pi) sum_j sqrt(gamma_k / Gamma_j))
//   STPC:  1 / (sum_j sqrt(gamma_k / gamma_j))
Matrix solve_beta_asy(Constraint constraint, const ChannelRealization& realization, const LinkBudget& budget);

MultiplierKind beta_multiplier_kind(Constraint constraint);

// ---- long-term split inside the iterative drivers --------------------------
//
// With one multiplier per node shared by all realizations, the stationarity of
// the rate ln(1 + gamma_T) in beta_k keeps the common factor gamma_T:
//     gamma_T / (beta_k (1 + beta_k c_k)) = lambda_k,   c_k = mu gamma_k.
// For fixed t = gamma_T this is the per-node form above with lambda_k / t, so
// each column reduces to the fixed point t = gamma_T(beta(t)). Under a
// per-realization multiplier (STPC) the factor is absorbed and both agree.
enum class SplitModel { exact, high_snr };

// Maximizer of ln(1 + gamma_T) - sum_k lambda_k beta_k over beta >= 0 for one
// subcarrier. All zeros when no positive split beats spending nothing.
Vector coupled_split_exact(const Vector& c, const Vector& lambda);

// High-SNR counterpart, maximizing ln(gamma_T) with gamma_T = 1/sum_k 1/(beta_k gamma_k):
// beta_k = 1 / (sqrt(lambda_k gamma_k) sum_j sqrt(lambda_j / gamma_j)). Independent of mu.
Vector coupled_split_asy(const Vector& gamma, const Vector& lambda);

// LTIPC: lambda_{k,i} with E[beta_{k,i}] = 1/N. LTTPC: lambda_i with
// sum_k E[beta_{k,i}] = 1. Means over the training ensemble, each realization
// with its own mu. Subcarriers with mu_i = 0 get the 1/N placeholder but carry
// no power, so they count as zero in the means.
CalibratedMultipliers calibrate_beta_coupled(SplitModel model, Constraint constraint,
                                             std::span<const ChannelRealization> training, std::span<const Vector> mu,
                                             std::uint64_t seed, const numerics::RootConfig& cfg = {});

Matrix apply_beta_coupled(SplitModel model, const CalibratedMultipliers& multipliers,
                          const ChannelRealization& realization, const Vector& mu);

} // namespace afrelay::relaypa
