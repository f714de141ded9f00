#pragma once
#include "afrelay/model.hpp"
#include "afrelay/multipliers.hpp"
#include "afrelay/numerics.hpp"

#include <optional>
#include <span>
#include <vector>

// Sub-problem 2: split the budget across subcarriers for a given node split.
namespace afrelay::subpa {

// Per-realization cap on mu under long-term constraints, in units of the
// average total budget.
inline constexpr double long_term_mu_cap = 1e3;

// Y_i = sum_k 1/(beta_{k,i} gamma_{k+1,i}); +inf when a hop is dead.
Vector subcarrier_load(const ChannelRealization& realization, const Matrix& beta);

struct Waterfill {
    Vector mu;
    double level = 0;  // 1/lambda
};

// mu_i = [level - load_i]^+ with sum_i mu_i = budget. Infinite loads are
// excluded. Ties between equal loads resolve toward the lower index.
Waterfill waterfill(std::span<const double> loads, double budget);

// Smallest w with sum_j weight_j * (w - load_j)^+ = target (piecewise linear
// in w). Infinite loads and zero weights never contribute.
double level_for_weighted_excess(std::span<const double> loads, std::span<const double> weights, double target);

// ---- high-SNR path ----------------------------------------------------------

Vector solve_mu_asy_stpc(const ChannelRealization& realization, const Matrix& beta);

// LTIPC: lambda_i with E[mu_i] = 1/N_F; LTTPC: one lambda with sum_i E[mu_i] = 1.
// loads holds one Y vector per training realization; the calibration is exact
// on the empirical distribution.
CalibratedMultipliers calibrate_mu_asy(Constraint constraint, std::span<const Vector> loads, std::uint64_t seed);

Vector apply_mu_asy(const CalibratedMultipliers& multipliers, const Vector& load);

Vector solve_mu_asy(Constraint constraint, const ChannelRealization& realization, const Matrix& beta,
                    const CalibratedMultipliers* multipliers = nullptr);

// ---- exact path -------------------------------------------------------------

// One stationarity problem per subcarrier; nullopt where the subcarrier is dead.
std::vector<std::optional<numerics::StationaryMu>> stationary_problems(const ChannelRealization& realization,
                                                                       const Matrix& beta, double mu_max);

// Outer bisection on the common level so that sum_i mu_i = 1. When the level
// crosses a jump of an S-shaped subcarrier the budget is closed on the
// continuous branch roots of a fixed active set; the best candidate wins.
Vector solve_mu_exact_stpc(const ChannelRealization& realization, const Matrix& beta,
                           const numerics::RootConfig& cfg = {});

CalibratedMultipliers calibrate_mu_exact(Constraint constraint, std::span<const ChannelRealization> training,
                                         std::span<const Matrix> beta, std::uint64_t seed,
                                         const numerics::RootConfig& cfg = {},
                                         std::vector<Vector>* training_mu = nullptr);

Vector apply_mu_exact(const CalibratedMultipliers& multipliers, const ChannelRealization& realization,
                      const Matrix& beta);

Vector solve_mu_exact(Constraint constraint, const ChannelRealization& realization, const Matrix& beta,
                      const CalibratedMultipliers* multipliers = nullptr, const numerics::RootConfig& cfg = {});

MultiplierKind mu_multiplier_kind(Constraint constraint);

} // namespace afrelay::subpa
