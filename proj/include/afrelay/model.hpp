#pragma once
#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace afrelay {

using Matrix = Eigen::ArrayXXd;  // rows: hops (or transmitting nodes), cols: subcarriers
using Vector = Eigen::ArrayXd;

enum class Topology { balanced, unbalanced, explicit_matrix };
enum class Constraint { stpc, ltipc, lttpc };
enum class Scheme { epa, asy, it_exa, it_asy };

std::string to_string(Topology t);
std::string to_string(Constraint c);
std::string to_string(Scheme s);
Topology parse_topology(std::string_view s);
Constraint parse_constraint(std::string_view s);
Scheme parse_scheme(std::string_view s);

inline bool is_long_term(Constraint c) { return c != Constraint::stpc; }

double db_to_linear(double db);
double linear_to_db(double linear);

struct SolverTolerances {
    double root_abs_tol = 1e-12;
    double root_rel_tol = 1e-10;
    int root_max_iter = 200;
    double constraint_tol = 1e-8;   // residual on deterministic sums
    double iteration_eps = 1e-4;    // bit/s/Hz, alternating-driver stop rule
    int max_iterations = 20;
};

struct SystemConfig {
    int hops = 2;          // N; there are N-1 relays
    int subcarriers = 8;   // N_F
    Topology topology = Topology::balanced;
    double pathloss_exponent = 4.0;
    std::vector<double> direct_snr_db = {10.0};  // Gamma_0 sweep
    Constraint constraint = Constraint::stpc;
    std::vector<Scheme> schemes = {Scheme::epa, Scheme::asy, Scheme::it_exa, Scheme::it_asy};
    std::uint64_t seed = 1;
    SolverTolerances tolerances;
    int training_samples = 10000;  // M
    int trials = 2000;             // T
    int iterations = 10;           // convergence study length
    double outage_threshold = 1.0; // bit/s/Hz
    int threads = 0;               // 0: machine parallelism
    std::optional<Matrix> explicit_gain;  // hops x subcarriers, linear gain over Gamma_0

    // Throws ConfigError.
    void validate() const;
};

/// Per-hop per-subcarrier average SNR, linear.
class LinkBudget {
public:
    explicit LinkBudget(Matrix gamma);
    const Matrix& average() const noexcept { return gamma_; }
    int hops() const noexcept { return static_cast<int>(gamma_.rows()); }
    int subcarriers() const noexcept { return static_cast<int>(gamma_.cols()); }

private:
    Matrix gamma_;
};

/// Instantaneous per-hop per-subcarrier SNR at full power, linear.
struct ChannelRealization {
    Matrix gamma;
    int hops() const noexcept { return static_cast<int>(gamma.rows()); }
    int subcarriers() const noexcept { return static_cast<int>(gamma.cols()); }
};

enum class StreamPurpose : std::uint64_t { training = 1, evaluation = 2, validation = 3, auxiliary = 4 };

// A random stream keyed by (seed, purpose, index). Two streams built from the
// same key produce identical draws on every platform.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index);
    explicit RandomStream(std::uint64_t seed);

    double uniform();      // open interval (0, 1)
    double exponential();  // unit mean

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index);

// Distance of hop k (1-based) in the increasing-spacing placement, as a
// fraction of the source-destination distance.
double unbalanced_hop_distance(int hops, int k);

LinkBudget build_link_budget(const SystemConfig& config, double direct_snr_linear);

ChannelRealization sample_realization(const LinkBudget& budget, RandomStream& stream);

} // namespace afrelay
