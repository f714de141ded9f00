#include "afrelay/model.hpp"

#include "afrelay/errors.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace afrelay {

std::string to_string(Topology t)
{
    switch (t) {
    case Topology::balanced: return "balanced";
    case Topology::unbalanced: return "unbalanced";
    case Topology::explicit_matrix: return "explicit";
    }
    return "?";
}

std::string to_string(Constraint c)
{
    switch (c) {
    case Constraint::stpc: return "STPC";
    case Constraint::ltipc: return "LTIPC";
    case Constraint::lttpc: return "LTTPC";
    }
    return "?";
}

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::epa: return "EPA";
    case Scheme::asy: return "ASY";
    case Scheme::it_exa: return "IT-EXA";
    case Scheme::it_asy: return "IT-ASY";
    }
    return "?";
}

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    for (auto& ch : out) {
        ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (ch == '_') ch = '-';
    }
    return out;
}

} // namespace

Topology parse_topology(std::string_view s)
{
    const auto u = upper(s);
    if (u == "BALANCED") return Topology::balanced;
    if (u == "UNBALANCED") return Topology::unbalanced;
    if (u == "EXPLICIT") return Topology::explicit_matrix;
    throw ConfigError("unknown topology '" + std::string(s) + "'");
}

Constraint parse_constraint(std::string_view s)
{
    const auto u = upper(s);
    if (u == "STPC") return Constraint::stpc;
    if (u == "LTIPC") return Constraint::ltipc;
    if (u == "LTTPC") return Constraint::lttpc;
    throw ConfigError("unknown constraint '" + std::string(s) + "'");
}

Scheme parse_scheme(std::string_view s)
{
    const auto u = upper(s);
    if (u == "EPA") return Scheme::epa;
    if (u == "ASY") return Scheme::asy;
    if (u == "IT-EXA") return Scheme::it_exa;
    if (u == "IT-ASY") return Scheme::it_asy;
    throw ConfigError("unknown scheme '" + std::string(s) + "'");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

void SystemConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (hops < 1) fail("hops must be >= 1");
    if (subcarriers < 1) fail("subcarriers must be >= 1");
    if (!(pathloss_exponent >= 2.0) || !std::isfinite(pathloss_exponent))
        fail("pathloss_exponent must be a finite value >= 2");
    if (direct_snr_db.empty()) fail("gamma0_db needs at least one value");
    for (double db : direct_snr_db)
        if (!std::isfinite(db)) fail("gamma0_db values must be finite");
    if (schemes.empty()) fail("at least one scheme is required");
    const auto& t = tolerances;
    if (!(t.root_abs_tol > 0) || !(t.root_rel_tol > 0) || !(t.constraint_tol > 0) || !(t.iteration_eps > 0))
        fail("all tolerances must be > 0");
    if (t.root_max_iter < 1) fail("root_max_iter must be >= 1");
    if (t.max_iterations < 1) fail("max_iterations must be >= 1");
    if (training_samples < 1) fail("training_samples must be >= 1");
    if (trials < 1) fail("trials must be >= 1");
    if (iterations < 1) fail("iterations must be >= 1");
    if (threads < 0) fail("threads must be >= 0");
    if (std::isnan(outage_threshold) || outage_threshold < 0) fail("outage_threshold must be >= 0");
    if (topology == Topology::explicit_matrix) {
        if (!explicit_gain) fail("explicit topology needs explicit_gain");
        if (explicit_gain->rows() != hops || explicit_gain->cols() != subcarriers) {
            std::ostringstream os;
            os << "explicit_gain has shape " << explicit_gain->rows() << "x" << explicit_gain->cols()
               << ", expected " << hops << "x" << subcarriers;
            fail(os.str());
        }
        if (!(explicit_gain->isFinite().all() && (*explicit_gain > 0.0).all()))
            fail("explicit_gain entries must be positive and finite");
    }
}

LinkBudget::LinkBudget(Matrix gamma) : gamma_(std::move(gamma))
{
    if (gamma_.rows() < 1 || gamma_.cols() < 1) throw ConfigError("link budget must be non-empty");
    if (!(gamma_.isFinite().all() && (gamma_ > 0.0).all()))
        throw ConfigError("link budget entries must be positive and finite");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index)
{
    // splitmix64 finalizer over a combination of the three words
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ purpose) ^ index);
}

RandomStream::RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index)
    : engine_(mix_seed(seed, static_cast<std::uint64_t>(purpose), index))
{
}

RandomStream::RandomStream(std::uint64_t seed) : engine_(mix_seed(seed, 0, 0)) {}

double RandomStream::uniform()
{
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::exponential() { return -std::log(uniform()); }

double unbalanced_hop_distance(int hops, int k)
{
    const double n = hops;
    return 2.0 * k / ((n + 1.0) * (n + 2.0));
}

LinkBudget build_link_budget(const SystemConfig& config, double direct_snr_linear)
{
    config.validate();
    if (!(direct_snr_linear > 0) || !std::isfinite(direct_snr_linear))
        throw ConfigError("direct-link SNR must be positive and finite");
    const int n = config.hops;
    const double delta = config.pathloss_exponent;
    Matrix gamma(n, config.subcarriers);
    switch (config.topology) {
    case Topology::balanced:
        // as printed: (N+1)^delta for every hop
        gamma.setConstant(std::pow(n + 1.0, delta) * direct_snr_linear);
        break;
    case Topology::unbalanced:
        for (int k = 1; k <= n; ++k)
            gamma.row(k - 1).setConstant(std::pow((n + 1.0) * (n + 2.0) / (2.0 * k), delta) * direct_snr_linear);
        break;
    case Topology::explicit_matrix:
        gamma = *config.explicit_gain * direct_snr_linear;
        break;
    }
    return LinkBudget(std::move(gamma));
}

ChannelRealization sample_realization(const LinkBudget& budget, RandomStream& stream)
{
    const auto& avg = budget.average();
    ChannelRealization out{Matrix(avg.rows(), avg.cols())};
    // column-major fill: subcarrier by subcarrier, hop by hop
    for (Eigen::Index i = 0; i < avg.cols(); ++i)
        for (Eigen::Index k = 0; k < avg.rows(); ++k)
            out.gamma(k, i) = avg(k, i) * stream.exponential();
    return out;
}

} // namespace afrelay
