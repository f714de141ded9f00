#include "afrelay/config.hpp"

#include "afrelay/errors.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace afrelay {

namespace {

std::string_view trim(std::string_view s)
{
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(std::string_view key, std::string_view v)
{
    const std::string s(v);
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("key '" + std::string(key) + "': cannot parse '" + s + "' as a number");
    return x;
}

template <class Int>
Int to_int(std::string_view key, std::string_view v)
{
    Int x{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("key '" + std::string(key) + "': cannot parse '" + std::string(v) + "' as an integer");
    return x;
}

std::string fmt(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

} // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = {
        "hops", "subcarriers", "topology", "pathloss_exponent", "gamma0_db", "constraint", "scheme",
        "seed", "training_samples", "trials", "iterations", "outage_threshold", "threads",
        "root_abs_tol", "root_rel_tol", "root_max_iter", "constraint_tol", "iteration_eps",
        "max_iterations", "explicit_gain"};
    return keys;
}

void apply_setting(SystemConfig& c, std::string_view key, std::string_view raw)
{
    const auto v = trim(raw);
    auto& t = c.tolerances;
    if (key == "hops") c.hops = to_int<int>(key, v);
    else if (key == "subcarriers") c.subcarriers = to_int<int>(key, v);
    else if (key == "topology") c.topology = parse_topology(v);
    else if (key == "pathloss_exponent") c.pathloss_exponent = to_double(key, v);
    else if (key == "gamma0_db") {
        c.direct_snr_db.clear();
        for (auto part : split(v, ',')) c.direct_snr_db.push_back(to_double(key, part));
    } else if (key == "constraint") c.constraint = parse_constraint(v);
    else if (key == "scheme") {
        c.schemes.clear();
        for (auto part : split(v, ',')) c.schemes.push_back(parse_scheme(part));
    } else if (key == "seed") c.seed = to_int<std::uint64_t>(key, v);
    else if (key == "training_samples") c.training_samples = to_int<int>(key, v);
    else if (key == "trials") c.trials = to_int<int>(key, v);
    else if (key == "iterations") c.iterations = to_int<int>(key, v);
    else if (key == "outage_threshold") c.outage_threshold = (v == "inf") ? std::numeric_limits<double>::infinity() : to_double(key, v);
    else if (key == "threads") c.threads = to_int<int>(key, v);
    else if (key == "root_abs_tol") t.root_abs_tol = to_double(key, v);
    else if (key == "root_rel_tol") t.root_rel_tol = to_double(key, v);
    else if (key == "root_max_iter") t.root_max_iter = to_int<int>(key, v);
    else if (key == "constraint_tol") t.constraint_tol = to_double(key, v);
    else if (key == "iteration_eps") t.iteration_eps = to_double(key, v);
    else if (key == "max_iterations") t.max_iterations = to_int<int>(key, v);
    else if (key == "explicit_gain") {
        std::vector<std::vector<double>> rows;
        for (auto row : split(v, ';')) {
            if (row.empty()) continue;
            auto& r = rows.emplace_back();
            for (auto e : split(row, ',')) r.push_back(to_double(key, e));
        }
        if (rows.empty()) throw ConfigError("explicit_gain is empty");
        Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].size() != rows.front().size()) throw ConfigError("explicit_gain rows have unequal length");
            for (std::size_t i = 0; i < rows[k].size(); ++i) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[k][i];
        }
        c.explicit_gain = std::move(m);
    } else {
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> out;
    int lineno = 0;
    for (auto line : split(text, '\n')) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return out;
}

SystemConfig parse_config(std::string_view text, SystemConfig base)
{
    for (const auto& [k, v] : parse_key_values(text)) apply_setting(base, k, v);
    return base;
}

SystemConfig load_config(const std::filesystem::path& path, SystemConfig base)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string format_config(const SystemConfig& c)
{
    std::ostringstream os;
    const auto& t = c.tolerances;
    auto list = [](const auto& xs, auto f) {
        std::string s;
        for (std::size_t j = 0; j < xs.size(); ++j) s += (j ? "," : "") + f(xs[j]);
        return s;
    };
    os << "hops=" << c.hops << "\n"
       << "subcarriers=" << c.subcarriers << "\n"
       << "topology=" << to_string(c.topology) << "\n"
       << "pathloss_exponent=" << fmt(c.pathloss_exponent) << "\n"
       << "gamma0_db=" << list(c.direct_snr_db, fmt) << "\n"
       << "constraint=" << to_string(c.constraint) << "\n"
       << "scheme=" << list(c.schemes, [](Scheme s) { return to_string(s); }) << "\n"
       << "seed=" << c.seed << "\n"
       << "training_samples=" << c.training_samples << "\n"
       << "trials=" << c.trials << "\n"
       << "iterations=" << c.iterations << "\n"
       << "outage_threshold=" << fmt(c.outage_threshold) << "\n"
       << "threads=" << c.threads << "\n"
       << "root_abs_tol=" << fmt(t.root_abs_tol) << "\n"
       << "root_rel_tol=" << fmt(t.root_rel_tol) << "\n"
       << "root_max_iter=" << t.root_max_iter << "\n"
       << "constraint_tol=" << fmt(t.constraint_tol) << "\n"
       << "iteration_eps=" << fmt(t.iteration_eps) << "\n"
       << "max_iterations=" << t.max_iterations << "\n";
    if (c.explicit_gain) {
        os << "explicit_gain=";
        const auto& g = *c.explicit_gain;
        for (Eigen::Index k = 0; k < g.rows(); ++k) {
            if (k) os << ";";
            for (Eigen::Index i = 0; i < g.cols(); ++i) os << (i ? "," : "") << fmt(g(k, i));
        }
        os << "\n";
    }
    return os.str();
}

} // namespace afrelay
