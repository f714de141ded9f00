#include "afrelay/multipliers.hpp"

#include "afrelay/errors.hpp"

#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace afrelay {

std::string to_string(MultiplierKind k)
{
    switch (k) {
    case MultiplierKind::per_node_per_subcarrier: return "per_node_per_subcarrier";
    case MultiplierKind::per_subcarrier: return "per_subcarrier";
    case MultiplierKind::global: return "global";
    }
    return "?";
}

MultiplierKind parse_multiplier_kind(const std::string& s)
{
    if (s == "per_node_per_subcarrier") return MultiplierKind::per_node_per_subcarrier;
    if (s == "per_subcarrier") return MultiplierKind::per_subcarrier;
    if (s == "global") return MultiplierKind::global;
    throw ConfigError("unknown multiplier kind '" + s + "'");
}

std::string to_string(MultiplierStage s)
{
    switch (s) {
    case MultiplierStage::beta: return "beta";
    case MultiplierStage::mu: return "mu";
    case MultiplierStage::alpha: return "alpha";
    }
    return "?";
}

MultiplierStage parse_multiplier_stage(const std::string& s)
{
    if (s == "beta") return MultiplierStage::beta;
    if (s == "mu") return MultiplierStage::mu;
    if (s == "alpha") return MultiplierStage::alpha;
    throw ConfigError("unknown multiplier stage '" + s + "'");
}

double CalibratedMultipliers::at(int k, int i) const
{
    switch (kind) {
    case MultiplierKind::per_node_per_subcarrier: return values(k, i);
    case MultiplierKind::per_subcarrier: return values(0, i);
    case MultiplierKind::global: return values(0, 0);
    }
    return values(0, 0);
}

void CalibratedMultipliers::validate() const
{
    if (values.size() == 0) throw UsageError("multiplier set is empty");
    if (kind == MultiplierKind::global && values.size() != 1) throw UsageError("global multiplier must be 1x1");
    if (kind == MultiplierKind::per_subcarrier && values.rows() != 1) throw UsageError("per-subcarrier multipliers must be 1 x N_F");
    if (!(values.isFinite().all() && (values > 0).all())) throw UsageError("multipliers must be positive and finite");
}

void write_multipliers_csv(std::ostream& out, const std::vector<CalibratedMultipliers>& sets)
{
    out << "stage,iteration,kind,node,subcarrier,value,constraint,seed,samples\n";
    const auto old_precision = out.precision(17);
    for (const auto& m : sets) {
        for (Eigen::Index k = 0; k < m.values.rows(); ++k)
            for (Eigen::Index i = 0; i < m.values.cols(); ++i) {
                const long node = m.kind == MultiplierKind::per_node_per_subcarrier ? static_cast<long>(k) : -1;
                const long sub = m.kind == MultiplierKind::global ? -1 : static_cast<long>(i);
                out << to_string(m.stage) << ',' << m.iteration << ',' << to_string(m.kind) << ',' << node << ','
                    << sub << ',' << m.values(k, i) << ',' << to_string(m.constraint) << ',' << m.seed << ','
                    << m.samples << '\n';
            }
    }
    out.precision(old_precision);
}

std::vector<CalibratedMultipliers> read_multipliers_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line.rfind("stage,iteration,kind,node,subcarrier,value", 0) != 0)
        throw ConfigError("multiplier CSV: missing header");

    struct Entry {
        CalibratedMultipliers meta;
        std::map<std::pair<long, long>, double> cells;
    };
    std::vector<Entry> entries;
    std::map<std::tuple<std::string, int>, std::size_t> index;  // (stage, iteration) -> entry

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 9) throw ConfigError("multiplier CSV line " + std::to_string(lineno) + ": expected 9 fields");
        try {
            const auto key = std::make_tuple(f[0], std::stoi(f[1]));
            auto it = index.find(key);
            if (it == index.end()) {
                Entry e;
                e.meta.stage = parse_multiplier_stage(f[0]);
                e.meta.iteration = std::stoi(f[1]);
                e.meta.kind = parse_multiplier_kind(f[2]);
                e.meta.constraint = parse_constraint(f[6]);
                e.meta.seed = std::stoull(f[7]);
                e.meta.samples = std::stoll(f[8]);
                it = index.emplace(key, entries.size()).first;
                entries.push_back(std::move(e));
            }
            entries[it->second].cells[{std::stol(f[3]), std::stol(f[4])}] = std::stod(f[5]);
        } catch (const std::logic_error& e) {
            throw ConfigError("multiplier CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }

    std::vector<CalibratedMultipliers> out;
    for (auto& e : entries) {
        long rows = 1, cols = 1;
        for (const auto& [ki, v] : e.cells) {
            rows = std::max(rows, ki.first + 1);
            cols = std::max(cols, ki.second + 1);
        }
        e.meta.values = Matrix::Zero(rows, cols);
        for (const auto& [ki, v] : e.cells) e.meta.values(std::max(ki.first, 0L), std::max(ki.second, 0L)) = v;
        e.meta.validate();
        out.push_back(std::move(e.meta));
    }
    return out;
}

} // namespace afrelay
