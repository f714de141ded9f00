#pragma once
#include "afrelay/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace afrelay {

enum class MultiplierKind { per_node_per_subcarrier, per_subcarrier, global };

std::string to_string(MultiplierKind k);
MultiplierKind parse_multiplier_kind(const std::string& s);

// Which sub-problem a multiplier set belongs to.
enum class MultiplierStage { beta, mu, alpha };

std::string to_string(MultiplierStage s);
MultiplierStage parse_multiplier_stage(const std::string& s);

/// Lagrange multipliers fitted offline so that expectation constraints hold.
/// values is N x N_F, 1 x N_F or 1 x 1 depending on kind.
struct CalibratedMultipliers {
    MultiplierKind kind = MultiplierKind::global;
    MultiplierStage stage = MultiplierStage::beta;
    Matrix values;
    Constraint constraint = Constraint::lttpc;
    std::uint64_t seed = 0;
    std::int64_t samples = 0;  // 0: quadrature
    int iteration = 0;

    // lambda applying to node k on subcarrier i
    double at(int k, int i) const;
    void validate() const;
};

// CSV with header
//   stage,iteration,kind,node,subcarrier,value,constraint,seed,samples
// node/subcarrier are -1 where the kind does not index them.
void write_multipliers_csv(std::ostream& out, const std::vector<CalibratedMultipliers>& sets);
std::vector<CalibratedMultipliers> read_multipliers_csv(std::istream& in);

} // namespace afrelay
