#pragma once

#include "diffan/graphs.hpp"
#include "diffan/scm.hpp"

#include <string>

namespace diffan {

/// Post-ordering edge selection: for each node, regress on additive basis
/// expansions of all preceding nodes and keep the significant ones.
struct PruneConfig {
    enum class Basis { Polynomial, Spline };
    Basis basis = Basis::Polynomial;
    int degree = 3;       // polynomial degree
    int spline_df = 6;    // cubic truncated-power basis size (>= 3)
    double alpha = 0.001;  // group-significance threshold
    int max_parents = 0;  // 0 = d - 1

    void validate() const;
};

std::string to_string(PruneConfig::Basis b);
PruneConfig::Basis prune_basis_from_string(const std::string& s);

/// Edges only go earlier -> later in the given order, so the result is acyclic
/// by construction.
Dag prune(const Dataset& data, const Ordering& order, const PruneConfig& cfg);

}  // namespace diffan
