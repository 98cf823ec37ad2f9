#pragma once

#include "diffan/graphs.hpp"

namespace diffan {

/// Structural Hamming distance: missing and extra edges count 1 each,
/// a reversed pair counts 1.
int shd(const Dag& est, const Dag& truth);

/// Structural intervention distance: number of ordered pairs (i, j) whose
/// intervention distribution is miscalculated when est's parent sets are used
/// as adjustment sets in truth (Peters & Buhlmann graphical criterion).
int sid(const Dag& est, const Dag& truth);

/// Topological order divergence D_top: count of true edges i -> j with i
/// placed after j in the ordering.
int order_divergence(const Ordering& order, const Dag& truth);

}  // namespace diffan
