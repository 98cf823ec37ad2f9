#pragma once

#include "diffan/common.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace diffan {

using AdjMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Directed acyclic graph over d labelled nodes. adj(i, j) == 1 iff edge i -> j.
struct Dag {
    int d = 0;
    AdjMatrix adj;
    std::vector<std::string> labels;

    Dag() = default;
    explicit Dag(int d_);
    Dag(AdjMatrix a, std::vector<std::string> labels_);

    bool has_edge(int i, int j) const { return adj(i, j) != 0; }
    int edge_count() const { return adj.sum(); }
    std::vector<int> parents(int j) const;
    std::vector<int> children(int i) const;
    // True leaves: nodes with no children.
    std::vector<int> leaves() const;
    bool is_acyclic() const;
};

/// Permutation of {0..d-1} listed root-to-leaf.
struct Ordering {
    std::vector<int> pi;

    int size() const { return static_cast<int>(pi.size()); }
};

bool is_permutation_of_range(const std::vector<int>& pi, int d);

/// True iff every edge i -> j of g has i before j in order.pi.
bool is_valid_order(const Ordering& order, const Dag& g);

/// Erdos-Renyi DAG: undirected G(d, p) with p = 2*avg_edges_per_node/(d-1),
/// oriented by a uniformly random permutation.
Dag sample_er(int d, double avg_edges_per_node, std::uint64_t seed);

/// Scale-free DAG: Barabasi-Albert attachment with m = round(avg_edges_per_node),
/// edges oriented old -> new.
Dag sample_sf(int d, double avg_edges_per_node, std::uint64_t seed);

/// Kahn topological sort; ties broken by smallest node index.
/// Throws ValidationError on a cycle.
Ordering topological_sort(const Dag& g);

/// CSV format: header row of labels, then d rows of d comma-separated 0/1.
void write_dag_csv(const Dag& g, std::ostream& os);
void write_dag_csv(const Dag& g, const std::string& path);
Dag read_dag_csv(std::istream& is);
Dag read_dag_csv(const std::string& path);

std::vector<std::string> default_labels(int d);

}  // namespace diffan
