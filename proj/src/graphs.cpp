#include "diffan/graphs.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

namespace diffan {

std::vector<std::string> default_labels(int d) {
    std::vector<std::string> labels(d);
    for (int i = 0; i < d; ++i) labels[i] = "x" + std::to_string(i);
    return labels;
}

Dag::Dag(int d_) : d(d_), adj(AdjMatrix::Zero(d_, d_)), labels(default_labels(d_)) {
    require(d_ >= 1, "Dag: need d >= 1");
}

Dag::Dag(AdjMatrix a, std::vector<std::string> labels_)
    : d(static_cast<int>(a.rows())), adj(std::move(a)), labels(std::move(labels_)) {
    require(adj.rows() == adj.cols(), "Dag: adjacency must be square");
    if (labels.empty()) labels = default_labels(d);
    require(static_cast<int>(labels.size()) == d, "Dag: label count must equal d");
    for (int i = 0; i < d; ++i)
        require(adj(i, i) == 0, "Dag: self-loop at node " + std::to_string(i));
    require(is_acyclic(), "Dag: adjacency contains a cycle");
}

std::vector<int> Dag::parents(int j) const {
    std::vector<int> out;
    for (int i = 0; i < d; ++i)
        if (adj(i, j)) out.push_back(i);
    return out;
}

std::vector<int> Dag::children(int i) const {
    std::vector<int> out;
    for (int j = 0; j < d; ++j)
        if (adj(i, j)) out.push_back(j);
    return out;
}

std::vector<int> Dag::leaves() const {
    std::vector<int> out;
    for (int i = 0; i < d; ++i)
        if (adj.row(i).sum() == 0) out.push_back(i);
    return out;
}

bool Dag::is_acyclic() const {
    // Kahn count: acyclic iff all nodes drain.
    std::vector<int> indeg(d, 0);
    for (int j = 0; j < d; ++j) indeg[j] = adj.col(j).sum();
    std::queue<int> q;
    for (int i = 0; i < d; ++i)
        if (indeg[i] == 0) q.push(i);
    int seen = 0;
    while (!q.empty()) {
        int i = q.front();
        q.pop();
        ++seen;
        for (int j = 0; j < d; ++j)
            if (adj(i, j) && --indeg[j] == 0) q.push(j);
    }
    return seen == d;
}

bool is_permutation_of_range(const std::vector<int>& pi, int d) {
    if (static_cast<int>(pi.size()) != d) return false;
    std::vector<bool> seen(d, false);
    for (int v : pi) {
        if (v < 0 || v >= d || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

bool is_valid_order(const Ordering& order, const Dag& g) {
    if (!is_permutation_of_range(order.pi, g.d)) return false;
    std::vector<int> pos(g.d);
    for (int p = 0; p < g.d; ++p) pos[order.pi[p]] = p;
    for (int i = 0; i < g.d; ++i)
        for (int j = 0; j < g.d; ++j)
            if (g.adj(i, j) && pos[i] > pos[j]) return false;
    return true;
}

Dag sample_er(int d, double avg_edges_per_node, std::uint64_t seed) {
    require(d >= 1, "sample_er: need d >= 1");
    require(avg_edges_per_node > 0.0, "sample_er: need avg_edges_per_node > 0");
    require(avg_edges_per_node * d <= d * (d - 1) / 2.0 || d == 1,
            "sample_er: requested density exceeds the complete DAG");
    Rng rng = make_rng(mix_seed(seed, 0xE5));
    double p = d > 1 ? 2.0 * avg_edges_per_node / (d - 1) : 0.0;
    p = std::min(p, 1.0);

    // Random node ranks orient each undirected pick low-rank -> high-rank.
    std::vector<int> rank(d);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng);

    AdjMatrix adj = AdjMatrix::Zero(d, d);
    std::bernoulli_distribution coin(p);
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b)
            if (coin(rng)) {
                int i = rank[a] < rank[b] ? a : b;
                int j = rank[a] < rank[b] ? b : a;
                adj(i, j) = 1;
            }
    return Dag(std::move(adj), default_labels(d));
}

Dag sample_sf(int d, double avg_edges_per_node, std::uint64_t seed) {
    require(d >= 1, "sample_sf: need d >= 1");
    require(avg_edges_per_node > 0.0, "sample_sf: need avg_edges_per_node > 0");
    int m = std::max(1, static_cast<int>(std::lround(avg_edges_per_node)));
    require(static_cast<double>(m) * d <= d * (d - 1) / 2.0 || d == 1,
            "sample_sf: requested density exceeds the complete DAG");
    Rng rng = make_rng(mix_seed(seed, 0x5F));

    AdjMatrix adj = AdjMatrix::Zero(d, d);
    std::vector<int> degree(d, 0);
    for (int v = 1; v < d; ++v) {
        int attach = std::min(m, v);
        // Preferential attachment without replacement among nodes [0, v).
        std::vector<int> targets;
        std::vector<double> weight(v);
        for (int u = 0; u < v; ++u) weight[u] = degree[u] + 1.0;  // +1 smoothing
        for (int e = 0; e < attach; ++e) {
            double total = 0.0;
            for (int u = 0; u < v; ++u) total += weight[u];
            std::uniform_real_distribution<double> unif(0.0, total);
            double r = unif(rng);
            int chosen = v - 1;
            for (int u = 0; u < v; ++u) {
                r -= weight[u];
                if (r <= 0.0) {
                    chosen = u;
                    break;
                }
            }
            targets.push_back(chosen);
            weight[chosen] = 0.0;  // no duplicate edges
        }
        for (int u : targets) {
            adj(u, v) = 1;  // old -> new
            ++degree[u];
            ++degree[v];
        }
    }
    return Dag(std::move(adj), default_labels(d));
}

Ordering topological_sort(const Dag& g) {
    std::vector<int> indeg(g.d, 0);
    for (int j = 0; j < g.d; ++j) indeg[j] = g.adj.col(j).sum();
    // Min-heap keyed by node index keeps the output deterministic.
    std::priority_queue<int, std::vector<int>, std::greater<int>> q;
    for (int i = 0; i < g.d; ++i)
        if (indeg[i] == 0) q.push(i);
    Ordering order;
    order.pi.reserve(g.d);
    while (!q.empty()) {
        int i = q.top();
        q.pop();
        order.pi.push_back(i);
        for (int j = 0; j < g.d; ++j)
            if (g.adj(i, j) && --indeg[j] == 0) q.push(j);
    }
    if (order.size() != g.d)
        throw ValidationError("topological_sort: cycle detected");
    return order;
}

void write_dag_csv(const Dag& g, std::ostream& os) {
    for (int j = 0; j < g.d; ++j) os << (j ? "," : "") << g.labels[j];
    os << "\n";
    for (int i = 0; i < g.d; ++i) {
        for (int j = 0; j < g.d; ++j) os << (j ? "," : "") << g.adj(i, j);
        os << "\n";
    }
}

void write_dag_csv(const Dag& g, const std::string& path) {
    std::ofstream os(path);
    require(os.good(), "write_dag_csv: cannot open " + path);
    write_dag_csv(g, os);
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}
}  // namespace

Dag read_dag_csv(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "read_dag_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> labels = split_csv_line(line);
    int d = static_cast<int>(labels.size());
    AdjMatrix adj = AdjMatrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        require(static_cast<bool>(std::getline(is, line)),
                "read_dag_csv: expected " + std::to_string(d) + " rows");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto cells = split_csv_line(line);
        require(static_cast<int>(cells.size()) == d,
                "read_dag_csv: row " + std::to_string(i) + " has wrong width");
        for (int j = 0; j < d; ++j) {
            if (cells[j] == "0")
                adj(i, j) = 0;
            else if (cells[j] == "1")
                adj(i, j) = 1;
            else
                throw ValidationError("read_dag_csv: cell (" + std::to_string(i) + "," +
                                      std::to_string(j) + ") is not 0/1");
        }
    }
    return Dag(std::move(adj), std::move(labels));
}

Dag read_dag_csv(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "read_dag_csv: cannot open " + path);
    return read_dag_csv(is);
}

}  // namespace diffan
