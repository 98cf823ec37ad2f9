#include "diffan/metrics.hpp"

#include <array>
#include <deque>
#include <vector>

namespace diffan {

int shd(const Dag& est, const Dag& truth) {
    require(est.d == truth.d, "shd: graphs must have equal node counts");
    int count = 0;
    for (int i = 0; i < est.d; ++i)
        for (int j = i + 1; j < est.d; ++j) {
            bool same = est.adj(i, j) == truth.adj(i, j) && est.adj(j, i) == truth.adj(j, i);
            if (!same) ++count;  // missing, extra, or reversed: 1 per pair
        }
    return count;
}

namespace {

// descendants[i] = set of nodes reachable from i by directed paths (excl. i).
std::vector<std::vector<bool>> descendant_sets(const Dag& g) {
    std::vector<std::vector<bool>> de(g.d, std::vector<bool>(g.d, false));
    for (int s = 0; s < g.d; ++s) {
        std::deque<int> stack{s};
        std::vector<bool> seen(g.d, false);
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int c = 0; c < g.d; ++c)
                if (g.adj(v, c) && !seen[c]) {
                    seen[c] = true;
                    de[s][c] = true;
                    stack.push_back(c);
                }
        }
    }
    return de;
}

// Nodes j with an unblocked backdoor path i ~> j in g given conditioning set z.
// Walk states are (node, arrived-from-child?); collider bounces need
// an ancestor-of-z test, precomputed as anc_z.
std::vector<bool> backdoor_reachable(const Dag& g, int i, const std::vector<bool>& z,
                                     const std::vector<std::vector<bool>>& de) {
    int d = g.d;
    std::vector<bool> anc_z(d, false);  // v in z or v has a descendant in z
    for (int v = 0; v < d; ++v) {
        if (z[v]) {
            anc_z[v] = true;
            continue;
        }
        for (int u = 0; u < d; ++u)
            if (z[u] && de[v][u]) {
                anc_z[v] = true;
                break;
            }
    }

    // visited[v][0]: arrived from a child; visited[v][1]: arrived from a parent.
    std::vector<std::array<bool, 2>> visited(d, {false, false});
    std::deque<std::pair<int, int>> frontier;
    std::vector<bool> reached(d, false);
    for (int p = 0; p < d; ++p)
        if (g.adj(p, i)) {
            reached[p] = true;
            if (!visited[p][0]) {
                visited[p][0] = true;
                frontier.emplace_back(p, 0);
            }
        }
    while (!frontier.empty()) {
        auto [v, from_parent] = frontier.front();
        frontier.pop_front();
        if (from_parent == 0) {
            // v is a non-collider whichever way the walk continues.
            if (z[v]) continue;
            for (int u = 0; u < d; ++u) {
                if (g.adj(u, v) && !visited[u][0]) {  // continue upward
                    visited[u][0] = true;
                    reached[u] = true;
                    frontier.emplace_back(u, 0);
                }
                if (g.adj(v, u) && !visited[u][1]) {  // turn downward
                    visited[u][1] = true;
                    reached[u] = true;
                    frontier.emplace_back(u, 1);
                }
            }
        } else {
            if (!z[v]) {  // non-collider continuation downward
                for (int u = 0; u < d; ++u)
                    if (g.adj(v, u) && !visited[u][1]) {
                        visited[u][1] = true;
                        reached[u] = true;
                        frontier.emplace_back(u, 1);
                    }
            }
            if (anc_z[v]) {  // collider opened by z
                for (int u = 0; u < d; ++u)
                    if (g.adj(u, v) && !visited[u][0]) {
                        visited[u][0] = true;
                        reached[u] = true;
                        frontier.emplace_back(u, 0);
                    }
            }
        }
    }
    reached[i] = false;
    return reached;
}

}  // namespace

int sid(const Dag& est, const Dag& truth) {
    require(est.d == truth.d, "sid: graphs must have equal node counts");
    int d = est.d;
    auto de = descendant_sets(truth);
    int count = 0;
    for (int i = 0; i < d; ++i) {
        std::vector<bool> z(d, false);
        bool z_hits_descendant = false;
        for (int p = 0; p < d; ++p)
            if (est.adj(p, i)) {
                z[p] = true;
                if (de[i][p]) z_hits_descendant = true;
            }
        auto open = backdoor_reachable(truth, i, z, de);
        for (int j = 0; j < d; ++j) {
            if (j == i) continue;
            bool wrong;
            if (z[j]) {
                // est claims x_j is unaffected by do(x_i).
                wrong = de[i][j];
            } else {
                wrong = z_hits_descendant || open[j];
            }
            if (wrong) ++count;
        }
    }
    return count;
}

int order_divergence(const Ordering& order, const Dag& truth) {
    require(is_permutation_of_range(order.pi, truth.d),
            "order_divergence: order must cover all d nodes exactly once");
    std::vector<int> pos(truth.d);
    for (int p = 0; p < truth.d; ++p) pos[order.pi[p]] = p;
    int count = 0;
    for (int i = 0; i < truth.d; ++i)
        for (int j = 0; j < truth.d; ++j)
            if (truth.adj(i, j) && pos[i] > pos[j]) ++count;
    return count;
}

}  // namespace diffan
