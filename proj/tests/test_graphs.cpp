#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffan/graphs.hpp"
#include "diffan/metrics.hpp"

#include <algorithm>
#include <sstream>

using namespace diffan;

TEST_CASE("sample_er: single node has no edges") {
    Dag g = sample_er(1, 1.0, 7);
    CHECK(g.d == 1);
    CHECK(g.edge_count() == 0);
}

TEST_CASE("sample_er: deterministic given seed") {
    Dag a = sample_er(20, 1.0, 1234);
    Dag b = sample_er(20, 1.0, 1234);
    CHECK(a.adj == b.adj);
    Dag c = sample_er(20, 1.0, 1235);
    CHECK(a.adj != c.adj);  // overwhelmingly likely
}

TEST_CASE("sample_er: mean edge count matches density over 200 seeds") {
    // p = 2*avg/(d-1); expected edges = p * d(d-1)/2 = avg * d = 20.
    double total = 0.0;
    for (int s = 0; s < 200; ++s) total += sample_er(20, 1.0, 1000 + s).edge_count();
    double mean = total / 200.0;
    CHECK(mean >= 17.0);
    CHECK(mean <= 23.0);
}

TEST_CASE("sample_er: rejects infeasible density") {
    CHECK_THROWS_AS(sample_er(4, 10.0, 0), ValidationError);
}

TEST_CASE("sample_sf: d=2 gives the single edge 0->1") {
    Dag g = sample_sf(2, 1.0, 3);
    CHECK(g.edge_count() == 1);
    CHECK(g.adj(0, 1) == 1);
}

TEST_CASE("generators always emit acyclic graphs") {
    for (int s = 0; s < 50; ++s) {
        Dag er = sample_er(12, 2.0, 100 + s);
        Dag sf = sample_sf(12, 2.0, 100 + s);
        CHECK(er.is_acyclic());
        CHECK(sf.is_acyclic());
        CHECK_NOTHROW(topological_sort(er));
        CHECK_NOTHROW(topological_sort(sf));
        CHECK(order_divergence(topological_sort(er), er) == 0);
        CHECK(order_divergence(topological_sort(sf), sf) == 0);
    }
}

TEST_CASE("sample_sf: heavier degree tail than ER at equal density") {
    // Compare the max in-degree (hub size) across 500 seeds at d=50.
    double sf_max_total = 0.0, er_max_total = 0.0;
    for (int s = 0; s < 500; ++s) {
        Dag sf = sample_sf(50, 1.0, 9000 + s);
        Dag er = sample_er(50, 1.0, 9000 + s);
        Eigen::VectorXi sf_out = sf.adj.rowwise().sum();
        Eigen::VectorXi er_out = er.adj.rowwise().sum();
        sf_max_total += sf_out.maxCoeff();
        er_max_total += er_out.maxCoeff();
    }
    CHECK(sf_max_total / 500.0 > er_max_total / 500.0);
}

TEST_CASE("topological_sort: chain and diamond") {
    AdjMatrix ca = AdjMatrix::Zero(3, 3);
    ca(0, 1) = ca(1, 2) = 1;
    Dag chain(ca, default_labels(3));
    Ordering o = topological_sort(chain);
    CHECK(o.pi == std::vector<int>{0, 1, 2});

    Dag empty(3);
    Ordering oe = topological_sort(empty);
    CHECK(is_valid_order(oe, empty));

    AdjMatrix a = AdjMatrix::Zero(4, 4);
    a(0, 1) = a(0, 2) = a(1, 3) = a(2, 3) = 1;
    Dag diamond(a, default_labels(4));
    Ordering od = topological_sort(diamond);
    CHECK(od.pi.front() == 0);
    CHECK(od.pi.back() == 3);
}

TEST_CASE("Dag constructor rejects cycles and self-loops") {
    AdjMatrix a = AdjMatrix::Zero(2, 2);
    a(0, 1) = a(1, 0) = 1;
    CHECK_THROWS_AS(Dag(a, default_labels(2)), ValidationError);
    AdjMatrix b = AdjMatrix::Zero(2, 2);
    b(0, 0) = 1;
    CHECK_THROWS_AS(Dag(b, default_labels(2)), ValidationError);
}

TEST_CASE("dag csv round trip") {
    Dag g = sample_er(6, 1.5, 42);
    std::stringstream ss;
    write_dag_csv(g, ss);
    Dag back = read_dag_csv(ss);
    CHECK(back.adj == g.adj);
    CHECK(back.labels == g.labels);
}
