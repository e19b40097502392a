#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "wgc/network.hpp"
#include "wgc/rng.hpp"

using namespace wgc;

namespace {

// All-pairs shortest times by Floyd-Warshall, independent of the Dijkstra code.
std::vector<std::vector<double>> floyd(const RoadNetwork& net) {
    const std::size_t n = net.node_count();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, kUnreachable));
    for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
    for (const auto& e : net.edges()) d[e.tail][e.head] = std::min(d[e.tail][e.head], e.tau);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    return d;
}

RoadNetwork random_network(std::size_t n, double density, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = 0; v < n; ++v)
            if (u != v && rng.uniform() < density)
                edges.push_back({u, v, 0.5 * static_cast<double>(1 + rng.below(8))});
    return RoadNetwork(n, edges);
}

std::size_t lattice_edges(std::size_t rows, std::size_t cols) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            if (r + 1 < rows) count += 2;
            if (c + 1 < cols) count += 2;
        }
    return count;
}

}  // namespace

TEST_CASE("grid sizes") {
    auto g = build_grid(2, 2, 1.0);
    CHECK(g.node_count() == 4);
    CHECK(g.edge_count() == 8);
    auto big = build_grid(10, 10, 1.0);
    CHECK(big.node_count() == 100);
    CHECK(big.edge_count() == 360);
    for (std::size_t r = 2; r <= 6; ++r)
        for (std::size_t c = 2; c <= 6; ++c) {
            CHECK(build_grid(r, c, 1.0).edge_count() == lattice_edges(r, c));
            CHECK(lattice_edges(r, c) == 2 * (2 * r * c - r - c));
        }
}

TEST_CASE("grid corner routing is uniform") {
    auto g = build_grid(2, 2, 1.0);
    CHECK(g.out_degree(0) == 2);
    auto [first, last] = g.out_range(0);
    for (EdgeId e = first; e < last; ++e) CHECK(g.transition(e) == 0.5);
}

TEST_CASE("grid rejects degenerate shapes and delays") {
    CHECK_THROWS_AS(build_grid(1, 5, 1.0), NetworkError);
    CHECK_THROWS_AS(build_grid(5, 1, 1.0), NetworkError);
    CHECK_THROWS_AS(build_grid(2, 2, 0.0), NetworkError);
    CHECK_THROWS_AS(build_grid(2, 2, -1.0), NetworkError);
}

TEST_CASE("edge list validation") {
    CHECK_THROWS_AS(RoadNetwork(2, {{0, 0, 1.0}}), NetworkError);
    CHECK_THROWS_AS(RoadNetwork(2, {{0, 1, 1.0}, {0, 1, 2.0}}), NetworkError);
    CHECK_THROWS_AS(RoadNetwork(2, {{0, 2, 1.0}}), NetworkError);
    CHECK_THROWS_AS(RoadNetwork(2, {{0, 1, 0.0}}), NetworkError);
}

TEST_CASE("out-edges are contiguous and sorted") {
    RoadNetwork net(3, {{2, 0, 1.0}, {0, 2, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}});
    for (NodeId u = 0; u < 3; ++u) {
        auto [first, last] = net.out_range(u);
        for (EdgeId e = first; e < last; ++e) CHECK(net.edge(e).tail == u);
        for (EdgeId e = first; e + 1 < last; ++e) CHECK(net.edge(e).head < net.edge(e + 1).head);
    }
    CHECK(net.find_edge(0, 2) >= 0);
    CHECK(net.find_edge(2, 1) == -1);
}

TEST_CASE("return delay examples") {
    RoadNetwork ab(2, {{0, 1, 3.0}});
    CHECK(ab.return_delay(0, 1) == 3.0);
    CHECK(std::isinf(ab.return_delay(0, 0)));
    CHECK(ab.destination(0, 0) == 0.0);
    CHECK(ab.destination(0, 1) == 1.0);

    auto g = build_grid(2, 2, 1.0);
    auto e = g.find_edge(grid_node(0, 0, 2), grid_node(0, 1, 2));
    REQUIRE(e >= 0);
    CHECK(g.return_delay(static_cast<EdgeId>(e), grid_node(1, 1, 2)) == 2.0);
    for (EdgeId i = 0; i < g.edge_count(); ++i) CHECK(g.return_delay(i, g.edge(i).head) == g.edge(i).tau);
}

TEST_CASE("return delays agree with Floyd-Warshall") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto net = random_network(5 + seed % 20, 0.25, seed);
        auto d = floyd(net);
        for (EdgeId e = 0; e < net.edge_count(); ++e) {
            const auto& edge = net.edge(e);
            for (NodeId u = 0; u < net.node_count(); ++u) {
                double expected = edge.tau + d[edge.head][u];
                if (std::isinf(expected)) {
                    CHECK(std::isinf(net.return_delay(e, u)));
                    CHECK(net.destination(e, u) == 0.0);
                } else {
                    CHECK(net.return_delay(e, u) == doctest::Approx(expected).epsilon(1e-12));
                }
            }
        }
    }
    auto grid = build_grid(5, 5, 2.0);
    auto d = floyd(grid);
    for (EdgeId e = 0; e < grid.edge_count(); ++e)
        for (NodeId u = 0; u < grid.node_count(); ++u)
            CHECK(grid.return_delay(e, u) == doctest::Approx(2.0 + d[grid.edge(e).head][u]));
}

TEST_CASE("routing and destination rows are stochastic") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto net = random_network(12, 0.3, seed);
        net.set_popularity(random_popularity(net.node_count(), seed));
        for (NodeId u = 0; u < net.node_count(); ++u) {
            if (net.out_degree(u) == 0) continue;
            auto [first, last] = net.out_range(u);
            double s = 0.0;
            for (EdgeId e = first; e < last; ++e) s += net.transition(e);
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
        for (EdgeId e = 0; e < net.edge_count(); ++e) {
            double s = 0.0;
            for (double p : net.destination_row(e)) {
                CHECK(p >= 0.0);
                s += p;
            }
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("popularity examples") {
    auto g = build_grid(2, 2, 1.0);
    for (EdgeId e = 0; e < g.edge_count(); ++e)
        for (NodeId u = 0; u < 4; ++u) CHECK(g.destination(e, u) == doctest::Approx(0.25));

    std::vector<double> w{2, 1, 1, 0};
    g.set_popularity(w);
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        CHECK(g.destination(e, 0) == doctest::Approx(0.5));
        CHECK(g.destination(e, 1) == doctest::Approx(0.25));
        CHECK(g.destination(e, 2) == doctest::Approx(0.25));
        CHECK(g.destination(e, 3) == 0.0);
    }
    std::vector<double> zeros(4, 0.0);
    CHECK_THROWS_AS(g.set_popularity(zeros), NetworkError);
}

TEST_CASE("unreachable popular node gets no share") {
    // Node 3 can leave but nothing reaches it.
    RoadNetwork net(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}, {3, 0, 1.0}});
    std::vector<double> w{1, 1, 1, 5};
    net.set_popularity(w);
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
        CHECK(net.destination(e, 3) == 0.0);
        for (NodeId u = 0; u < 3; ++u) CHECK(net.destination(e, u) == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("transition override validation") {
    auto g = build_grid(2, 2, 1.0);
    std::vector<double> q(g.transitions().begin(), g.transitions().end());
    auto [first, last] = g.out_range(0);
    q[first] = 0.9;
    q[first + 1] = 0.1;
    g.set_transitions(q);
    CHECK(g.transition(first) == 0.9);
    q[first] = 0.8;
    CHECK_THROWS_AS(g.set_transitions(q), NetworkError);
}

TEST_CASE("serialization round trip is exact and deterministic") {
    auto g = build_grid(3, 4, 1.5);
    g.set_popularity(random_popularity(g.node_count(), 3));
    auto doc = g.to_json();
    auto back = RoadNetwork::from_json(doc);
    CHECK(back == g);
    CHECK(back.to_json().dump() == doc.dump());
    CHECK(build_grid(3, 4, 1.5).to_json().dump() == build_grid(3, 4, 1.5).to_json().dump());
}
