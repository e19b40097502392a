#include "wgc/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include <nlohmann/json.hpp>

#include "wgc/rng.hpp"

namespace wgc {

namespace {

constexpr double kRowTolerance = 1e-9;

}  // namespace

RoadNetwork::RoadNetwork(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
    if (node_count_ == 0) throw NetworkError("network needs at least one node");
    for (const auto& e : edges_) {
        if (e.tail >= node_count_ || e.head >= node_count_)
            throw NetworkError("edge endpoint outside node set");
        if (e.tail == e.head) throw NetworkError("self-loop edges are not allowed");
        if (!(e.tau > 0.0) || !std::isfinite(e.tau)) throw NetworkError("edge travel time must be positive");
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.tail, a.head) < std::tie(b.tail, b.head);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
        if (edges_[i].tail == edges_[i - 1].tail && edges_[i].head == edges_[i - 1].head)
            throw NetworkError("duplicate edge");
    }
    index_adjacency();

    transition_.resize(edges_.size());
    for (NodeId u = 0; u < node_count_; ++u) {
        auto [first, last] = out_range(u);
        for (EdgeId e = first; e < last; ++e) transition_[e] = 1.0 / static_cast<double>(last - first);
    }
    return_delay_ = return_delays(*this);
    std::vector<double> uniform(node_count_, 1.0);
    destination_ = destination_popularity(*this, uniform);
}

void RoadNetwork::index_adjacency() {
    out_begin_.assign(node_count_ + 1, 0);
    for (const auto& e : edges_) ++out_begin_[e.tail + 1];
    for (std::size_t u = 0; u < node_count_; ++u) out_begin_[u + 1] += out_begin_[u];

    in_begin_.assign(node_count_ + 1, 0);
    for (const auto& e : edges_) ++in_begin_[e.head + 1];
    for (std::size_t u = 0; u < node_count_; ++u) in_begin_[u + 1] += in_begin_[u];
    in_edges_.resize(edges_.size());
    std::vector<std::size_t> fill(in_begin_.begin(), in_begin_.end() - 1);
    for (EdgeId e = 0; e < edges_.size(); ++e) in_edges_[fill[edges_[e].head]++] = e;
}

long RoadNetwork::find_edge(NodeId u, NodeId v) const {
    if (u >= node_count_) return -1;
    auto [first, last] = out_range(u);
    for (EdgeId e = first; e < last; ++e)
        if (edges_[e].head == v) return static_cast<long>(e);
    return -1;
}

double RoadNetwork::max_tau() const {
    double m = 0.0;
    for (const auto& e : edges_) m = std::max(m, e.tau);
    return m;
}

double RoadNetwork::max_return_delay() const {
    double m = 0.0;
    for (double d : return_delay_)
        if (std::isfinite(d)) m = std::max(m, d);
    return m;
}

void RoadNetwork::set_transitions(std::vector<double> per_edge) {
    if (per_edge.size() != edges_.size()) throw NetworkError("transition table size mismatch");
    for (NodeId u = 0; u < node_count_; ++u) {
        auto [first, last] = out_range(u);
        if (first == last) continue;
        double sum = 0.0;
        for (EdgeId e = first; e < last; ++e) {
            if (!(per_edge[e] >= 0.0)) throw NetworkError("transition probabilities must be non-negative");
            sum += per_edge[e];
        }
        if (std::abs(sum - 1.0) > kRowTolerance)
            throw NetworkError("transition row of node " + std::to_string(u) + " does not sum to 1");
    }
    transition_ = std::move(per_edge);
}

void RoadNetwork::set_popularity(std::span<const double> weights) {
    destination_ = destination_popularity(*this, weights);
}

nlohmann::json RoadNetwork::to_json() const {
    nlohmann::json doc;
    doc["nodes"] = node_count_;
    auto& edges = doc["edges"] = nlohmann::json::array();
    for (const auto& e : edges_) edges.push_back({e.tail, e.head, e.tau});
    auto& q = doc["q_rows"] = nlohmann::json::array();
    for (NodeId u = 0; u < node_count_; ++u) {
        auto row = nlohmann::json::array();
        auto [first, last] = out_range(u);
        for (EdgeId e = first; e < last; ++e) row.push_back({edges_[e].head, transition_[e]});
        q.push_back(std::move(row));
    }
    auto& r = doc["r_rows"] = nlohmann::json::array();
    for (EdgeId e = 0; e < edges_.size(); ++e) {
        auto row = destination_row(e);
        r.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return doc;
}

RoadNetwork RoadNetwork::from_json(const nlohmann::json& doc) {
    std::vector<Edge> edges;
    for (const auto& item : doc.at("edges"))
        edges.push_back({item.at(0).get<NodeId>(), item.at(1).get<NodeId>(), item.at(2).get<double>()});
    RoadNetwork net(doc.at("nodes").get<std::size_t>(), std::move(edges));

    std::vector<double> q(net.edge_count(), 0.0);
    const auto& q_rows = doc.at("q_rows");
    if (q_rows.size() != net.node_count()) throw NetworkError("q_rows must have one row per node");
    for (NodeId u = 0; u < net.node_count(); ++u) {
        for (const auto& cell : q_rows[u]) {
            long e = net.find_edge(u, cell.at(0).get<NodeId>());
            if (e < 0) throw NetworkError("q_rows entry refers to a missing edge");
            q[static_cast<EdgeId>(e)] = cell.at(1).get<double>();
        }
    }
    net.set_transitions(std::move(q));

    const auto& r_rows = doc.at("r_rows");
    if (r_rows.size() != net.edge_count()) throw NetworkError("r_rows must have one row per edge");
    std::vector<double> r;
    r.reserve(net.edge_count() * net.node_count());
    for (const auto& row : r_rows) {
        if (row.size() != net.node_count()) throw NetworkError("r_rows row has wrong width");
        double sum = 0.0;
        for (const auto& v : row) {
            double p = v.get<double>();
            if (!(p >= 0.0)) throw NetworkError("r_rows entries must be non-negative");
            sum += p;
            r.push_back(p);
        }
        if (std::abs(sum - 1.0) > kRowTolerance) throw NetworkError("r_rows row does not sum to 1");
    }
    net.destination_ = std::move(r);
    return net;
}

RoadNetwork build_grid(std::size_t rows, std::size_t cols, double tau_default) {
    if (rows < 2 || cols < 2) throw NetworkError("grid needs at least 2 rows and 2 columns");
    if (!(tau_default > 0.0)) throw NetworkError("tau_default must be positive");
    std::vector<Edge> edges;
    edges.reserve(2 * (2 * rows * cols - rows - cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            NodeId u = grid_node(r, c, cols);
            if (c + 1 < cols) {
                NodeId v = grid_node(r, c + 1, cols);
                edges.push_back({u, v, tau_default});
                edges.push_back({v, u, tau_default});
            }
            if (r + 1 < rows) {
                NodeId v = grid_node(r + 1, c, cols);
                edges.push_back({u, v, tau_default});
                edges.push_back({v, u, tau_default});
            }
        }
    }
    return RoadNetwork(rows * cols, std::move(edges));
}

std::vector<double> shortest_times_from(const RoadNetwork& net, NodeId source) {
    std::vector<double> dist(net.node_count(), kUnreachable);
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        auto [first, last] = net.out_range(u);
        for (EdgeId e = first; e < last; ++e) {
            const auto& edge = net.edge(e);
            double nd = d + edge.tau;
            if (nd < dist[edge.head]) {
                dist[edge.head] = nd;
                heap.emplace(nd, edge.head);
            }
        }
    }
    return dist;
}

std::vector<double> return_delays(const RoadNetwork& net) {
    const std::size_t n = net.node_count();
    std::vector<std::vector<double>> from(n);
    std::vector<double> table(net.edge_count() * n, kUnreachable);
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
        const auto& edge = net.edge(e);
        if (from[edge.head].empty()) from[edge.head] = shortest_times_from(net, edge.head);
        for (NodeId u = 0; u < n; ++u) {
            double d = from[edge.head][u];
            if (std::isfinite(d)) table[e * n + u] = edge.tau + d;
        }
    }
    return table;
}

std::vector<double> destination_popularity(const RoadNetwork& net, std::span<const double> weights) {
    const std::size_t n = net.node_count();
    if (weights.size() != n) throw NetworkError("popularity weights must have one entry per node");
    bool any_positive = false;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw NetworkError("popularity weights must be finite and non-negative");
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw NetworkError("popularity weights are all zero");

    std::vector<double> table(net.edge_count() * n, 0.0);
    std::vector<std::vector<double>> from(n);
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
        NodeId head = net.edge(e).head;
        if (from[head].empty()) from[head] = shortest_times_from(net, head);
        double total = 0.0;
        for (NodeId u = 0; u < n; ++u)
            if (std::isfinite(from[head][u])) total += weights[u];
        if (total <= 0.0) {
            // No popular node is reachable: the trip ends where it starts.
            table[e * n + head] = 1.0;
            continue;
        }
        for (NodeId u = 0; u < n; ++u)
            if (std::isfinite(from[head][u])) table[e * n + u] = weights[u] / total;
    }
    return table;
}

std::vector<double> random_popularity(std::size_t node_count, std::uint64_t seed) {
    Rng rng(derive_seed(seed, {0x706f70ULL}));
    std::vector<double> w(node_count);
    for (auto& x : w) x = 1.0 - rng.uniform();
    return w;
}

}  // namespace wgc
