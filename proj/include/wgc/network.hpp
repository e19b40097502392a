#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace wgc {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

class NetworkError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Edge {
    NodeId tail;
    NodeId head;
    double tau;  // idle traversal time, seconds

    bool operator==(const Edge&) const = default;
};

/// Directed road network with routing and trip tables.
///
/// Edges are kept in canonical (tail, head) order, so the out-edges of a
/// node form a contiguous, increasing index range. Every per-edge table
/// (transition probabilities, destination rows, return delays) is indexed
/// by that dense edge index. Instances are immutable once built.
class RoadNetwork {
public:
    RoadNetwork() = default;

    /// Builds a network from an arbitrary edge list. Self-loops, duplicate
    /// edges, unknown endpoints and non-positive travel times are rejected.
    /// Transition probabilities default to uniform over out-neighbors;
    /// destinations default to uniform popularity.
    RoadNetwork(std::size_t node_count, std::vector<Edge> edges);

    std::size_t node_count() const { return node_count_; }
    std::size_t edge_count() const { return edges_.size(); }
    std::span<const Edge> edges() const { return edges_; }
    const Edge& edge(EdgeId e) const { return edges_.at(e); }

    /// Out-edges of `u` as a contiguous index range [first, last).
    std::pair<EdgeId, EdgeId> out_range(NodeId u) const { return {out_begin_[u], out_begin_[u + 1]}; }
    std::size_t out_degree(NodeId u) const { return out_begin_[u + 1] - out_begin_[u]; }
    std::span<const EdgeId> in_edges(NodeId u) const {
        return std::span<const EdgeId>(in_edges_).subspan(in_begin_[u], in_begin_[u + 1] - in_begin_[u]);
    }

    /// Edge index of (u, v), or -1 when absent.
    long find_edge(NodeId u, NodeId v) const;

    /// Q_{tail(e), head(e)}.
    double transition(EdgeId e) const { return transition_[e]; }
    std::span<const double> transitions() const { return transition_; }

    /// R_{e -> u}.
    double destination(EdgeId e, NodeId u) const { return destination_[e * node_count_ + u]; }
    std::span<const double> destination_row(EdgeId e) const {
        return std::span<const double>(destination_).subspan(e * node_count_, node_count_);
    }

    /// tau_{eu}: occupied travel time from edge e to node u (kUnreachable if none).
    double return_delay(EdgeId e, NodeId u) const { return return_delay_[e * node_count_ + u]; }

    double max_tau() const;
    double max_return_delay() const;

    /// Replaces the routing probabilities; entries are per edge and every row
    /// must be a probability distribution over the node's out-edges.
    void set_transitions(std::vector<double> per_edge);

    /// Recomputes R from per-node popularity weights (see destination_popularity).
    void set_popularity(std::span<const double> weights);

    nlohmann::json to_json() const;
    static RoadNetwork from_json(const nlohmann::json& doc);

    bool operator==(const RoadNetwork&) const = default;

private:
    void index_adjacency();

    std::size_t node_count_ = 0;
    std::vector<Edge> edges_;
    std::vector<EdgeId> out_begin_;
    std::vector<EdgeId> in_edges_;
    std::vector<std::size_t> in_begin_;
    std::vector<double> transition_;
    std::vector<double> destination_;
    std::vector<double> return_delay_;
};

/// Row-major node index of grid cell (r, c).
inline NodeId grid_node(std::size_t r, std::size_t c, std::size_t cols) {
    return static_cast<NodeId>(r * cols + c);
}

/// rows x cols lattice with two directed edges per lattice adjacency.
RoadNetwork build_grid(std::size_t rows, std::size_t cols, double tau_default);

/// Single-source shortest travel times (Dijkstra) using tau_e as weights.
std::vector<double> shortest_times_from(const RoadNetwork& net, NodeId source);

/// tau_eu = tau_e + shortest time from head(e) to u, row-major E x V.
std::vector<double> return_delays(const RoadNetwork& net);

/// R_{e->u} proportional to weights[u] over the nodes reachable from
/// head(e); row-major E x V. Throws when every weight is zero.
std::vector<double> destination_popularity(const RoadNetwork& net, std::span<const double> weights);

/// Popularity weights drawn uniformly from (0, 1] with the given seed.
std::vector<double> random_popularity(std::size_t node_count, std::uint64_t seed);

}  // namespace wgc
