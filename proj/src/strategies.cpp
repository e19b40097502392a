#include "wgc/strategies.hpp"

#include <cmath>
#include <functional>
#include <queue>

namespace wgc {

namespace {

void require_out_edges(const RoadNetwork& net, NodeId v) {
    if (v >= net.node_count()) throw RoutingError("node outside the network");
    if (net.out_degree(v) == 0) throw RoutingError("node " + std::to_string(v) + " has no outgoing edge");
}

}  // namespace

std::string_view display_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Wgc: return "WGC";
        case StrategyKind::Greedy: return "Greedy";
        case StrategyKind::RandomWalk: return "Random";
        case StrategyKind::Hotspot: return "Hotspot";
    }
    return "?";
}

std::string_view config_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Wgc: return "wgc";
        case StrategyKind::Greedy: return "greedy";
        case StrategyKind::RandomWalk: return "random";
        case StrategyKind::Hotspot: return "hotspot";
    }
    return "?";
}

std::optional<StrategyKind> parse_strategy(std::string_view token) {
    for (auto k : kAllStrategies)
        if (config_name(k) == token) return k;
    return std::nullopt;
}

EdgeId route_random_walk(const RoadNetwork& net, NodeId v, Rng& rng) {
    require_out_edges(net, v);
    auto [first, last] = net.out_range(v);
    return first + static_cast<EdgeId>(rng.below(last - first));
}

EdgeId route_greedy(const RoadNetwork& net, const DemandProfile& profile, NodeId v, double t) {
    require_out_edges(net, v);
    auto [first, last] = net.out_range(v);
    EdgeId best = first;
    double best_rate = profile.evaluate(first, t);
    for (EdgeId e = first + 1; e < last; ++e) {
        double r = profile.evaluate(e, t);
        if (r > best_rate) {
            best = e;
            best_rate = r;
        }
    }
    return best;
}

std::vector<double> hotspot_distances(const RoadNetwork& net, const DemandProfile& profile) {
    std::vector<double> dist(net.node_count(), kUnreachable);
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (EdgeId e : profile.hotspot_edges()) {
        NodeId tail = net.edge(e).tail;
        if (dist[tail] > 0.0) {
            dist[tail] = 0.0;
            heap.emplace(0.0, tail);
        }
    }
    // Dijkstra on the reversed graph from every hotspot tail at once.
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (EdgeId e : net.in_edges(u)) {
            const auto& edge = net.edge(e);
            double nd = d + edge.tau;
            if (nd < dist[edge.tail]) {
                dist[edge.tail] = nd;
                heap.emplace(nd, edge.tail);
            }
        }
    }
    return dist;
}

EdgeId route_hotspot(const RoadNetwork& net, const DemandProfile& profile, NodeId v, Rng& rng) {
    auto dist = hotspot_distances(net, profile);
    return route_hotspot(net, profile, dist, v, rng);
}

EdgeId route_hotspot(const RoadNetwork& net, const DemandProfile& profile, std::span<const double> distances,
                     NodeId v, Rng& rng) {
    require_out_edges(net, v);
    auto [first, last] = net.out_range(v);
    for (EdgeId e = first; e < last; ++e)
        if (profile.is_hotspot(e)) return e;

    EdgeId best = first;
    double best_dist = kUnreachable;
    for (EdgeId e = first; e < last; ++e) {
        double d = distances[net.edge(e).head];
        if (d < best_dist) {
            best = e;
            best_dist = d;
        }
    }
    if (!std::isfinite(best_dist)) return route_random_walk(net, v, rng);
    return best;
}

Path route_wgc(const RoadNetwork& net, const DemandProfile& profile, const FluidState& initial, NodeId v,
               double request_time, const WgcParams& params, std::vector<PendingReturn> pending) {
    require_out_edges(net, v);
    const double horizon =
        params.horizon > 0.0 ? params.horizon : static_cast<double>(params.max_edges) * net.max_tau();
    FluidOptions options;
    options.eps_d = params.eps_d;
    options.time_offset = request_time;
    options.pending_returns = std::move(pending);
    auto traj = integrate(initial, net, profile, horizon, params.dt, options);
    EvalOptions eval{params.eps, 0, false};
    if (params.beam_width == kUnboundedBeam) return best_path_exhaustive(net, v, params.max_edges, traj, eval).path;
    return best_path_beam(net, v, params.max_edges, traj, params.beam_width, eval).path;
}

Strategy::Strategy(StrategyKind kind, const RoadNetwork& net, const DemandProfile& profile, WgcParams params)
    : kind_(kind), net_(&net), profile_(&profile), params_(params) {
    if (kind_ == StrategyKind::Hotspot) hotspot_distance_ = hotspot_distances(net, profile);
}

Path Strategy::route(NodeId v, double t, Rng& rng, const ForecastSource& forecast) const {
    switch (kind_) {
        case StrategyKind::RandomWalk: return Path{v, {route_random_walk(*net_, v, rng)}};
        case StrategyKind::Greedy: return Path{v, {route_greedy(*net_, *profile_, v, t)}};
        case StrategyKind::Hotspot: return Path{v, {route_hotspot(*net_, *profile_, hotspot_distance_, v, rng)}};
        case StrategyKind::Wgc: {
            Forecast f = forecast();
            return route_wgc(*net_, *profile_, f.state, v, t, params_, std::move(f.pending));
        }
    }
    throw RoutingError("unknown strategy");
}

}  // namespace wgc
