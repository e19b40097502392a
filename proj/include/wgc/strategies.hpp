#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wgc/demand.hpp"
#include "wgc/fluid.hpp"
#include "wgc/network.hpp"
#include "wgc/planner.hpp"
#include "wgc/rng.hpp"

namespace wgc {

class RoutingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class StrategyKind { Wgc, Greedy, RandomWalk, Hotspot };

/// Canonical report order: WGC, Greedy, Random, Hotspot.
inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::Wgc, StrategyKind::Greedy, StrategyKind::RandomWalk,
                                                  StrategyKind::Hotspot};

/// Column label used in reports ("WGC", "Greedy", "Random", "Hotspot").
std::string_view display_name(StrategyKind kind);
/// Config token ("wgc", "greedy", "random", "hotspot").
std::string_view config_name(StrategyKind kind);
std::optional<StrategyKind> parse_strategy(std::string_view token);

struct WgcParams {
    std::size_t max_edges = 4;
    std::size_t beam_width = 10;  // kUnboundedBeam runs the exhaustive planner
    double eps = kDefaultSurvivalEps;
    double dt = 0.1;
    double horizon = 0.0;  // forecast length; 0 means max_edges * max tau
    double eps_d = kDefaultEpsD;
};

/// Uniform choice among the out-edges of v.
EdgeId route_random_walk(const RoadNetwork& net, NodeId v, Rng& rng);

/// Out-edge with the largest current arrival rate; ties go to the lower index.
EdgeId route_greedy(const RoadNetwork& net, const DemandProfile& profile, NodeId v, double t);

/// Shortest travel time from every node to the tail of its nearest hotspot edge.
std::vector<double> hotspot_distances(const RoadNetwork& net, const DemandProfile& profile);

/// Moves toward the nearest hotspot tail, entering the hotspot edge when at
/// its tail. Falls back to a random walk when no hotspot is reachable.
EdgeId route_hotspot(const RoadNetwork& net, const DemandProfile& profile, NodeId v, Rng& rng);
EdgeId route_hotspot(const RoadNetwork& net, const DemandProfile& profile, std::span<const double> distances,
                     NodeId v, Rng& rng);

/// Forecasts the network from `initial` (taken at `request_time`) and returns
/// the planned path from v.
Path route_wgc(const RoadNetwork& net, const DemandProfile& profile, const FluidState& initial, NodeId v,
               double request_time, const WgcParams& params, std::vector<PendingReturn> pending = {});

/// State handed to the WGC planner when a driver asks for a route.
struct Forecast {
    FluidState state;
    std::vector<PendingReturn> pending;
};
using ForecastSource = std::function<Forecast()>;

/// Common entry point for all four policies. Baselines return a one-edge
/// path and are consulted at every node; WGC returns its full plan.
class Strategy {
public:
    Strategy(StrategyKind kind, const RoadNetwork& net, const DemandProfile& profile, WgcParams params = {});

    StrategyKind kind() const { return kind_; }
    const WgcParams& params() const { return params_; }

    Path route(NodeId v, double t, Rng& rng, const ForecastSource& forecast) const;

private:
    StrategyKind kind_;
    const RoadNetwork* net_;
    const DemandProfile* profile_;
    WgcParams params_;
    std::vector<double> hotspot_distance_;
};

}  // namespace wgc
