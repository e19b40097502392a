#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "wgc/fluid.hpp"
#include "wgc/network.hpp"

namespace wgc {

class PlannerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Trajectory too short for the requested path.
class InsufficientForecast : public PlannerError {
public:
    using PlannerError::PlannerError;
};

inline constexpr double kDefaultSurvivalEps = 1e-4;
/// Beam width meaning "keep every partial path".
inline constexpr std::size_t kUnboundedBeam = std::numeric_limits<std::size_t>::max();

/// Simple edge path starting at `start`.
struct Path {
    NodeId start = 0;
    std::vector<EdgeId> edges;

    std::size_t size() const { return edges.size(); }
    bool empty() const { return edges.empty(); }
    double duration(const RoadNetwork& net) const;
    /// Throws PlannerError when the chain is disconnected, does not start at
    /// `start`, or revisits a node.
    void validate(const RoadNetwork& net) const;

    bool operator==(const Path&) const = default;
};

struct PathEvaluation {
    Path path;
    double expected_allocation_time = 0.0;  // integral of S over [0, T_pi]
    double terminal_survival = 1.0;
    double duration = 0.0;                  // T_pi
    std::vector<double> survival_curve;     // S(t_k), only when requested
};

struct EvalOptions {
    double eps = kDefaultSurvivalEps;
    std::size_t start_step = 0;  // request time offset into the trajectory, in samples
    bool keep_curve = false;
};

/// Discrete survival walk along `path` over the forecast hazards.
PathEvaluation evaluate_path(const Path& path, const RoadNetwork& net, const FluidTrajectory& traj,
                             const EvalOptions& options = {});

/// Every simple path of 1..max_edges edges from v0, in lexicographic
/// edge-index order (a prefix precedes its extensions).
std::vector<Path> enumerate_paths(const RoadNetwork& net, NodeId v0, std::size_t max_edges);

/// Strict ordering used for argmin: lower expected time first, then the
/// lexicographically smaller edge sequence.
bool better(const PathEvaluation& a, const PathEvaluation& b);

PathEvaluation best_path_exhaustive(const RoadNetwork& net, NodeId v0, std::size_t max_edges,
                                    const FluidTrajectory& traj, const EvalOptions& options = {});

/// Depth-synchronous beam search keeping the `beam_width` best partial paths
/// by optimistic completion score T_alloc + S * (budget - T_partial), where
/// the budget is max_edges * max tau. Every partial path evaluated along
/// the way is itself a candidate answer, so dead ends compete as well.
PathEvaluation best_path_beam(const RoadNetwork& net, NodeId v0, std::size_t max_edges, const FluidTrajectory& traj,
                              std::size_t beam_width, const EvalOptions& options = {});

}  // namespace wgc
