#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "wgc/demand.hpp"
#include "wgc/network.hpp"

namespace wgc {

/// Raised when the integration grid cannot represent the network delays.
class FluidConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kDefaultEpsD = 1e-9;

/// Fluid masses at one instant.
struct FluidState {
    std::vector<double> queue;      // Q_e, waiting passengers per edge
    std::vector<double> edge_idle;  // D_e, idle drivers cruising on each edge
    std::vector<double> node_idle;  // P_u, idle drivers waiting at each node
    double occupied = 0.0;          // allocated drivers not yet returned

    static FluidState zeros(const RoadNetwork& net);

    double idle_on_edges() const;
    double idle_at_nodes() const;
    double total_drivers() const { return idle_on_edges() + idle_at_nodes() + occupied; }
};

/// Occupied mass already committed to arrive at `node` after `time` seconds
/// (relative to the integration start).
struct PendingReturn {
    NodeId node;
    double time;
    double mass;
};

/// A_e = min(D_e, Q_e).
inline double matching_rate(double idle, double queue) { return idle < queue ? idle : queue; }

/// A / D, or 0 when D <= eps_d.
inline double hazard(double allocation, double idle, double eps_d = kDefaultEpsD) {
    return idle > eps_d ? allocation / idle : 0.0;
}

/// Hazard felt by one extra (measure-zero) driver on the edge: A / D, and on
/// an empty edge the D -> 0+ limit of min(D, Q) / D, i.e. 1 while Q > 0.
inline double driver_hazard(double idle, double queue, double eps_d = kDefaultEpsD) {
    if (idle > eps_d) return matching_rate(idle, queue) / idle;
    return queue > eps_d ? 1.0 : 0.0;
}

/// exp(-sum(hazards) * dt).
double survival_over_window(std::span<const double> hazards, double dt);

/// Delays of every edge and every (edge, destination) pair in whole steps.
struct DelaySteps {
    double dt = 0.0;
    std::size_t node_count = 0;
    std::vector<std::size_t> edge;      // tau_e / dt
    std::vector<long> trip;             // tau_eu / dt, -1 when unreachable; E x V row-major
    std::size_t max_steps = 0;

    /// Throws FluidConfigError naming the first delay that is not an integer
    /// multiple of dt.
    static DelaySteps build(const RoadNetwork& net, double dt);
};

/// Ring buffer holding the delayed per-edge quantities the RFDE reads: the
/// inflow P_u(t) Q_uv into each edge, the allocation rate A_e(t), and the
/// hazard A_e/D_e. Lag 0 is the most recent record. Reads older than the
/// recorded history return the configured prehistory value.
class HistoryBuffer {
public:
    struct Prehistory {
        std::vector<double> entry_flow;
        std::vector<double> allocation;
        std::vector<double> hazard;
    };

    HistoryBuffer(std::size_t edge_count, std::size_t depth, Prehistory prehistory);

    /// Buffer for integrating `net` at step dt from `initial`. The
    /// prehistory is consistent with the initial state: mass on an edge is
    /// taken to have entered uniformly over the preceding tau_e, nothing was
    /// allocated before t = 0, and that mass has seen zero hazard.
    HistoryBuffer(const RoadNetwork& net, double dt, const FluidState& initial);

    void push(std::span<const double> entry_flow, std::span<const double> allocation, std::span<const double> hazard);

    double entry_flow(EdgeId e, std::size_t lag) const;
    double allocation(EdgeId e, std::size_t lag) const;
    double hazard(EdgeId e, std::size_t lag) const;
    /// Sum of hazard(e, j) for j in [0, steps).
    double hazard_window(EdgeId e, std::size_t steps) const;

    std::size_t depth() const { return depth_; }
    std::size_t recorded() const { return recorded_; }
    const DelaySteps& delays() const { return delays_; }

private:
    std::size_t slot(std::size_t lag) const { return (head_ + slots_ - lag) % slots_; }
    double cumulative(EdgeId e, std::size_t lag) const;

    std::size_t edges_ = 0;
    std::size_t depth_ = 0;
    std::size_t slots_ = 0;
    std::size_t head_ = 0;
    std::size_t recorded_ = 0;
    Prehistory pre_;
    DelaySteps delays_;
    std::vector<double> entry_;
    std::vector<double> alloc_;
    std::vector<double> hazard_;
    std::vector<double> cum_hazard_;
};

/// Exogenous inputs and diagnostics for one Euler step.
struct StepExtras {
    double eps_d = kDefaultEpsD;
    std::span<const double> returning_mass{};  // per node, arriving during this step
    double* clamped_mass = nullptr;            // accumulates |negative| mass removed by clamping
};

/// One forward-Euler step of the coupled queue / edge / node system at t_k.
/// `history` must have been built for the same network and dt; the step
/// records the current allocations into it before reading delayed terms.
FluidState step(const FluidState& state, HistoryBuffer& history, const RoadNetwork& net, const DemandProfile& profile,
                double t_k, double dt, const StepExtras& extras = {});

struct FluidOptions {
    double eps_d = kDefaultEpsD;
    double time_offset = 0.0;  // absolute time of the first sample, for lambda(t)
    std::vector<PendingReturn> pending_returns;
};

/// Immutable time series produced by integrate(); sample k is at k * dt.
class FluidTrajectory {
public:
    double dt() const { return dt_; }
    double horizon() const { return horizon_; }
    double time_offset() const { return time_offset_; }
    double eps_d() const { return eps_d_; }
    std::size_t samples() const { return samples_; }
    std::size_t edge_count() const { return edges_; }
    std::size_t node_count() const { return nodes_; }

    double queue(std::size_t k, EdgeId e) const { return queue_[k * edges_ + e]; }
    double edge_idle(std::size_t k, EdgeId e) const { return edge_idle_[k * edges_ + e]; }
    double allocation(std::size_t k, EdgeId e) const { return allocation_[k * edges_ + e]; }
    double node_idle(std::size_t k, NodeId u) const { return node_idle_[k * nodes_ + u]; }
    double occupied(std::size_t k) const { return occupied_[k]; }
    /// Cumulative mass added by non-negativity clamping up to sample k.
    double clamped(std::size_t k) const { return clamped_[k]; }
    double hazard(std::size_t k, EdgeId e) const { return wgc::hazard(allocation(k, e), edge_idle(k, e), eps_d_); }
    double driver_hazard(std::size_t k, EdgeId e) const {
        return wgc::driver_hazard(edge_idle(k, e), queue(k, e), eps_d_);
    }

    double idle_on_edges(std::size_t k) const;
    double idle_at_nodes(std::size_t k) const;
    FluidState state(std::size_t k) const;

    /// Assembles a trajectory from stored series (used by readers and tests).
    static FluidTrajectory from_series(double dt, double horizon, double time_offset, double eps_d,
                                       std::size_t edge_count, std::size_t node_count, std::vector<double> queue,
                                       std::vector<double> edge_idle, std::vector<double> node_idle,
                                       std::vector<double> occupied, std::vector<double> clamped = {});

private:
    friend FluidTrajectory integrate(const FluidState&, const RoadNetwork&, const DemandProfile&, double, double,
                                     const FluidOptions&);
    void append(const FluidState& s, double clamped);

    double dt_ = 0.0;
    double horizon_ = 0.0;
    double time_offset_ = 0.0;
    double eps_d_ = kDefaultEpsD;
    std::size_t samples_ = 0;
    std::size_t edges_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> queue_;
    std::vector<double> edge_idle_;
    std::vector<double> allocation_;
    std::vector<double> node_idle_;
    std::vector<double> occupied_;
    std::vector<double> clamped_;
};

/// Number of Euler steps covering [0, horizon]: floor(horizon / dt).
std::size_t step_count(double horizon, double dt);

FluidTrajectory integrate(const FluidState& initial, const RoadNetwork& net, const DemandProfile& profile,
                          double horizon, double dt, const FluidOptions& options = {});

/// max_k |sum D + sum P + occupied - N|.
double conservation_error(const FluidTrajectory& traj, double fleet_size);

}  // namespace wgc
