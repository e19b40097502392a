#include "wgc/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace wgc {

namespace {

std::size_t whole_steps(double delay, double dt, const char* what, const Edge& edge) {
    const double q = delay / dt;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, q) || r < 1.0) {
        std::ostringstream msg;
        msg << what << " " << delay << " s of edge (" << edge.tail << "," << edge.head
            << ") is not a positive integer multiple of dt = " << dt;
        throw FluidConfigError(msg.str());
    }
    return static_cast<std::size_t>(r);
}

double clamp_non_negative(double& x) {
    if (x >= 0.0) return 0.0;
    double removed = -x;
    x = 0.0;
    return removed;
}

}  // namespace

FluidState FluidState::zeros(const RoadNetwork& net) {
    FluidState s;
    s.queue.assign(net.edge_count(), 0.0);
    s.edge_idle.assign(net.edge_count(), 0.0);
    s.node_idle.assign(net.node_count(), 0.0);
    return s;
}

double FluidState::idle_on_edges() const { return std::accumulate(edge_idle.begin(), edge_idle.end(), 0.0); }

double FluidState::idle_at_nodes() const { return std::accumulate(node_idle.begin(), node_idle.end(), 0.0); }

double survival_over_window(std::span<const double> hazards, double dt) {
    double sum = 0.0;
    for (double h : hazards) sum += h;
    return std::exp(-sum * dt);
}

DelaySteps DelaySteps::build(const RoadNetwork& net, double dt) {
    if (!(dt > 0.0)) throw FluidConfigError("dt must be positive");
    DelaySteps d;
    d.dt = dt;
    d.node_count = net.node_count();
    d.edge.resize(net.edge_count());
    d.trip.assign(net.edge_count() * net.node_count(), -1);
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
        const auto& edge = net.edge(e);
        d.edge[e] = whole_steps(edge.tau, dt, "travel time", edge);
        d.max_steps = std::max(d.max_steps, d.edge[e]);
        for (NodeId u = 0; u < net.node_count(); ++u) {
            double delay = net.return_delay(e, u);
            if (!std::isfinite(delay)) continue;
            auto s = whole_steps(delay, dt, "trip time", edge);
            d.trip[e * net.node_count() + u] = static_cast<long>(s);
            d.max_steps = std::max(d.max_steps, s);
        }
    }
    return d;
}

HistoryBuffer::HistoryBuffer(std::size_t edge_count, std::size_t depth, Prehistory prehistory)
    : edges_(edge_count), depth_(depth), slots_(depth + 1), pre_(std::move(prehistory)) {
    auto fill = [&](std::vector<double>& v) {
        if (v.empty()) v.assign(edges_, 0.0);
        if (v.size() != edges_) throw FluidConfigError("prehistory must cover every edge");
    };
    fill(pre_.entry_flow);
    fill(pre_.allocation);
    fill(pre_.hazard);
    entry_.assign(slots_ * edges_, 0.0);
    alloc_.assign(slots_ * edges_, 0.0);
    hazard_.assign(slots_ * edges_, 0.0);
    cum_hazard_.assign(slots_ * edges_, 0.0);
    head_ = slots_ - 1;
}

HistoryBuffer::HistoryBuffer(const RoadNetwork& net, double dt, const FluidState& initial)
    : HistoryBuffer(net.edge_count(), DelaySteps::build(net, dt).max_steps, [&] {
          Prehistory pre;
          pre.entry_flow.resize(net.edge_count());
          for (EdgeId e = 0; e < net.edge_count(); ++e) pre.entry_flow[e] = initial.edge_idle.at(e) / net.edge(e).tau;
          return pre;
      }()) {
    delays_ = DelaySteps::build(net, dt);
}

void HistoryBuffer::push(std::span<const double> entry_flow, std::span<const double> allocation,
                         std::span<const double> hazard) {
    const std::size_t prev = head_;
    head_ = (head_ + 1) % slots_;
    const std::size_t base = head_ * edges_;
    for (std::size_t e = 0; e < edges_; ++e) {
        entry_[base + e] = entry_flow[e];
        alloc_[base + e] = allocation[e];
        hazard_[base + e] = hazard[e];
        const double before = recorded_ == 0 ? 0.0 : cum_hazard_[prev * edges_ + e];
        cum_hazard_[base + e] = before + hazard[e];
    }
    ++recorded_;
}

double HistoryBuffer::entry_flow(EdgeId e, std::size_t lag) const {
    if (lag >= recorded_) return pre_.entry_flow[e];
    return entry_[slot(lag) * edges_ + e];
}

double HistoryBuffer::allocation(EdgeId e, std::size_t lag) const {
    if (lag >= recorded_) return pre_.allocation[e];
    return alloc_[slot(lag) * edges_ + e];
}

double HistoryBuffer::hazard(EdgeId e, std::size_t lag) const {
    if (lag >= recorded_) return pre_.hazard[e];
    return hazard_[slot(lag) * edges_ + e];
}

double HistoryBuffer::cumulative(EdgeId e, std::size_t lag) const { return cum_hazard_[slot(lag) * edges_ + e]; }

double HistoryBuffer::hazard_window(EdgeId e, std::size_t steps) const {
    if (steps == 0) return 0.0;
    if (steps > depth_) throw std::out_of_range("hazard window longer than history depth");
    if (recorded_ == 0) return static_cast<double>(steps) * pre_.hazard[e];
    const double latest = cumulative(e, 0);
    if (steps < recorded_) return latest - cumulative(e, steps);
    // Window reaches into the prehistory.
    return latest + static_cast<double>(steps - recorded_) * pre_.hazard[e];
}

FluidState step(const FluidState& s, HistoryBuffer& history, const RoadNetwork& net, const DemandProfile& profile,
                double t_k, double dt, const StepExtras& extras) {
    const auto& delays = history.delays();
    if (delays.edge.size() != net.edge_count() || delays.dt != dt)
        throw FluidConfigError("history buffer was built for a different network or step size");
    const std::size_t m = net.edge_count();
    const std::size_t n = net.node_count();

    std::vector<double> alloc(m), haz(m), entry(m);
    for (EdgeId e = 0; e < m; ++e) {
        alloc[e] = matching_rate(s.edge_idle[e], s.queue[e]);
        haz[e] = hazard(alloc[e], s.edge_idle[e], extras.eps_d);
        entry[e] = s.node_idle[net.edge(e).tail] * net.transition(e);
    }
    history.push(entry, alloc, haz);

    // Survivors leaving each edge: entrants of tau_e ago times the discrete survival.
    std::vector<double> exit(m);
    for (EdgeId e = 0; e < m; ++e) {
        const std::size_t lag = delays.edge[e];
        const double survival = std::exp(-history.hazard_window(e, lag) * dt);
        exit[e] = history.entry_flow(e, lag) * survival;
    }

    std::vector<double> returning(n, 0.0);
    for (EdgeId e = 0; e < m; ++e) {
        auto row = net.destination_row(e);
        const long* trip = &delays.trip[e * n];
        for (NodeId u = 0; u < n; ++u) {
            if (row[u] == 0.0 || trip[u] < 0) continue;
            returning[u] += row[u] * history.allocation(e, static_cast<std::size_t>(trip[u]));
        }
    }

    FluidState next;
    next.queue.resize(m);
    next.edge_idle.resize(m);
    next.node_idle.resize(n);

    double allocated = 0.0;
    for (EdgeId e = 0; e < m; ++e) {
        const double lambda = profile.evaluate(e, t_k);
        next.queue[e] = s.queue[e] + dt * (lambda - alloc[e] - profile.mu() * s.queue[e]);
        next.edge_idle[e] = s.edge_idle[e] + dt * (entry[e] - alloc[e] - exit[e]);
        allocated += alloc[e];
    }

    double returned = 0.0;
    double external = 0.0;
    for (NodeId u = 0; u < n; ++u) {
        double departing = 0.0;
        auto [first, last] = net.out_range(u);
        for (EdgeId e = first; e < last; ++e) departing += entry[e];
        double arriving = 0.0;
        for (EdgeId e : net.in_edges(u)) arriving += exit[e];
        double ext = extras.returning_mass.empty() ? 0.0 : extras.returning_mass[u];
        next.node_idle[u] = s.node_idle[u] + dt * (returning[u] - departing + arriving) + ext;
        returned += returning[u];
        external += ext;
    }
    next.occupied = s.occupied + dt * (allocated - returned) - external;

    double clamped = 0.0;
    for (auto& x : next.queue) clamped += clamp_non_negative(x);
    for (auto& x : next.edge_idle) clamped += clamp_non_negative(x);
    for (auto& x : next.node_idle) clamped += clamp_non_negative(x);
    clamped += clamp_non_negative(next.occupied);
    if (extras.clamped_mass) *extras.clamped_mass += clamped;
    return next;
}

double FluidTrajectory::idle_on_edges(std::size_t k) const {
    const double* p = &edge_idle_[k * edges_];
    return std::accumulate(p, p + edges_, 0.0);
}

double FluidTrajectory::idle_at_nodes(std::size_t k) const {
    const double* p = &node_idle_[k * nodes_];
    return std::accumulate(p, p + nodes_, 0.0);
}

FluidState FluidTrajectory::state(std::size_t k) const {
    FluidState s;
    s.queue.assign(queue_.begin() + k * edges_, queue_.begin() + (k + 1) * edges_);
    s.edge_idle.assign(edge_idle_.begin() + k * edges_, edge_idle_.begin() + (k + 1) * edges_);
    s.node_idle.assign(node_idle_.begin() + k * nodes_, node_idle_.begin() + (k + 1) * nodes_);
    s.occupied = occupied_[k];
    return s;
}

void FluidTrajectory::append(const FluidState& s, double clamped) {
    queue_.insert(queue_.end(), s.queue.begin(), s.queue.end());
    edge_idle_.insert(edge_idle_.end(), s.edge_idle.begin(), s.edge_idle.end());
    for (std::size_t e = 0; e < edges_; ++e) allocation_.push_back(matching_rate(s.edge_idle[e], s.queue[e]));
    node_idle_.insert(node_idle_.end(), s.node_idle.begin(), s.node_idle.end());
    occupied_.push_back(s.occupied);
    clamped_.push_back(clamped);
    ++samples_;
}

FluidTrajectory FluidTrajectory::from_series(double dt, double horizon, double time_offset, double eps_d,
                                             std::size_t edge_count, std::size_t node_count,
                                             std::vector<double> queue, std::vector<double> edge_idle,
                                             std::vector<double> node_idle, std::vector<double> occupied,
                                             std::vector<double> clamped) {
    FluidTrajectory t;
    t.dt_ = dt;
    t.horizon_ = horizon;
    t.time_offset_ = time_offset;
    t.eps_d_ = eps_d;
    t.edges_ = edge_count;
    t.nodes_ = node_count;
    t.samples_ = occupied.size();
    if (queue.size() != t.samples_ * edge_count || edge_idle.size() != t.samples_ * edge_count ||
        node_idle.size() != t.samples_ * node_count)
        throw FluidConfigError("trajectory series lengths are inconsistent");
    if (clamped.empty()) clamped.assign(t.samples_, 0.0);
    t.allocation_.resize(queue.size());
    for (std::size_t i = 0; i < queue.size(); ++i) t.allocation_[i] = matching_rate(edge_idle[i], queue[i]);
    t.queue_ = std::move(queue);
    t.edge_idle_ = std::move(edge_idle);
    t.node_idle_ = std::move(node_idle);
    t.occupied_ = std::move(occupied);
    t.clamped_ = std::move(clamped);
    return t;
}

std::size_t step_count(double horizon, double dt) {
    if (!(dt > 0.0)) throw FluidConfigError("dt must be positive");
    if (!(horizon >= 0.0)) throw FluidConfigError("horizon must be non-negative");
    return static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
}

FluidTrajectory integrate(const FluidState& initial, const RoadNetwork& net, const DemandProfile& profile,
                          double horizon, double dt, const FluidOptions& options) {
    const std::size_t m = net.edge_count();
    const std::size_t n = net.node_count();
    if (initial.queue.size() != m || initial.edge_idle.size() != m || initial.node_idle.size() != n)
        throw FluidConfigError("initial state does not match the network");
    if (profile.edge_count() != m) throw FluidConfigError("demand profile does not match the network");
    const std::size_t steps = step_count(horizon, dt);

    HistoryBuffer history(net, dt, initial);

    // Bucket externally scheduled returns by the step in which they land.
    std::vector<std::vector<double>> scheduled;
    if (!options.pending_returns.empty()) {
        scheduled.assign(steps, {});
        for (const auto& r : options.pending_returns) {
            if (r.node >= n) throw FluidConfigError("pending return to unknown node");
            const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(r.time / dt + 1e-9)));
            if (k >= steps) continue;
            if (scheduled[k].empty()) scheduled[k].assign(n, 0.0);
            scheduled[k][r.node] += r.mass;
        }
    }

    FluidTrajectory traj;
    traj.dt_ = dt;
    traj.horizon_ = horizon;
    traj.time_offset_ = options.time_offset;
    traj.eps_d_ = options.eps_d;
    traj.edges_ = m;
    traj.nodes_ = n;
    traj.queue_.reserve((steps + 1) * m);
    traj.edge_idle_.reserve((steps + 1) * m);
    traj.allocation_.reserve((steps + 1) * m);
    traj.node_idle_.reserve((steps + 1) * n);

    double clamped = 0.0;
    FluidState state = initial;
    traj.append(state, clamped);
    for (std::size_t k = 0; k < steps; ++k) {
        StepExtras extras;
        extras.eps_d = options.eps_d;
        extras.clamped_mass = &clamped;
        if (!scheduled.empty() && !scheduled[k].empty()) extras.returning_mass = scheduled[k];
        const double t_k = options.time_offset + static_cast<double>(k) * dt;
        state = step(state, history, net, profile, t_k, dt, extras);
        traj.append(state, clamped);
    }
    return traj;
}

double conservation_error(const FluidTrajectory& traj, double fleet_size) {
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        const double total = traj.idle_on_edges(k) + traj.idle_at_nodes(k) + traj.occupied(k);
        worst = std::max(worst, std::abs(total - fleet_size));
    }
    return worst;
}

}  // namespace wgc
