#include "wgc/planner.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace wgc {

namespace {

std::size_t edge_steps(const RoadNetwork& net, EdgeId e, double dt) {
    const double q = net.edge(e).tau / dt;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, q) || r < 1.0)
        throw FluidConfigError("edge travel time is not an integer multiple of the trajectory step");
    return static_cast<std::size_t>(r);
}

// Running state of the survival walk; shared by evaluate_path and the beam
// so both produce bit-identical values for the same edge sequence.
struct Walk {
    double expected = 0.0;
    double survival = 1.0;
    double elapsed = 0.0;
    std::size_t step = 0;  // trajectory sample index of the next step
    bool stopped = false;
};

void advance(Walk& w, EdgeId e, const RoadNetwork& net, const FluidTrajectory& traj, double eps,
             std::vector<double>* curve) {
    const double dt = traj.dt();
    const std::size_t m = edge_steps(net, e, dt);
    w.elapsed += net.edge(e).tau;
    if (w.step + m > traj.samples()) {
        std::ostringstream msg;
        msg << "trajectory covers " << traj.horizon() << " s but the path needs " << w.elapsed
            << " s from the request time";
        throw InsufficientForecast(msg.str());
    }
    for (std::size_t j = 0; j < m; ++j, ++w.step) {
        if (w.stopped || w.survival < eps) {
            w.stopped = true;
            continue;
        }
        const double h = traj.driver_hazard(w.step, e);
        w.expected += w.survival * dt;
        w.survival *= std::exp(-h * dt);
        if (curve) curve->push_back(w.survival);
    }
}

struct Partial {
    Path path;
    std::vector<NodeId> visited;
    NodeId at = 0;
    Walk walk;
};

PathEvaluation to_evaluation(const Partial& p) {
    PathEvaluation ev;
    ev.path = p.path;
    ev.expected_allocation_time = p.walk.expected;
    ev.terminal_survival = p.walk.survival;
    ev.duration = p.walk.elapsed;
    return ev;
}

void check_start(const RoadNetwork& net, NodeId v0, std::size_t max_edges) {
    if (v0 >= net.node_count()) throw PlannerError("start node outside the network");
    if (max_edges < 1) throw PlannerError("maximum path length must be at least 1");
}

}  // namespace

double Path::duration(const RoadNetwork& net) const {
    double t = 0.0;
    for (EdgeId e : edges) t += net.edge(e).tau;
    return t;
}

void Path::validate(const RoadNetwork& net) const {
    std::vector<NodeId> seen{start};
    NodeId at = start;
    for (EdgeId e : edges) {
        if (e >= net.edge_count()) throw PlannerError("path uses an unknown edge");
        const auto& edge = net.edge(e);
        if (edge.tail != at) throw PlannerError("path edges are not connected");
        if (std::find(seen.begin(), seen.end(), edge.head) != seen.end())
            throw PlannerError("path revisits a node");
        seen.push_back(edge.head);
        at = edge.head;
    }
}

PathEvaluation evaluate_path(const Path& path, const RoadNetwork& net, const FluidTrajectory& traj,
                             const EvalOptions& options) {
    if (traj.edge_count() != net.edge_count()) throw PlannerError("trajectory does not match the network");
    const double available = traj.horizon() - static_cast<double>(options.start_step) * traj.dt();
    const double needed = path.duration(net);
    if (needed > available + 1e-9 * std::max(1.0, needed)) {
        std::ostringstream msg;
        msg << "trajectory covers " << available << " s after the request but the path needs " << needed << " s";
        throw InsufficientForecast(msg.str());
    }
    PathEvaluation ev;
    ev.path = path;
    Walk w;
    w.step = options.start_step;
    if (options.keep_curve) ev.survival_curve.push_back(1.0);
    for (EdgeId e : path.edges) advance(w, e, net, traj, options.eps, options.keep_curve ? &ev.survival_curve : nullptr);
    ev.expected_allocation_time = w.expected;
    ev.terminal_survival = w.survival;
    ev.duration = w.elapsed;
    return ev;
}

std::vector<Path> enumerate_paths(const RoadNetwork& net, NodeId v0, std::size_t max_edges) {
    check_start(net, v0, max_edges);
    std::vector<Path> out;
    std::vector<EdgeId> stack;
    std::vector<char> on_path(net.node_count(), 0);
    on_path[v0] = 1;

    auto dfs = [&](auto& self, NodeId u) -> void {
        if (stack.size() == max_edges) return;
        auto [first, last] = net.out_range(u);
        for (EdgeId e = first; e < last; ++e) {
            NodeId v = net.edge(e).head;
            if (on_path[v]) continue;
            stack.push_back(e);
            out.push_back(Path{v0, stack});
            on_path[v] = 1;
            self(self, v);
            on_path[v] = 0;
            stack.pop_back();
        }
    };
    dfs(dfs, v0);
    return out;
}

bool better(const PathEvaluation& a, const PathEvaluation& b) {
    if (a.expected_allocation_time != b.expected_allocation_time)
        return a.expected_allocation_time < b.expected_allocation_time;
    return a.path.edges < b.path.edges;
}

PathEvaluation best_path_exhaustive(const RoadNetwork& net, NodeId v0, std::size_t max_edges,
                                    const FluidTrajectory& traj, const EvalOptions& options) {
    auto paths = enumerate_paths(net, v0, max_edges);
    if (paths.empty()) throw PlannerError("no candidate path leaves node " + std::to_string(v0));
    std::vector<PathEvaluation> evals;
    evals.reserve(paths.size());
    for (const auto& p : paths) evals.push_back(evaluate_path(p, net, traj, {options.eps, options.start_step, false}));
    auto best = std::min_element(evals.begin(), evals.end(), better);
    if (options.keep_curve) return evaluate_path(best->path, net, traj, options);
    return *best;
}

PathEvaluation best_path_beam(const RoadNetwork& net, NodeId v0, std::size_t max_edges, const FluidTrajectory& traj,
                              std::size_t beam_width, const EvalOptions& options) {
    check_start(net, v0, max_edges);
    if (beam_width < 1) throw PlannerError("beam width must be at least 1");
    if (traj.edge_count() != net.edge_count()) throw PlannerError("trajectory does not match the network");
    const double budget = static_cast<double>(max_edges) * net.max_tau();

    Partial root;
    root.path.start = v0;
    root.visited.push_back(v0);
    root.at = v0;
    root.walk.step = options.start_step;

    std::vector<Partial> frontier{root};
    std::optional<PathEvaluation> best;

    for (std::size_t depth = 1; depth <= max_edges && !frontier.empty(); ++depth) {
        std::vector<Partial> children;
        for (const auto& parent : frontier) {
            auto [first, last] = net.out_range(parent.at);
            for (EdgeId e = first; e < last; ++e) {
                NodeId v = net.edge(e).head;
                if (std::find(parent.visited.begin(), parent.visited.end(), v) != parent.visited.end()) continue;
                Partial child = parent;
                child.path.edges.push_back(e);
                child.visited.push_back(v);
                child.at = v;
                advance(child.walk, e, net, traj, options.eps, nullptr);
                children.push_back(std::move(child));
            }
        }
        for (const auto& c : children) {
            auto ev = to_evaluation(c);
            if (!best || better(ev, *best)) best = std::move(ev);
        }
        if (children.size() > beam_width) {
            auto score = [&](const Partial& p) {
                return p.walk.expected + p.walk.survival * (budget - p.walk.elapsed);
            };
            std::stable_sort(children.begin(), children.end(), [&](const Partial& a, const Partial& b) {
                const double sa = score(a), sb = score(b);
                if (sa != sb) return sa < sb;
                return a.path.edges < b.path.edges;
            });
            children.resize(beam_width);
        }
        frontier = std::move(children);
    }
    if (!best) throw PlannerError("no candidate path leaves node " + std::to_string(v0));
    if (options.keep_curve) return evaluate_path(best->path, net, traj, options);
    return *best;
}

}  // namespace wgc
