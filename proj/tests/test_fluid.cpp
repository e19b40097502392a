#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wgc/fluid.hpp"

using namespace wgc;

namespace {

// Step-by-step re-implementation with full (unbounded) history arrays and
// explicit sums, used as an oracle for integrate().
struct NaiveSeries {
    std::vector<std::vector<double>> q, d, p;
    std::vector<double> occ;
};

NaiveSeries naive_integrate(const FluidState& init, const RoadNetwork& net, const DemandProfile& prof, double horizon,
                            double dt) {
    const std::size_t m = net.edge_count(), n = net.node_count();
    const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
    NaiveSeries out;
    out.q.push_back(init.queue);
    out.d.push_back(init.edge_idle);
    out.p.push_back(init.node_idle);
    out.occ.push_back(init.occupied);
    std::vector<std::vector<double>> entry, alloc, haz;  // indexed [k][e]

    auto lookup = [&](const std::vector<std::vector<double>>& series, long k, EdgeId e, double before) {
        return k < 0 ? before : series[static_cast<std::size_t>(k)][e];
    };

    for (std::size_t k = 0; k < steps; ++k) {
        const auto& Q = out.q[k];
        const auto& D = out.d[k];
        const auto& P = out.p[k];
        std::vector<double> f(m), a(m), h(m);
        for (EdgeId e = 0; e < m; ++e) {
            a[e] = std::min(D[e], Q[e]);
            h[e] = D[e] > kDefaultEpsD ? a[e] / D[e] : 0.0;
            f[e] = P[net.edge(e).tail] * net.transition(e);
        }
        entry.push_back(f);
        alloc.push_back(a);
        haz.push_back(h);
        const long kk = static_cast<long>(k);

        std::vector<double> exit(m);
        for (EdgeId e = 0; e < m; ++e) {
            const long lag = std::lround(net.edge(e).tau / dt);
            double sum = 0.0;
            for (long j = 0; j < lag; ++j) sum += lookup(haz, kk - j, e, 0.0);
            exit[e] = lookup(entry, kk - lag, e, init.edge_idle[e] / net.edge(e).tau) * std::exp(-sum * dt);
        }
        std::vector<double> ret(n, 0.0);
        double total_ret = 0.0, total_alloc = 0.0;
        for (EdgeId e = 0; e < m; ++e) {
            total_alloc += a[e];
            for (NodeId u = 0; u < n; ++u) {
                if (net.destination(e, u) == 0.0) continue;
                const long lag = std::lround(net.return_delay(e, u) / dt);
                const double r = net.destination(e, u) * lookup(alloc, kk - lag, e, 0.0);
                ret[u] += r;
                total_ret += r;
            }
        }
        std::vector<double> q2(m), d2(m), p2(n);
        for (EdgeId e = 0; e < m; ++e) {
            q2[e] = std::max(0.0, Q[e] + dt * (prof.evaluate(e, k * dt) - a[e] - prof.mu() * Q[e]));
            d2[e] = std::max(0.0, D[e] + dt * (f[e] - a[e] - exit[e]));
        }
        for (NodeId u = 0; u < n; ++u) {
            double flow = ret[u];
            for (EdgeId e = 0; e < m; ++e) {
                if (net.edge(e).tail == u) flow -= f[e];
                if (net.edge(e).head == u) flow += exit[e];
            }
            p2[u] = std::max(0.0, P[u] + dt * flow);
        }
        out.q.push_back(q2);
        out.d.push_back(d2);
        out.p.push_back(p2);
        out.occ.push_back(std::max(0.0, out.occ.back() + dt * (total_alloc - total_ret)));
    }
    return out;
}

FluidState all_at_nodes(const RoadNetwork& net, double total) {
    auto s = FluidState::zeros(net);
    for (auto& p : s.node_idle) p = total / static_cast<double>(net.node_count());
    return s;
}

RoadNetwork single_edge() { return RoadNetwork(2, {{0, 1, 1.0}}); }

}  // namespace

TEST_CASE("matching rate and hazard examples") {
    CHECK(matching_rate(3, 5) == 3);
    CHECK(matching_rate(0, 7) == 0);
    CHECK(matching_rate(2.5, 2.5) == 2.5);
    CHECK(hazard(2, 4, 1e-9) == 0.5);
    CHECK(hazard(0, 5, 1e-9) == 0.0);
    CHECK(hazard(1, 0, 1e-9) == 0.0);
}

TEST_CASE("driver hazard takes the empty-edge limit") {
    CHECK(driver_hazard(4, 2) == 0.5);
    CHECK(driver_hazard(0, 2) == 1.0);
    CHECK(driver_hazard(0, 0) == 0.0);
    // min(D, Q) / D approaches 1 as D -> 0 with Q fixed.
    CHECK(driver_hazard(1e-6, 0.5) == 1.0);
}

TEST_CASE("survival over a window") {
    std::vector<double> zeros(37, 0.0);
    CHECK(survival_over_window(zeros, 0.1) == 1.0);
    std::vector<double> constant(100, 0.1);
    CHECK(survival_over_window(constant, 0.1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    std::vector<double> one{0.5};
    CHECK(survival_over_window(one, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    std::vector<double> more(100, 0.2);
    CHECK(survival_over_window(more, 0.1) < survival_over_window(constant, 0.1));
}

TEST_CASE("delays must be whole multiples of dt") {
    auto g = build_grid(2, 2, 1.0);
    CHECK_THROWS_AS(DelaySteps::build(g, 0.3), FluidConfigError);
    auto d = DelaySteps::build(g, 0.1);
    CHECK(d.edge[0] == 10);
    CHECK(d.max_steps == 30);
    CHECK_THROWS_AS(integrate(all_at_nodes(g, 4), g, DemandProfile::uniform(8, 0.1, 0.1), 10.0, 0.3),
                    FluidConfigError);
}

TEST_CASE("history buffer lags and prehistory") {
    HistoryBuffer h(1, 4, {{7.0}, {0.0}, {0.25}});
    CHECK(h.entry_flow(0, 0) == 7.0);
    CHECK(h.hazard_window(0, 3) == doctest::Approx(0.75));
    for (int k = 1; k <= 6; ++k) {
        std::vector<double> v{double(k)};
        std::vector<double> hz{0.1 * k};
        h.push(v, v, hz);
    }
    CHECK(h.entry_flow(0, 0) == 6.0);
    CHECK(h.entry_flow(0, 2) == 4.0);
    CHECK(h.allocation(0, 4) == 2.0);
    CHECK(h.hazard_window(0, 3) == doctest::Approx(0.6 + 0.5 + 0.4));
    CHECK(h.hazard_window(0, 4) == doctest::Approx(0.6 + 0.5 + 0.4 + 0.3));

    HistoryBuffer young(1, 4, {{7.0}, {0.0}, {0.25}});
    std::vector<double> v{1.0}, hz{1.0};
    young.push(v, v, hz);
    CHECK(young.entry_flow(0, 1) == 7.0);
    CHECK(young.hazard_window(0, 3) == doctest::Approx(1.0 + 0.25 + 0.25));
}

TEST_CASE("null system stays at zero") {
    auto g = build_grid(2, 2, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.0, 0.1);
    auto s = FluidState::zeros(g);
    HistoryBuffer hist(g, 0.1, s);
    auto next = step(s, hist, g, prof, 0.0, 0.1);
    for (double x : next.queue) CHECK(x == 0.0);
    for (double x : next.edge_idle) CHECK(x == 0.0);
    for (double x : next.node_idle) CHECK(x == 0.0);
    CHECK(next.occupied == 0.0);
}

TEST_CASE("single Euler step of the queue") {
    auto net = single_edge();
    auto prof = DemandProfile::uniform(1, 2.0, 0.1);
    auto s = FluidState::zeros(net);
    HistoryBuffer hist(net, 0.5, s);
    auto next = step(s, hist, net, prof, 0.0, 0.5);
    CHECK(next.queue[0] == doctest::Approx(1.0));
}

TEST_CASE("queue converges to lambda / mu without drivers") {
    auto net = single_edge();
    auto prof = DemandProfile::uniform(1, 2.0, 0.1);
    auto traj = integrate(FluidState::zeros(net), net, prof, 200.0, 0.1);
    const double q = traj.queue(traj.samples() - 1, 0);
    CHECK(std::abs(q - 20.0) / 20.0 < 0.01);
    // Euler recursion in closed form: Q_k = (lambda / mu)(1 - (1 - mu dt)^k).
    CHECK(q == doctest::Approx(20.0 * (1.0 - std::pow(1.0 - 0.01, 2000))).epsilon(1e-9));
}

TEST_CASE("trajectory shape") {
    auto g = build_grid(2, 2, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.2, 0.1);
    auto zero = integrate(all_at_nodes(g, 10), g, prof, 0.0, 0.1);
    CHECK(zero.samples() == 1);
    auto traj = integrate(all_at_nodes(g, 10), g, prof, 600.0, 0.1);
    CHECK(traj.samples() == 6001);
    for (std::size_t k = 0; k < traj.samples(); ++k)
        for (EdgeId e = 0; e < g.edge_count(); ++e) {
            if (traj.allocation(k, e) != std::min(traj.edge_idle(k, e), traj.queue(k, e))) FAIL("A != min(D, Q)");
            if (traj.queue(k, e) < 0.0 || traj.edge_idle(k, e) < 0.0) FAIL("negative mass");
        }
}

TEST_CASE("zero demand conserves drivers exactly") {
    auto g = build_grid(3, 3, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.0, 0.1);
    auto traj = integrate(all_at_nodes(g, 90), g, prof, 100.0, 0.1);
    CHECK(conservation_error(traj, 90) < 1e-10);
    for (std::size_t k = 0; k < traj.samples(); ++k) CHECK(traj.occupied(k) == 0.0);
}

TEST_CASE("integrator matches the naive oracle on a 2x2 grid") {
    auto g = build_grid(2, 2, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.2, 0.1);
    auto init = all_at_nodes(g, 10);
    auto traj = integrate(init, g, prof, 100.0, 0.1);
    auto oracle = naive_integrate(init, g, prof, 100.0, 0.1);
    REQUIRE(oracle.occ.size() == traj.samples());
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        for (EdgeId e = 0; e < g.edge_count(); ++e) {
            worst = std::max(worst, std::abs(traj.queue(k, e) - oracle.q[k][e]));
            worst = std::max(worst, std::abs(traj.edge_idle(k, e) - oracle.d[k][e]));
        }
        for (NodeId u = 0; u < g.node_count(); ++u) worst = std::max(worst, std::abs(traj.node_idle(k, u) - oracle.p[k][u]));
        worst = std::max(worst, std::abs(traj.occupied(k) - oracle.occ[k]));
    }
    CHECK(worst < 1e-9);

    // Occupied mass grows through the initial transient (one trip time).
    for (std::size_t k = 0; k + 1 < 20; ++k) CHECK(traj.occupied(k + 1) >= traj.occupied(k));
    CHECK(conservation_error(traj, 10) < 0.05 * 10);
}

TEST_CASE("naive oracle agrees with mass on edges and uneven delays") {
    RoadNetwork net(3, {{0, 1, 0.5}, {1, 2, 1.5}, {2, 0, 1.0}, {1, 0, 0.5}});
    DemandProfile prof({0.3, 0.1, 0.0, 0.4}, {EdgeClass::Base, EdgeClass::Base, EdgeClass::Cold, EdgeClass::Base},
                       Sinusoid{0.3, 20.0, 0.0}, 0.1);
    auto init = FluidState::zeros(net);
    init.edge_idle = {2.0, 1.0, 0.5, 0.0};
    init.node_idle = {1.0, 0.0, 0.5};
    init.queue = {0.0, 3.0, 0.0, 1.0};
    auto traj = integrate(init, net, prof, 60.0, 0.1);
    auto oracle = naive_integrate(init, net, prof, 60.0, 0.1);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        for (EdgeId e = 0; e < net.edge_count(); ++e) {
            worst = std::max(worst, std::abs(traj.queue(k, e) - oracle.q[k][e]));
            worst = std::max(worst, std::abs(traj.edge_idle(k, e) - oracle.d[k][e]));
        }
        for (NodeId u = 0; u < net.node_count(); ++u) worst = std::max(worst, std::abs(traj.node_idle(k, u) - oracle.p[k][u]));
    }
    CHECK(worst < 1e-9);
    CHECK(conservation_error(traj, 5.0) < 1e-9);
}

TEST_CASE("halving dt does not increase the conservation error") {
    auto g = build_grid(2, 2, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.2, 0.1);
    auto coarse = integrate(all_at_nodes(g, 10), g, prof, 100.0, 0.1);
    auto fine = integrate(all_at_nodes(g, 10), g, prof, 100.0, 0.05);
    CHECK(conservation_error(fine, 10) <= conservation_error(coarse, 10) + 1e-12);
}

TEST_CASE("pending returns land at their node and leave the occupied pool") {
    auto g = build_grid(2, 2, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.0, 0.1);
    auto init = FluidState::zeros(g);
    init.occupied = 3.0;
    FluidOptions opt;
    opt.pending_returns = {{2, 0.5, 2.0}, {1, 1.0, 1.0}};
    auto traj = integrate(init, g, prof, 3.0, 0.1, opt);
    CHECK(traj.occupied(5) == 3.0);
    CHECK(traj.occupied(6) == doctest::Approx(1.0));
    CHECK(traj.node_idle(6, 2) == doctest::Approx(2.0));
    CHECK(traj.occupied(11) == doctest::Approx(0.0));
    CHECK(conservation_error(traj, 3.0) < 1e-12);
}

TEST_CASE("drivers released onto edges are all eventually matched or cruising") {
    auto g = build_grid(3, 3, 1.0);
    auto prof = DemandProfile::uniform(g.edge_count(), 0.5, 0.1);
    auto init = FluidState::zeros(g);
    for (auto& d : init.edge_idle) d = 100.0 / static_cast<double>(g.edge_count());
    auto traj = integrate(init, g, prof, 100.0, 0.1);
    CHECK(conservation_error(traj, 100.0) < 1e-9);
    CHECK(traj.clamped(traj.samples() - 1) == 0.0);
    CHECK(traj.occupied(traj.samples() - 1) > 0.0);
}
