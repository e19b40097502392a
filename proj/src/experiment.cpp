#include "wgc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace wgc {

namespace {

enum Stream : std::uint64_t { kArrivals = 1, kPlacement = 2, kBackground = 3, kTaggedStart = 4, kTaggedRng = 5 };

constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

}  // namespace

std::vector<std::size_t> sample_initial_state(std::size_t node_count, std::size_t fleet_size, std::uint64_t seed) {
    if (node_count == 0) throw ExperimentError("cannot place drivers on an empty network");
    if (fleet_size < 1) throw ExperimentError("fleet size must be at least 1");
    Rng rng(derive_seed(seed, {kPlacement}));
    std::vector<std::size_t> counts(node_count, 0);
    for (std::size_t i = 0; i < fleet_size; ++i) ++counts[rng.below(node_count)];
    return counts;
}

std::vector<PassengerArrival> sample_arrivals(const DemandProfile& profile, double horizon, std::uint64_t seed) {
    std::vector<PassengerArrival> out;
    for (EdgeId e = 0; e < profile.edge_count(); ++e) {
        const double bound = profile.upper_bound(e);
        if (bound <= 0.0) continue;
        Rng rng(derive_seed(seed, {kArrivals, e}));
        double t = 0.0;
        while (true) {
            t += rng.exponential(bound);
            if (t >= horizon) break;
            const double accept = rng.uniform() * bound;
            const double patience = rng.exponential(profile.mu());
            if (accept < profile.evaluate(e, t)) out.push_back({e, t, patience});
        }
    }
    std::sort(out.begin(), out.end(), [](const PassengerArrival& a, const PassengerArrival& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.edge < b.edge;
    });
    return out;
}

AgentWorld::AgentWorld(const RoadNetwork& net, const DemandProfile& profile, double dt, double horizon)
    : net_(&net),
      profile_(&profile),
      dt_(dt),
      steps_(step_count(horizon, dt)),
      delays_(DelaySteps::build(net, dt)),
      on_edge_(net.edge_count()),
      queues_(net.edge_count()) {
    if (profile.edge_count() != net.edge_count()) throw ExperimentError("demand profile does not match the network");
}

void AgentWorld::place_background(std::span<const std::size_t> counts, std::uint64_t seed) {
    if (has_tagged_) throw ExperimentError("background drivers must be placed before the tagged driver");
    if (counts.size() != net_->node_count()) throw ExperimentError("placement needs one count per node");
    for (NodeId u = 0; u < counts.size(); ++u) {
        for (std::size_t i = 0; i < counts[u]; ++i) {
            Driver d;
            d.rng.reseed(derive_seed(seed, {kBackground, drivers_.size()}));
            drivers_.push_back(std::move(d));
            hold_at_node(drivers_.back(), u, step_);
        }
    }
    background_ = drivers_.size();
}

void AgentWorld::set_arrivals(std::vector<PassengerArrival> arrivals) {
    arrivals_ = std::move(arrivals);
    next_arrival_ = 0;
}

void AgentWorld::add_waiting_passenger(EdgeId edge, double patience) {
    const double now = clock();
    const auto id = next_passenger_id_++;
    queues_.at(edge).push_back({id, now, now + patience});
    if (record_) events_.push_back({step_, EventKind::Spawn, id, edge, 0});
}

void AgentWorld::place_tagged(NodeId node, const Strategy& strategy, std::uint64_t seed) {
    if (has_tagged_) throw ExperimentError("tagged driver already placed");
    if (node >= net_->node_count()) throw ExperimentError("tagged start node outside the network");
    Driver d;
    d.status = Status::AtNode;
    d.node = node;
    d.release = step_;
    drivers_.push_back(std::move(d));
    has_tagged_ = true;
    strategy_ = &strategy;
    tagged_rng_.reseed(derive_seed(seed, {kTaggedRng}));
}

void AgentWorld::hold_at_node(Driver& d, NodeId node, std::size_t now) {
    d.status = Status::AtNode;
    d.node = node;
    auto [first, last] = net_->out_range(node);
    double rate = 0.0;
    for (EdgeId e = first; e < last; ++e) rate += net_->transition(e);
    if (rate <= 0.0) {
        d.release = kNever;
        return;
    }
    const double hold = d.rng.exponential(rate);
    d.release = now + static_cast<std::size_t>(std::llround(hold / dt_));
}

void AgentWorld::enter_edge(std::uint32_t index, EdgeId e, std::size_t now) {
    auto& d = drivers_[index];
    d.status = Status::OnEdge;
    d.edge = e;
    d.on_edge_steps = 0;
    d.entered = now;
    on_edge_[e].push_back(index);
}

void AgentWorld::leave_edge(std::uint32_t index) {
    auto& list = on_edge_[drivers_[index].edge];
    list.erase(std::find(list.begin(), list.end(), index));
}

EdgeId AgentWorld::tagged_next_edge(NodeId node) {
    if (!plan_.empty() && net_->edge(plan_.front()).tail == node) {
        EdgeId e = plan_.front();
        plan_.pop_front();
        return e;
    }
    plan_.clear();
    Path path = strategy_->route(node, clock(), tagged_rng_, [this] { return forecast(); });
    if (path.empty() || net_->edge(path.edges.front()).tail != node)
        throw RoutingError("strategy returned an infeasible route");
    plan_.assign(path.edges.begin() + 1, path.edges.end());
    return path.edges.front();
}

void AgentWorld::match_edge(EdgeId e) {
    auto& queue = queues_[e];
    auto& drivers = on_edge_[e];
    if (queue.empty() || drivers.empty()) return;
    std::sort(drivers.begin(), drivers.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (drivers_[a].entered != drivers_[b].entered) return drivers_[a].entered < drivers_[b].entered;
        return a < b;
    });
    const std::size_t pairs = std::min(queue.size(), drivers.size());
    const std::size_t n = net_->node_count();
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto p = queue.front();
        queue.pop_front();
        const auto index = drivers[i];
        auto& d = drivers_[index];
        ++matched_;
        if (record_) events_.push_back({step_, EventKind::Match, p.id, e, index});

        const bool tagged = has_tagged_ && index == background_;
        Rng& rng = tagged ? tagged_rng_ : d.rng;
        auto row = net_->destination_row(e);
        double r = rng.uniform();
        NodeId dest = net_->edge(e).head;
        for (NodeId u = 0; u < n; ++u) {
            if (row[u] <= 0.0) continue;
            dest = u;
            if (r < row[u]) break;
            r -= row[u];
        }
        d.status = Status::Occupied;
        d.node = dest;
        d.release = step_ + static_cast<std::size_t>(delays_.trip[e * n + dest]);
        if (tagged) tagged_allocated_ = clock();
    }
    drivers.erase(drivers.begin(), drivers.begin() + static_cast<long>(pairs));
}

bool AgentWorld::advance() {
    if (step_ >= steps_ || tagged_allocated_) return false;
    const std::size_t k = step_;
    const double now = clock();

    // Trip completions and node departures.
    for (std::uint32_t i = 0; i < drivers_.size(); ++i) {
        auto& d = drivers_[i];
        const bool tagged = has_tagged_ && i == background_;
        if (d.status == Status::Occupied && d.release <= k) {
            if (tagged) {
                d.status = Status::AtNode;
                d.release = k;
            } else {
                hold_at_node(d, d.node, k);
            }
        }
        if (d.status != Status::AtNode || d.release > k) continue;
        EdgeId next;
        if (tagged) {
            next = tagged_next_edge(d.node);
        } else {
            auto [first, last] = net_->out_range(d.node);
            double r = d.rng.uniform();
            next = last - 1;
            for (EdgeId e = first; e < last; ++e) {
                if (r < net_->transition(e)) {
                    next = e;
                    break;
                }
                r -= net_->transition(e);
            }
        }
        enter_edge(i, next, k);
    }

    while (next_arrival_ < arrivals_.size() && arrivals_[next_arrival_].time <= now) {
        const auto& a = arrivals_[next_arrival_++];
        const auto id = next_passenger_id_++;
        queues_[a.edge].push_back({id, a.time, a.time + a.patience});
        if (record_) events_.push_back({k, EventKind::Spawn, id, a.edge, 0});
    }

    for (EdgeId e = 0; e < queues_.size(); ++e) {
        auto& queue = queues_[e];
        for (auto it = queue.begin(); it != queue.end();) {
            if (it->deadline <= now) {
                ++abandoned_;
                abandonment_times_.push_back(now - it->arrival);
                if (record_) events_.push_back({k, EventKind::Abandon, it->id, e, 0});
                it = queue.erase(it);
            } else {
                ++it;
            }
        }
    }

    for (EdgeId e = 0; e < queues_.size(); ++e) match_edge(e);

    if (tagged_allocated_) {
        ++step_;
        return false;
    }

    for (std::uint32_t i = 0; i < drivers_.size(); ++i) {
        auto& d = drivers_[i];
        if (d.status != Status::OnEdge) continue;
        if (++d.on_edge_steps < delays_.edge[d.edge]) continue;
        leave_edge(i);
        const NodeId head = net_->edge(d.edge).head;
        if (has_tagged_ && i == background_) {
            d.status = Status::AtNode;
            d.node = head;
            d.release = k + 1;
        } else {
            hold_at_node(d, head, k + 1);
        }
    }
    ++step_;
    return step_ < steps_;
}

std::size_t AgentWorld::idle_count() const {
    return static_cast<std::size_t>(std::count_if(drivers_.begin(), drivers_.end(),
                                                  [](const Driver& d) { return d.status != Status::Occupied; }));
}

std::size_t AgentWorld::occupied_count() const { return drivers_.size() - idle_count(); }

std::vector<double> AgentWorld::idle_on_edges() const {
    std::vector<double> out(net_->edge_count(), 0.0);
    for (std::size_t i = 0; i < background_; ++i)
        if (drivers_[i].status == Status::OnEdge) out[drivers_[i].edge] += 1.0;
    return out;
}

PassengerTally AgentWorld::passengers() const {
    PassengerTally t;
    t.spawned = next_passenger_id_;
    t.matched = matched_;
    t.abandoned = abandoned_;
    for (const auto& q : queues_) t.waiting += q.size();
    return t;
}

Forecast AgentWorld::forecast() const {
    Forecast f;
    f.state = FluidState::zeros(*net_);
    for (EdgeId e = 0; e < queues_.size(); ++e) f.state.queue[e] = static_cast<double>(queues_[e].size());
    for (std::size_t i = 0; i < background_; ++i) {
        const auto& d = drivers_[i];
        switch (d.status) {
            case Status::OnEdge: f.state.edge_idle[d.edge] += 1.0; break;
            case Status::AtNode: f.state.node_idle[d.node] += 1.0; break;
            case Status::Occupied:
                f.state.occupied += 1.0;
                f.pending.push_back({d.node, static_cast<double>(d.release - step_) * dt_, 1.0});
                break;
        }
    }
    return f;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t fleet_size, std::size_t trial) {
    return derive_seed(base_seed, {fleet_size, trial});
}

TrialResult run_trial(const RoadNetwork& net, const DemandProfile& profile, const TrialConfig& cfg,
                      const Strategy& strategy) {
    if (cfg.fleet_size < 1) throw ExperimentError("fleet size must be at least 1");
    if (!(cfg.horizon > 0.0)) throw ExperimentError("horizon must be positive");
    AgentWorld world(net, profile, cfg.dt, cfg.horizon);
    world.record_events(cfg.record_events);
    auto counts = sample_initial_state(net.node_count(), cfg.fleet_size, derive_seed(cfg.world_seed, {kPlacement}));
    // The tagged driver is one of the N drivers.
    Rng start_rng(derive_seed(cfg.world_seed, {kTaggedStart}));
    const auto start = static_cast<NodeId>(start_rng.below(net.node_count()));
    if (counts[start] > 0) --counts[start];
    else {
        auto it = std::find_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
        if (it != counts.end()) --*it;
    }
    world.place_background(counts, derive_seed(cfg.world_seed, {kBackground}));
    world.set_arrivals(sample_arrivals(profile, cfg.horizon, derive_seed(cfg.world_seed, {kArrivals})));
    world.place_tagged(start, strategy, derive_seed(cfg.world_seed, {kTaggedRng}));
    while (world.advance()) {
    }
    TrialResult result;
    result.allocation_time = world.tagged_allocation_time();
    result.events = world.events();
    return result;
}

const StrategySummary& CampaignResult::summary(StrategyKind kind, std::size_t fleet_size) const {
    for (const auto& s : summaries)
        if (s.strategy == kind && s.fleet_size == fleet_size) return s;
    throw ExperimentError("no summary for the requested strategy and fleet size");
}

StrategySummary summarize(StrategyKind kind, std::size_t fleet_size, std::vector<std::optional<double>> values) {
    StrategySummary s;
    s.strategy = kind;
    s.fleet_size = fleet_size;
    double sum = 0.0;
    for (const auto& v : values) {
        if (!v) {
            ++s.censored;
            continue;
        }
        sum += *v;
        s.worst = s.samples == 0 ? *v : std::max(s.worst, *v);
        ++s.samples;
    }
    s.mean = s.samples ? sum / static_cast<double>(s.samples) : std::numeric_limits<double>::quiet_NaN();
    if (!s.samples) s.worst = s.mean;
    s.per_trial = std::move(values);
    return s;
}

CampaignResult run_campaign(const RoadNetwork& net, const DemandProfile& profile, const CampaignSpec& spec,
                            const std::atomic<bool>* stop) {
    if (spec.trials < 1) throw ExperimentError("trials per fleet size must be at least 1");
    if (spec.fleet_sizes.empty() || spec.strategies.empty())
        throw ExperimentError("campaign needs at least one fleet size and one strategy");

    std::vector<Strategy> strategies;
    for (auto kind : spec.strategies) strategies.emplace_back(kind, net, profile, spec.wgc);

    CampaignResult result;
    result.spec = spec;
    for (auto n : spec.fleet_sizes)
        for (std::size_t t = 0; t < spec.trials; ++t)
            for (auto kind : spec.strategies)
                result.records.push_back({n, t, kind, trial_seed(spec.base_seed, n, t), {}, {}, false});

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            if (stop && stop->load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= result.records.size()) return;
            auto& rec = result.records[i];
            const auto pos = static_cast<std::size_t>(
                std::find(spec.strategies.begin(), spec.strategies.end(), rec.strategy) - spec.strategies.begin());
            try {
                TrialConfig cfg{rec.fleet_size, spec.horizon, spec.dt, rec.world_seed, spec.record_events};
                auto trial = run_trial(net, profile, cfg, strategies[pos]);
                rec.allocation_time = trial.allocation_time;
                rec.events = std::move(trial.events);
                rec.completed = true;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(result.records.size());
                return;
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(spec.jobs, result.records.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    result.interrupted = std::any_of(result.records.begin(), result.records.end(),
                                     [](const TrialRecord& r) { return !r.completed; });

    for (auto n : spec.fleet_sizes) {
        for (auto kind : spec.strategies) {
            std::vector<std::optional<double>> values;
            for (const auto& rec : result.records)
                if (rec.completed && rec.fleet_size == n && rec.strategy == kind) values.push_back(rec.allocation_time);
            result.summaries.push_back(summarize(kind, n, std::move(values)));
        }
    }
    return result;
}

SignTest paired_sign_test(std::span<const std::optional<double>> candidate,
                          std::span<const std::optional<double>> baseline) {
    if (candidate.size() != baseline.size()) throw ExperimentError("paired samples differ in length");
    SignTest t;
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        const double a = candidate[i].value_or(inf);
        const double b = baseline[i].value_or(inf);
        if (a < b) ++t.wins;
        else if (a > b) ++t.losses;
        else ++t.ties;
    }
    const std::size_t n = t.wins + t.losses;
    // P(X >= wins) for X ~ Binomial(n, 1/2), summed in log space.
    double p = 0.0;
    for (std::size_t i = t.wins; i <= n; ++i) {
        const double log_term = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                                std::lgamma(static_cast<double>(n - i) + 1) - static_cast<double>(n) * std::log(2.0);
        p += std::exp(log_term);
    }
    t.p_value = n == 0 ? 1.0 : std::min(1.0, p);
    return t;
}

}  // namespace wgc
