#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "wgc/demand.hpp"
#include "wgc/fluid.hpp"
#include "wgc/network.hpp"
#include "wgc/rng.hpp"
#include "wgc/strategies.hpp"

namespace wgc {

class ExperimentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Multinomial placement of N drivers over the nodes with uniform cell
/// probabilities. Counts always sum to N.
std::vector<std::size_t> sample_initial_state(std::size_t node_count, std::size_t fleet_size, std::uint64_t seed);

struct PassengerArrival {
    EdgeId edge;
    double time;
    double patience;
};

/// Arrival stream of every edge by thinning a homogeneous process at rate
/// upper_bound(e); each passenger draws an Exp(mu) patience. Sorted by
/// (time, edge). Each edge uses its own substream of `seed`.
std::vector<PassengerArrival> sample_arrivals(const DemandProfile& profile, double horizon, std::uint64_t seed);

enum class EventKind : std::uint8_t { Spawn, Match, Abandon };

struct Event {
    std::size_t step;
    EventKind kind;
    std::uint32_t passenger;
    EdgeId edge;
    std::uint32_t driver;  // matched driver; unused otherwise

    bool operator==(const Event&) const = default;
};

struct PassengerTally {
    std::size_t spawned = 0;
    std::size_t matched = 0;
    std::size_t abandoned = 0;
    std::size_t waiting = 0;
};

/// Time-stepped agent simulation: background drivers cruise by the CTMC
/// (Exp(sum_v Q_uv) holding at nodes, then a Q-weighted out-edge), and one
/// optional tagged driver follows a Strategy. A waiting passenger and an
/// idle driver on the same edge are matched at once, earliest-waiting
/// passenger first and earliest-entered driver first (tagged driver last
/// on ties). Matched drivers reappear idle at an R-sampled destination
/// after tau_eu.
class AgentWorld {
public:
    AgentWorld(const RoadNetwork& net, const DemandProfile& profile, double dt, double horizon);

    /// Adds background drivers at nodes; `counts` has one entry per node.
    /// Driver d draws from substream d of `seed`.
    void place_background(std::span<const std::size_t> counts, std::uint64_t seed);
    void set_arrivals(std::vector<PassengerArrival> arrivals);
    /// Passenger already waiting on `edge` at the current clock.
    void add_waiting_passenger(EdgeId edge, double patience);
    void place_tagged(NodeId node, const Strategy& strategy, std::uint64_t seed);

    void record_events(bool on) { record_ = on; }
    const std::vector<Event>& events() const { return events_; }

    /// Advances one step. Returns false once the horizon is reached.
    bool advance();

    std::size_t step_index() const { return step_; }
    double clock() const { return static_cast<double>(step_) * dt_; }
    std::size_t total_steps() const { return steps_; }

    std::optional<double> tagged_allocation_time() const { return tagged_allocated_; }
    std::size_t background_count() const { return background_; }
    std::size_t idle_count() const;
    std::size_t occupied_count() const;
    std::vector<double> idle_on_edges() const;
    PassengerTally passengers() const;
    /// Patience realized by each abandoned passenger, measured on the
    /// simulation clock (abandonment step time minus arrival time).
    const std::vector<double>& abandonment_times() const { return abandonment_times_; }

    /// Fluid snapshot of the background fleet and queues at the current clock.
    Forecast forecast() const;

private:
    enum class Status : std::uint8_t { AtNode, OnEdge, Occupied };
    struct Driver {
        Status status = Status::AtNode;
        NodeId node = 0;
        EdgeId edge = 0;
        std::size_t on_edge_steps = 0;
        std::size_t entered = 0;
        std::size_t release = 0;  // node departure or trip end, in steps
        Rng rng;
    };
    struct Waiting {
        std::uint32_t id;
        double arrival;
        double deadline;
    };

    void hold_at_node(Driver& d, NodeId node, std::size_t now);
    void enter_edge(std::uint32_t index, EdgeId e, std::size_t now);
    void leave_edge(std::uint32_t index);
    EdgeId tagged_next_edge(NodeId node);
    void match_edge(EdgeId e);

    const RoadNetwork* net_;
    const DemandProfile* profile_;
    double dt_;
    std::size_t steps_;
    DelaySteps delays_;
    std::vector<Driver> drivers_;  // background first, tagged last when present
    std::size_t background_ = 0;
    bool has_tagged_ = false;
    const Strategy* strategy_ = nullptr;
    Rng tagged_rng_;
    std::deque<EdgeId> plan_;
    std::optional<double> tagged_allocated_;

    std::vector<std::vector<std::uint32_t>> on_edge_;
    std::vector<std::deque<Waiting>> queues_;
    std::vector<PassengerArrival> arrivals_;
    std::size_t next_arrival_ = 0;
    std::uint32_t next_passenger_id_ = 0;
    std::size_t matched_ = 0;
    std::size_t abandoned_ = 0;
    std::vector<double> abandonment_times_;

    std::size_t step_ = 0;
    bool record_ = false;
    std::vector<Event> events_;
};

struct TrialConfig {
    std::size_t fleet_size = 100;
    double horizon = 600.0;
    double dt = 0.1;
    std::uint64_t world_seed = 0;
    bool record_events = false;
};

struct TrialResult {
    std::optional<double> allocation_time;  // empty when censored
    bool censored() const { return !allocation_time.has_value(); }
    std::vector<Event> events;
};

/// One paired-world trial: background fleet placed by sample_initial_state,
/// arrivals from sample_arrivals, tagged driver starting at a uniform node.
/// All randomness derives from cfg.world_seed, so every strategy faces the
/// same world for the same seed.
TrialResult run_trial(const RoadNetwork& net, const DemandProfile& profile, const TrialConfig& cfg,
                      const Strategy& strategy);

/// World seed of trial `trial` at fleet size `fleet_size`.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t fleet_size, std::size_t trial);

struct CampaignSpec {
    std::vector<std::size_t> fleet_sizes{100, 500, 1000, 2000, 4000, 5000};
    std::size_t trials = 100;
    std::vector<StrategyKind> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
    std::uint64_t base_seed = 1;
    double horizon = 600.0;
    double dt = 0.1;
    WgcParams wgc{};
    std::size_t jobs = 1;
    bool record_events = false;
};

struct TrialRecord {
    std::size_t fleet_size;
    std::size_t trial;
    StrategyKind strategy;
    std::uint64_t world_seed;
    std::optional<double> allocation_time;
    std::vector<Event> events;  // only with CampaignSpec::record_events
    bool completed = false;     // false when the campaign was stopped first
};

struct StrategySummary {
    StrategyKind strategy;
    std::size_t fleet_size;
    double mean = 0.0;   // over uncensored trials; NaN when there are none
    double worst = 0.0;  // max over uncensored trials; NaN when there are none
    std::size_t samples = 0;
    std::size_t censored = 0;
    std::vector<std::optional<double>> per_trial;
};

struct CampaignResult {
    CampaignSpec spec;
    std::vector<TrialRecord> records;  // sorted by (fleet size, trial, strategy order)
    std::vector<StrategySummary> summaries;  // over completed records only
    bool interrupted = false;

    const StrategySummary& summary(StrategyKind kind, std::size_t fleet_size) const;
};

/// Runs every (fleet size, trial, strategy) record. When `stop` becomes true
/// no new trial is started; trials already running finish and the result is
/// marked interrupted.
CampaignResult run_campaign(const RoadNetwork& net, const DemandProfile& profile, const CampaignSpec& spec,
                            const std::atomic<bool>* stop = nullptr);

/// Aggregates per-trial values (nullopt = censored) into a summary.
StrategySummary summarize(StrategyKind kind, std::size_t fleet_size, std::vector<std::optional<double>> values);

struct SignTest {
    std::size_t wins = 0;    // trials where the candidate is strictly faster
    std::size_t losses = 0;
    std::size_t ties = 0;
    double p_value = 1.0;    // one-sided, P(Binomial(wins + losses, 1/2) >= wins)
};

/// Paired one-sided sign test of `candidate` < `baseline`; censored values
/// count as +infinity.
SignTest paired_sign_test(std::span<const std::optional<double>> candidate,
                          std::span<const std::optional<double>> baseline);

}  // namespace wgc
