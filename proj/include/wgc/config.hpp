#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wgc/demand.hpp"
#include "wgc/experiment.hpp"
#include "wgc/network.hpp"
#include "wgc/strategies.hpp"

namespace wgc {

/// Base of every configuration failure; `key()` is the dotted path of the
/// offending entry (empty for document-level problems).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class ConfigSyntaxError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class UnknownKeyError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class ConstraintError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct TransitionOverride {
    NodeId from;
    NodeId to;
    double probability;
};

enum class Placement { Nodes, Edges };

struct RunConfig {
    struct Network {
        std::size_t rows = 10;
        std::size_t cols = 10;
        double tau_default = 10.0;
        std::vector<TransitionOverride> transition_override;
        std::string popularity = "uniform";  // uniform | random | weights
        std::vector<double> popularity_weights;
        std::uint64_t popularity_seed = 1;
    } network;

    struct Demand {
        DemandParams params{};
        std::uint64_t seed = 1;
    } demand;

    struct Fluid {
        double dt = 0.1;
        double horizon = 600.0;
        double eps_d = kDefaultEpsD;
        std::size_t fleet_size = 1000;
        Placement initial_placement = Placement::Edges;
        std::uint64_t placement_seed = 1;
    } fluid;

    struct Planner {
        std::size_t max_edges = 4;
        std::size_t beam_width = 10;  // kUnboundedBeam for "inf"
        double eps = kDefaultSurvivalEps;
        NodeId start_node = 0;
    } planner;

    struct Campaign {
        std::vector<std::size_t> fleet_sizes{100, 500, 1000, 2000, 4000, 5000};
        std::size_t trials = 100;
        std::vector<StrategyKind> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
        std::uint64_t base_seed = 1;
        std::size_t jobs = 0;  // 0 = hardware concurrency
    } campaign;

    struct Output {
        std::string directory = "out";
        std::size_t trajectory_stride = 10;
        bool event_logs = false;
    } output;
};

/// Parses a JSON document; missing keys take defaults, unknown keys are rejected.
RunConfig parse_config(std::string_view document);
RunConfig load_config(const std::string& path);

/// Checks every cross-field constraint (including delay / dt divisibility).
void validate(const RunConfig& cfg);

/// Fully resolved config; parse_config(to_json(cfg).dump()) == cfg.
nlohmann::json to_json(const RunConfig& cfg);

RoadNetwork build_network(const RunConfig& cfg);
DemandProfile build_profile(const RunConfig& cfg, const RoadNetwork& net);
FluidState build_initial_state(const RunConfig& cfg, const RoadNetwork& net);
WgcParams wgc_params(const RunConfig& cfg);
CampaignSpec campaign_spec(const RunConfig& cfg);

}  // namespace wgc
