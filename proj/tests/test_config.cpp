#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "wgc/config.hpp"

using namespace wgc;

namespace {

std::string key_of(const std::string& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<accepted>";
}

void rejects(const std::string& doc) {
    CAPTURE(doc);
    CHECK_THROWS_AS(validate(parse_config(doc)), ConfigError);
}

}  // namespace

TEST_CASE("empty documents give the defaults") {
    for (const char* doc : {"", "{}", "  \n"}) {
        auto cfg = parse_config(doc);
        CHECK(cfg.network.rows == 10);
        CHECK(cfg.network.cols == 10);
        CHECK(cfg.fluid.dt == 0.1);
        CHECK(cfg.fluid.horizon == 600.0);
        CHECK(cfg.planner.max_edges == 4);
        CHECK(cfg.planner.beam_width == 10);
        CHECK(cfg.campaign.fleet_sizes == std::vector<std::size_t>{100, 500, 1000, 2000, 4000, 5000});
        CHECK(cfg.campaign.trials == 100);
        CHECK(cfg.demand.params.mu == 0.1);
        CHECK_NOTHROW(validate(cfg));
    }
}

TEST_CASE("overrides are applied") {
    auto cfg = parse_config(R"({
        "network": {"rows": 5, "cols": 5, "tau_default": 2},
        "fluid": {"dt": 0.5, "fleet_size": 80, "initial_placement": "nodes"},
        "planner": {"beam_width": "inf"},
        "campaign": {"fleet_sizes": [100, 500], "trials": 50, "strategies": ["wgc", "greedy"]}
    })");
    CHECK(cfg.network.rows == 5);
    CHECK(cfg.network.tau_default == 2.0);
    CHECK(cfg.fluid.dt == 0.5);
    CHECK(cfg.fluid.initial_placement == Placement::Nodes);
    CHECK(cfg.planner.beam_width == kUnboundedBeam);
    CHECK(cfg.campaign.fleet_sizes == std::vector<std::size_t>{100, 500});
    CHECK(cfg.campaign.strategies == std::vector<StrategyKind>{StrategyKind::Wgc, StrategyKind::Greedy});
    CHECK_NOTHROW(validate(cfg));
    auto spec = campaign_spec(cfg);
    CHECK(spec.trials == 50);
    CHECK(spec.wgc.beam_width == kUnboundedBeam);
    CHECK(spec.wgc.dt == 0.5);
}

TEST_CASE("unknown keys name their dotted path") {
    CHECK(key_of(R"({"fluid": {"dtt": 0.1}})") == "fluid.dtt");
    CHECK(key_of(R"({"netwrk": {}})") == "netwrk");
    CHECK(key_of(R"({"demand": {"base_rate": [0.1, 0.2], "hotspot": 1}})") == "demand.hotspot");
    CHECK_THROWS_AS(parse_config(R"({"planner": {"beam": 3}})"), UnknownKeyError);
}

TEST_CASE("malformed documents") {
    CHECK_THROWS_AS(parse_config("{\"fluid\": "), ConfigSyntaxError);
    CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"fluid": {"dt": "fast"}})"), ConstraintError);
    CHECK_THROWS_AS(parse_config(R"({"campaign": {"strategies": ["wgc", "oracle"]}})"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("constraint violations") {
    rejects(R"({"network": {"tau_default": 1}, "fluid": {"dt": 0.3}})");
    rejects(R"({"network": {"rows": 1}})");
    rejects(R"({"fluid": {"dt": 0}})");
    rejects(R"({"fluid": {"fleet_size": 0}})");
    rejects(R"({"demand": {"hotspot_fraction": 0.7, "cold_fraction": 0.5}})");
    rejects(R"({"demand": {"base_rate": [0.3, 0.1]}})");
    rejects(R"({"planner": {"max_edges": 0}})");
    rejects(R"({"planner": {"beam_width": 0}})");
    rejects(R"({"planner": {"start_node": 100}})");
    rejects(R"({"campaign": {"trials": 0}})");
    rejects(R"({"campaign": {"fleet_sizes": []}})");
    rejects(R"({"network": {"popularity": "weights", "popularity_weights": [1, 2]}})");
    rejects(R"({"network": {"transition_override": [{"from": 0, "to": 1, "p": 0.7}]}})");
}

TEST_CASE("resolved config round trip") {
    auto cfg = parse_config(R"({"network": {"rows": 4, "cols": 6}, "planner": {"beam_width": "inf"},
                                "demand": {"per_edge_phase": true}, "output": {"event_logs": true}})");
    auto doc = to_json(cfg);
    auto back = parse_config(doc.dump());
    CHECK(to_json(back) == doc);
    CHECK(to_json(parse_config("")) == to_json(parse_config(to_json(parse_config("")).dump())));
}

TEST_CASE("builders follow the config") {
    auto cfg = parse_config(R"({"network": {"rows": 3, "cols": 3, "tau_default": 1,
                                            "transition_override": [{"from": 4, "to": 5, "p": 0.7},
                                                                    {"from": 4, "to": 1, "p": 0.1},
                                                                    {"from": 4, "to": 3, "p": 0.1},
                                                                    {"from": 4, "to": 7, "p": 0.1}]},
                                "fluid": {"fleet_size": 90}})");
    validate(cfg);
    auto net = build_network(cfg);
    CHECK(net.transition(static_cast<EdgeId>(net.find_edge(4, 5))) == 0.7);
    auto prof = build_profile(cfg, net);
    CHECK(prof.edge_count() == net.edge_count());
    CHECK(build_profile(cfg, net) == prof);

    auto on_edges = build_initial_state(cfg, net);
    CHECK(on_edges.idle_on_edges() == doctest::Approx(90.0));
    CHECK(on_edges.occupied == 0.0);
    for (double x : on_edges.edge_idle) CHECK(x == std::floor(x));

    cfg.fluid.initial_placement = Placement::Nodes;
    auto on_nodes = build_initial_state(cfg, net);
    CHECK(on_nodes.idle_on_edges() == 0.0);
    double total = 0.0;
    for (double p : on_nodes.node_idle) total += p;
    CHECK(total == doctest::Approx(90.0));
}

TEST_CASE("configs load from files") {
    const auto path = std::filesystem::temp_directory_path() / "wgc_test_config.json";
    {
        std::ofstream f(path);
        f << R"({"campaign": {"trials": 7}})";
    }
    CHECK(load_config(path.string()).campaign.trials == 7);
    std::filesystem::remove(path);
}
