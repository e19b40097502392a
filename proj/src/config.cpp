#include "wgc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "wgc/fluid.hpp"

namespace wgc {

using nlohmann::json;

namespace {

// Reads one object section, rejecting keys outside `allowed`.
class Section {
public:
    Section(const json& parent, std::string name, std::initializer_list<const char*> allowed)
        : name_(std::move(name)) {
        if (!parent.contains(name_)) return;
        node_ = &parent.at(name_);
        if (!node_->is_object()) throw ConstraintError(name_, "section '" + name_ + "' must be an object");
        for (const auto& [key, value] : node_->items()) {
            bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
            if (!known) throw UnknownKeyError(path(key), "unknown key '" + path(key) + "'");
        }
    }

    template <typename T>
    void read(const char* key, T& out) const {
        if (!node_ || !node_->contains(key)) return;
        try {
            out = node_->at(key).get<T>();
        } catch (const json::exception&) {
            throw ConstraintError(path(key), "key '" + path(key) + "' has the wrong type");
        }
    }

    const json* get(const char* key) const {
        if (!node_ || !node_->contains(key)) return nullptr;
        return &node_->at(key);
    }

    std::string path(const std::string& key) const { return name_ + "." + key; }

private:
    std::string name_;
    const json* node_ = nullptr;
};

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConstraintError(key, "constraint violated for '" + key + "': " + what);
}

bool is_multiple(double value, double dt) {
    const double q = value / dt;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q) && std::round(q) >= 1.0;
}

}  // namespace

RunConfig parse_config(std::string_view document) {
    json doc;
    std::string text(document);
    bool blank = std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
    if (blank) {
        doc = json::object();
    } else {
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigSyntaxError("", std::string("config is not valid JSON: ") + e.what());
        }
    }
    if (!doc.is_object()) throw ConfigSyntaxError("", "config document must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        static const char* sections[] = {"network", "demand", "fluid", "planner", "campaign", "output"};
        if (std::find_if(std::begin(sections), std::end(sections), [&](const char* s) { return key == s; }) ==
            std::end(sections))
            throw UnknownKeyError(key, "unknown key '" + key + "'");
    }

    RunConfig cfg;

    Section net(doc, "network",
                {"rows", "cols", "tau_default", "transition_override", "popularity", "popularity_weights",
                 "popularity_seed"});
    net.read("rows", cfg.network.rows);
    net.read("cols", cfg.network.cols);
    net.read("tau_default", cfg.network.tau_default);
    net.read("popularity", cfg.network.popularity);
    net.read("popularity_weights", cfg.network.popularity_weights);
    net.read("popularity_seed", cfg.network.popularity_seed);
    if (const json* overrides = net.get("transition_override")) {
        const std::string key = net.path("transition_override");
        require(overrides->is_array(), key, "must be an array of {from, to, p}");
        for (const auto& item : *overrides) {
            require(item.is_object() && item.contains("from") && item.contains("to") && item.contains("p"), key,
                    "entries need from, to and p");
            for (const auto& [k, v] : item.items())
                if (k != "from" && k != "to" && k != "p") throw UnknownKeyError(key + "." + k, "unknown key '" + key + "." + k + "'");
            try {
                cfg.network.transition_override.push_back(
                    {item["from"].get<NodeId>(), item["to"].get<NodeId>(), item["p"].get<double>()});
            } catch (const json::exception&) {
                throw ConstraintError(key, "key '" + key + "' has the wrong type");
            }
        }
    }

    Section dem(doc, "demand",
                {"hotspot_fraction", "cold_fraction", "base_rate", "hotspot_rate", "amplitude", "period", "phase",
                 "per_edge_phase", "mu", "seed"});
    auto& dp = cfg.demand.params;
    dem.read("hotspot_fraction", dp.hotspot_fraction);
    dem.read("cold_fraction", dp.cold_fraction);
    if (dem.get("base_rate")) {
        std::vector<double> range;
        dem.read("base_rate", range);
        require(range.size() == 2, dem.path("base_rate"), "must be [lo, hi]");
        dp.base_lo = range[0];
        dp.base_hi = range[1];
    }
    dem.read("hotspot_rate", dp.hotspot_rate);
    dem.read("amplitude", dp.sinusoid.amplitude);
    dem.read("period", dp.sinusoid.period);
    dem.read("phase", dp.sinusoid.phase);
    dem.read("per_edge_phase", dp.per_edge_phase);
    dem.read("mu", dp.mu);
    dem.read("seed", cfg.demand.seed);

    Section flu(doc, "fluid", {"dt", "horizon", "eps_d", "fleet_size", "initial_placement", "placement_seed"});
    flu.read("dt", cfg.fluid.dt);
    flu.read("horizon", cfg.fluid.horizon);
    flu.read("eps_d", cfg.fluid.eps_d);
    flu.read("fleet_size", cfg.fluid.fleet_size);
    flu.read("placement_seed", cfg.fluid.placement_seed);
    if (flu.get("initial_placement")) {
        std::string p;
        flu.read("initial_placement", p);
        if (p == "nodes") cfg.fluid.initial_placement = Placement::Nodes;
        else if (p == "edges") cfg.fluid.initial_placement = Placement::Edges;
        else throw ConstraintError(flu.path("initial_placement"), "initial_placement must be 'nodes' or 'edges'");
    }

    Section pl(doc, "planner", {"max_edges", "beam_width", "eps", "start_node"});
    pl.read("max_edges", cfg.planner.max_edges);
    if (const json* k = pl.get("beam_width")) {
        if (k->is_string()) {
            require(k->get<std::string>() == "inf", pl.path("beam_width"), "must be a positive integer or \"inf\"");
            cfg.planner.beam_width = kUnboundedBeam;
        } else {
            pl.read("beam_width", cfg.planner.beam_width);
        }
    }
    pl.read("eps", cfg.planner.eps);
    pl.read("start_node", cfg.planner.start_node);

    Section camp(doc, "campaign", {"fleet_sizes", "trials", "strategies", "base_seed", "jobs"});
    camp.read("fleet_sizes", cfg.campaign.fleet_sizes);
    camp.read("trials", cfg.campaign.trials);
    camp.read("base_seed", cfg.campaign.base_seed);
    camp.read("jobs", cfg.campaign.jobs);
    if (camp.get("strategies")) {
        std::vector<std::string> names;
        camp.read("strategies", names);
        cfg.campaign.strategies.clear();
        for (const auto& n : names) {
            auto kind = parse_strategy(n);
            if (!kind) throw ConstraintError(camp.path("strategies"), "unknown strategy '" + n + "' (wgc|greedy|random|hotspot)");
            cfg.campaign.strategies.push_back(*kind);
        }
    }

    Section out(doc, "output", {"directory", "trajectory_stride", "event_logs"});
    out.read("directory", cfg.output.directory);
    out.read("trajectory_stride", cfg.output.trajectory_stride);
    out.read("event_logs", cfg.output.event_logs);

    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigSyntaxError("", "cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void validate(const RunConfig& cfg) {
    const auto& n = cfg.network;
    require(n.rows >= 2, "network.rows", "must be at least 2");
    require(n.cols >= 2, "network.cols", "must be at least 2");
    require(n.tau_default > 0.0 && std::isfinite(n.tau_default), "network.tau_default", "must be positive");
    require(n.popularity == "uniform" || n.popularity == "random" || n.popularity == "weights", "network.popularity",
            "must be uniform, random or weights");
    const std::size_t nodes = n.rows * n.cols;
    if (n.popularity == "weights") {
        require(n.popularity_weights.size() == nodes, "network.popularity_weights", "needs one weight per node");
        require(std::all_of(n.popularity_weights.begin(), n.popularity_weights.end(), [](double w) { return w >= 0.0; }),
                "network.popularity_weights", "weights must be non-negative");
        require(std::any_of(n.popularity_weights.begin(), n.popularity_weights.end(), [](double w) { return w > 0.0; }),
                "network.popularity_weights", "at least one weight must be positive");
    } else {
        require(n.popularity_weights.empty(), "network.popularity_weights", "only allowed with popularity = weights");
    }
    for (const auto& o : n.transition_override)
        require(o.from < nodes && o.to < nodes && o.probability >= 0.0, "network.transition_override",
                "entries need valid nodes and non-negative p");

    const auto& d = cfg.demand.params;
    require(d.hotspot_fraction >= 0.0 && d.hotspot_fraction <= 1.0, "demand.hotspot_fraction", "must lie in [0, 1]");
    require(d.cold_fraction >= 0.0 && d.cold_fraction <= 1.0, "demand.cold_fraction", "must lie in [0, 1]");
    require(d.hotspot_fraction + d.cold_fraction <= 1.0 + 1e-12, "demand.cold_fraction",
            "hotspot_fraction + cold_fraction must not exceed 1");
    require(d.base_lo >= 0.0 && d.base_lo <= d.base_hi, "demand.base_rate", "needs 0 <= lo <= hi");
    require(d.hotspot_rate >= d.base_hi, "demand.hotspot_rate", "must be at least the base upper bound");
    require(d.sinusoid.amplitude >= 0.0 && d.sinusoid.amplitude < 1.0, "demand.amplitude", "must lie in [0, 1)");
    require(d.sinusoid.period > 0.0, "demand.period", "must be positive");
    require(d.mu > 0.0, "demand.mu", "must be positive");

    const auto& f = cfg.fluid;
    require(f.dt > 0.0, "fluid.dt", "must be positive");
    require(f.horizon > 0.0, "fluid.horizon", "must be positive");
    require(f.eps_d >= 0.0, "fluid.eps_d", "must be non-negative");
    require(f.fleet_size >= 1, "fluid.fleet_size", "must be at least 1");
    require(is_multiple(n.tau_default, f.dt), "fluid.dt",
            "network.tau_default (and every trip delay) must be an integer multiple of dt");

    const auto& p = cfg.planner;
    require(p.max_edges >= 1, "planner.max_edges", "must be at least 1");
    require(p.beam_width >= 1, "planner.beam_width", "must be at least 1");
    require(p.eps >= 0.0 && p.eps < 1.0, "planner.eps", "must lie in [0, 1)");
    require(p.start_node < nodes, "planner.start_node", "must be a node of the grid");

    const auto& c = cfg.campaign;
    require(!c.fleet_sizes.empty(), "campaign.fleet_sizes", "must not be empty");
    require(std::all_of(c.fleet_sizes.begin(), c.fleet_sizes.end(), [](std::size_t v) { return v >= 1; }),
            "campaign.fleet_sizes", "fleet sizes must be at least 1");
    require(c.trials >= 1, "campaign.trials", "must be at least 1");
    require(!c.strategies.empty(), "campaign.strategies", "must not be empty");

    require(!cfg.output.directory.empty(), "output.directory", "must not be empty");
    require(cfg.output.trajectory_stride >= 1, "output.trajectory_stride", "must be at least 1");

    // Row sums of overridden transitions are only known once the grid exists.
    if (!n.transition_override.empty()) build_network(cfg);
}

json to_json(const RunConfig& cfg) {
    json doc;
    auto& n = doc["network"];
    n["rows"] = cfg.network.rows;
    n["cols"] = cfg.network.cols;
    n["tau_default"] = cfg.network.tau_default;
    n["transition_override"] = json::array();
    for (const auto& o : cfg.network.transition_override)
        n["transition_override"].push_back({{"from", o.from}, {"to", o.to}, {"p", o.probability}});
    n["popularity"] = cfg.network.popularity;
    n["popularity_weights"] = cfg.network.popularity_weights;
    n["popularity_seed"] = cfg.network.popularity_seed;

    const auto& dp = cfg.demand.params;
    doc["demand"] = {{"hotspot_fraction", dp.hotspot_fraction},
                     {"cold_fraction", dp.cold_fraction},
                     {"base_rate", {dp.base_lo, dp.base_hi}},
                     {"hotspot_rate", dp.hotspot_rate},
                     {"amplitude", dp.sinusoid.amplitude},
                     {"period", dp.sinusoid.period},
                     {"phase", dp.sinusoid.phase},
                     {"per_edge_phase", dp.per_edge_phase},
                     {"mu", dp.mu},
                     {"seed", cfg.demand.seed}};

    doc["fluid"] = {{"dt", cfg.fluid.dt},
                    {"horizon", cfg.fluid.horizon},
                    {"eps_d", cfg.fluid.eps_d},
                    {"fleet_size", cfg.fluid.fleet_size},
                    {"initial_placement", cfg.fluid.initial_placement == Placement::Nodes ? "nodes" : "edges"},
                    {"placement_seed", cfg.fluid.placement_seed}};

    doc["planner"] = {{"max_edges", cfg.planner.max_edges},
                      {"eps", cfg.planner.eps},
                      {"start_node", cfg.planner.start_node}};
    if (cfg.planner.beam_width == kUnboundedBeam) doc["planner"]["beam_width"] = "inf";
    else doc["planner"]["beam_width"] = cfg.planner.beam_width;

    std::vector<std::string> names;
    for (auto k : cfg.campaign.strategies) names.emplace_back(config_name(k));
    doc["campaign"] = {{"fleet_sizes", cfg.campaign.fleet_sizes},
                       {"trials", cfg.campaign.trials},
                       {"strategies", names},
                       {"base_seed", cfg.campaign.base_seed},
                       {"jobs", cfg.campaign.jobs}};

    doc["output"] = {{"directory", cfg.output.directory},
                     {"trajectory_stride", cfg.output.trajectory_stride},
                     {"event_logs", cfg.output.event_logs}};
    return doc;
}

RoadNetwork build_network(const RunConfig& cfg) {
    auto net = build_grid(cfg.network.rows, cfg.network.cols, cfg.network.tau_default);
    if (!cfg.network.transition_override.empty()) {
        std::vector<double> q(net.transitions().begin(), net.transitions().end());
        std::vector<char> touched(net.node_count(), 0);
        for (const auto& o : cfg.network.transition_override) {
            long e = net.find_edge(o.from, o.to);
            if (e < 0)
                throw ConstraintError("network.transition_override",
                                      "no edge " + std::to_string(o.from) + " -> " + std::to_string(o.to));
            if (!touched[o.from]) {
                // An overridden row is replaced as a whole.
                auto [first, last] = net.out_range(o.from);
                for (EdgeId i = first; i < last; ++i) q[i] = 0.0;
                touched[o.from] = 1;
            }
            q[static_cast<EdgeId>(e)] = o.probability;
        }
        try {
            net.set_transitions(std::move(q));
        } catch (const NetworkError& e) {
            throw ConstraintError("network.transition_override", e.what());
        }
    }
    if (cfg.network.popularity == "random") {
        net.set_popularity(random_popularity(net.node_count(), cfg.network.popularity_seed));
    } else if (cfg.network.popularity == "weights") {
        net.set_popularity(cfg.network.popularity_weights);
    }
    return net;
}

DemandProfile build_profile(const RunConfig& cfg, const RoadNetwork& net) {
    return sample_profile(net, cfg.demand.params, cfg.demand.seed);
}

FluidState build_initial_state(const RunConfig& cfg, const RoadNetwork& net) {
    FluidState s = FluidState::zeros(net);
    if (cfg.fluid.initial_placement == Placement::Nodes) {
        auto counts = sample_initial_state(net.node_count(), cfg.fluid.fleet_size, cfg.fluid.placement_seed);
        for (NodeId u = 0; u < net.node_count(); ++u) s.node_idle[u] = static_cast<double>(counts[u]);
    } else {
        auto counts = sample_initial_state(net.edge_count(), cfg.fluid.fleet_size, cfg.fluid.placement_seed);
        for (EdgeId e = 0; e < net.edge_count(); ++e) s.edge_idle[e] = static_cast<double>(counts[e]);
    }
    return s;
}

WgcParams wgc_params(const RunConfig& cfg) {
    WgcParams p;
    p.max_edges = cfg.planner.max_edges;
    p.beam_width = cfg.planner.beam_width;
    p.eps = cfg.planner.eps;
    p.dt = cfg.fluid.dt;
    p.eps_d = cfg.fluid.eps_d;
    return p;
}

CampaignSpec campaign_spec(const RunConfig& cfg) {
    CampaignSpec spec;
    spec.fleet_sizes = cfg.campaign.fleet_sizes;
    spec.trials = cfg.campaign.trials;
    spec.strategies = cfg.campaign.strategies;
    spec.base_seed = cfg.campaign.base_seed;
    spec.horizon = cfg.fluid.horizon;
    spec.dt = cfg.fluid.dt;
    spec.wgc = wgc_params(cfg);
    spec.record_events = cfg.output.event_logs;
    spec.jobs = cfg.campaign.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.campaign.jobs;
    return spec;
}

}  // namespace wgc
