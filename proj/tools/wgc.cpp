#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "wgc/config.hpp"
#include "wgc/experiment.hpp"
#include "wgc/fluid.hpp"
#include "wgc/io.hpp"
#include "wgc/planner.hpp"

namespace fs = std::filesystem;
using namespace wgc;

namespace {

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

std::atomic<bool> g_stop{false};

extern "C" void request_stop(int) { g_stop.store(true); }

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<NodeId> v0;
    bool curve = false;
};

RunConfig resolve(const Options& opt) {
    RunConfig cfg = opt.config.empty() ? parse_config("") : load_config(opt.config);
    if (opt.out) cfg.output.directory = *opt.out;
    if (opt.seed) cfg.campaign.base_seed = *opt.seed;
    if (opt.jobs) cfg.campaign.jobs = *opt.jobs;
    if (opt.v0) cfg.planner.start_node = *opt.v0;
    validate(cfg);
    return cfg;
}

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.output.directory); }

void echo_config(const RunConfig& cfg) {
    write_file(out_dir(cfg) / "resolved_config.json", to_json(cfg).dump(2) + "\n");
}

template <typename Fn>
std::string render(Fn&& fn) {
    std::ostringstream ss;
    fn(ss);
    return ss.str();
}

int cmd_validate(const RunConfig& cfg) {
    auto net = build_network(cfg);
    auto profile = build_profile(cfg, net);
    DelaySteps::build(net, cfg.fluid.dt);
    fmt::print("config ok: {}x{} grid, {} edges, {} hotspot and {} cold edges\n", cfg.network.rows, cfg.network.cols,
               net.edge_count(), profile.hotspot_edges().size(), profile.cold_edges().size());
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    auto net = build_network(cfg);
    auto profile = build_profile(cfg, net);
    auto initial = build_initial_state(cfg, net);
    FluidOptions options;
    options.eps_d = cfg.fluid.eps_d;
    auto traj = integrate(initial, net, profile, cfg.fluid.horizon, cfg.fluid.dt, options);

    const auto dir = out_dir(cfg);
    echo_config(cfg);
    write_file(dir / "network.json", net.to_json().dump(2) + "\n");
    write_file(dir / "profile.json", profile.to_json().dump(2) + "\n");
    write_file(dir / "trajectory.csv",
               render([&](std::ostream& o) { write_trajectory(o, traj, cfg.output.trajectory_stride); }));
    write_file(dir / "aggregate.csv", render([&](std::ostream& o) { write_aggregate(o, traj); }));

    const std::size_t last = traj.samples() - 1;
    fmt::print("simulated {} steps (dt {}, horizon {})\n", last, cfg.fluid.dt, cfg.fluid.horizon);
    fmt::print("final: idle on edges {:.3f}, idle at nodes {:.3f}, occupied {:.3f}\n", traj.idle_on_edges(last),
               traj.idle_at_nodes(last), traj.occupied(last));
    fmt::print("max conservation error {:.3e}, clamped mass {:.3e}\n",
               conservation_error(traj, static_cast<double>(cfg.fluid.fleet_size)), traj.clamped(last));
    fmt::print("wrote {}\n", dir.string());
    return 0;
}

int cmd_plan(const RunConfig& cfg, bool curve) {
    auto net = build_network(cfg);
    auto profile = build_profile(cfg, net);
    auto initial = build_initial_state(cfg, net);
    const auto params = wgc_params(cfg);
    const double horizon = static_cast<double>(params.max_edges) * net.max_tau();
    FluidOptions options;
    options.eps_d = params.eps_d;
    auto traj = integrate(initial, net, profile, horizon, params.dt, options);
    EvalOptions eval{params.eps, 0, false};
    const NodeId v0 = cfg.planner.start_node;
    auto best = params.beam_width == kUnboundedBeam
                    ? best_path_exhaustive(net, v0, params.max_edges, traj, eval)
                    : best_path_beam(net, v0, params.max_edges, traj, params.beam_width, eval);
    eval.keep_curve = true;
    auto detail = evaluate_path(best.path, net, traj, eval);

    nlohmann::json doc;
    doc["start"] = v0;
    doc["edges"] = best.path.edges;
    std::vector<NodeId> nodes{v0};
    for (EdgeId e : best.path.edges) nodes.push_back(net.edge(e).head);
    doc["nodes"] = nodes;
    doc["expected_allocation_time"] = detail.expected_allocation_time;
    doc["terminal_survival"] = detail.terminal_survival;
    doc["duration"] = detail.duration;

    const auto dir = out_dir(cfg);
    echo_config(cfg);
    write_file(dir / "plan.json", doc.dump(2) + "\n");
    if (curve)
        write_file(dir / "survival_curve.csv",
                   render([&](std::ostream& o) { write_survival_curve(o, detail.survival_curve, params.dt); }));
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_campaign(const RunConfig& cfg) {
    auto net = build_network(cfg);
    auto profile = build_profile(cfg, net);
    const auto spec = campaign_spec(cfg);
    const auto start = std::chrono::steady_clock::now();
    // Ctrl-C stops handing out trials; finished ones are still written below.
    std::signal(SIGINT, request_stop);
    std::signal(SIGTERM, request_stop);
    auto result = run_campaign(net, profile, spec, &g_stop);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto dir = out_dir(cfg);
    echo_config(cfg);
    write_file(dir / "summary.csv", render([&](std::ostream& o) { write_summary(o, result); }));
    write_file(dir / "trials.csv", render([&](std::ostream& o) { write_trials(o, result); }));
    if (cfg.output.event_logs) write_file(dir / "events.csv", render([&](std::ostream& o) { write_events(o, result); }));
    std::cout << format_summary(result);
    if (result.interrupted) {
        std::cerr << fmt::format("campaign interrupted after {:.1f} s; partial results in {}\n", seconds, dir.string());
        return kRuntimeExit;
    }
    std::cerr << fmt::format("campaign finished in {:.1f} s on {} worker(s)\n", seconds, spec.jobs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Idle-driver repositioning simulator and planner"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON config file (defaults when omitted)");
        sub->add_option("--out", opt.out, "output directory (overrides output.directory)");
        sub->add_option("--seed", opt.seed, "campaign base seed override");
        sub->add_option("--jobs", opt.jobs, "worker threads (0 = all cores)");
    };
    auto* validate_cmd = app.add_subcommand("validate", "check a config and exit");
    auto* simulate_cmd = app.add_subcommand("simulate", "integrate the fluid model and dump the trajectory");
    auto* plan_cmd = app.add_subcommand("plan", "answer one WGC path query");
    auto* campaign_cmd = app.add_subcommand("campaign", "run the strategy benchmark");
    for (auto* sub : {validate_cmd, simulate_cmd, plan_cmd, campaign_cmd}) add_common(sub);
    plan_cmd->add_option("--v0", opt.v0, "start node (overrides planner.start_node)");
    plan_cmd->add_flag("--curve", opt.curve, "also write the survival curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        const RunConfig cfg = resolve(opt);
        if (validate_cmd->parsed()) return cmd_validate(cfg);
        if (simulate_cmd->parsed()) return cmd_simulate(cfg);
        if (plan_cmd->parsed()) return cmd_plan(cfg, opt.curve);
        return cmd_campaign(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const FluidConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeExit;
    }
}
