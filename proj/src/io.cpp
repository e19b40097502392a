#include "wgc/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace wgc {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw IoError("bad number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw IoError("bad number '" + s + "'");
    }
}

std::uint64_t to_uint(const std::string& s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad integer '" + s + "'");
    return v;
}

// Reads the header, checks it and returns the remaining rows.
std::vector<std::vector<std::string>> read_rows(std::istream& in, const std::vector<std::string>& expected,
                                                std::vector<std::string>* header_out = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("missing header line");
    auto header = split(line);
    if (header_out) {
        *header_out = header;
    } else if (header != expected) {
        throw IoError("unexpected header '" + line + "'");
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split(line);
        if (row.size() != header.size()) throw IoError("row has the wrong number of fields: '" + line + "'");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string time_text(double t) { return fmt::format("{:.10g}", t); }

}  // namespace

void write_trajectory(std::ostream& out, const FluidTrajectory& traj, std::size_t stride) {
    if (stride == 0) throw IoError("trajectory stride must be positive");
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "step,time,variable,index,value\n");
    const std::size_t last = traj.samples() - 1;
    for (std::size_t k = 0;; k = std::min(k + stride, last)) {
        const std::string t = time_text(traj.time_offset() + static_cast<double>(k) * traj.dt());
        for (EdgeId e = 0; e < traj.edge_count(); ++e)
            fmt::format_to(std::back_inserter(buf), "{},{},Q,{},{}\n", k, t, e, traj.queue(k, e));
        for (EdgeId e = 0; e < traj.edge_count(); ++e)
            fmt::format_to(std::back_inserter(buf), "{},{},D,{},{}\n", k, t, e, traj.edge_idle(k, e));
        for (EdgeId e = 0; e < traj.edge_count(); ++e)
            fmt::format_to(std::back_inserter(buf), "{},{},A,{},{}\n", k, t, e, traj.allocation(k, e));
        for (NodeId u = 0; u < traj.node_count(); ++u)
            fmt::format_to(std::back_inserter(buf), "{},{},P,{},{}\n", k, t, u, traj.node_idle(k, u));
        fmt::format_to(std::back_inserter(buf), "{},{},occupied,0,{}\n", k, t, traj.occupied(k));
        fmt::format_to(std::back_inserter(buf), "{},{},clamped,0,{}\n", k, t, traj.clamped(k));
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
        if (k == last) break;
    }
}

FluidTrajectory read_trajectory(std::istream& in, double eps_d) {
    auto rows = read_rows(in, {"step", "time", "variable", "index", "value"});
    if (rows.empty()) throw IoError("trajectory has no rows");

    std::vector<std::size_t> steps;
    std::vector<double> times;
    std::size_t edges = 0, nodes = 0;
    for (const auto& r : rows) {
        const std::size_t k = to_uint(r[0]);
        if (steps.empty() || steps.back() != k) {
            if (!steps.empty() && k < steps.back()) throw IoError("trajectory steps are not increasing");
            steps.push_back(k);
            times.push_back(to_double(r[1]));
        }
        const std::size_t idx = to_uint(r[3]);
        if (r[2] == "Q") edges = std::max(edges, idx + 1);
        else if (r[2] == "P") nodes = std::max(nodes, idx + 1);
    }

    const std::size_t samples = steps.size();
    double dt = 0.0;
    if (samples > 1) {
        const double base = (times.back() - times.front()) / static_cast<double>(steps.back() - steps.front());
        dt = base * static_cast<double>(steps[1] - steps[0]);
    }
    for (const auto& r : rows)
        if (r[2] != "Q" && r[2] != "D" && r[2] != "A" && r[2] != "P" && r[2] != "occupied" && r[2] != "clamped")
            throw IoError("unknown trajectory variable '" + r[2] + "'");
    std::map<std::size_t, std::size_t> sample_of;
    for (std::size_t i = 0; i < samples; ++i) sample_of[steps[i]] = i;

    std::vector<double> queue(samples * edges), edge_idle(samples * edges), node_idle(samples * nodes),
        occupied(samples), clamped(samples);
    for (const auto& r : rows) {
        const std::size_t i = sample_of.at(to_uint(r[0]));
        const std::size_t idx = to_uint(r[3]);
        const double v = to_double(r[4]);
        if (r[2] == "Q") queue[i * edges + idx] = v;
        else if (r[2] == "D") edge_idle[i * edges + idx] = v;
        else if (r[2] == "P") node_idle[i * nodes + idx] = v;
        else if (r[2] == "occupied") occupied[i] = v;
        else if (r[2] == "clamped") clamped[i] = v;
        else if (r[2] != "A") throw IoError("unknown trajectory variable '" + r[2] + "'");
    }
    return FluidTrajectory::from_series(dt, times.back() - times.front(), times.front(), eps_d, edges, nodes,
                                        std::move(queue), std::move(edge_idle), std::move(node_idle),
                                        std::move(occupied), std::move(clamped));
}

void write_aggregate(std::ostream& out, const FluidTrajectory& traj) {
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "step,time,idle_edges,idle_nodes,occupied,total\n");
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        const double de = traj.idle_on_edges(k);
        const double pn = traj.idle_at_nodes(k);
        const double oc = traj.occupied(k);
        fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{}\n", k,
                       time_text(traj.time_offset() + static_cast<double>(k) * traj.dt()), de, pn, oc, de + pn + oc);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<AggregateRow> read_aggregate(std::istream& in) {
    auto rows = read_rows(in, {"step", "time", "idle_edges", "idle_nodes", "occupied", "total"});
    std::vector<AggregateRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back({to_uint(r[0]), to_double(r[1]), to_double(r[2]), to_double(r[3]), to_double(r[4]),
                       to_double(r[5])});
    return out;
}

void write_summary(std::ostream& out, const CampaignResult& result) {
    fmt::print(out, "fleet_size,metric");
    for (auto k : result.spec.strategies) fmt::print(out, ",{}", display_name(k));
    fmt::print(out, "\n");
    for (auto n : result.spec.fleet_sizes) {
        fmt::print(out, "{},mean", n);
        for (auto k : result.spec.strategies) fmt::print(out, ",{}", result.summary(k, n).mean);
        fmt::print(out, "\n{},worst", n);
        for (auto k : result.spec.strategies) fmt::print(out, ",{}", result.summary(k, n).worst);
        fmt::print(out, "\n");
    }
}

SummaryTable read_summary(std::istream& in) {
    std::vector<std::string> header;
    auto rows = read_rows(in, {}, &header);
    if (header.size() < 3 || header[0] != "fleet_size" || header[1] != "metric")
        throw IoError("unexpected summary header");
    SummaryTable table;
    table.strategies.assign(header.begin() + 2, header.end());
    for (const auto& r : rows) {
        SummaryRow row{to_uint(r[0]), r[1], {}};
        for (std::size_t i = 2; i < r.size(); ++i) row.values.push_back(to_double(r[i]));
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_trials(std::ostream& out, const CampaignResult& result) {
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "fleet_size,trial,strategy,world_seed,allocation_time,censored\n");
    for (const auto& r : result.records) {
        if (!r.completed) continue;
        if (r.allocation_time)
            fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},0\n", r.fleet_size, r.trial,
                           config_name(r.strategy), r.world_seed, *r.allocation_time);
        else
            fmt::format_to(std::back_inserter(buf), "{},{},{},{},,1\n", r.fleet_size, r.trial,
                           config_name(r.strategy), r.world_seed);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::vector<TrialRecord> read_trials(std::istream& in) {
    auto rows = read_rows(in, {"fleet_size", "trial", "strategy", "world_seed", "allocation_time", "censored"});
    std::vector<TrialRecord> out;
    for (const auto& r : rows) {
        auto kind = parse_strategy(r[2]);
        if (!kind) throw IoError("unknown strategy '" + r[2] + "'");
        TrialRecord rec{to_uint(r[0]), to_uint(r[1]), *kind, to_uint(r[3]), {}, {}, true};
        if (r[5] == "0") rec.allocation_time = to_double(r[4]);
        else if (r[5] != "1") throw IoError("censored flag must be 0 or 1");
        out.push_back(std::move(rec));
    }
    return out;
}

void write_events(std::ostream& out, const CampaignResult& result) {
    static const char* kinds[] = {"spawn", "match", "abandon"};
    fmt::memory_buffer buf;
    fmt::format_to(std::back_inserter(buf), "fleet_size,trial,strategy,step,kind,passenger,edge,driver\n");
    for (const auto& r : result.records) {
        for (const auto& ev : r.events) {
            fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{},", r.fleet_size, r.trial,
                           config_name(r.strategy), ev.step, kinds[static_cast<int>(ev.kind)], ev.passenger, ev.edge);
            if (ev.kind == EventKind::Match) fmt::format_to(std::back_inserter(buf), "{}\n", ev.driver);
            else fmt::format_to(std::back_inserter(buf), "\n");
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        buf.clear();
    }
}

void write_survival_curve(std::ostream& out, const std::vector<double>& curve, double dt) {
    fmt::print(out, "step,time,survival\n");
    for (std::size_t k = 0; k < curve.size(); ++k)
        fmt::print(out, "{},{},{}\n", k, time_text(static_cast<double>(k) * dt), curve[k]);
}

std::string format_summary(const CampaignResult& result) {
    std::string s = fmt::format("{:>10} {:>7}", "Fleet size", "Metric");
    for (auto k : result.spec.strategies) s += fmt::format(" {:>10}", display_name(k));
    s += "\n";
    for (auto n : result.spec.fleet_sizes) {
        for (const char* metric : {"mean", "worst"}) {
            s += fmt::format("{:>10} {:>7}", n, metric);
            for (auto k : result.spec.strategies) {
                const auto& sum = result.summary(k, n);
                s += fmt::format(" {:>10.2f}", metric[0] == 'm' ? sum.mean : sum.worst);
            }
            s += "\n";
        }
        std::string cens;
        for (auto k : result.spec.strategies)
            if (auto c = result.summary(k, n).censored; c > 0)
                cens += fmt::format(" {}={}", display_name(k), c);
        if (!cens.empty()) s += fmt::format("{:>10} censored:{}\n", "", cens);
    }
    if (result.interrupted) {
        const auto done = std::count_if(result.records.begin(), result.records.end(),
                                        [](const TrialRecord& r) { return r.completed; });
        s += fmt::format("interrupted: {} of {} trials completed\n", done, result.records.size());
    }
    return s;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace wgc
