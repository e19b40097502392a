#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "wgc/experiment.hpp"
#include "wgc/fluid.hpp"

namespace wgc {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Column orders (all files are comma separated with one header line):
//   trajectory   step,time,variable,index,value   variable in Q, D, A, P, occupied, clamped
//   aggregate    step,time,idle_edges,idle_nodes,occupied,total
//   summary      fleet_size,metric,<one column per strategy>
//   trials       fleet_size,trial,strategy,world_seed,allocation_time,censored
//   events       fleet_size,trial,strategy,step,kind,passenger,edge,driver
//   curve        step,time,survival

/// Long-format dump of every sample k with k % stride == 0 (and the last one).
void write_trajectory(std::ostream& out, const FluidTrajectory& traj, std::size_t stride = 1);
/// Inverse of write_trajectory; dt is the stride spacing, so a final sample
/// off the stride grid sits closer to its predecessor.
FluidTrajectory read_trajectory(std::istream& in, double eps_d = kDefaultEpsD);

void write_aggregate(std::ostream& out, const FluidTrajectory& traj);

struct AggregateRow {
    std::size_t step;
    double time;
    double idle_edges;
    double idle_nodes;
    double occupied;
    double total;
};
std::vector<AggregateRow> read_aggregate(std::istream& in);

void write_summary(std::ostream& out, const CampaignResult& result);

struct SummaryRow {
    std::size_t fleet_size;
    std::string metric;
    std::vector<double> values;
};
struct SummaryTable {
    std::vector<std::string> strategies;  // display names, column order
    std::vector<SummaryRow> rows;
};
SummaryTable read_summary(std::istream& in);

void write_trials(std::ostream& out, const CampaignResult& result);
std::vector<TrialRecord> read_trials(std::istream& in);

void write_events(std::ostream& out, const CampaignResult& result);

void write_survival_curve(std::ostream& out, const std::vector<double>& curve, double dt);

/// Human-readable summary table for standard output.
std::string format_summary(const CampaignResult& result);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace wgc
