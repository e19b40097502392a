#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wgc/network.hpp"

namespace wgc {

class DemandError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Sinusoid {
    double amplitude = 0.3;  // fraction of the edge level, in [0, 1)
    double period = 120.0;   // seconds
    double phase = 0.0;      // radians

    bool operator==(const Sinusoid&) const = default;
};

struct DemandParams {
    double hotspot_fraction = 0.1;
    double cold_fraction = 0.2;
    double base_lo = 0.05;  // passengers / second
    double base_hi = 0.2;
    double hotspot_rate = 0.5;
    Sinusoid sinusoid{};
    bool per_edge_phase = false;
    double mu = 0.1;  // abandonment rate, 1 / second
};

enum class EdgeClass : std::uint8_t { Base, Hotspot, Cold };

/// Per-edge time-varying Poisson intensities lambda_e(t).
class DemandProfile {
public:
    DemandProfile() = default;

    /// Explicit construction; `levels` and `classes` are per edge. Cold edges
    /// must carry a zero level.
    DemandProfile(std::vector<double> levels, std::vector<EdgeClass> classes, Sinusoid sinusoid, double mu,
                  std::vector<double> edge_phase = {});

    /// Constant rate on every edge (no hotspots, no cold zones, no sinusoid).
    static DemandProfile uniform(std::size_t edge_count, double rate, double mu);

    double evaluate(EdgeId e, double t) const;

    /// r_e * (1 + amplitude): an upper bound of evaluate(e, .) used for thinning.
    double upper_bound(EdgeId e) const { return levels_[e] * (1.0 + sinusoid_.amplitude); }

    double level(EdgeId e) const { return levels_[e]; }
    EdgeClass edge_class(EdgeId e) const { return classes_[e]; }
    bool is_hotspot(EdgeId e) const { return classes_[e] == EdgeClass::Hotspot; }
    bool is_cold(EdgeId e) const { return classes_[e] == EdgeClass::Cold; }
    std::vector<EdgeId> hotspot_edges() const;
    std::vector<EdgeId> cold_edges() const;

    std::size_t edge_count() const { return levels_.size(); }
    double mu() const { return mu_; }
    const Sinusoid& sinusoid() const { return sinusoid_; }

    nlohmann::json to_json() const;
    static DemandProfile from_json(const nlohmann::json& doc);

    bool operator==(const DemandProfile&) const = default;

private:
    std::vector<double> levels_;
    std::vector<EdgeClass> classes_;
    std::vector<double> edge_phase_;
    Sinusoid sinusoid_{};
    double mu_ = 0.1;
};

/// Samples disjoint hotspot and cold edge sets of sizes round(fraction * |E|)
/// and uniform base levels for the remaining edges. Deterministic in `seed`.
DemandProfile sample_profile(const RoadNetwork& net, const DemandParams& params, std::uint64_t seed);

void validate(const DemandParams& params);

}  // namespace wgc
