#include "wgc/demand.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "wgc/rng.hpp"

namespace wgc {

namespace {

const char* class_name(EdgeClass c) {
    switch (c) {
        case EdgeClass::Hotspot: return "hotspot";
        case EdgeClass::Cold: return "cold";
        default: return "base";
    }
}

EdgeClass class_from_name(const std::string& s) {
    if (s == "hotspot") return EdgeClass::Hotspot;
    if (s == "cold") return EdgeClass::Cold;
    if (s == "base") return EdgeClass::Base;
    throw DemandError("unknown edge class '" + s + "'");
}

}  // namespace

DemandProfile::DemandProfile(std::vector<double> levels, std::vector<EdgeClass> classes, Sinusoid sinusoid,
                             double mu, std::vector<double> edge_phase)
    : levels_(std::move(levels)),
      classes_(std::move(classes)),
      edge_phase_(std::move(edge_phase)),
      sinusoid_(sinusoid),
      mu_(mu) {
    if (levels_.size() != classes_.size()) throw DemandError("levels and classes differ in length");
    if (!edge_phase_.empty() && edge_phase_.size() != levels_.size())
        throw DemandError("per-edge phases must cover every edge");
    if (!(mu_ > 0.0)) throw DemandError("mu must be positive");
    if (!(sinusoid_.amplitude >= 0.0 && sinusoid_.amplitude < 1.0))
        throw DemandError("sinusoid amplitude must lie in [0, 1)");
    if (!(sinusoid_.period > 0.0)) throw DemandError("sinusoid period must be positive");
    for (std::size_t e = 0; e < levels_.size(); ++e) {
        if (!(levels_[e] >= 0.0)) throw DemandError("edge rate levels must be non-negative");
        if (classes_[e] == EdgeClass::Cold && levels_[e] != 0.0) throw DemandError("cold edges must have zero rate");
    }
}

DemandProfile DemandProfile::uniform(std::size_t edge_count, double rate, double mu) {
    return DemandProfile(std::vector<double>(edge_count, rate), std::vector<EdgeClass>(edge_count, EdgeClass::Base),
                         Sinusoid{0.0, 120.0, 0.0}, mu);
}

double DemandProfile::evaluate(EdgeId e, double t) const {
    if (classes_[e] == EdgeClass::Cold) return 0.0;
    const double r = levels_[e];
    if (sinusoid_.amplitude == 0.0) return r;
    const double phase = edge_phase_.empty() ? sinusoid_.phase : edge_phase_[e];
    const double angle = 2.0 * std::numbers::pi * t / sinusoid_.period + phase;
    return std::max(0.0, r * (1.0 + sinusoid_.amplitude * std::sin(angle)));
}

std::vector<EdgeId> DemandProfile::hotspot_edges() const {
    std::vector<EdgeId> out;
    for (EdgeId e = 0; e < classes_.size(); ++e)
        if (classes_[e] == EdgeClass::Hotspot) out.push_back(e);
    return out;
}

std::vector<EdgeId> DemandProfile::cold_edges() const {
    std::vector<EdgeId> out;
    for (EdgeId e = 0; e < classes_.size(); ++e)
        if (classes_[e] == EdgeClass::Cold) out.push_back(e);
    return out;
}

nlohmann::json DemandProfile::to_json() const {
    nlohmann::json doc;
    doc["mu"] = mu_;
    doc["sinusoid"] = {{"amplitude", sinusoid_.amplitude}, {"period", sinusoid_.period}, {"phase", sinusoid_.phase}};
    auto& edges = doc["edges"] = nlohmann::json::array();
    for (std::size_t e = 0; e < levels_.size(); ++e) {
        nlohmann::json item = {{"class", class_name(classes_[e])}, {"level", levels_[e]}};
        if (!edge_phase_.empty()) item["phase"] = edge_phase_[e];
        edges.push_back(std::move(item));
    }
    return doc;
}

DemandProfile DemandProfile::from_json(const nlohmann::json& doc) {
    std::vector<double> levels;
    std::vector<EdgeClass> classes;
    std::vector<double> phases;
    for (const auto& item : doc.at("edges")) {
        levels.push_back(item.at("level").get<double>());
        classes.push_back(class_from_name(item.at("class").get<std::string>()));
        if (item.contains("phase")) phases.push_back(item["phase"].get<double>());
    }
    const auto& s = doc.at("sinusoid");
    Sinusoid sinusoid{s.at("amplitude").get<double>(), s.at("period").get<double>(), s.at("phase").get<double>()};
    return DemandProfile(std::move(levels), std::move(classes), sinusoid, doc.at("mu").get<double>(),
                         std::move(phases));
}

void validate(const DemandParams& p) {
    if (!(p.hotspot_fraction >= 0.0) || !(p.cold_fraction >= 0.0))
        throw DemandError("hotspot and cold fractions must be non-negative");
    if (p.hotspot_fraction + p.cold_fraction > 1.0 + 1e-12)
        throw DemandError("hotspot_fraction + cold_fraction exceeds 1");
    if (!(p.base_lo >= 0.0) || !(p.base_lo <= p.base_hi)) throw DemandError("base rate range must satisfy 0 <= lo <= hi");
    if (!(p.hotspot_rate >= p.base_hi)) throw DemandError("hotspot_rate must be at least the base upper bound");
    if (!(p.mu > 0.0)) throw DemandError("mu must be positive");
    if (!(p.sinusoid.amplitude >= 0.0 && p.sinusoid.amplitude < 1.0))
        throw DemandError("sinusoid amplitude must lie in [0, 1)");
    if (!(p.sinusoid.period > 0.0)) throw DemandError("sinusoid period must be positive");
}

DemandProfile sample_profile(const RoadNetwork& net, const DemandParams& p, std::uint64_t seed) {
    validate(p);
    const std::size_t m = net.edge_count();
    const auto hot = static_cast<std::size_t>(std::llround(p.hotspot_fraction * static_cast<double>(m)));
    const auto cold = static_cast<std::size_t>(std::llround(p.cold_fraction * static_cast<double>(m)));
    if (hot + cold > m) throw DemandError("hotspot and cold sets do not fit in the edge set");

    Rng rng(derive_seed(seed, {0x64656d616e64ULL}));
    std::vector<EdgeId> order(m);
    for (EdgeId e = 0; e < m; ++e) order[e] = e;
    for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<EdgeClass> classes(m, EdgeClass::Base);
    for (std::size_t i = 0; i < hot; ++i) classes[order[i]] = EdgeClass::Hotspot;
    for (std::size_t i = hot; i < hot + cold; ++i) classes[order[i]] = EdgeClass::Cold;

    std::vector<double> levels(m, 0.0);
    for (EdgeId e = 0; e < m; ++e) {
        if (classes[e] == EdgeClass::Hotspot) levels[e] = p.hotspot_rate;
        else if (classes[e] == EdgeClass::Base) levels[e] = rng.uniform(p.base_lo, p.base_hi);
    }
    std::vector<double> phases;
    if (p.per_edge_phase) {
        phases.resize(m);
        for (auto& ph : phases) ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return DemandProfile(std::move(levels), std::move(classes), p.sinusoid, p.mu, std::move(phases));
}

}  // namespace wgc
