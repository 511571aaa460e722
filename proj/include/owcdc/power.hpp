#pragma once

#include <string>
#include <vector>

#include "owcdc/error.hpp"

namespace owcdc {

struct PowerTerm {
    std::string name;
    double unit_w = 0.0;
    double count = 0.0;
    double total_w = 0.0;
};

/// Conventional two-tier fabric. Counts are doubles so fractional
/// what-if studies stay expressible; defaults describe 4 racks of 32 servers.
struct SpineLeafPowerParams {
    double spine_w = 660.0;
    double spines = 4.0;
    double leaf_w = 508.0;
    double leaves = 4.0;
    double server_transceiver_w = 3.0;
    double server_transceivers = 128.0;
};

/// OWC links from the racks to ceiling APs joined by an AWGR PON.
struct PonOwcPowerParams {
    double owc_transceiver_w = 0.4;
    double owc_transceivers = 8.0;
    double olt_w = 480.0;
    double leaf_w = 508.0;
    double leaves = 4.0;
    double server_transceiver_w = 3.0;
    double server_transceivers = 128.0;
};

namespace detail {

inline PowerTerm term(std::string name, double unit, double count) {
    if (!(unit >= 0.0) || !(count >= 0.0)) throw DomainError("power parameter " + name + " must be non-negative");
    return {std::move(name), unit, count, unit * count};
}

inline double sum(const std::vector<PowerTerm>& terms) {
    double total = 0.0;
    for (const auto& t : terms) total += t.total_w;
    return total;
}

}  // namespace detail

inline std::vector<PowerTerm> spine_leaf_terms(const SpineLeafPowerParams& p) {
    return {detail::term("spine_switches", p.spine_w, p.spines), detail::term("leaf_switches", p.leaf_w, p.leaves),
            detail::term("server_transceivers", p.server_transceiver_w, p.server_transceivers)};
}

inline std::vector<PowerTerm> pon_owc_terms(const PonOwcPowerParams& p) {
    return {detail::term("owc_transceivers", p.owc_transceiver_w, p.owc_transceivers),
            detail::term("olt", p.olt_w, 1.0), detail::term("leaf_switches", p.leaf_w, p.leaves),
            detail::term("server_transceivers", p.server_transceiver_w, p.server_transceivers)};
}

inline double spine_leaf_power(const SpineLeafPowerParams& p) { return detail::sum(spine_leaf_terms(p)); }

inline double pon_owc_power(const PonOwcPowerParams& p) { return detail::sum(pon_owc_terms(p)); }

/// Fraction of the baseline power saved by the proposed design.
inline double savings(double baseline_w, double proposed_w) {
    if (!(baseline_w > 0.0)) throw DomainError("baseline power must be positive");
    if (!(proposed_w >= 0.0)) throw DomainError("proposed power must be non-negative");
    return 1.0 - proposed_w / baseline_w;
}

struct PowerInputs {
    SpineLeafPowerParams baseline;
    PonOwcPowerParams proposed;
};

/// Derives the device counts from the rack layout.
/// One leaf per rack, one server transceiver per server, one OWC transceiver
/// on each rack plus one per ceiling access point.
inline PowerInputs power_inputs_for(double racks, double servers_per_rack, double spines, double access_points) {
    if (!(racks >= 0.0) || !(servers_per_rack >= 0.0) || !(spines >= 0.0) || !(access_points >= 0.0)) {
        throw DomainError("layout counts must be non-negative");
    }
    PowerInputs in;
    in.baseline.spines = spines;
    in.baseline.leaves = racks;
    in.baseline.server_transceivers = racks * servers_per_rack;
    in.proposed.leaves = racks;
    in.proposed.server_transceivers = racks * servers_per_rack;
    in.proposed.owc_transceivers = racks + access_points;
    return in;
}

struct PowerReport {
    std::vector<PowerTerm> baseline_terms;
    std::vector<PowerTerm> proposed_terms;
    double baseline_w = 0.0;
    double proposed_w = 0.0;
    double savings_fraction = 0.0;
};

inline PowerReport compare_power(const PowerInputs& in) {
    PowerReport r;
    r.baseline_terms = spine_leaf_terms(in.baseline);
    r.proposed_terms = pon_owc_terms(in.proposed);
    r.baseline_w = detail::sum(r.baseline_terms);
    r.proposed_w = detail::sum(r.proposed_terms);
    r.savings_fraction = savings(r.baseline_w, r.proposed_w);
    return r;
}

}  // namespace owcdc
