#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "owcdc/channel.hpp"
#include "owcdc/error.hpp"
#include "owcdc/scene.hpp"

namespace owcdc {

inline constexpr double kElementaryCharge = 1.602176634e-19;

/// Mean-square noise currents in A^2.
struct NoiseBreakdown {
    double preamp = 0.0;
    double background = 0.0;
    double signal = 0.0;
    double total = 0.0;
};

/// Receiver noise for average received power `pr_avg_w` and background
/// power `pbg_w`: preamplifier (density^2 B) plus the two shot-noise terms
/// 2 q R P B.
inline NoiseBreakdown noise_variance(double pr_avg_w, double pbg_w, double responsivity, double bandwidth_hz,
                                     double preamp_density) {
    if (!(pr_avg_w >= 0.0) || !(pbg_w >= 0.0) || !(responsivity >= 0.0) || !(preamp_density >= 0.0)) {
        throw DomainError("noise inputs must be non-negative");
    }
    if (!(bandwidth_hz > 0.0)) throw DomainError("bandwidth must be positive");
    NoiseBreakdown n;
    n.preamp = preamp_density * preamp_density * bandwidth_hz;
    n.background = 2.0 * kElementaryCharge * responsivity * pbg_w * bandwidth_hz;
    n.signal = 2.0 * kElementaryCharge * responsivity * pr_avg_w * bandwidth_hz;
    n.total = n.preamp + n.background + n.signal;
    return n;
}

/// R^2 (Ps1 - Ps0)^2 / sigma_t^2.
inline double snr(double responsivity, double ps1_w, double ps0_w, double total_noise_a2) {
    if (total_noise_a2 == 0.0) throw InfiniteSnrError("zero total noise gives unbounded SNR");
    if (!(total_noise_a2 > 0.0)) throw DomainError("noise variance must be positive");
    const double swing = responsivity * (ps1_w - ps0_w);
    return swing * swing / total_noise_a2;
}

/// Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// OOK bit-error probability Q(sqrt(snr)). Results below the smallest
/// positive double saturate there instead of reaching zero.
inline double ber(double snr_value) {
    if (!(snr_value >= 0.0)) throw DomainError("SNR must be non-negative");
    return std::max(q_function(std::sqrt(snr_value)), std::numeric_limits<double>::denorm_min());
}

/// Shannon capacity B log2(1 + snr) in bit/s.
inline double capacity(double bandwidth_hz, double snr_value) {
    if (!(bandwidth_hz > 0.0)) throw DomainError("bandwidth must be positive");
    if (!(snr_value >= 0.0)) throw DomainError("SNR must be non-negative");
    return bandwidth_hz * std::log1p(snr_value) / std::numbers::ln2;
}

struct LinkBudget {
    std::size_t tx = 0;
    std::size_t branch = 0;
    std::size_t rx = 0;
    std::size_t rx_branch = 0;
    Wavelength wavelength = Wavelength::L1;

    double received_power_w = 0.0;
    double ps1_w = 0.0;
    double ps0_w = 0.0;
    double background_power_w = 0.0;
    double interference_w = 0.0;
    double responsivity = 0.0;
    NoiseBreakdown noise;
    double snr = 0.0;
    double ber = 0.5;
    double capacity_bps = 0.0;
    std::optional<double> delay_spread_s;
};

/// Index of the branch with the highest SNR; the lowest index wins ties.
inline std::size_t select_branch_index(std::span<const LinkBudget> branches) {
    if (branches.empty()) throw DomainError("no receiver branches to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < branches.size(); ++i) {
        if (branches[i].snr > branches[best].snr) best = i;
    }
    return best;
}

inline const LinkBudget& select_branch(std::span<const LinkBudget> branches) {
    return branches[select_branch_index(branches)];
}

/// OOK budget for one detector branch: Ps1 = 2 x average power, Ps0 = 0.
/// With interference enabled the foreign power joins the background term.
inline LinkBudget branch_budget(const Scenario& s, const PathSummary& path, const LinkKey& key) {
    const Receiver& rx = s.receivers.at(key.rx);
    LinkBudget lb;
    lb.tx = key.tx;
    lb.branch = key.branch;
    lb.rx = key.rx;
    lb.rx_branch = key.rx_branch;
    lb.wavelength = s.transmitters.at(key.tx).branches.at(key.branch).wavelength;
    lb.received_power_w = path.total_w();
    lb.ps1_w = 2.0 * lb.received_power_w;
    lb.ps0_w = 0.0;
    lb.interference_w = path.interference_w;
    lb.background_power_w = rx.background_power_w(key.rx_branch) + (s.controls.interference ? path.interference_w : 0.0);
    lb.responsivity = rx.responsivity_a_per_w;
    lb.noise = noise_variance(lb.received_power_w, lb.background_power_w, rx.responsivity_a_per_w, rx.bandwidth_hz,
                              rx.preamp_density_a_per_sqrt_hz);
    lb.snr = snr(lb.responsivity, lb.ps1_w, lb.ps0_w, lb.noise.total);
    lb.ber = ber(lb.snr);
    lb.capacity_bps = capacity(rx.bandwidth_hz, lb.snr);
    lb.delay_spread_s = path.delay_spread_s();
    return lb;
}

/// Budgets of every detector branch of the link's receiver.
inline std::vector<LinkBudget> branch_budgets(const Scenario& s, const PowerMatrix& m, const IntendedLink& link) {
    std::vector<LinkBudget> out;
    const std::size_t n = s.receivers.at(link.rx).branches.size();
    for (std::size_t rb = 0; rb < n; ++rb) {
        const LinkKey key{link.tx, link.branch, link.rx, rb};
        out.push_back(branch_budget(s, m.at(key), key));
    }
    return out;
}

struct DownlinkTable {
    std::string scenario;
    std::vector<LinkBudget> links;
};

inline DownlinkTable evaluate_downlink(const Scenario& s, const PowerMatrix& m) {
    DownlinkTable t{s.name, {}};
    for (const IntendedLink& link : intended_links(s)) {
        const auto budgets = branch_budgets(s, m, link);
        t.links.push_back(select_branch(budgets));
    }
    return t;
}

inline DownlinkTable evaluate_downlink(const Scenario& s) { return evaluate_downlink(s, receiver_power_matrix(s)); }

inline double peak_capacity(const DownlinkTable& t) {
    double best = 0.0;
    for (const auto& l : t.links) best = std::max(best, l.capacity_bps);
    return best;
}

}  // namespace owcdc
