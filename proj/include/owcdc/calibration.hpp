#pragma once

#include <cmath>
#include <string>

#include "owcdc/channel.hpp"
#include "owcdc/error.hpp"
#include "owcdc/linkbudget.hpp"
#include "owcdc/scene.hpp"

namespace owcdc {

/// Result of tuning the receiver preamplifier noise density.
struct CalibrationResult {
    double preamp_density_a_per_sqrt_hz = 0.0;
    double peak_capacity_bps = 0.0;
};

/// Rounds to `digits` significant decimal digits.
inline double round_significant(double v, int digits) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
    return std::round(v * scale) / scale;
}

/// Finds the preamplifier noise density at which the best link of the
/// scenario reaches `target_bps`, by bisection on the (monotone) peak
/// capacity. All other receiver parameters are held at `s.calibration`.
/// The channel is traced once; only the link budgets are re-evaluated.
inline CalibrationResult calibrate_preamp_density(Scenario s, double target_bps, int significant_digits = 3) {
    if (!(target_bps > 0.0)) throw ConfigError("calibration target must be positive");
    const ReceiverKind kind = s.receivers.empty() ? ReceiverKind::Adr : s.receivers.front().kind;
    s = with_receiver_kind(std::move(s), kind);
    const PowerMatrix m = receiver_power_matrix(s);

    auto peak_at = [&](double density) {
        Scenario t = s;
        for (auto& rx : t.receivers) rx.preamp_density_a_per_sqrt_hz = density;
        return peak_capacity(evaluate_downlink(t, m));
    };

    double lo = 1e-15, hi = 1e-9;
    if (peak_at(lo) < target_bps || peak_at(hi) > target_bps) {
        throw ConfigError("calibration target is outside the reachable capacity range");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-6 * lo; ++it) {
        const double mid = std::sqrt(lo * hi);
        (peak_at(mid) > target_bps ? lo : hi) = mid;
    }
    const double density = round_significant(std::sqrt(lo * hi), significant_digits);
    return {density, peak_at(density)};
}

}  // namespace owcdc
