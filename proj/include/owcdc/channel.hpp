#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <thread>
#include <tuple>
#include <vector>

#include "owcdc/error.hpp"
#include "owcdc/scene.hpp"
#include "owcdc/vec3.hpp"

namespace owcdc {

inline constexpr double kSpeedOfLight = 299792458.0;

/// A transmitter branch placed in the room.
struct Emitter {
    Vec3 position;
    Vec3 direction{0, 0, -1};
    double mode = 1.0;
    double power_w = 0.0;
};

inline Emitter emitter_of(const Transmitter& tx, std::size_t branch) {
    const AdtBranch& b = tx.branches.at(branch);
    return {tx.position, b.direction(), b.mode(), b.power_w};
}

struct Detector {
    Vec3 position;
    Vec3 normal{0, 0, 1};
    double area_m2 = 1e-4;
    double fov_deg = 90.0;
};

inline Detector detector_of(const Receiver& rx, std::size_t branch) {
    const DetectorBranch& b = rx.branches.at(branch);
    return {rx.position, b.normal, rx.area_m2, b.fov_deg};
}

/// Direct-path power gain (received / transmitted) of a generalized
/// Lambertian emitter into a detector with rectangular field of view.
inline double los_gain(const Emitter& em, const Detector& det) {
    if (!(det.area_m2 > 0.0)) throw DomainError("detector area must be positive");
    if (!(em.mode >= 1.0)) throw DomainError("Lambertian mode must be >= 1");
    const Vec3 v = det.position - em.position;
    const double d = norm(v);
    if (!(d > 0.0)) throw GeometryError("transmitter and detector coincide");
    const double cos_phi = dot(v, em.direction) / d;
    const double cos_theta = -dot(v, det.normal) / d;
    if (cos_phi <= 0.0 || cos_theta <= 0.0) return 0.0;
    if (cos_theta < std::cos(deg_to_rad(det.fov_deg))) return 0.0;
    return (em.mode + 1.0) / (2.0 * std::numbers::pi) * std::pow(cos_phi, em.mode) * det.area_m2 * cos_theta /
           (d * d);
}

// ---------------------------------------------------------------------------
// Impulse response
// ---------------------------------------------------------------------------

/// Received optical power binned by arrival time. Bin i covers
/// [origin + i*width, origin + (i+1)*width).
struct ImpulseResponse {
    double bin_width_s = 0.1e-9;
    double origin_s = 0.0;
    std::vector<double> bins;

    double total_power() const {
        double s = 0.0;
        for (double p : bins) s += p;
        return s;
    }
    double bin_start(std::size_t i) const { return origin_s + bin_width_s * static_cast<double>(i); }
    double bin_center(std::size_t i) const { return origin_s + bin_width_s * (static_cast<double>(i) + 0.5); }

    void add(double delay_s, double power_w) {
        const double pos = (delay_s - origin_s) / bin_width_s;
        const auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(pos)));
        if (idx >= bins.size()) bins.resize(idx + 1, 0.0);
        bins[idx] += power_w;
    }
};

struct PathContribution {
    int order = 0;
    double delay_s = 0.0;
    double power_w = 0.0;
    /// Reflecting elements in the mesh used for that order; -1 when unused.
    int first_element = -1;
    int second_element = -1;
};

namespace detail {

template <class Range, class TimeOf, class PowerOf>
double rms_spread(const Range& items, TimeOf time_of, PowerOf power_of) {
    double p_sum = 0.0, pt_sum = 0.0;
    for (const auto& it : items) {
        p_sum += power_of(it);
        pt_sum += power_of(it) * time_of(it);
    }
    if (!(p_sum > 0.0)) throw NoSignalError("delay spread is undefined without received power");
    const double mean = pt_sum / p_sum;
    double var = 0.0;
    for (const auto& it : items) {
        const double dt = time_of(it) - mean;
        var += power_of(it) * dt * dt;
    }
    return std::sqrt(var / p_sum);
}

}  // namespace detail

/// Power-weighted RMS spread of arrival times, using bin centers.
inline double delay_spread(const ImpulseResponse& h) {
    std::vector<std::size_t> idx(h.bins.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return detail::rms_spread(
        idx, [&](std::size_t i) { return h.bin_center(i); }, [&](std::size_t i) { return h.bins[i]; });
}

/// Same statistic over an unbinned path list.
inline double delay_spread(std::span<const PathContribution> paths) {
    return detail::rms_spread(
        paths, [](const PathContribution& p) { return p.delay_s; },
        [](const PathContribution& p) { return p.power_w; });
}

// ---------------------------------------------------------------------------
// Reflection mesh
// ---------------------------------------------------------------------------

/// Room discretization used by the tracer: a fine element set for
/// single-bounce paths and a coarse set, with its precomputed element-pair
/// coupling table, for two-bounce paths.
class ReflectionMesh {
public:
    struct Coupling {
        std::uint32_t to = 0;
        /// (1/pi) cos(emit) cos(incident) dA_to / D^2, without reflectances.
        double gain = 0.0;
        double distance = 0.0;
    };

    ReflectionMesh() = default;

    explicit ReflectionMesh(const Room& room)
        : ReflectionMesh(build_room(room, room.first_order_resolution), build_room(room, room.second_order_resolution)) {}

    ReflectionMesh(std::vector<SurfaceElement> first_order, std::vector<SurfaceElement> second_order)
        : first_(std::move(first_order)), second_(std::move(second_order)) {
        build_couplings();
    }

    const std::vector<SurfaceElement>& first_order() const { return first_; }
    const std::vector<SurfaceElement>& second_order() const { return second_; }

    std::span<const Coupling> couplings_from(std::size_t i) const {
        return {couplings_.data() + row_start_[i], couplings_.data() + row_start_[i + 1]};
    }

private:
    void build_couplings() {
        row_start_.assign(second_.size() + 1, 0);
        couplings_.clear();
        for (std::size_t i = 0; i < second_.size(); ++i) {
            const SurfaceElement& a = second_[i];
            for (std::size_t j = 0; j < second_.size(); ++j) {
                if (i == j) continue;
                const SurfaceElement& b = second_[j];
                const Vec3 v = b.center - a.center;
                const double d = norm(v);
                if (!(d > 0.0)) continue;
                const double ce = dot(v, a.normal) / d;
                const double ci = -dot(v, b.normal) / d;
                if (ce <= 0.0 || ci <= 0.0) continue;
                couplings_.push_back({static_cast<std::uint32_t>(j), ce * ci * b.area / (std::numbers::pi * d * d), d});
            }
            row_start_[i + 1] = couplings_.size();
        }
    }

    std::vector<SurfaceElement> first_;
    std::vector<SurfaceElement> second_;
    std::vector<std::size_t> row_start_{0};
    std::vector<Coupling> couplings_;
};

namespace detail {

struct Hop {
    double factor = 0.0;
    double distance = 0.0;
};

// Emitter power landing on an element.
inline Hop emitter_to_element(const Emitter& em, const SurfaceElement& el) {
    const Vec3 v = el.center - em.position;
    const double d = norm(v);
    if (!(d > 0.0)) return {};
    const double cp = dot(v, em.direction) / d;
    const double ci = -dot(v, el.normal) / d;
    if (cp <= 0.0 || ci <= 0.0) return {0.0, d};
    return {em.power_w * (em.mode + 1.0) / (2.0 * std::numbers::pi) * std::pow(cp, em.mode) * el.area * ci / (d * d),
            d};
}

// Fraction of an element's re-emitted (ideal Lambertian) power reaching the
// detector, before the element reflectance is applied.
inline Hop element_to_detector(const SurfaceElement& el, const Detector& det, double cos_fov) {
    const Vec3 v = det.position - el.center;
    const double d = norm(v);
    if (!(d > 0.0)) return {};
    const double ce = dot(v, el.normal) / d;
    const double ci = -dot(v, det.normal) / d;
    if (ce <= 0.0 || ci <= 0.0 || ci < cos_fov) return {0.0, d};
    return {ce * det.area_m2 * ci / (std::numbers::pi * d * d), d};
}

// Visits every nonzero path in a fixed order: LOS, single bounces in element
// order, then double bounces ordered by (first, second) element.
template <class Sink>
void trace_paths(const Emitter& em, const Detector& det, const ReflectionMesh& mesh, int max_order, Sink&& sink) {
    if (max_order < 0 || max_order > 2) throw ConfigError("max reflection order must be 0, 1 or 2");
    if (max_order >= 1 && mesh.first_order().empty()) throw ConfigError("no reflecting elements for order >= 1");
    if (max_order >= 2 && mesh.second_order().empty()) throw ConfigError("no reflecting elements for order 2");

    const double los = em.power_w * los_gain(em, det);
    if (los > 0.0) sink(PathContribution{0, norm(det.position - em.position) / kSpeedOfLight, los});
    if (max_order == 0) return;

    const double cos_fov = std::cos(deg_to_rad(det.fov_deg));
    const auto& fine = mesh.first_order();
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const SurfaceElement& el = fine[i];
        if (el.reflectance <= 0.0) continue;
        const Hop in = emitter_to_element(em, el);
        if (in.factor <= 0.0) continue;
        const Hop out = element_to_detector(el, det, cos_fov);
        if (out.factor <= 0.0) continue;
        sink(PathContribution{1, (in.distance + out.distance) / kSpeedOfLight, in.factor * el.reflectance * out.factor,
                              static_cast<int>(i)});
    }
    if (max_order == 1) return;

    const auto& coarse = mesh.second_order();
    std::vector<Hop> in(coarse.size()), out(coarse.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (coarse[i].reflectance <= 0.0) continue;
        in[i] = emitter_to_element(em, coarse[i]);
        out[i] = element_to_detector(coarse[i], det, cos_fov);
        out[i].factor *= coarse[i].reflectance;
    }
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (in[i].factor <= 0.0) continue;
        const double head = in[i].factor * coarse[i].reflectance;
        for (const auto& c : mesh.couplings_from(i)) {
            const Hop& o = out[c.to];
            if (o.factor <= 0.0) continue;
            sink(PathContribution{2, (in[i].distance + c.distance + o.distance) / kSpeedOfLight,
                                  head * c.gain * o.factor, static_cast<int>(i), static_cast<int>(c.to)});
        }
    }
}

}  // namespace detail

/// Unbinned path list in deterministic enumeration order.
inline std::vector<PathContribution> enumerate_paths(const Emitter& em, const Detector& det, const ReflectionMesh& mesh,
                                                     int max_order) {
    std::vector<PathContribution> out;
    detail::trace_paths(em, det, mesh, max_order, [&](const PathContribution& p) { out.push_back(p); });
    return out;
}

/// Power incident on one element straight from the emitter.
inline double incident_power(const Emitter& em, const SurfaceElement& el) {
    return detail::emitter_to_element(em, el).factor;
}

inline ImpulseResponse impulse_response(const Emitter& em, const Detector& det, const ReflectionMesh& mesh,
                                        int max_order, double bin_width_s, double origin_s = 0.0) {
    if (!(bin_width_s > 0.0)) throw ConfigError("time-bin width must be positive");
    ImpulseResponse h{bin_width_s, origin_s, {}};
    detail::trace_paths(em, det, mesh, max_order, [&](const PathContribution& p) { h.add(p.delay_s, p.power_w); });
    return h;
}

// ---------------------------------------------------------------------------
// Scenario-wide power matrix
// ---------------------------------------------------------------------------

struct LinkKey {
    std::size_t tx = 0;
    std::size_t branch = 0;
    std::size_t rx = 0;
    std::size_t rx_branch = 0;
    friend auto operator<=>(const LinkKey&, const LinkKey&) = default;
};

struct PathSummary {
    double los_w = 0.0;
    double first_order_w = 0.0;
    double second_order_w = 0.0;
    ImpulseResponse response;
    /// Same-wavelength power from the other transmitters on this detector.
    double interference_w = 0.0;

    double total_w() const { return response.total_power(); }
    std::optional<double> delay_spread_s() const {
        if (!(total_w() > 0.0)) return std::nullopt;
        return delay_spread(response);
    }
};

inline PathSummary summarize_link(const Emitter& em, const Detector& det, const ReflectionMesh& mesh, int max_order,
                                  double bin_width_s) {
    PathSummary s;
    s.response.bin_width_s = bin_width_s;
    detail::trace_paths(em, det, mesh, max_order, [&](const PathContribution& p) {
        (p.order == 0 ? s.los_w : p.order == 1 ? s.first_order_w : s.second_order_w) += p.power_w;
        s.response.add(p.delay_s, p.power_w);
    });
    return s;
}

struct PowerMatrix {
    std::map<LinkKey, PathSummary> entries;

    const PathSummary& at(const LinkKey& k) const { return entries.at(k); }
};

namespace detail {

// Runs fn(i) for i in [0, n) across threads. Each index writes only its own
// output slot, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = std::thread::hardware_concurrency()) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) fn(i);
        });
    }
}

}  // namespace detail

inline PowerMatrix receiver_power_matrix(const Scenario& s, const ReflectionMesh& mesh) {
    validate(s);
    std::vector<LinkKey> keys;
    for (std::size_t t = 0; t < s.transmitters.size(); ++t)
        for (std::size_t b = 0; b < s.transmitters[t].branches.size(); ++b)
            for (std::size_t r = 0; r < s.receivers.size(); ++r)
                for (std::size_t rb = 0; rb < s.receivers[r].branches.size(); ++rb) keys.push_back({t, b, r, rb});

    std::vector<PathSummary> results(keys.size());
    detail::parallel_for(keys.size(), [&](std::size_t i) {
        const LinkKey& k = keys[i];
        results[i] = summarize_link(emitter_of(s.transmitters[k.tx], k.branch), detector_of(s.receivers[k.rx], k.rx_branch),
                                    mesh, s.controls.max_order, s.controls.bin_width_s);
    });

    PowerMatrix m;
    for (std::size_t i = 0; i < keys.size(); ++i) m.entries.emplace(keys[i], std::move(results[i]));

    for (auto& [k, summary] : m.entries) {
        const Wavelength w = s.transmitters[k.tx].branches[k.branch].wavelength;
        double foreign = 0.0;
        for (std::size_t t = 0; t < s.transmitters.size(); ++t) {
            if (t == k.tx) continue;
            for (std::size_t b = 0; b < s.transmitters[t].branches.size(); ++b) {
                if (s.transmitters[t].branches[b].wavelength != w) continue;
                foreign += m.entries.at({t, b, k.rx, k.rx_branch}).total_w();
            }
        }
        summary.interference_w = foreign;
    }
    return m;
}

inline PowerMatrix receiver_power_matrix(const Scenario& s) { return receiver_power_matrix(s, ReflectionMesh(s.room)); }

/// A downlink served by one transmitter branch.
struct IntendedLink {
    std::size_t tx = 0;
    std::size_t branch = 0;
    std::size_t rx = 0;
    friend auto operator<=>(const IntendedLink&, const IntendedLink&) = default;
};

/// One link per (transmitter, target receiver), ordered by transmitter then
/// receiver. See target_receivers() for how targets are chosen.
inline std::vector<IntendedLink> intended_links(const Scenario& s) {
    std::vector<IntendedLink> out;
    for (std::size_t t = 0; t < s.transmitters.size(); ++t) {
        const auto targets = target_receivers(s.transmitters[t], s.receivers);
        for (std::size_t b = 0; b < targets.size(); ++b) {
            if (targets[b]) out.push_back({t, b, *targets[b]});
        }
    }
    std::sort(out.begin(), out.end(), [](const IntendedLink& a, const IntendedLink& b) {
        return std::tie(a.tx, a.rx) < std::tie(b.tx, b.rx);
    });
    return out;
}

}  // namespace owcdc
