#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "owcdc/error.hpp"
#include "owcdc/vec3.hpp"

namespace owcdc {

// ---------------------------------------------------------------------------
// Room geometry
// ---------------------------------------------------------------------------

enum class Surface { Floor, Ceiling, XMin, XMax, YMin, YMax };

inline constexpr std::array<Surface, 6> kAllSurfaces = {
    Surface::Floor, Surface::Ceiling, Surface::XMin, Surface::XMax, Surface::YMin, Surface::YMax};

constexpr std::string_view surface_name(Surface s) {
    switch (s) {
        case Surface::Floor: return "floor";
        case Surface::Ceiling: return "ceiling";
        case Surface::XMin: return "x_min";
        case Surface::XMax: return "x_max";
        case Surface::YMin: return "y_min";
        case Surface::YMax: return "y_max";
    }
    return "?";
}

/// A flat patch of a room surface. The normal points into the room.
struct SurfaceElement {
    Vec3 center;
    Vec3 normal;
    double area = 0.0;
    double reflectance = 0.0;
    Surface surface = Surface::Floor;
};

struct Reflectances {
    double floor = 0.3;
    double ceiling = 0.8;
    double x_min = 0.8;
    double x_max = 0.8;
    double y_min = 0.8;
    double y_max = 0.8;

    constexpr double of(Surface s) const {
        switch (s) {
            case Surface::Floor: return floor;
            case Surface::Ceiling: return ceiling;
            case Surface::XMin: return x_min;
            case Surface::XMax: return x_max;
            case Surface::YMin: return y_min;
            case Surface::YMax: return y_max;
        }
        return 0.0;
    }

    friend constexpr bool operator==(const Reflectances&, const Reflectances&) = default;
};

/// Axis-aligned box room. length runs along x, width along y, height along z.
struct Room {
    double length = 8.0;
    double width = 8.0;
    double height = 3.0;
    Reflectances reflectance;
    /// Element edge in meters used for single-bounce paths.
    double first_order_resolution = 0.1;
    /// Element edge in meters used for both bounces of two-bounce paths.
    double second_order_resolution = 0.5;

    double surface_area(Surface s) const {
        switch (s) {
            case Surface::Floor:
            case Surface::Ceiling: return length * width;
            case Surface::XMin:
            case Surface::XMax: return width * height;
            case Surface::YMin:
            case Surface::YMax: return length * height;
        }
        return 0.0;
    }

    double total_surface_area() const {
        return 2.0 * (length * width + width * height + length * height);
    }
};

namespace detail {

// Number of cells covering `extent` at edge `step`; the last one may be partial.
inline std::size_t cell_count(double extent, double step) {
    const double ratio = extent / step;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, rounded)) {
        return static_cast<std::size_t>(std::max(1.0, rounded));
    }
    return static_cast<std::size_t>(std::ceil(ratio));
}

// Cell i of a 1-D partition: {center, width}.
inline std::pair<double, double> cell(double extent, double step, std::size_t count, std::size_t i) {
    const double lo = step * static_cast<double>(i);
    const double hi = (i + 1 == count) ? extent : std::min(extent, step * static_cast<double>(i + 1));
    return {0.5 * (lo + hi), hi - lo};
}

}  // namespace detail

/// Discretizes the six room surfaces into elements with edge `resolution`.
/// Elements are ordered by surface (floor, ceiling, x_min, x_max, y_min, y_max),
/// then row-major over the surface's two in-plane axes.
inline std::vector<SurfaceElement> build_room(const Room& room, double resolution) {
    if (!(room.length > 0.0) || !(room.width > 0.0) || !(room.height > 0.0)) {
        throw ConfigError("room dimensions must be positive");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw ConfigError("element resolution must be positive");
    }
    for (Surface s : kAllSurfaces) {
        const double rho = room.reflectance.of(s);
        if (!(rho >= 0.0 && rho <= 1.0)) {
            throw ConfigError("reflectance of " + std::string(surface_name(s)) + " must lie in [0, 1]");
        }
    }

    std::vector<SurfaceElement> out;
    auto plane = [&](Surface s, double extent_u, double extent_v, auto place, Vec3 normal) {
        const std::size_t nu = detail::cell_count(extent_u, resolution);
        const std::size_t nv = detail::cell_count(extent_v, resolution);
        for (std::size_t i = 0; i < nu; ++i) {
            const auto [cu, du] = detail::cell(extent_u, resolution, nu, i);
            for (std::size_t j = 0; j < nv; ++j) {
                const auto [cv, dv] = detail::cell(extent_v, resolution, nv, j);
                out.push_back({place(cu, cv), normal, du * dv, room.reflectance.of(s), s});
            }
        }
    };

    const double L = room.length, W = room.width, H = room.height;
    plane(Surface::Floor, L, W, [](double u, double v) { return Vec3{u, v, 0.0}; }, Vec3{0, 0, 1});
    plane(Surface::Ceiling, L, W, [H](double u, double v) { return Vec3{u, v, H}; }, Vec3{0, 0, -1});
    plane(Surface::XMin, W, H, [](double u, double v) { return Vec3{0.0, u, v}; }, Vec3{1, 0, 0});
    plane(Surface::XMax, W, H, [L](double u, double v) { return Vec3{L, u, v}; }, Vec3{-1, 0, 0});
    plane(Surface::YMin, L, H, [](double u, double v) { return Vec3{u, 0.0, v}; }, Vec3{0, 1, 0});
    plane(Surface::YMax, L, H, [W](double u, double v) { return Vec3{u, W, v}; }, Vec3{0, -1, 0});
    return out;
}

// ---------------------------------------------------------------------------
// Transmitters
// ---------------------------------------------------------------------------

enum class Wavelength { L1, L2, L3, L4 };

inline constexpr std::array<Wavelength, 4> kAllWavelengths = {
    Wavelength::L1, Wavelength::L2, Wavelength::L3, Wavelength::L4};

constexpr double wavelength_nm(Wavelength w) {
    switch (w) {
        case Wavelength::L1: return 850.0;
        case Wavelength::L2: return 880.0;
        case Wavelength::L3: return 900.0;
        case Wavelength::L4: return 950.0;
    }
    return 0.0;
}

constexpr std::string_view wavelength_name(Wavelength w) {
    switch (w) {
        case Wavelength::L1: return "L1";
        case Wavelength::L2: return "L2";
        case Wavelength::L3: return "L3";
        case Wavelength::L4: return "L4";
    }
    return "?";
}

inline std::optional<Wavelength> parse_wavelength(std::string_view s) {
    for (Wavelength w : kAllWavelengths) {
        if (s == wavelength_name(w)) return w;
    }
    return std::nullopt;
}

/// Unit vector for a ceiling branch: azimuth counterclockwise from +x in the
/// horizontal plane, elevation measured downward from the horizontal.
inline Vec3 branch_direction(double azimuth_deg, double elevation_deg) {
    const double az = deg_to_rad(azimuth_deg);
    const double el = deg_to_rad(elevation_deg);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), -std::sin(el)};
}

/// Lambertian order n for a given semi-angle at half power: cos^n(semi) = 1/2.
inline double lambertian_mode(double semi_angle_deg) {
    if (!(semi_angle_deg > 0.0 && semi_angle_deg <= 60.0)) {
        throw ConfigError("semi-angle must lie in (0, 60] degrees");
    }
    return -std::log(2.0) / std::log(std::cos(deg_to_rad(semi_angle_deg)));
}

struct AdtBranch {
    double azimuth_deg = 0.0;
    double elevation_deg = 90.0;
    double semi_angle_deg = 5.0;
    double power_w = 4e-3;
    Wavelength wavelength = Wavelength::L1;

    Vec3 direction() const { return branch_direction(azimuth_deg, elevation_deg); }
    double mode() const { return lambertian_mode(semi_angle_deg); }
};

struct Transmitter {
    std::string name;
    Vec3 position;
    std::vector<AdtBranch> branches;
};

// ---------------------------------------------------------------------------
// Receivers
// ---------------------------------------------------------------------------

enum class ReceiverKind { Wfov, Adr };

constexpr std::string_view receiver_kind_name(ReceiverKind k) {
    return k == ReceiverKind::Wfov ? "wfov" : "adr";
}

inline std::optional<ReceiverKind> parse_receiver_kind(std::string_view s) {
    if (s == "wfov") return ReceiverKind::Wfov;
    if (s == "adr") return ReceiverKind::Adr;
    return std::nullopt;
}

struct DetectorBranch {
    Vec3 normal{0, 0, 1};
    double fov_deg = 90.0;
};

/// Receiver front-end parameters. None of these are given for the
/// reference deployment; the defaults are the frozen calibration in
/// data/calibration.json (see calibration.hpp for how it was obtained).
struct ReceiverCalibration {
    double detector_area_m2 = 20e-6;
    double responsivity_a_per_w = 0.4;
    double bandwidth_hz = 5e9;
    double preamp_density_a_per_sqrt_hz = 4.96e-12;
    /// Ambient irradiance seen by a detector with a full hemispherical view.
    /// Background power scales with sin^2(FOV).
    double ambient_irradiance_w_per_m2 = 5e-3;
    double wfov_fov_deg = 90.0;
    double adr_fov_deg = 5.0;

    friend bool operator==(const ReceiverCalibration&, const ReceiverCalibration&) = default;
};

struct Receiver {
    std::string name;
    Vec3 position;
    ReceiverKind kind = ReceiverKind::Wfov;
    std::vector<DetectorBranch> branches;
    double area_m2 = 20e-6;
    double responsivity_a_per_w = 0.4;
    double bandwidth_hz = 5e9;
    double preamp_density_a_per_sqrt_hz = 2e-12;
    double ambient_irradiance_w_per_m2 = 0.0;

    /// Optical background power collected by one branch.
    double background_power_w(std::size_t branch) const {
        const double s = std::sin(deg_to_rad(std::min(branches.at(branch).fov_deg, 90.0)));
        return ambient_irradiance_w_per_m2 * area_m2 * s * s;
    }
};

/// Builds a receiver of the given kind. ADR branches get one detector aimed at
/// each transmitter position, in transmitter order.
inline Receiver make_receiver(std::string name, Vec3 position, ReceiverKind kind,
                              const ReceiverCalibration& cal,
                              const std::vector<Transmitter>& transmitters) {
    Receiver rx;
    rx.name = std::move(name);
    rx.position = position;
    rx.kind = kind;
    rx.area_m2 = cal.detector_area_m2;
    rx.responsivity_a_per_w = cal.responsivity_a_per_w;
    rx.bandwidth_hz = cal.bandwidth_hz;
    rx.preamp_density_a_per_sqrt_hz = cal.preamp_density_a_per_sqrt_hz;
    rx.ambient_irradiance_w_per_m2 = cal.ambient_irradiance_w_per_m2;
    if (kind == ReceiverKind::Wfov) {
        rx.branches.push_back({Vec3{0, 0, 1}, cal.wfov_fov_deg});
    } else {
        for (const auto& tx : transmitters) {
            const Vec3 d = tx.position - position;
            if (!(norm(d) > 0.0)) throw GeometryError("ADR branch cannot aim at a coincident transmitter");
            rx.branches.push_back({normalized(d), cal.adr_fov_deg});
        }
    }
    return rx;
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct SimulationControls {
    int max_order = 2;
    double bin_width_s = 0.1e-9;
    /// Treat same-wavelength power from other transmitters as background.
    bool interference = false;
};

struct Scenario {
    std::string name;
    Room room;
    std::vector<Transmitter> transmitters;
    std::vector<Receiver> receivers;
    ReceiverCalibration calibration;
    SimulationControls controls;
};

/// Throws ConfigError describing the first problem found.
inline void validate(const Scenario& s) {
    const Room& r = s.room;
    if (!(r.length > 0.0 && r.width > 0.0 && r.height > 0.0)) throw ConfigError("room dimensions must be positive");
    if (!(r.first_order_resolution > 0.0) || !(r.second_order_resolution > 0.0)) {
        throw ConfigError("element resolutions must be positive");
    }
    for (Surface sf : kAllSurfaces) {
        const double rho = r.reflectance.of(sf);
        if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("reflectances must lie in [0, 1]");
    }
    if (s.controls.max_order < 0 || s.controls.max_order > 2) throw ConfigError("max reflection order must be 0, 1 or 2");
    if (!(s.controls.bin_width_s > 0.0)) throw ConfigError("time-bin width must be positive");

    auto inside = [&](const Vec3& p) {
        return is_finite(p) && p.x >= 0.0 && p.x <= r.length && p.y >= 0.0 && p.y <= r.width && p.z >= 0.0 &&
               p.z <= r.height;
    };
    for (const auto& tx : s.transmitters) {
        if (!inside(tx.position)) throw ConfigError("transmitter " + tx.name + " lies outside the room");
        if (tx.branches.empty()) throw ConfigError("transmitter " + tx.name + " has no branches");
        for (std::size_t i = 0; i < tx.branches.size(); ++i) {
            const auto& b = tx.branches[i];
            if (!(b.power_w >= 0.0) || !std::isfinite(b.power_w)) throw ConfigError("branch power must be >= 0");
            if (!std::isfinite(b.azimuth_deg) || !std::isfinite(b.elevation_deg)) {
                throw ConfigError("branch angles must be finite");
            }
            (void)b.mode();
            for (std::size_t j = 0; j < i; ++j) {
                if (tx.branches[j].wavelength == b.wavelength) {
                    throw ConfigError("transmitter " + tx.name + " reuses a wavelength across branches");
                }
            }
        }
    }
    for (const auto& rx : s.receivers) {
        if (!inside(rx.position)) throw ConfigError("receiver " + rx.name + " lies outside the room");
        if (rx.branches.empty()) throw ConfigError("receiver " + rx.name + " has no detector branches");
        if (!(rx.area_m2 > 0.0) || !(rx.responsivity_a_per_w > 0.0) || !(rx.bandwidth_hz > 0.0)) {
            throw ConfigError("receiver " + rx.name + ": area, responsivity and bandwidth must be positive");
        }
        if (!(rx.preamp_density_a_per_sqrt_hz >= 0.0) || !(rx.ambient_irradiance_w_per_m2 >= 0.0)) {
            throw ConfigError("receiver " + rx.name + ": noise parameters must be >= 0");
        }
        for (const auto& b : rx.branches) {
            if (!is_finite(b.normal) || std::abs(norm(b.normal) - 1.0) > 1e-9) {
                throw ConfigError("receiver " + rx.name + ": branch normals must be unit vectors");
            }
            if (!(b.fov_deg > 0.0 && b.fov_deg <= 90.0)) throw ConfigError("FOV must lie in (0, 90] degrees");
        }
    }
}

/// Rebuilds every receiver as `kind` at its current position, using the
/// scenario calibration.
inline Scenario with_receiver_kind(Scenario s, ReceiverKind kind) {
    for (auto& rx : s.receivers) {
        rx = make_receiver(rx.name, rx.position, kind, s.calibration, s.transmitters);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Branch-to-receiver targeting
// ---------------------------------------------------------------------------

/// LOS radiant intensity of a branch toward a point, per unit transmit power
/// and per square meter at the point: (n+1)/(2pi) cos^n(phi) / d^2.
inline double los_intensity(const Vec3& origin, const AdtBranch& b, const Vec3& point) {
    const Vec3 v = point - origin;
    const double d = norm(v);
    if (!(d > 0.0)) return 0.0;
    const double c = dot(v, b.direction()) / d;
    if (c <= 0.0) return 0.0;
    const double n = b.mode();
    return (n + 1.0) / (2.0 * std::numbers::pi) * std::pow(c, n) / (d * d);
}

/// Target receiver per branch of `tx`: the injective branch-to-receiver map
/// maximizing summed LOS intensity. Enumeration order is lexicographic over
/// receiver indices, so the first maximum wins ties. Branches beyond the
/// receiver count are left without a target.
inline std::vector<std::optional<std::size_t>> target_receivers(const Transmitter& tx,
                                                               const std::vector<Receiver>& receivers) {
    const std::size_t nb = tx.branches.size();
    const std::size_t nr = receivers.size();
    std::vector<std::vector<double>> w(nb, std::vector<double>(nr));
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t r = 0; r < nr; ++r) w[b][r] = los_intensity(tx.position, tx.branches[b], receivers[r].position);
    }

    const std::size_t assigned = std::min(nb, nr);
    std::vector<std::optional<std::size_t>> best(nb), cur(nb);
    double best_score = -1.0;
    std::vector<bool> used(nr, false);
    // Branches are visited in order; when nb > nr, a branch may be skipped
    // as long as enough branches remain to fill every receiver.
    auto rec = [&](auto&& self, std::size_t b, std::size_t placed, double score) -> void {
        if (placed == assigned) {
            if (score > best_score) {
                best_score = score;
                best = cur;
            }
            return;
        }
        if (b == nb) return;
        for (std::size_t r = 0; r < nr; ++r) {
            if (used[r]) continue;
            used[r] = true;
            cur[b] = r;
            self(self, b + 1, placed + 1, score + w[b][r]);
            cur[b].reset();
            used[r] = false;
        }
        if (nb - b - 1 >= assigned - placed) self(self, b + 1, placed, score);
    };
    rec(rec, 0, 0, 0.0);
    return best;
}

// ---------------------------------------------------------------------------
// Built-in deployment
// ---------------------------------------------------------------------------

/// The four-rack, four-ADT downlink deployment with the reference branch angles.
inline Scenario paper_default_scenario(ReceiverKind kind = ReceiverKind::Adr,
                                       const ReceiverCalibration& cal = ReceiverCalibration{}) {
    Scenario s;
    s.name = "paper";
    s.calibration = cal;

    struct Row {
        Vec3 pos;
        std::array<double, 4> az;
        std::array<double, 4> el;
    };
    const std::array<Row, 4> rows = {{
        {{4, 1, 3}, {167, 207, 231, 243}, {19, 18, 13, 9.5}},
        {{4, 3, 3}, {90, 90, 270, 270}, {18.5, 45, 45, 18.5}},
        {{4, 5, 3}, {90, 90, 90, 90}, {10, 15, 31, 74}},
        {{4, 7, 3}, {124, 143, 180, 216}, {11, 16, 20, 16}},
    }};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Transmitter tx{"ADT" + std::to_string(i + 1), rows[i].pos, {}};
        for (std::size_t k = 0; k < 4; ++k) {
            tx.branches.push_back({rows[i].az[k], rows[i].el[k], 5.0, 4e-3, kAllWavelengths[k]});
        }
        s.transmitters.push_back(std::move(tx));
    }

    const std::array<Vec3, 4> rx_pos = {{{1.3, 1.6, 2}, {4, 4, 2}, {4, 6.3, 2}, {1.3, 5, 2}}};
    for (std::size_t j = 0; j < rx_pos.size(); ++j) {
        s.receivers.push_back(make_receiver("RX" + std::to_string(j + 1), rx_pos[j], kind, cal, s.transmitters));
    }
    return s;
}

/// Azimuth/elevation (degrees) that point a ceiling branch at `origin` toward `target`.
inline std::pair<double, double> aim_angles(const Vec3& origin, const Vec3& target) {
    const Vec3 v = target - origin;
    double az = rad_to_deg(std::atan2(v.y, v.x));
    if (az < 0.0) az += 360.0;
    const double el = rad_to_deg(std::atan2(-v.z, std::hypot(v.x, v.y)));
    return {az, el};
}

/// Same deployment with every branch re-aimed exactly at its target receiver.
inline Scenario paper_aimed_scenario(ReceiverKind kind = ReceiverKind::Adr,
                                     const ReceiverCalibration& cal = ReceiverCalibration{}) {
    Scenario s = paper_default_scenario(kind, cal);
    s.name = "paper-aimed";
    for (auto& tx : s.transmitters) {
        const auto targets = target_receivers(tx, s.receivers);
        for (std::size_t k = 0; k < tx.branches.size(); ++k) {
            if (!targets[k]) continue;
            const auto [az, el] = aim_angles(tx.position, s.receivers[*targets[k]].position);
            tx.branches[k].azimuth_deg = az;
            tx.branches[k].elevation_deg = el;
        }
    }
    return s;
}

}  // namespace owcdc
