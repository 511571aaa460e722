#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "owcdc/channel.hpp"
#include "owcdc/error.hpp"
#include "owcdc/linkbudget.hpp"
#include "owcdc/pon.hpp"
#include "owcdc/power.hpp"
#include "owcdc/scene.hpp"

namespace owcdc::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    }
    return v;
}

inline std::size_t parse_index(std::string_view s, std::string_view what) {
    std::size_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    }
    return v;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
    if (!out) throw ConfigError("write failed for " + path);
}

inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") != std::string::npos) throw ConfigError("name '" + s + "' cannot be written to CSV");
    return s;
}

/// Comment lines (starting with '#') and comma-separated records.
struct CsvText {
    std::vector<std::string> comments;
    std::vector<std::vector<std::string>> rows;
};

inline CsvText split_csv(std::string_view text) {
    CsvText out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = end + 1;
        if (line.empty()) continue;
        if (line.front() == '#') {
            out.comments.emplace_back(line.substr(1));
            continue;
        }
        std::vector<std::string> cells;
        std::size_t c = 0;
        while (true) {
            const std::size_t comma = line.find(',', c);
            cells.emplace_back(line.substr(c, comma == std::string_view::npos ? std::string_view::npos : comma - c));
            if (comma == std::string_view::npos) break;
            c = comma + 1;
        }
        out.rows.push_back(std::move(cells));
    }
    return out;
}

/// key=value pairs from a "# owcdc <kind> k=v ..." header comment.
inline std::vector<std::pair<std::string, std::string>> header_fields(const CsvText& csv, std::string_view kind) {
    for (const auto& c : csv.comments) {
        std::istringstream ss(c);
        std::string tag, k;
        ss >> tag >> k;
        if (tag != "owcdc" || k != kind) continue;
        std::vector<std::pair<std::string, std::string>> out;
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw ConfigError("malformed header field '" + tok + "'");
            out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
        }
        const bool versioned = std::any_of(out.begin(), out.end(), [](const auto& kv) {
            return kv.first == "schema_version" && kv.second == std::to_string(kSchemaVersion);
        });
        if (!versioned) throw ConfigError("unsupported or missing schema_version in " + std::string(kind) + " header");
        return out;
    }
    throw ConfigError("missing '# owcdc " + std::string(kind) + "' header");
}

inline std::string field(const std::vector<std::pair<std::string, std::string>>& fs, std::string_view key) {
    for (const auto& [k, v] : fs)
        if (k == key) return v;
    throw ConfigError("header lacks " + std::string(key));
}

inline void expect_columns(const CsvText& csv, std::initializer_list<std::string_view> cols) {
    if (csv.rows.empty()) throw ConfigError("CSV has no column header");
    const auto& h = csv.rows.front();
    if (h.size() != cols.size() || !std::equal(h.begin(), h.end(), cols.begin())) {
        throw ConfigError("unexpected CSV columns");
    }
    for (std::size_t i = 1; i < csv.rows.size(); ++i) {
        if (csv.rows[i].size() != cols.size()) throw ConfigError("CSV row " + std::to_string(i) + " has wrong width");
    }
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view ctx) {
    if (!j.is_object()) throw ConfigError(std::string(ctx) + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown key '" + k + "' in " + std::string(ctx));
        }
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("wrong type for '") + key + "'");
    }
}

template <class T>
T get_req(const Json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing '") + key + "'");
    return get_or<T>(j, key, T{});
}

inline void check_schema(const Json& j) {
    if (!j.is_object() || !j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
        j.at("schema_version").get<int>() != kSchemaVersion) {
        throw ConfigError("unsupported or missing schema_version");
    }
}

inline Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from(const Json& j, std::string_view ctx) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
        throw ConfigError(std::string(ctx) + " must be [x, y, z]");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

inline Json to_json(const ReceiverCalibration& c) {
    return {{"detector_area_m2", c.detector_area_m2},
            {"responsivity_a_per_w", c.responsivity_a_per_w},
            {"bandwidth_hz", c.bandwidth_hz},
            {"preamp_density_a_per_sqrt_hz", c.preamp_density_a_per_sqrt_hz},
            {"ambient_irradiance_w_per_m2", c.ambient_irradiance_w_per_m2},
            {"wfov_fov_deg", c.wfov_fov_deg},
            {"adr_fov_deg", c.adr_fov_deg}};
}

inline ReceiverCalibration calibration_from(const Json& j) {
    check_keys(j,
               {"detector_area_m2", "responsivity_a_per_w", "bandwidth_hz", "preamp_density_a_per_sqrt_hz",
                "ambient_irradiance_w_per_m2", "wfov_fov_deg", "adr_fov_deg"},
               "calibration");
    ReceiverCalibration d, c;
    c.detector_area_m2 = get_or(j, "detector_area_m2", d.detector_area_m2);
    c.responsivity_a_per_w = get_or(j, "responsivity_a_per_w", d.responsivity_a_per_w);
    c.bandwidth_hz = get_or(j, "bandwidth_hz", d.bandwidth_hz);
    c.preamp_density_a_per_sqrt_hz = get_or(j, "preamp_density_a_per_sqrt_hz", d.preamp_density_a_per_sqrt_hz);
    c.ambient_irradiance_w_per_m2 = get_or(j, "ambient_irradiance_w_per_m2", d.ambient_irradiance_w_per_m2);
    c.wfov_fov_deg = get_or(j, "wfov_fov_deg", d.wfov_fov_deg);
    c.adr_fov_deg = get_or(j, "adr_fov_deg", d.adr_fov_deg);
    return c;
}

inline Json to_json(const Scenario& s) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = s.name;
    const Room& r = s.room;
    j["room"] = {{"length_m", r.length},
                 {"width_m", r.width},
                 {"height_m", r.height},
                 {"reflectance",
                  {{"floor", r.reflectance.floor},
                   {"ceiling", r.reflectance.ceiling},
                   {"x_min", r.reflectance.x_min},
                   {"x_max", r.reflectance.x_max},
                   {"y_min", r.reflectance.y_min},
                   {"y_max", r.reflectance.y_max}}},
                 {"first_order_resolution_m", r.first_order_resolution},
                 {"second_order_resolution_m", r.second_order_resolution}};
    j["controls"] = {{"max_order", s.controls.max_order},
                     {"bin_width_s", s.controls.bin_width_s},
                     {"interference", s.controls.interference}};
    j["calibration"] = to_json(s.calibration);
    j["transmitters"] = Json::array();
    for (const auto& tx : s.transmitters) {
        Json t{{"name", tx.name}, {"position", vec_json(tx.position)}, {"branches", Json::array()}};
        for (const auto& b : tx.branches) {
            t["branches"].push_back({{"azimuth_deg", b.azimuth_deg},
                                     {"elevation_deg", b.elevation_deg},
                                     {"semi_angle_deg", b.semi_angle_deg},
                                     {"power_w", b.power_w},
                                     {"wavelength", std::string(wavelength_name(b.wavelength))}});
        }
        j["transmitters"].push_back(std::move(t));
    }
    j["receivers"] = Json::array();
    for (const auto& rx : s.receivers) {
        Json o{{"name", rx.name},
               {"position", vec_json(rx.position)},
               {"kind", std::string(receiver_kind_name(rx.kind))},
               {"area_m2", rx.area_m2},
               {"responsivity_a_per_w", rx.responsivity_a_per_w},
               {"bandwidth_hz", rx.bandwidth_hz},
               {"preamp_density_a_per_sqrt_hz", rx.preamp_density_a_per_sqrt_hz},
               {"ambient_irradiance_w_per_m2", rx.ambient_irradiance_w_per_m2},
               {"branches", Json::array()}};
        for (const auto& b : rx.branches) o["branches"].push_back({{"normal", vec_json(b.normal)}, {"fov_deg", b.fov_deg}});
        j["receivers"].push_back(std::move(o));
    }
    return j;
}

/// Receivers may omit everything but name, position and kind; missing
/// front-end values and branches come from the scenario calibration.
inline Scenario scenario_from(const Json& j) {
    check_schema(j);
    check_keys(j, {"schema_version", "name", "room", "controls", "calibration", "transmitters", "receivers"}, "scenario");
    Scenario s;
    s.name = get_or<std::string>(j, "name", "scenario");
    if (j.contains("room")) {
        const Json& r = j.at("room");
        check_keys(r,
                   {"length_m", "width_m", "height_m", "reflectance", "first_order_resolution_m",
                    "second_order_resolution_m"},
                   "room");
        s.room.length = get_or(r, "length_m", s.room.length);
        s.room.width = get_or(r, "width_m", s.room.width);
        s.room.height = get_or(r, "height_m", s.room.height);
        s.room.first_order_resolution = get_or(r, "first_order_resolution_m", s.room.first_order_resolution);
        s.room.second_order_resolution = get_or(r, "second_order_resolution_m", s.room.second_order_resolution);
        if (r.contains("reflectance")) {
            const Json& f = r.at("reflectance");
            check_keys(f, {"floor", "ceiling", "x_min", "x_max", "y_min", "y_max"}, "reflectance");
            auto& rf = s.room.reflectance;
            rf.floor = get_or(f, "floor", rf.floor);
            rf.ceiling = get_or(f, "ceiling", rf.ceiling);
            rf.x_min = get_or(f, "x_min", rf.x_min);
            rf.x_max = get_or(f, "x_max", rf.x_max);
            rf.y_min = get_or(f, "y_min", rf.y_min);
            rf.y_max = get_or(f, "y_max", rf.y_max);
        }
    }
    if (j.contains("controls")) {
        const Json& c = j.at("controls");
        check_keys(c, {"max_order", "bin_width_s", "interference"}, "controls");
        s.controls.max_order = get_or(c, "max_order", s.controls.max_order);
        s.controls.bin_width_s = get_or(c, "bin_width_s", s.controls.bin_width_s);
        s.controls.interference = get_or(c, "interference", s.controls.interference);
    }
    if (j.contains("calibration")) s.calibration = calibration_from(j.at("calibration"));

    for (const Json& t : get_req<Json>(j, "transmitters")) {
        check_keys(t, {"name", "position", "branches"}, "transmitter");
        Transmitter tx{get_req<std::string>(t, "name"), vec_from(get_req<Json>(t, "position"), "position"), {}};
        for (const Json& b : get_req<Json>(t, "branches")) {
            check_keys(b, {"azimuth_deg", "elevation_deg", "semi_angle_deg", "power_w", "wavelength"}, "branch");
            AdtBranch br;
            br.azimuth_deg = get_req<double>(b, "azimuth_deg");
            br.elevation_deg = get_req<double>(b, "elevation_deg");
            br.semi_angle_deg = get_or(b, "semi_angle_deg", br.semi_angle_deg);
            br.power_w = get_or(b, "power_w", br.power_w);
            const auto w = parse_wavelength(get_req<std::string>(b, "wavelength"));
            if (!w) throw ConfigError("unknown wavelength in transmitter " + tx.name);
            br.wavelength = *w;
            tx.branches.push_back(br);
        }
        s.transmitters.push_back(std::move(tx));
    }
    for (const Json& r : get_req<Json>(j, "receivers")) {
        check_keys(r,
                   {"name", "position", "kind", "area_m2", "responsivity_a_per_w", "bandwidth_hz",
                    "preamp_density_a_per_sqrt_hz", "ambient_irradiance_w_per_m2", "branches"},
                   "receiver");
        const auto kind = parse_receiver_kind(get_or<std::string>(r, "kind", "adr"));
        if (!kind) throw ConfigError("receiver kind must be wfov or adr");
        Receiver rx = make_receiver(get_req<std::string>(r, "name"), vec_from(get_req<Json>(r, "position"), "position"),
                                    *kind, s.calibration, s.transmitters);
        rx.area_m2 = get_or(r, "area_m2", rx.area_m2);
        rx.responsivity_a_per_w = get_or(r, "responsivity_a_per_w", rx.responsivity_a_per_w);
        rx.bandwidth_hz = get_or(r, "bandwidth_hz", rx.bandwidth_hz);
        rx.preamp_density_a_per_sqrt_hz = get_or(r, "preamp_density_a_per_sqrt_hz", rx.preamp_density_a_per_sqrt_hz);
        rx.ambient_irradiance_w_per_m2 = get_or(r, "ambient_irradiance_w_per_m2", rx.ambient_irradiance_w_per_m2);
        if (r.contains("branches")) {
            rx.branches.clear();
            for (const Json& b : r.at("branches")) {
                check_keys(b, {"normal", "fov_deg"}, "detector branch");
                rx.branches.push_back({vec_from(get_req<Json>(b, "normal"), "normal"), get_req<double>(b, "fov_deg")});
            }
        }
        s.receivers.push_back(std::move(rx));
    }
    validate(s);
    return s;
}

inline Scenario parse_scenario(std::string_view text) { return scenario_from(parse_json(text)); }
inline std::string write_scenario(const Scenario& s) { return dump(to_json(s)); }

// ---------------------------------------------------------------------------
// Link budget table
// ---------------------------------------------------------------------------

/// One output row. Branch numbers are 1-based.
struct LinkRow {
    std::string tx;
    std::size_t branch = 1;
    std::string rx;
    std::size_t rx_branch = 1;
    double pr_w = 0.0;
    double snr_db = 0.0;
    double ber = 0.5;
    double capacity_bps = 0.0;
    std::optional<double> delay_spread_s;

    friend bool operator==(const LinkRow&, const LinkRow&) = default;
};

struct LinkTable {
    std::string scenario;
    std::string receiver;
    std::vector<LinkRow> rows;

    friend bool operator==(const LinkTable&, const LinkTable&) = default;
};

inline double to_db(double ratio) { return 10.0 * std::log10(ratio); }

/// `receiver` labels the table; it is the kind of the scenario's receivers.
inline LinkTable link_table(const Scenario& s, const DownlinkTable& t) {
    LinkTable out{t.scenario, s.receivers.empty() ? "" : std::string(receiver_kind_name(s.receivers.front().kind)), {}};
    for (const auto& l : t.links) {
        out.rows.push_back({s.transmitters.at(l.tx).name, l.branch + 1, s.receivers.at(l.rx).name, l.rx_branch + 1,
                            l.received_power_w, to_db(l.snr), l.ber, l.capacity_bps, l.delay_spread_s});
    }
    return out;
}

inline std::string write_links_csv(const LinkTable& t) {
    std::string out = "# owcdc links schema_version=1 scenario=" + csv_cell(t.scenario) + " receiver=" + t.receiver + "\n";
    out += "tx,branch,rx,rx_branch,Pr_W,snr_dB,ber,capacity_bps,delay_spread_s\n";
    for (const auto& r : t.rows) {
        out += csv_cell(r.tx) + "," + std::to_string(r.branch) + "," + csv_cell(r.rx) + "," +
               std::to_string(r.rx_branch) + "," + fmt(r.pr_w) + "," + fmt(r.snr_db) + "," + fmt(r.ber) + "," +
               fmt(r.capacity_bps) + "," + (r.delay_spread_s ? fmt(*r.delay_spread_s) : "") + "\n";
    }
    return out;
}

inline LinkTable parse_links_csv(std::string_view text) {
    const CsvText csv = split_csv(text);
    const auto h = header_fields(csv, "links");
    expect_columns(csv, {"tx", "branch", "rx", "rx_branch", "Pr_W", "snr_dB", "ber", "capacity_bps", "delay_spread_s"});
    LinkTable t{field(h, "scenario"), field(h, "receiver"), {}};
    for (std::size_t i = 1; i < csv.rows.size(); ++i) {
        const auto& c = csv.rows[i];
        LinkRow r{c[0],
                  parse_index(c[1], "branch"),
                  c[2],
                  parse_index(c[3], "rx_branch"),
                  parse_double(c[4], "Pr_W"),
                  parse_double(c[5], "snr_dB"),
                  parse_double(c[6], "ber"),
                  parse_double(c[7], "capacity_bps"),
                  std::nullopt};
        if (!c[8].empty()) r.delay_spread_s = parse_double(c[8], "delay_spread_s");
        t.rows.push_back(std::move(r));
    }
    return t;
}

// JSON has no infinities; a zero-SNR row stores snr_dB as null.
inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string write_links_json(const LinkTable& t) {
    Json j{{"schema_version", kSchemaVersion}, {"scenario", t.scenario}, {"receiver", t.receiver}, {"links", Json::array()}};
    for (const auto& r : t.rows) {
        j["links"].push_back({{"tx", r.tx},
                              {"branch", r.branch},
                              {"rx", r.rx},
                              {"rx_branch", r.rx_branch},
                              {"Pr_W", r.pr_w},
                              {"snr_dB", finite_or_null(r.snr_db)},
                              {"ber", r.ber},
                              {"capacity_bps", r.capacity_bps},
                              {"delay_spread_s", r.delay_spread_s ? Json(*r.delay_spread_s) : Json(nullptr)}});
    }
    return dump(j);
}

inline LinkTable parse_links_json(std::string_view text) {
    const Json j = parse_json(text);
    check_schema(j);
    check_keys(j, {"schema_version", "scenario", "receiver", "links"}, "links file");
    LinkTable t{get_req<std::string>(j, "scenario"), get_req<std::string>(j, "receiver"), {}};
    for (const Json& l : get_req<Json>(j, "links")) {
        check_keys(l, {"tx", "branch", "rx", "rx_branch", "Pr_W", "snr_dB", "ber", "capacity_bps", "delay_spread_s"}, "link");
        LinkRow r;
        r.tx = get_req<std::string>(l, "tx");
        r.branch = get_req<std::size_t>(l, "branch");
        r.rx = get_req<std::string>(l, "rx");
        r.rx_branch = get_req<std::size_t>(l, "rx_branch");
        r.pr_w = get_req<double>(l, "Pr_W");
        r.snr_db = l.at("snr_dB").is_null() ? -std::numeric_limits<double>::infinity() : get_req<double>(l, "snr_dB");
        r.ber = get_req<double>(l, "ber");
        r.capacity_bps = get_req<double>(l, "capacity_bps");
        if (l.contains("delay_spread_s") && !l.at("delay_spread_s").is_null()) r.delay_spread_s = get_req<double>(l, "delay_spread_s");
        t.rows.push_back(std::move(r));
    }
    return t;
}

/// ADR against WFOV capacity on matching rows of two tables.
inline std::string write_comparison_csv(const LinkTable& adr, const LinkTable& wfov) {
    if (adr.rows.size() != wfov.rows.size()) throw ConfigError("receiver tables differ in length");
    std::string out = "# owcdc comparison schema_version=1 scenario=" + csv_cell(adr.scenario) + "\n";
    out += "tx,branch,rx,adr_capacity_bps,wfov_capacity_bps,adr_not_worse\n";
    for (std::size_t i = 0; i < adr.rows.size(); ++i) {
        const auto& a = adr.rows[i];
        const auto& w = wfov.rows[i];
        if (a.tx != w.tx || a.branch != w.branch || a.rx != w.rx) throw ConfigError("receiver tables are not aligned");
        out += csv_cell(a.tx) + "," + std::to_string(a.branch) + "," + csv_cell(a.rx) + "," + fmt(a.capacity_bps) + "," +
               fmt(w.capacity_bps) + "," + (a.capacity_bps >= w.capacity_bps ? "1" : "0") + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Impulse response and power matrix
// ---------------------------------------------------------------------------

struct ImpulseFile {
    std::string tx;
    std::size_t branch = 1;
    std::string rx;
    std::size_t rx_branch = 1;
    ImpulseResponse response;
};

inline std::string write_impulse_csv(const ImpulseFile& f) {
    std::string out = "# owcdc impulse schema_version=1 tx=" + csv_cell(f.tx) + " branch=" + std::to_string(f.branch) +
                      " rx=" + csv_cell(f.rx) + " rx_branch=" + std::to_string(f.rx_branch) +
                      " bin_width_s=" + fmt(f.response.bin_width_s) + " origin_s=" + fmt(f.response.origin_s) + "\n";
    out += "time_s,power_W\n";
    for (std::size_t i = 0; i < f.response.bins.size(); ++i) {
        out += fmt(f.response.bin_start(i)) + "," + fmt(f.response.bins[i]) + "\n";
    }
    return out;
}

inline ImpulseFile parse_impulse_csv(std::string_view text) {
    const CsvText csv = split_csv(text);
    const auto h = header_fields(csv, "impulse");
    expect_columns(csv, {"time_s", "power_W"});
    ImpulseFile f;
    f.tx = field(h, "tx");
    f.branch = parse_index(field(h, "branch"), "branch");
    f.rx = field(h, "rx");
    f.rx_branch = parse_index(field(h, "rx_branch"), "rx_branch");
    f.response.bin_width_s = parse_double(field(h, "bin_width_s"), "bin_width_s");
    f.response.origin_s = parse_double(field(h, "origin_s"), "origin_s");
    for (std::size_t i = 1; i < csv.rows.size(); ++i) {
        const double t = parse_double(csv.rows[i][0], "time_s");
        if (t != f.response.bin_start(i - 1)) throw ConfigError("impulse time column is not the bin grid");
        f.response.bins.push_back(parse_double(csv.rows[i][1], "power_W"));
    }
    return f;
}

struct MatrixRow {
    std::string tx;
    std::size_t branch = 1;
    std::string rx;
    std::size_t rx_branch = 1;
    double los_w = 0.0;
    double first_order_w = 0.0;
    double second_order_w = 0.0;
    double total_w = 0.0;
    double interference_w = 0.0;

    friend bool operator==(const MatrixRow&, const MatrixRow&) = default;
};

inline std::vector<MatrixRow> matrix_rows(const Scenario& s, const PowerMatrix& m) {
    std::vector<MatrixRow> out;
    for (const auto& [k, p] : m.entries) {
        out.push_back({s.transmitters.at(k.tx).name, k.branch + 1, s.receivers.at(k.rx).name, k.rx_branch + 1, p.los_w,
                       p.first_order_w, p.second_order_w, p.total_w(), p.interference_w});
    }
    return out;
}

inline std::string write_matrix_csv(const std::vector<MatrixRow>& rows) {
    std::string out = "# owcdc power_matrix schema_version=1\n";
    out += "tx,branch,rx,rx_branch,los_W,first_order_W,second_order_W,total_W,interference_W\n";
    for (const auto& r : rows) {
        out += csv_cell(r.tx) + "," + std::to_string(r.branch) + "," + csv_cell(r.rx) + "," +
               std::to_string(r.rx_branch) + "," + fmt(r.los_w) + "," + fmt(r.first_order_w) + "," +
               fmt(r.second_order_w) + "," + fmt(r.total_w) + "," + fmt(r.interference_w) + "\n";
    }
    return out;
}

inline std::vector<MatrixRow> parse_matrix_csv(std::string_view text) {
    const CsvText csv = split_csv(text);
    (void)header_fields(csv, "power_matrix");
    expect_columns(csv, {"tx", "branch", "rx", "rx_branch", "los_W", "first_order_W", "second_order_W", "total_W",
                         "interference_W"});
    std::vector<MatrixRow> out;
    for (std::size_t i = 1; i < csv.rows.size(); ++i) {
        const auto& c = csv.rows[i];
        out.push_back({c[0], parse_index(c[1], "branch"), c[2], parse_index(c[3], "rx_branch"), parse_double(c[4], "los_W"),
                       parse_double(c[5], "first_order_W"), parse_double(c[6], "second_order_W"),
                       parse_double(c[7], "total_W"), parse_double(c[8], "interference_W")});
    }
    return out;
}

inline std::string write_matrix_json(const std::vector<MatrixRow>& rows) {
    Json j{{"schema_version", kSchemaVersion}, {"entries", Json::array()}};
    for (const auto& r : rows) {
        j["entries"].push_back({{"tx", r.tx},
                                {"branch", r.branch},
                                {"rx", r.rx},
                                {"rx_branch", r.rx_branch},
                                {"los_W", r.los_w},
                                {"first_order_W", r.first_order_w},
                                {"second_order_W", r.second_order_w},
                                {"total_W", r.total_w},
                                {"interference_W", r.interference_w}});
    }
    return dump(j);
}

inline std::vector<MatrixRow> parse_matrix_json(std::string_view text) {
    const Json j = parse_json(text);
    check_schema(j);
    std::vector<MatrixRow> out;
    for (const Json& e : get_req<Json>(j, "entries")) {
        out.push_back({get_req<std::string>(e, "tx"), get_req<std::size_t>(e, "branch"), get_req<std::string>(e, "rx"),
                       get_req<std::size_t>(e, "rx_branch"), get_req<double>(e, "los_W"),
                       get_req<double>(e, "first_order_W"), get_req<double>(e, "second_order_W"),
                       get_req<double>(e, "total_W"), get_req<double>(e, "interference_W")});
    }
    return out;
}

// ---------------------------------------------------------------------------
// PON topology and assignment
// ---------------------------------------------------------------------------

inline Json to_json(const PonTopology& t) {
    auto port = [&](const PortRef& p) { return Json{{"awgr", t.awgrs.at(p.awgr).name}, {"port", p.port}}; };
    Json j{{"schema_version", kSchemaVersion}, {"wavelengths", t.wavelengths}, {"awgrs", Json::array()},
           {"nodes", Json::array()}, {"trunks", Json::array()}};
    for (const auto& a : t.awgrs) j["awgrs"].push_back({{"name", a.name}, {"size", a.size}});
    for (const auto& n : t.nodes) {
        Json o{{"name", n.name}, {"inputs", Json::array()}, {"outputs", Json::array()}};
        for (const auto& p : n.inputs) o["inputs"].push_back(port(p));
        for (const auto& p : n.outputs) o["outputs"].push_back(port(p));
        j["nodes"].push_back(std::move(o));
    }
    for (const auto& tr : t.trunks) j["trunks"].push_back({{"from", port(tr.from)}, {"to", port(tr.to)}});
    return j;
}

inline PonTopology topology_from(const Json& j) {
    check_schema(j);
    check_keys(j, {"schema_version", "wavelengths", "awgrs", "nodes", "trunks"}, "topology");
    PonTopology t;
    t.wavelengths = get_or<std::size_t>(j, "wavelengths", 4);
    for (const Json& a : get_req<Json>(j, "awgrs")) {
        check_keys(a, {"name", "size"}, "awgr");
        t.awgrs.push_back({get_req<std::string>(a, "name"), get_req<std::size_t>(a, "size")});
    }
    auto port = [&](const Json& p) {
        check_keys(p, {"awgr", "port"}, "port");
        const auto name = get_req<std::string>(p, "awgr");
        for (std::size_t i = 0; i < t.awgrs.size(); ++i)
            if (t.awgrs[i].name == name) return PortRef{i, get_req<std::size_t>(p, "port")};
        throw ConfigError("unknown AWGR " + name);
    };
    for (const Json& n : get_req<Json>(j, "nodes")) {
        check_keys(n, {"name", "inputs", "outputs"}, "node");
        PonNode node{get_req<std::string>(n, "name"), {}, {}};
        for (const Json& p : get_or<Json>(n, "inputs", Json::array())) node.inputs.push_back(port(p));
        for (const Json& p : get_or<Json>(n, "outputs", Json::array())) node.outputs.push_back(port(p));
        t.nodes.push_back(std::move(node));
    }
    for (const Json& tr : get_or<Json>(j, "trunks", Json::array())) {
        check_keys(tr, {"from", "to"}, "trunk");
        t.trunks.push_back({port(get_req<Json>(tr, "from")), port(get_req<Json>(tr, "to"))});
    }
    validate(t);
    return t;
}

inline PonTopology parse_topology(std::string_view text) { return topology_from(parse_json(text)); }
inline std::string write_topology(const PonTopology& t) { return dump(to_json(t)); }

/// Square matrix, senders down the rows; entries are 1-based wavelength
/// numbers, "-" on the diagonal and empty where no wavelength is assigned.
inline std::string write_assignment_csv(const WavelengthAssignment& a, const PonTopology& t) {
    const auto m = to_matrix(a, t.nodes.size());
    std::string out = "# owcdc assignment schema_version=1 wavelengths=" + std::to_string(t.wavelengths) +
                      " connections=" + std::to_string(a.connections()) + "\n";
    out += "sender";
    for (const auto& n : t.nodes) out += "," + csv_cell(n.name);
    out += "\n";
    for (std::size_t s = 0; s < m.size(); ++s) {
        out += t.nodes[s].name;
        for (std::size_t r = 0; r < m.size(); ++r) {
            out += ",";
            if (s == r) out += "-";
            else if (m[s][r]) out += std::to_string(*m[s][r] + 1);
        }
        out += "\n";
    }
    return out;
}

/// Reads a matrix in the layout above. Rows and columns are matched to the
/// topology by node name; the header comment is optional so hand-written
/// tables load too.
inline WavelengthMatrix parse_assignment_csv(std::string_view text, const PonTopology& t) {
    const CsvText csv = split_csv(text);
    if (csv.rows.empty()) throw ConfigError("assignment matrix is empty");
    const std::size_t n = t.nodes.size();
    const auto& head = csv.rows.front();
    if (head.size() != n + 1) throw ConfigError("assignment matrix width does not match node count");
    std::vector<std::size_t> col(n);
    for (std::size_t c = 0; c < n; ++c) {
        const auto idx = t.node_index(head[c + 1]);
        if (!idx) throw ConfigError("unknown node " + head[c + 1] + " in matrix header");
        col[c] = *idx;
    }
    if (csv.rows.size() != n + 1) throw ConfigError("assignment matrix height does not match node count");
    WavelengthMatrix m(n, std::vector<std::optional<std::size_t>>(n));
    std::vector<bool> seen(n, false);
    for (std::size_t i = 1; i <= n; ++i) {
        const auto& row = csv.rows[i];
        if (row.size() != n + 1) throw ConfigError("assignment matrix row has wrong width");
        const auto s = t.node_index(row[0]);
        if (!s || seen[*s]) throw ConfigError("bad or repeated sender " + row[0]);
        seen[*s] = true;
        for (std::size_t c = 0; c < n; ++c) {
            const std::string& cell = row[c + 1];
            if (cell == "-" || cell.empty()) continue;
            const std::size_t w = parse_index(cell, "wavelength number");
            if (w == 0) throw ConfigError("wavelength numbers start at 1");
            m[*s][col[c]] = w - 1;
        }
    }
    return m;
}

inline std::string write_assignment_json(const WavelengthAssignment& a, const PonTopology& t) {
    std::size_t pairs = t.nodes.size() * (t.nodes.size() - (t.nodes.empty() ? 0 : 1));
    Json j{{"schema_version", kSchemaVersion}, {"pairs", pairs}, {"connections", a.connections()},
           {"topology", to_json(t)}, {"entries", Json::array()}};
    j["topology"].erase("schema_version");
    for (const auto& e : a.entries) {
        Json o{{"sender", t.nodes.at(e.sender).name}, {"receiver", t.nodes.at(e.receiver).name},
               {"wavelength", e.wavelength + 1}, {"awgr", t.awgrs.at(e.awgr).name}};
        const auto r = route(t, e.sender, e.awgr, e.wavelength);
        if (r) {
            o["ports"] = {{"input", r->input_port}, {"output_awgr", t.awgrs.at(r->end_awgr).name}, {"output", r->output_port}};
        } else {
            o["ports"] = nullptr;
        }
        j["entries"].push_back(std::move(o));
    }
    return dump(j);
}

struct AssignmentFile {
    PonTopology topology;
    WavelengthAssignment assignment;
};

inline AssignmentFile parse_assignment_json(std::string_view text) {
    const Json j = parse_json(text);
    check_schema(j);
    check_keys(j, {"schema_version", "pairs", "connections", "topology", "entries"}, "assignment");
    Json tj = get_req<Json>(j, "topology");
    tj["schema_version"] = kSchemaVersion;
    AssignmentFile f{topology_from(tj), {}};
    const auto& t = f.topology;
    auto node = [&](const std::string& name) {
        const auto i = t.node_index(name);
        if (!i) throw ConfigError("unknown node " + name);
        return *i;
    };
    for (const Json& e : get_req<Json>(j, "entries")) {
        check_keys(e, {"sender", "receiver", "wavelength", "awgr", "ports"}, "entry");
        const auto w = get_req<std::size_t>(e, "wavelength");
        if (w == 0) throw ConfigError("wavelength numbers start at 1");
        const auto aname = get_req<std::string>(e, "awgr");
        std::optional<std::size_t> awgr;
        for (std::size_t i = 0; i < t.awgrs.size(); ++i)
            if (t.awgrs[i].name == aname) awgr = i;
        if (!awgr) throw ConfigError("unknown AWGR " + aname);
        f.assignment.entries.push_back(
            {node(get_req<std::string>(e, "sender")), node(get_req<std::string>(e, "receiver")), w - 1, *awgr});
    }
    return f;
}

inline std::string write_violations_csv(const std::vector<Violation>& vs, const PonTopology& t) {
    std::string out = "# owcdc violations schema_version=1\nkind,sender,receiver,message\n";
    auto name = [&](std::size_t i) { return i < t.nodes.size() ? t.nodes[i].name : "#" + std::to_string(i); };
    for (const auto& v : vs) {
        std::string msg = v.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        out += std::string(violation_name(v.kind)) + "," + name(v.sender) + "," + name(v.receiver) + "," + msg + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Power report
// ---------------------------------------------------------------------------

inline std::string write_power_csv(const PowerReport& r) {
    std::string out = "# owcdc power schema_version=1\ndesign,term,unit_W,count,total_W\n";
    for (const auto& t : r.baseline_terms)
        out += "baseline," + t.name + "," + fmt(t.unit_w) + "," + fmt(t.count) + "," + fmt(t.total_w) + "\n";
    for (const auto& t : r.proposed_terms)
        out += "proposed," + t.name + "," + fmt(t.unit_w) + "," + fmt(t.count) + "," + fmt(t.total_w) + "\n";
    out += "baseline,total,,," + fmt(r.baseline_w) + "\n";
    out += "proposed,total,,," + fmt(r.proposed_w) + "\n";
    out += "comparison,savings_fraction,,," + fmt(r.savings_fraction) + "\n";
    return out;
}

inline PowerReport parse_power_csv(std::string_view text) {
    const CsvText csv = split_csv(text);
    (void)header_fields(csv, "power");
    expect_columns(csv, {"design", "term", "unit_W", "count", "total_W"});
    PowerReport r;
    bool have_b = false, have_p = false, have_s = false;
    for (std::size_t i = 1; i < csv.rows.size(); ++i) {
        const auto& c = csv.rows[i];
        if (c[1] == "total" || c[1] == "savings_fraction") {
            const double v = parse_double(c[4], "total_W");
            if (c[0] == "baseline") r.baseline_w = v, have_b = true;
            else if (c[0] == "proposed") r.proposed_w = v, have_p = true;
            else if (c[0] == "comparison") r.savings_fraction = v, have_s = true;
            else throw ConfigError("unknown design " + c[0]);
            continue;
        }
        PowerTerm t{c[1], parse_double(c[2], "unit_W"), parse_double(c[3], "count"), parse_double(c[4], "total_W")};
        if (c[0] == "baseline") r.baseline_terms.push_back(std::move(t));
        else if (c[0] == "proposed") r.proposed_terms.push_back(std::move(t));
        else throw ConfigError("unknown design " + c[0]);
    }
    if (!have_b || !have_p || !have_s) throw ConfigError("power report lacks totals");
    return r;
}

inline std::string write_power_json(const PowerReport& r) {
    auto terms = [](const std::vector<PowerTerm>& ts) {
        Json a = Json::array();
        for (const auto& t : ts) a.push_back({{"term", t.name}, {"unit_W", t.unit_w}, {"count", t.count}, {"total_W", t.total_w}});
        return a;
    };
    Json j{{"schema_version", kSchemaVersion},
           {"baseline", {{"terms", terms(r.baseline_terms)}, {"total_W", r.baseline_w}}},
           {"proposed", {{"terms", terms(r.proposed_terms)}, {"total_W", r.proposed_w}}},
           {"savings_fraction", r.savings_fraction}};
    return dump(j);
}

inline PowerReport parse_power_json(std::string_view text) {
    const Json j = parse_json(text);
    check_schema(j);
    check_keys(j, {"schema_version", "baseline", "proposed", "savings_fraction"}, "power report");
    auto terms = [](const Json& a) {
        std::vector<PowerTerm> out;
        for (const Json& t : a) {
            out.push_back({get_req<std::string>(t, "term"), get_req<double>(t, "unit_W"), get_req<double>(t, "count"),
                           get_req<double>(t, "total_W")});
        }
        return out;
    };
    PowerReport r;
    const Json& b = get_req<Json>(j, "baseline");
    const Json& p = get_req<Json>(j, "proposed");
    r.baseline_terms = terms(get_req<Json>(b, "terms"));
    r.baseline_w = get_req<double>(b, "total_W");
    r.proposed_terms = terms(get_req<Json>(p, "terms"));
    r.proposed_w = get_req<double>(p, "total_W");
    r.savings_fraction = get_req<double>(j, "savings_fraction");
    return r;
}

// ---------------------------------------------------------------------------
// Calibration file
// ---------------------------------------------------------------------------

struct CalibrationFile {
    ReceiverCalibration parameters;
    double target_peak_capacity_bps = 0.0;
    double achieved_peak_capacity_bps = 0.0;
    std::string tuned_parameter;
    std::string procedure;
};

inline CalibrationFile parse_calibration(std::string_view text) {
    const Json j = parse_json(text);
    check_schema(j);
    check_keys(j,
               {"schema_version", "parameters", "target_peak_capacity_bps", "achieved_peak_capacity_bps",
                "tuned_parameter", "procedure"},
               "calibration file");
    return {calibration_from(get_req<Json>(j, "parameters")), get_req<double>(j, "target_peak_capacity_bps"),
            get_req<double>(j, "achieved_peak_capacity_bps"), get_req<std::string>(j, "tuned_parameter"),
            get_req<std::string>(j, "procedure")};
}

inline std::string write_calibration(const CalibrationFile& f) {
    Json j{{"schema_version", kSchemaVersion},
           {"parameters", to_json(f.parameters)},
           {"target_peak_capacity_bps", f.target_peak_capacity_bps},
           {"achieved_peak_capacity_bps", f.achieved_peak_capacity_bps},
           {"tuned_parameter", f.tuned_parameter},
           {"procedure", f.procedure}};
    return dump(j);
}

}  // namespace owcdc::io
