#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "owcdc/calibration.hpp"
#include "owcdc/channel.hpp"
#include "owcdc/error.hpp"
#include "owcdc/io.hpp"
#include "owcdc/linkbudget.hpp"
#include "owcdc/pon.hpp"
#include "owcdc/power.hpp"
#include "owcdc/scene.hpp"

namespace owcdc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;

struct SimulateOptions {
    std::string builtin;
    std::string scenario_path;
    std::string calibration_path;
    std::string receiver;
    std::optional<int> max_order;
    std::optional<double> bin_width_s;
    std::optional<double> first_order_resolution;
    std::optional<double> second_order_resolution;
    bool interference = false;
    bool export_matrix = false;
    bool export_impulse = false;
};

struct AssignOptions {
    std::string topology_path;
    std::optional<std::size_t> nodes;
    std::optional<std::size_t> wavelengths;
    std::string validate_path;
};

struct PowerOptions {
    double racks = 4;
    double servers_per_rack = 32;
    double spine_switches = 4;
    double access_points = 4;
    std::optional<double> owc_transceivers;
    SpineLeafPowerParams baseline;
    PonOwcPowerParams proposed;
};

struct ExportOptions {
    std::string builtin = "paper";
    std::string receiver = "adr";
    std::string out;
};

struct CalibrateOptions {
    std::string builtin = "paper";
    double target_bps = 15e9;
    int digits = 3;
    std::string out;
};

struct RunConfig {
    std::string out_dir = ".";
    std::string format = "csv";
    std::uint64_t seed = 0;
    SimulateOptions simulate;
    AssignOptions assign;
    PowerOptions power;
    ExportOptions export_builtin;
    CalibrateOptions calibrate;
};

inline Scenario builtin_scenario(const std::string& name, ReceiverKind kind) {
    if (name == "paper") return paper_default_scenario(kind);
    if (name == "paper-aimed") return paper_aimed_scenario(kind);
    throw ConfigError("unknown builtin scenario " + name);
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

inline std::string extension(const RunConfig& c) { return c.format == "json" ? ".json" : ".csv"; }

inline int cmd_simulate(const RunConfig& c, std::ostream& out) {
    const SimulateOptions& o = c.simulate;
    const bool from_file = !o.scenario_path.empty();
    Scenario base = from_file ? io::parse_scenario(io::read_file(o.scenario_path))
                              : builtin_scenario(o.builtin.empty() ? "paper" : o.builtin, ReceiverKind::Adr);
    if (o.max_order) base.controls.max_order = *o.max_order;
    if (o.bin_width_s) base.controls.bin_width_s = *o.bin_width_s;
    if (o.first_order_resolution) base.room.first_order_resolution = *o.first_order_resolution;
    if (o.second_order_resolution) base.room.second_order_resolution = *o.second_order_resolution;
    if (o.interference) base.controls.interference = true;

    bool rebuild = false;
    if (!o.calibration_path.empty()) {
        base.calibration = io::parse_calibration(io::read_file(o.calibration_path)).parameters;
        rebuild = true;
    }
    std::vector<std::optional<ReceiverKind>> kinds;
    if (o.receiver == "both") {
        kinds = {ReceiverKind::Adr, ReceiverKind::Wfov};
    } else if (!o.receiver.empty()) {
        kinds = {parse_receiver_kind(o.receiver)};
    } else if (from_file && !rebuild) {
        kinds = {std::nullopt};
    } else {
        kinds = {base.receivers.empty() ? ReceiverKind::Adr : base.receivers.front().kind};
    }
    validate(base);

    const auto dir = prepare_dir(c.out_dir);
    const ReflectionMesh mesh(base.room);
    std::vector<io::LinkTable> tables;
    for (const auto& kind : kinds) {
        const Scenario s = kind ? with_receiver_kind(base, *kind) : base;
        const PowerMatrix m = receiver_power_matrix(s, mesh);
        const DownlinkTable t = evaluate_downlink(s, m);
        io::LinkTable lt = io::link_table(s, t);
        const std::string tag = lt.receiver.empty() ? "links" : "links_" + lt.receiver;
        const auto path = dir / (tag + extension(c));
        io::write_file(path.string(), c.format == "json" ? io::write_links_json(lt) : io::write_links_csv(lt));
        out << lt.receiver << ": " << lt.rows.size() << " links, peak capacity " << io::fmt(peak_capacity(t))
            << " bit/s -> " << path.string() << "\n";

        if (o.export_matrix) {
            const auto rows = io::matrix_rows(s, m);
            const auto mp = dir / ("matrix_" + lt.receiver + extension(c));
            io::write_file(mp.string(), c.format == "json" ? io::write_matrix_json(rows) : io::write_matrix_csv(rows));
        }
        if (o.export_impulse) {
            const auto idir = prepare_dir((dir / ("impulse_" + lt.receiver)).string());
            for (const auto& l : t.links) {
                io::ImpulseFile f{s.transmitters[l.tx].name, l.branch + 1, s.receivers[l.rx].name, l.rx_branch + 1,
                                  m.at({l.tx, l.branch, l.rx, l.rx_branch}).response};
                const std::string name = f.tx + "_b" + std::to_string(f.branch) + "_" + f.rx + "_d" +
                                         std::to_string(f.rx_branch) + ".csv";
                io::write_file((idir / name).string(), io::write_impulse_csv(f));
            }
        }
        tables.push_back(std::move(lt));
    }
    if (tables.size() == 2) {
        const auto path = dir / "comparison.csv";
        io::write_file(path.string(), io::write_comparison_csv(tables[0], tables[1]));
        std::size_t ok = 0;
        for (std::size_t i = 0; i < tables[0].rows.size(); ++i)
            ok += tables[0].rows[i].capacity_bps >= tables[1].rows[i].capacity_bps ? 1 : 0;
        out << "adr >= wfov on " << ok << " of " << tables[0].rows.size() << " links -> " << path.string() << "\n";
    }
    return kExitOk;
}

inline PonTopology resolve_topology(const AssignOptions& o) {
    if (!o.topology_path.empty() && o.nodes) throw ConfigError("--topology and --nodes are mutually exclusive");
    PonTopology t;
    if (!o.topology_path.empty()) {
        t = io::parse_topology(io::read_file(o.topology_path));
        if (o.wavelengths) t.wavelengths = *o.wavelengths;
    } else if (o.nodes) {
        t = make_topology(*o.nodes, o.wavelengths.value_or(4));
    } else {
        t = paper_default_topology();
        if (o.wavelengths) t.wavelengths = *o.wavelengths;
    }
    validate(t);
    return t;
}

inline int cmd_assign(const RunConfig& c, std::ostream& out, std::ostream& err) {
    const PonTopology t = resolve_topology(c.assign);
    const auto dir = prepare_dir(c.out_dir);

    if (!c.assign.validate_path.empty()) {
        const auto m = io::parse_assignment_csv(io::read_file(c.assign.validate_path), t);
        const auto a = resolve_matrix(m, t);
        const auto v = validate_assignment(a, t);
        io::write_file((dir / "violations.csv").string(), io::write_violations_csv(v, t));
        if (!v.empty()) {
            for (const auto& x : v) err << violation_name(x.kind) << ": " << x.message << "\n";
            err << v.size() << " violations in " << c.assign.validate_path << "\n";
            return kExitInfeasible;
        }
        out << "valid: " << a.connections() << " pairs in " << c.assign.validate_path << "\n";
        return kExitOk;
    }

    const auto a = assign_wavelengths(t);
    const std::string txt = c.format == "json" ? io::write_assignment_json(a, t) : io::write_assignment_csv(a, t);
    const auto path = dir / ("assignment" + extension(c));
    io::write_file(path.string(), txt);
    io::write_file((dir / "topology.json").string(), io::write_topology(t));
    const std::size_t pairs = t.nodes.size() * (t.nodes.size() - 1);
    out << a.connections() << " of " << pairs << " pairs assigned -> " << path.string() << "\n";
    const auto v = validate_assignment(a, t);
    if (!v.empty()) {
        for (const auto& x : v) err << violation_name(x.kind) << ": " << x.message << "\n";
        return kExitInfeasible;
    }
    return kExitOk;
}

inline int cmd_power(const RunConfig& c, std::ostream& out) {
    const PowerOptions& o = c.power;
    PowerInputs in = power_inputs_for(o.racks, o.servers_per_rack, o.spine_switches, o.access_points);
    in.baseline.spine_w = o.baseline.spine_w;
    in.baseline.leaf_w = o.baseline.leaf_w;
    in.baseline.server_transceiver_w = o.baseline.server_transceiver_w;
    in.proposed.owc_transceiver_w = o.proposed.owc_transceiver_w;
    in.proposed.olt_w = o.proposed.olt_w;
    in.proposed.leaf_w = o.baseline.leaf_w;
    in.proposed.server_transceiver_w = o.baseline.server_transceiver_w;
    if (o.owc_transceivers) in.proposed.owc_transceivers = *o.owc_transceivers;
    const PowerReport r = compare_power(in);
    const auto path = prepare_dir(c.out_dir) / ("power" + extension(c));
    io::write_file(path.string(), c.format == "json" ? io::write_power_json(r) : io::write_power_csv(r));
    out << "baseline " << io::fmt(r.baseline_w) << " W, proposed " << io::fmt(r.proposed_w) << " W, savings "
        << io::fmt(r.savings_fraction) << " -> " << path.string() << "\n";
    return kExitOk;
}

inline int cmd_export(const RunConfig& c, std::ostream& out) {
    const auto kind = parse_receiver_kind(c.export_builtin.receiver);
    const std::string txt = io::write_scenario(builtin_scenario(c.export_builtin.builtin, *kind));
    if (c.export_builtin.out.empty() || c.export_builtin.out == "-") {
        out << txt;
    } else {
        io::write_file(c.export_builtin.out, txt);
    }
    return kExitOk;
}

inline int cmd_calibrate(const RunConfig& c, std::ostream& out) {
    const CalibrateOptions& o = c.calibrate;
    const Scenario s = builtin_scenario(o.builtin, ReceiverKind::Adr);
    const CalibrationResult r = calibrate_preamp_density(s, o.target_bps, o.digits);
    io::CalibrationFile f;
    f.parameters = s.calibration;
    f.parameters.preamp_density_a_per_sqrt_hz = r.preamp_density_a_per_sqrt_hz;
    f.target_peak_capacity_bps = o.target_bps;
    f.achieved_peak_capacity_bps = r.peak_capacity_bps;
    f.tuned_parameter = "preamp_density_a_per_sqrt_hz";
    f.procedure = "builtin '" + o.builtin + "' with ADR receivers; all other parameters fixed; geometric bisection of "
                  "the preamplifier noise density over [1e-15, 1e-9] A/sqrt(Hz) until the best link capacity "
                  "equals the target; result rounded to " + std::to_string(o.digits) + " significant digits";
    const std::string txt = io::write_calibration(f);
    if (o.out.empty() || o.out == "-") out << txt;
    else io::write_file(o.out, txt);
    return kExitOk;
}

/// Parses argv and runs one subcommand. Never calls exit(); returns the code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Optical wireless data center simulator", "owcdc"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for all subcommands");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out-dir", c.out_dir, "Directory for result files")->envname("OWCDC_OUT_DIR");
        sub->add_option("--format", c.format, "Result format")
            ->check(CLI::IsMember({"csv", "json"}))
            ->envname("OWCDC_FORMAT");
        sub->add_option("--seed", c.seed, "Reserved; the pipeline is deterministic")->envname("OWCDC_SEED");
    };

    auto* sim = app.add_subcommand("simulate", "Trace the channel and write the downlink budget table");
    add_common(sim);
    {
        auto& o = c.simulate;
        auto* b = sim->add_option("--builtin", o.builtin, "Built-in scenario")
                      ->check(CLI::IsMember({"paper", "paper-aimed"}))
                      ->envname("OWCDC_BUILTIN");
        auto* f = sim->add_option("--scenario", o.scenario_path, "Scenario JSON file")
                      ->check(CLI::ExistingFile)
                      ->envname("OWCDC_SCENARIO");
        b->excludes(f);
        sim->add_option("--calibration", o.calibration_path, "Receiver calibration JSON file")
            ->check(CLI::ExistingFile)
            ->envname("OWCDC_CALIBRATION");
        sim->add_option("--receiver", o.receiver, "Receiver kind")
            ->check(CLI::IsMember({"wfov", "adr", "both"}))
            ->envname("OWCDC_RECEIVER");
        sim->add_option("--max-order", o.max_order, "Highest reflection order (0-2)")
            ->check(CLI::Range(0, 2))
            ->envname("OWCDC_MAX_ORDER");
        sim->add_option("--bin-width", o.bin_width_s, "Impulse-response bin width in seconds")
            ->check(CLI::PositiveNumber)
            ->envname("OWCDC_BIN_WIDTH");
        sim->add_option("--first-order-resolution", o.first_order_resolution, "Element edge for one bounce, m")
            ->check(CLI::PositiveNumber)
            ->envname("OWCDC_FIRST_ORDER_RESOLUTION");
        sim->add_option("--second-order-resolution", o.second_order_resolution, "Element edge for two bounces, m")
            ->check(CLI::PositiveNumber)
            ->envname("OWCDC_SECOND_ORDER_RESOLUTION");
        sim->add_flag("--interference", o.interference, "Count same-wavelength power from other ADTs as noise")
            ->envname("OWCDC_INTERFERENCE");
        sim->add_flag("--export-matrix", o.export_matrix, "Also write the full power matrix");
        sim->add_flag("--export-impulse", o.export_impulse, "Also write impulse responses of the table rows");
    }

    auto* asg = app.add_subcommand("assign", "Solve or validate the AWGR wavelength assignment");
    add_common(asg);
    {
        auto& o = c.assign;
        auto* tp = asg->add_option("--topology", o.topology_path, "Topology JSON file")
                       ->check(CLI::ExistingFile)
                       ->envname("OWCDC_TOPOLOGY");
        auto* np = asg->add_option("--nodes", o.nodes, "Generate a ring topology with this many nodes")
                       ->check(CLI::Range(std::size_t{2}, std::size_t{64}))
                       ->envname("OWCDC_NODES");
        tp->excludes(np);
        asg->add_option("--wavelengths", o.wavelengths, "Wavelength count")
            ->check(CLI::Range(std::size_t{1}, std::size_t{64}))
            ->envname("OWCDC_WAVELENGTHS");
        asg->add_option("--validate", o.validate_path, "Validate a wavelength matrix CSV instead of solving")
            ->check(CLI::ExistingFile);
    }

    auto* pwr = app.add_subcommand("power", "Compare fabric power of spine-leaf and PON/OWC designs");
    add_common(pwr);
    {
        auto& o = c.power;
        pwr->add_option("--racks", o.racks, "Racks (one leaf switch each)")->envname("OWCDC_RACKS");
        pwr->add_option("--servers-per-rack", o.servers_per_rack, "Servers per rack")->envname("OWCDC_SERVERS_PER_RACK");
        pwr->add_option("--spine-switches", o.spine_switches, "Spine switches in the baseline")
            ->envname("OWCDC_SPINE_SWITCHES");
        pwr->add_option("--access-points", o.access_points, "Ceiling access points")->envname("OWCDC_ACCESS_POINTS");
        pwr->add_option("--owc-transceivers", o.owc_transceivers, "OWC transceiver count (default racks + APs)")
            ->envname("OWCDC_OWC_TRANSCEIVERS");
        pwr->add_option("--spine-watts", o.baseline.spine_w, "W per spine switch")->envname("OWCDC_SPINE_WATTS");
        pwr->add_option("--leaf-watts", o.baseline.leaf_w, "W per leaf switch")->envname("OWCDC_LEAF_WATTS");
        pwr->add_option("--server-transceiver-watts", o.baseline.server_transceiver_w, "W per server transceiver")
            ->envname("OWCDC_SERVER_TRANSCEIVER_WATTS");
        pwr->add_option("--owc-watts", o.proposed.owc_transceiver_w, "W per OWC transceiver")
            ->envname("OWCDC_OWC_WATTS");
        pwr->add_option("--olt-watts", o.proposed.olt_w, "W for the OLT")->envname("OWCDC_OLT_WATTS");
    }

    auto* scn = app.add_subcommand("scenario", "Scenario file utilities");
    scn->require_subcommand(1);
    auto* exp = scn->add_subcommand("export-builtin", "Write a built-in scenario as JSON");
    exp->add_option("--builtin", c.export_builtin.builtin, "Built-in scenario")
        ->check(CLI::IsMember({"paper", "paper-aimed"}));
    exp->add_option("--receiver", c.export_builtin.receiver, "Receiver kind")->check(CLI::IsMember({"wfov", "adr"}));
    exp->add_option("--out", c.export_builtin.out, "Output file, '-' for stdout");

    auto* cal = app.add_subcommand("calibrate", "Re-derive the receiver noise calibration");
    cal->add_option("--builtin", c.calibrate.builtin, "Built-in scenario")
        ->check(CLI::IsMember({"paper", "paper-aimed"}));
    cal->add_option("--target", c.calibrate.target_bps, "Peak capacity target in bit/s")->check(CLI::PositiveNumber);
    cal->add_option("--digits", c.calibrate.digits, "Significant digits kept")->check(CLI::Range(1, 15));
    cal->add_option("--out", c.calibrate.out, "Output file, '-' for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        if (*sim) return cmd_simulate(c, out);
        if (*asg) return cmd_assign(c, out, err);
        if (*pwr) return cmd_power(c, out);
        if (*exp) return cmd_export(c, out);
        if (*cal) return cmd_calibrate(c, out);
    } catch (const InfeasibleTopology& e) {
        err << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const GeometryError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}

}  // namespace owcdc::cli
