#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "owcdc/cli.hpp"
#include "owcdc/io.hpp"

using namespace owcdc;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::initializer_list<std::string> args) {
    std::vector<std::string> store{"owcdc"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : store) argv.push_back(s.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root = fs::temp_directory_path() / (std::string("owcdc_cli_") + info->name());
        fs::remove_all(root);
        fs::create_directories(root);
    }
    void TearDown() override { fs::remove_all(root); }

    std::string dir(const std::string& name) const { return (root / name).string(); }
    std::string slurp(const std::string& d, const std::string& file) const { return io::read_file(dir(d) + "/" + file); }

    fs::path root;
};

const std::string kData = OWCDC_DATA_DIR;

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(invoke({}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"simulate", "--max-order", "5"}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"simulate", "--receiver", "xfov"}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"simulate", "--scenario", dir("nope.json")}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"simulate", "--builtin", "paper", "--scenario", kData + "/paper_scenario.json"}).code,
              cli::kExitConfig);
    EXPECT_EQ(invoke({"assign", "--nodes", "1"}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"power", "--racks", "-1", "--out-dir", dir("p")}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"power", "--format", "xml"}).code, cli::kExitConfig);
    EXPECT_EQ(invoke({"--help"}).code, cli::kExitOk);
}

TEST_F(Cli, ZeroBaselineIsADomainError) {
    const auto r = invoke({"power", "--racks", "0", "--spine-switches", "0", "--out-dir", dir("p")});
    EXPECT_EQ(r.code, cli::kExitConfig);
    EXPECT_NE(r.err.find("baseline"), std::string::npos);
}

TEST_F(Cli, BadScenarioFileExitsTwo) {
    io::write_file(dir("bad.json"), "{\"schema_version\": 7}");
    EXPECT_EQ(invoke({"simulate", "--scenario", dir("bad.json"), "--out-dir", dir("o")}).code, cli::kExitConfig);
    Scenario s = paper_default_scenario();
    s.receivers[0].position.z = 9.0;
    io::write_file(dir("outside.json"), io::write_scenario(s));
    EXPECT_EQ(invoke({"simulate", "--scenario", dir("outside.json"), "--out-dir", dir("o")}).code, cli::kExitConfig);
}

TEST_F(Cli, InfeasibleTopologyExitsThree) {
    PonTopology t = paper_default_topology();
    t.nodes[0].inputs.clear();
    io::write_file(dir("t.json"), io::write_topology(t));
    const auto r = invoke({"assign", "--topology", dir("t.json"), "--out-dir", dir("a")});
    EXPECT_EQ(r.code, cli::kExitInfeasible);
}

TEST_F(Cli, SimulateIsByteIdenticalAcrossRuns) {
    for (const char* run : {"r1", "r2"}) {
        const auto r = invoke({"simulate", "--receiver", "both", "--out-dir", dir(run)});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    for (const char* f : {"links_adr.csv", "links_wfov.csv", "comparison.csv"}) EXPECT_EQ(slurp("r1", f), slurp("r2", f));
    const auto t = io::parse_links_csv(slurp("r1", "links_adr.csv"));
    EXPECT_EQ(t.rows.size(), 16u);
    EXPECT_EQ(t.scenario, "paper");
}

TEST_F(Cli, BothWritesComparison) {
    const auto r = invoke({"simulate", "--receiver", "both", "--out-dir", dir("o")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto adr = io::parse_links_csv(slurp("o", "links_adr.csv"));
    const auto wfov = io::parse_links_csv(slurp("o", "links_wfov.csv"));
    const std::string cmp = slurp("o", "comparison.csv");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < adr.rows.size(); ++i) ok += adr.rows[i].capacity_bps >= wfov.rows[i].capacity_bps;
    EXPECT_NE(r.out.find("adr >= wfov on " + std::to_string(ok) + " of 16"), std::string::npos);
    EXPECT_EQ(std::count(cmp.begin(), cmp.end(), '\n'), 18);
}

TEST_F(Cli, MaxOrderZeroNeverExceedsTwo) {
    ASSERT_EQ(invoke({"simulate", "--max-order", "0", "--export-matrix", "--out-dir", dir("z")}).code, 0);
    ASSERT_EQ(invoke({"simulate", "--max-order", "2", "--export-matrix", "--out-dir", dir("t")}).code, 0);
    const auto z = io::parse_matrix_csv(slurp("z", "matrix_adr.csv"));
    const auto t = io::parse_matrix_csv(slurp("t", "matrix_adr.csv"));
    ASSERT_EQ(z.size(), t.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        EXPECT_LE(z[i].total_w, t[i].total_w);
        EXPECT_EQ(z[i].first_order_w, 0.0);
        EXPECT_EQ(z[i].los_w, t[i].los_w);
    }
}

TEST_F(Cli, ImpulseExport) {
    ASSERT_EQ(invoke({"simulate", "--export-impulse", "--out-dir", dir("o")}).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir("o/impulse_adr"))) {
        ++files;
        EXPECT_NO_THROW(io::parse_impulse_csv(io::read_file(e.path().string())));
    }
    EXPECT_EQ(files, 16u);
}

TEST_F(Cli, ScenarioFileKeepsItsReceivers) {
    io::write_file(dir("w.json"), io::write_scenario(paper_default_scenario(ReceiverKind::Wfov)));
    const auto r = invoke({"simulate", "--scenario", dir("w.json"), "--out-dir", dir("o")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir("o/links_wfov.csv")));
    ASSERT_EQ(invoke({"simulate", "--receiver", "wfov", "--out-dir", dir("b")}).code, 0);
    EXPECT_EQ(slurp("o", "links_wfov.csv"), slurp("b", "links_wfov.csv"));
}

TEST_F(Cli, CalibrationFileReproducesDefaults) {
    ASSERT_EQ(invoke({"simulate", "--calibration", kData + "/calibration.json", "--out-dir", dir("c")}).code, 0);
    ASSERT_EQ(invoke({"simulate", "--out-dir", dir("d")}).code, 0);
    EXPECT_EQ(slurp("c", "links_adr.csv"), slurp("d", "links_adr.csv"));
}

TEST_F(Cli, JsonFormat) {
    ASSERT_EQ(invoke({"simulate", "--format", "json", "--out-dir", dir("o")}).code, 0);
    const auto t = io::parse_links_json(slurp("o", "links_adr.json"));
    EXPECT_EQ(t.rows.size(), 16u);
    ASSERT_EQ(invoke({"assign", "--format", "json", "--out-dir", dir("o")}).code, 0);
    EXPECT_EQ(io::parse_assignment_json(slurp("o", "assignment.json")).assignment.connections(), 20u);
    ASSERT_EQ(invoke({"power", "--format", "json", "--out-dir", dir("o")}).code, 0);
    EXPECT_EQ(io::parse_power_json(slurp("o", "power.json")).baseline_w, 5056.0);
}

TEST_F(Cli, AssignIsDeterministicAndComplete) {
    for (const char* run : {"r1", "r2"}) {
        const auto r = invoke({"assign", "--out-dir", dir(run)});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_NE(r.out.find("20 of 20 pairs assigned"), std::string::npos);
    }
    EXPECT_EQ(slurp("r1", "assignment.csv"), slurp("r2", "assignment.csv"));
    EXPECT_EQ(slurp("r1", "topology.json"), io::read_file(kData + "/paper_topology.json"));
    const auto r = invoke({"assign", "--topology", dir("r1/topology.json"), "--validate", dir("r1/assignment.csv"),
                           "--out-dir", dir("v")});
    EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, GeneratedTopology) {
    const auto r = invoke({"assign", "--nodes", "2", "--wavelengths", "1", "--out-dir", dir("o")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("2 of 2 pairs"), std::string::npos);
    EXPECT_EQ(invoke({"assign", "--nodes", "12", "--wavelengths", "3", "--out-dir", dir("o")}).code, 0);
}

TEST_F(Cli, ValidateReferenceMatrix) {
    const auto ok = invoke({"assign", "--validate", kData + "/reference_assignment.csv", "--out-dir", dir("o")});
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_NE(ok.out.find("valid: 20 pairs"), std::string::npos);

    auto m = reference_assignment_matrix();
    m[0][1] = m[0][3];
    const auto t = paper_default_topology();
    io::write_file(dir("bad.csv"), io::write_assignment_csv(resolve_matrix(m, t), t));
    const auto bad = invoke({"assign", "--validate", dir("bad.csv"), "--out-dir", dir("o")});
    EXPECT_EQ(bad.code, cli::kExitInfeasible);
    EXPECT_NE(bad.err.find("collision"), std::string::npos);
    EXPECT_NE(slurp("o", "violations.csv").find("collision"), std::string::npos);
}

TEST_F(Cli, PowerDefaultsAndDeterminism) {
    for (const char* run : {"r1", "r2"}) ASSERT_EQ(invoke({"power", "--out-dir", dir(run)}).code, 0);
    const std::string csv = slurp("r1", "power.csv");
    EXPECT_EQ(csv, slurp("r2", "power.csv"));
    EXPECT_NE(csv.find("baseline,total,,,5056\n"), std::string::npos);
    EXPECT_NE(csv.find("proposed,total,,,2899.2\n"), std::string::npos);
    ASSERT_EQ(invoke({"power", "--owc-transceivers", "0", "--olt-watts", "0", "--out-dir", dir("z")}).code, 0);
    EXPECT_NEAR(io::parse_power_csv(slurp("z", "power.csv")).proposed_w, 2416.0, 1e-9);
}

TEST_F(Cli, EnvironmentOverrides) {
    ::setenv("OWCDC_RACKS", "2", 1);
    ::setenv("OWCDC_OUT_DIR", dir("env").c_str(), 1);
    const auto r = invoke({"power"});
    ::unsetenv("OWCDC_RACKS");
    ::unsetenv("OWCDC_OUT_DIR");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = io::parse_power_csv(slurp("env", "power.csv"));
    EXPECT_EQ(rep.baseline_w, 660.0 * 4 + 508.0 * 2 + 3.0 * 64);
    // Flags win over the environment.
    ::setenv("OWCDC_RACKS", "2", 1);
    const auto f = invoke({"power", "--racks", "4", "--out-dir", dir("flag")});
    ::unsetenv("OWCDC_RACKS");
    ASSERT_EQ(f.code, 0);
    EXPECT_EQ(io::parse_power_csv(slurp("flag", "power.csv")).baseline_w, 5056.0);
}

TEST_F(Cli, ExportBuiltinMatchesGolden) {
    ASSERT_EQ(invoke({"scenario", "export-builtin", "--builtin", "paper", "--receiver", "adr", "--out", dir("s.json")}).code,
              0);
    EXPECT_EQ(io::read_file(dir("s.json")), io::read_file(kData + "/paper_scenario.json"));
    const auto r = invoke({"scenario", "export-builtin", "--builtin", "paper-aimed", "--receiver", "wfov"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NO_THROW(io::parse_scenario(r.out));
}

TEST_F(Cli, CalibrateMatchesFrozenFile) {
    const auto r = invoke({"calibrate", "--builtin", "paper", "--target", "15e9", "--digits", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, io::read_file(kData + "/calibration.json"));
}

TEST_F(Cli, BinaryRunsStandalone) {
    const std::string cmd = std::string(OWCDC_CLI_PATH) + " power --out-dir " + dir("bin") + " > " + dir("log.txt");
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_NE(slurp("bin", "power.csv").find("5056"), std::string::npos);
}
