#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "snapgrip/grasp_sim.hpp"
#include "snapgrip/io.hpp"
#include "snapgrip/membrane.hpp"
#include "snapgrip/pv_analysis.hpp"

using namespace snapgrip;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("snapgrip-io-" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SNAPGRIP_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const EquilibriumPath& gripping_path() {
    static const EquilibriumPath path = [] {
        auto g = ChamberGeometry::gripping();
        const auto mesh = build_mesh(g, 32);
        ContinuationControl c;
        c.max_step = 0.2;
        return trace_equilibrium_path(mesh, material_from_catalog("dragon-skin-00-30"), c);
    }();
    return path;
}

}  // namespace

TEST_CASE("number formatting round trips exactly") {
    for (double v : {0.0, -0.0, 1.0 / 3.0, 6.02214076e23, -1e-310, 129.38539, 3.0}) {
        CHECK(io::parse_number(io::format_number(v), "v") == v);
    }
    CHECK(std::isnan(io::parse_number(io::format_number(NAN), "v")));
    CHECK(io::parse_number(io::format_number(-INFINITY), "v") == -INFINITY);
    CHECK_THROWS_AS(io::parse_number("1.5kPa", "pressure"), ValidationError);
    CHECK_THROWS_AS(io::parse_number("", "pressure"), ValidationError);
}

TEST_CASE("sha256 of known messages") {
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("equilibrium path CSV round trip") {
    const auto& path = gripping_path();
    std::stringstream ss;
    io::write_path_csv(ss, path);
    const auto back = io::read_path_csv(ss);
    REQUIRE(back.samples.size() == path.samples.size());
    for (std::size_t k = 0; k < path.samples.size(); ++k) {
        const auto& a = path.samples[k];
        const auto& b = back.samples[k];
        CHECK(b.arc_length == a.arc_length);
        CHECK(b.volume == a.volume);
        CHECK(b.pressure == a.pressure);
        CHECK(b.energy == a.energy);
        CHECK(b.stability == a.stability);
        CHECK(b.is_limit_point == a.is_limit_point);
    }
}

TEST_CASE("characteristic CSV round trip") {
    const auto& c = calibrated_chambers().gripping;
    std::stringstream ss;
    io::write_characteristic_csv(ss, c);
    const auto in = io::ingest_characteristic(ss, "back");
    CHECK(in.warnings.empty());
    CHECK(in.characteristic.volume == c.volume);
    CHECK(in.characteristic.pressure == c.pressure);
    CHECK(in.characteristic.stability == c.stability);
    CHECK(in.characteristic.displacement == c.displacement);
}

TEST_CASE("sweep CSV round trip") {
    SweepOptions o;
    o.n_segments = 24;
    o.control.max_step = 0.2;
    const auto sweep = tilt_sweep(ChamberGeometry::gripping(), {30.0, 45.0}, material_from_catalog("dragon-skin-00-30"), o);
    std::stringstream ss;
    io::write_sweep_csv(ss, sweep);
    const auto rows = io::read_sweep_csv(ss);
    REQUIRE(rows.size() == sweep.entries.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& e = sweep.entries[k];
        CHECK(rows[k].angle_deg == e.angle_deg);
        CHECK(rows[k].ok == e.ok);
        CHECK(rows[k].enclosed_area == e.report.enclosed_area);
        CHECK(rows[k].has_negative_pressure == e.report.has_negative_pressure);
        CHECK(rows[k].bistable == e.report.bistable());
    }
}

TEST_CASE("network trace and event CSV round trip") {
    const auto& ch = calibrated_chambers();
    const std::vector<NodeSpec> nodes{{"contact", ch.contact, 1}, {"gripping-1", ch.gripping, 0},
                                      {"gripping-2", ch.gripping, 0}};
    auto net = HydraulicNetwork::assemble(nodes, HydraulicNetwork::total_volume_at_pressure(nodes, 0.0));
    const auto trace = net.inject(150.0, 120.0, 1.0);
    REQUIRE_FALSE(trace.events.empty());

    std::stringstream ss;
    io::write_injection_trace_csv(ss, trace, {"contact", "gripping-1", "gripping-2"});
    std::vector<std::string> names;
    const auto back = io::read_injection_trace_csv(ss, &names);
    CHECK(names == std::vector<std::string>{"contact", "gripping-1", "gripping-2"});
    REQUIRE(back.samples.size() == trace.samples.size());
    for (std::size_t k = 0; k < back.samples.size(); ++k) {
        CHECK(back.samples[k].time == trace.samples[k].time);
        CHECK(back.samples[k].pressure == trace.samples[k].pressure);
        CHECK(back.samples[k].volumes == trace.samples[k].volumes);
        CHECK(back.samples[k].event == trace.samples[k].event);
    }

    std::stringstream es;
    io::write_events_csv(es, trace.events);
    const auto ev = io::read_events_csv(es);
    REQUIRE(ev.size() == trace.events.size());
    for (std::size_t k = 0; k < ev.size(); ++k) {
        CHECK(ev[k].name == trace.events[k].name);
        CHECK(ev[k].p_before == trace.events[k].p_before);
        CHECK(ev[k].v_after == trace.events[k].v_after);
        CHECK(ev[k].total_after == trace.events[k].total_after);
    }
}

TEST_CASE("grasp trace CSV round trip keeps phases") {
    auto s = GraspScenario::defaults();
    s.object = block_object("stiff");
    auto t = simulate_quasistatic_test(s, 129.385, 40.0, 0.5);
    detect_phases(t);
    std::stringstream ss;
    io::write_grasp_trace_csv(ss, t);
    auto back = io::read_grasp_trace_csv(ss);
    REQUIRE(back.samples.size() == t.samples.size());
    CHECK(back.gap == t.gap);
    CHECK(back.has_object == t.has_object);
    for (std::size_t k = 0; k < t.samples.size(); ++k) {
        CHECK(back.samples[k].pressure == t.samples[k].pressure);
        CHECK(back.samples[k].displacement == t.samples[k].displacement);
        CHECK(back.samples[k].phase == t.samples[k].phase);
        CHECK(back.samples[k].snapped == t.samples[k].snapped);
    }
    const auto relabel = back;
    const auto b = detect_phases(back);
    CHECK(b.contact.has_value());
    for (std::size_t k = 0; k < t.samples.size(); ++k) CHECK(back.samples[k].phase == relabel.samples[k].phase);
}

TEST_CASE("characteristic ingestion") {
    SUBCASE("three monotone points") {
        std::istringstream in("V_mm3,p_kPa\n0,0\n10,1\n20,2.5\n");
        const auto r = io::ingest_characteristic(in);
        CHECK(r.characteristic.points() == 3);
        CHECK(r.warnings.empty());
        CHECK(r.characteristic.regions().size() == 1);
    }
    SUBCASE("header-less file") {
        std::istringstream in("0,0\n10,1\n20,2.5\n");
        CHECK(io::ingest_characteristic(in).characteristic.points() == 3);
    }
    SUBCASE("duplicate consecutive points are dropped") {
        std::istringstream in("V_mm3,p_kPa\n0,0\n10,1\n10,1\n20,2.5\n");
        const auto r = io::ingest_characteristic(in);
        CHECK(r.characteristic.points() == 3);
        CHECK(r.warnings.size() == 1);
    }
    SUBCASE("non-numeric row") {
        std::istringstream in("V_mm3,p_kPa\n0,0\n10,one\n20,2.5\n");
        CHECK_THROWS_AS(io::ingest_characteristic(in), ValidationError);
    }
    SUBCASE("unordered arc") {
        std::istringstream in("arc,V_mm3,p_kPa\n0,0,0\n2,10,1\n1,20,2.5\n");
        CHECK_THROWS_AS(io::ingest_characteristic(in), ValidationError);
    }
    SUBCASE("too few points") {
        std::istringstream in("V_mm3,p_kPa\n0,0\n10,1\n");
        CHECK_THROWS_AS(io::ingest_characteristic(in), ValidationError);
    }
    SUBCASE("snap-through curve in the shape of a measured response") {
        // Pressure peaks, falls below zero while the volume folds back, then
        // stiffens again.
        std::ostringstream csv;
        csv << "V_mm3,p_kPa\n";
        for (int k = 0; k <= 90; ++k) {
            const double t = -2.0 + 4.5 * k / 90.0;
            csv << 1000.0 * (t * t * t - 3.0 * t) + 4000.0 << "," << 2.0 + 2.0 * (t * t * t / 3.0 - 1.44 * t) << "\n";
        }
        std::istringstream in(csv.str());
        const auto r = io::ingest_characteristic(in);
        const auto report = classify_bistability(r.characteristic.to_path());
        CHECK(report.bistable());
        std::size_t followers = 0;
        for (const auto& reg : r.characteristic.regions()) followers += reg.kind == PieceClass::Follower;
        CHECK(followers == 2);
    }
}

TEST_CASE("strict configuration") {
    const auto cfg = io::Config::parse("[grasp]\nobject = stiff\nsize_mm = 30\n");
    CHECK_NOTHROW(cfg.check({{"grasp", {"object", "size_mm"}}}));
    CHECK_THROWS_AS(cfg.check({{"grasp", {"object"}}}), ValidationError);
    CHECK_THROWS_AS(cfg.check({{"beam", {"E"}}}), ValidationError);
    CHECK(cfg.number("grasp", "size_mm", 0.0) == 30.0);
    CHECK(cfg.number("grasp", "k_o_N_per_mm", 7.0) == 7.0);
    CHECK_THROWS_AS(cfg.number("grasp", "object", 0.0), ValidationError);

    const auto nodes = io::Config::parse("[node.a]\nbranch = 1\n[node.b]\nbranch = 0\n");
    CHECK_NOTHROW(nodes.check({{"node.*", {"branch"}}}));
    CHECK(nodes.sections_with_prefix("node.") == std::vector<std::string>{"node.a", "node.b"});
}

TEST_CASE("manifest hash covers the exact config bytes") {
    const auto dir = scratch_dir("manifest");
    const std::string text = "; comment kept in the hash\n[beam]\nE = 1500\n";
    spit(dir / "beam.ini", text);
    REQUIRE(run_cli("beam --config " + (dir / "beam.ini").string() + " --out " + (dir / "out").string()) == 0);
    const auto m = io::ResultBundle::read_manifest(dir / "out");
    CHECK(m["config_sha256"] == io::sha256_hex(text));
    CHECK(m["status"] == "ok");
    CHECK(m["command"] == "beam");
}

TEST_CASE("command line validation exit codes") {
    const auto dir = scratch_dir("exit");
    CHECK(run_cli("sweep --angles \"\" --out " + (dir / "a").string()) == 2);
    spit(dir / "empty_angles.ini", "[sweep]\nangles =\n");
    CHECK(run_cli("sweep --config " + (dir / "empty_angles.ini").string() + " --out " + (dir / "b").string()) == 2);
    spit(dir / "typo.ini", "[grasp]\nobjcet = stiff\n");
    CHECK(run_cli("grasp --config " + (dir / "typo.ini").string() + " --out " + (dir / "c").string()) == 2);
    CHECK(io::ResultBundle::read_manifest(dir / "c")["status"] == "validation-error");
    spit(dir / "one.ini", "[calibrate]\ntargets = stiff:14\n");
    CHECK(run_cli("calibrate --config " + (dir / "one.ini").string() + " --out " + (dir / "d").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("repeated runs give identical CSV bodies") {
    const auto dir = scratch_dir("determinism");
    spit(dir / "random.ini", "[network]\nmode = random\noperations = 300\n");
    for (const char* run : {"r1", "r2"}) {
        REQUIRE(run_cli("network --config " + (dir / "random.ini").string() + " --seed 11 --out " +
                        (dir / run).string()) == 0);
    }
    CHECK(slurp(dir / "r1" / "trace.csv") == slurp(dir / "r2" / "trace.csv"));
    CHECK(slurp(dir / "r1" / "events.csv") == slurp(dir / "r2" / "events.csv"));
    CHECK_FALSE(slurp(dir / "r1" / "trace.csv").empty());

    REQUIRE(run_cli("network --config " + (dir / "random.ini").string() + " --seed 12 --out " +
                    (dir / "r3").string()) == 0);
    CHECK(slurp(dir / "r1" / "trace.csv") != slurp(dir / "r3" / "trace.csv"));
}
