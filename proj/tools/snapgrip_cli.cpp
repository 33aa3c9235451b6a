// snapgrip command-line front end.
//
//   snapgrip <command> [--config FILE] [--out DIR] [--seed N] [...]
//
// Commands: trace, sweep, beam, network, grasp, calibrate. Each run writes its
// artifacts and a manifest.json into the output directory, which defaults to
// $SNAPGRIP_OUT/<command> (or ./snapgrip-out/<command>).
//
// Exit codes: 0 success, 2 invalid input, 3 solver failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "snapgrip/chamber.hpp"
#include "snapgrip/characteristic.hpp"
#include "snapgrip/continuation.hpp"
#include "snapgrip/error.hpp"
#include "snapgrip/fixture_beam.hpp"
#include "snapgrip/grasp_sim.hpp"
#include "snapgrip/hydraulic_network.hpp"
#include "snapgrip/io.hpp"
#include "snapgrip/materials.hpp"
#include "snapgrip/membrane.hpp"
#include "snapgrip/pv_analysis.hpp"

namespace fs = std::filesystem;
using namespace snapgrip;
using io::Config;
using io::Json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct Flags {
    std::string command;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> angles;
    std::optional<double> flow;
    std::optional<double> max_volume;
};

const std::set<std::string> kChamberKeys{"kind", "tilt_deg", "wall", "a", "b", "c", "R", "r", "w", "m", "z"};
const std::set<std::string> kMaterialKeys{"name", "catalog", "c10", "d1", "density"};
const std::set<std::string> kSolverKeys{"n_segments",   "initial_step", "min_step",       "max_step",
                                        "max_steps",    "tolerance",    "max_iterations", "termination_factor",
                                        "max_volume_mm3", "bending_scale", "threads"};
const std::set<std::string> kBeamKeys{"E",  "A_eff", "L1",         "L2",         "L3",         "I1",
                                      "I2", "I3",    "theta1_deg", "theta2_deg", "theta3_deg", "calibrated"};

fs::path config_dir(const Config& cfg) {
    if (cfg.origin().empty() || cfg.origin()[0] == '<') return fs::current_path();
    return fs::absolute(fs::path(cfg.origin())).parent_path();
}

fs::path resolve(const Config& cfg, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : config_dir(cfg) / path;
}

// ---------------------------------------------------------------------------
// Builders

std::string geometry_text(const ChamberGeometry& g) {
    std::ostringstream out;
    out << "kind = " << to_string(g.kind) << "\n";
    const std::map<std::string, double> values{{"tilt_deg", g.tilt_deg}, {"wall", g.wall}, {"a", g.a}, {"b", g.b},
                                               {"c", g.c},               {"R", g.R},       {"r", g.r}, {"w", g.w},
                                               {"m", g.m},               {"z", g.z}};
    for (const auto& [k, v] : values) out << k << " = " << io::format_number(v) << "\n";
    return out.str();
}

ChamberGeometry build_geometry(const Config& cfg) {
    const std::string kind = cfg.text("chamber", "kind", "gripping");
    ChamberGeometry g;
    if (kind == "gripping") {
        g = ChamberGeometry::gripping();
    } else if (kind == "contact") {
        g = ChamberGeometry::contact();
    } else {
        throw ValidationError(cfg.origin() + ": [chamber] kind: expected gripping or contact, got '" + kind + "'");
    }
    // Overlay the configured keys on the template and let the chamber reader validate.
    std::map<std::string, std::string> merged;
    std::istringstream base(geometry_text(g));
    for (std::string line; std::getline(base, line);) {
        const auto eq = line.find(" = ");
        merged[line.substr(0, eq)] = line.substr(eq + 3);
    }
    for (const auto& key : kChamberKeys) {
        if (auto v = cfg.get("chamber", key)) merged[key] = *v;
    }
    std::ostringstream text;
    for (const auto& [k, v] : merged) text << k << " = " << v << "\n";
    std::istringstream in(text.str());
    return chamber_from_ini(in);
}

MaterialParams build_material(const Config& cfg) {
    MaterialCatalog catalog = MaterialCatalog::defaults();
    if (auto path = cfg.get("material", "catalog")) catalog = MaterialCatalog::from_ini_file(resolve(cfg, *path).string());
    MaterialParams m = catalog.get(cfg.text("material", "name", "dragon-skin-00-30"));
    m.c10 = cfg.number("material", "c10", m.c10);
    m.d1 = cfg.number("material", "d1", m.d1);
    m.density = cfg.number("material", "density", m.density);
    m.validate();
    return m;
}

SweepOptions build_sweep_options(const Config& cfg, const Flags& flags) {
    SweepOptions o;
    o.n_segments = static_cast<int>(cfg.integer("solver", "n_segments", o.n_segments));
    auto& c = o.control;
    c.initial_step = cfg.number("solver", "initial_step", c.initial_step);
    c.min_step = cfg.number("solver", "min_step", c.min_step);
    c.max_step = cfg.number("solver", "max_step", c.max_step);
    c.max_steps = static_cast<int>(cfg.integer("solver", "max_steps", c.max_steps));
    c.tolerance = cfg.number("solver", "tolerance", c.tolerance);
    c.max_iterations = static_cast<int>(cfg.integer("solver", "max_iterations", c.max_iterations));
    c.termination_factor = cfg.number("solver", "termination_factor", c.termination_factor);
    c.max_volume_change = cfg.number("solver", "max_volume_mm3", c.max_volume_change);
    if (flags.max_volume) c.max_volume_change = *flags.max_volume;
    o.model.bending_scale = cfg.number("solver", "bending_scale", o.model.bending_scale);
    const long threads = cfg.integer("solver", "threads", 0);
    if (threads < 0) throw ValidationError(cfg.origin() + ": [solver] threads must be >= 0");
    o.threads = static_cast<unsigned>(threads);
    o.max_volume_factor = cfg.number("sweep", "max_volume_factor", o.max_volume_factor);
    if (o.n_segments < 4) throw ValidationError(cfg.origin() + ": [solver] n_segments must be >= 4");
    c.validate();
    return o;
}

ObjectModel build_object(const Config& cfg, const std::string& label, double size) {
    ObjectModel o;
    if (label == "rigid") {
        o = ObjectModel::rigid(size);
    } else {
        o = block_object(label, size);
    }
    if (auto k = cfg.get("grasp", "k_o_N_per_mm")) {
        o.stiffness = io::parse_number(*k, cfg.origin() + ": [grasp] k_o_N_per_mm");
    }
    o.validate();
    return o;
}

GraspScenario build_scenario(const Config& cfg, bool calibrated_fixture) {
    GraspScenario s = GraspScenario::defaults();
    if (cfg.has_section("beam")) {
        std::istringstream in(cfg.section_text("beam"));
        s.fixture = beam_from_ini(in);
    } else if (!calibrated_fixture) {
        s.fixture = FixtureBeam::defaults();
    }
    const std::string preset = cfg.text("grasp", "preset", "small");
    if (preset == "small") {
        s.fixture_gap = kSmallFixtureGap;
    } else if (preset == "large") {
        s.fixture_gap = kLargeFixtureGap;
    } else {
        throw ValidationError(cfg.origin() + ": [grasp] preset: expected small or large, got '" + preset + "'");
    }
    s.fixture_gap = cfg.number("grasp", "fixture_gap_mm", s.fixture_gap);
    s.contact_gap = cfg.number("grasp", "contact_gap_mm", s.contact_gap);
    s.snap_displacement = cfg.number("grasp", "snap_displacement_mm", s.snap_displacement);
    s.hold_threshold = cfg.number("grasp", "hold_threshold_kPa", s.hold_threshold);
    s.compliance = cfg.number("grasp", "compliance_mm3_per_kPa", s.compliance);
    s.contact_stroke = cfg.number("grasp", "stroke_mm3", s.contact_stroke);
    const std::string label = cfg.text("grasp", "object", "rigid");
    const double size = cfg.number("grasp", "size_mm", 30.0);
    if (label == "none") {
        s.object.reset();
    } else {
        s.object = build_object(cfg, label, size);
    }
    s.validate();
    return s;
}

double flow_rate(const Config& cfg, const std::string& section, const Flags& flags) {
    double q = cfg.number(section, "flow_mm3s", syringe_flow(28.7, 0.2));
    if (flags.flow) q = *flags.flow;
    if (!(q > 0.0) || !std::isfinite(q)) throw ValidationError("flow rate must be positive (mm^3/s)");
    return q;
}

std::string csv_of(const std::function<void(std::ostream&)>& writer) {
    std::ostringstream out;
    writer(out);
    return out.str();
}

// ---------------------------------------------------------------------------
// Commands

void run_trace(const Config& cfg, const Flags& flags, io::ResultBundle& bundle) {
    cfg.check({{"chamber", kChamberKeys}, {"material", kMaterialKeys}, {"solver", kSolverKeys}, {"sweep", {"max_volume_factor"}}});
    const auto geom = build_geometry(cfg);
    const auto mat = build_material(cfg);
    auto opts = build_sweep_options(cfg, flags);
    if (!std::isfinite(opts.control.max_volume_change)) {
        opts.control.max_volume_change = sweep_volume_cap(geom, opts.max_volume_factor);
    }
    const MembraneModel model(build_mesh(geom, opts.n_segments), mat, opts.model);
    const auto path = trace_equilibrium_path(model, opts.control);
    const auto report = classify_bistability(path);
    const auto snap = build_snap_path(path);
    const auto characteristic = Characteristic::from_path(path, model, to_string(geom.kind));

    bundle.write("path.csv", csv_of([&](std::ostream& o) { io::write_path_csv(o, path); }));
    bundle.write("characteristic.csv", csv_of([&](std::ostream& o) { io::write_characteristic_csv(o, characteristic); }));
    EquilibriumPath snap_path;
    snap_path.samples = snap.samples;
    snap_path.reference_volume = path.reference_volume;
    snap_path.termination = path.termination;
    bundle.write("snap_path.csv", csv_of([&](std::ostream& o) { io::write_path_csv(o, snap_path); }));
    Json summary{{"chamber", to_string(geom.kind)},
                 {"tilt_deg", geom.tilt_deg},
                 {"samples", path.samples.size()},
                 {"termination", to_string(path.termination)},
                 {"reference_volume_mm3", path.reference_volume},
                 {"bistability", io::bistability_json(report)}};
    if (!path.diagnostic.empty()) summary["diagnostic"] = path.diagnostic;
    bundle.write_json("summary.json", summary);
    std::cout << "trace: " << path.samples.size() << " samples, p_s = " << report.p_s
              << " kPa, bistable = " << (report.bistable() ? "yes" : "no") << "\n";
}

void run_sweep(const Config& cfg, const Flags& flags, io::ResultBundle& bundle) {
    cfg.check({{"chamber", kChamberKeys},
               {"material", kMaterialKeys},
               {"solver", kSolverKeys},
               {"sweep", {"angles", "max_volume_factor"}}});
    const auto geom = build_geometry(cfg);
    const auto mat = build_material(cfg);
    const auto opts = build_sweep_options(cfg, flags);
    const auto angles = flags.angles ? *flags.angles : cfg.numbers("sweep", "angles", kDefaultSweepAngles);
    if (angles.empty()) throw ValidationError("sweep: angle list is empty (--angles or [sweep] angles)");
    const auto result = tilt_sweep(geom, angles, mat, opts);
    bundle.write("sweep.csv", csv_of([&](std::ostream& o) { io::write_sweep_csv(o, result); }));
    bundle.write_json("sweep.json", io::sweep_json(result));
    for (const auto& e : result.entries) {
        std::cout << e.angle_deg << " deg: "
                  << (e.ok ? (e.report.bistable() ? "bistable" : "not bistable") : "error: " + e.error) << "\n";
    }
    bool all_ok = true;
    for (const auto& e : result.entries) all_ok = all_ok && e.ok;
    if (!all_ok) throw SolverError("sweep: at least one angle failed; see sweep.csv");
}

void run_beam(const Config& cfg, const Flags&, io::ResultBundle& bundle) {
    cfg.check({{"beam", kBeamKeys}, {"beam.query", {"loads_N", "deflections_mm"}}});
    FixtureBeam beam = FixtureBeam::defaults();
    if (cfg.has_section("beam")) {
        std::istringstream in(cfg.section_text("beam"));
        beam = beam_from_ini(in);
    }
    const auto loads = cfg.numbers("beam.query", "loads_N", {1.0, 2.0, 5.0, 10.0, 20.0, 50.0});
    const auto deflections = cfg.numbers("beam.query", "deflections_mm", {});
    std::ostringstream csv;
    io::write_csv_row(csv, {"load_N", "deflection_mm", "pressure_kPa"});
    const auto c = compliance(beam);
    for (double p : loads) {
        const double d = tip_deflection(beam, p);
        io::write_csv_row(csv, {io::format_number(p), io::format_number(d),
                                io::format_number(pressure_from_deflection(beam, std::abs(d)))});
    }
    for (double d : deflections) {
        io::write_csv_row(csv, {io::format_number(d / c.compliance), io::format_number(d),
                                io::format_number(pressure_from_deflection(beam, d))});
    }
    bundle.write("beam.csv", csv.str());
    bundle.write_json("beam.json", io::beam_json(beam));
    std::ostringstream ini;
    io::write_beam_ini(ini, beam);
    bundle.write("beam.ini", ini.str());
    std::cout << "beam: C_b = " << c.compliance << " mm/N, k_b = " << c.stiffness << " N/mm ("
              << (beam.calibrated ? "calibrated" : "uncalibrated") << ")\n";
}

struct NetworkSetup {
    std::vector<NodeSpec> nodes;
    std::optional<double> default_stroke;
};

NetworkSetup network_nodes(const Config& cfg) {
    NetworkSetup out;
    const auto sections = cfg.sections_with_prefix("node.");
    if (sections.empty()) {
        const auto& ch = calibrated_chambers();
        out.nodes = {{"contact", ch.contact, 1}, {"gripping-1", ch.gripping, 0}, {"gripping-2", ch.gripping, 0}};
        out.default_stroke = ch.contact_stroke;
        return out;
    }
    for (const auto& sec : sections) {
        NodeSpec n;
        n.name = sec.substr(5);
        const std::string source = cfg.text(sec, "characteristic", "gripping");
        if (source == "gripping") {
            n.characteristic = calibrated_chambers().gripping;
        } else if (source == "contact") {
            n.characteristic = calibrated_chambers().contact;
            out.default_stroke = calibrated_chambers().contact_stroke;
        } else {
            auto ingested = io::ingest_characteristic(resolve(cfg, source));
            for (const auto& w : ingested.warnings) std::cerr << "warning: " << w << "\n";
            n.characteristic = std::move(ingested.characteristic);
        }
        if (auto f = cfg.get(sec, "pressure_scale")) {
            n.characteristic = n.characteristic.scaled(io::parse_number(*f, sec + " pressure_scale"));
        }
        n.characteristic.name = n.name;
        n.branch = static_cast<int>(cfg.integer(sec, "branch", 0));
        out.nodes.push_back(std::move(n));
    }
    return out;
}

void run_network(const Config& cfg, const Flags& flags, io::ResultBundle& bundle) {
    cfg.check({{"network",
                {"mode", "pressure_kPa", "compliance_mm3_per_kPa", "flow_mm3s", "duration_s", "dt_s", "contact_node",
                 "stroke_mm3", "steps", "operations", "step_mm3"}},
               {"node.*", {"characteristic", "branch", "pressure_scale"}}});
    const auto setup = network_nodes(cfg);
    const double compliance = cfg.number("network", "compliance_mm3_per_kPa", 0.0);
    const double p0 = cfg.number("network", "pressure_kPa", 0.0);
    const double total = HydraulicNetwork::total_volume_at_pressure(setup.nodes, p0, compliance);
    auto net = HydraulicNetwork::assemble(setup.nodes, total, compliance);
    std::vector<std::string> names;
    for (const auto& n : setup.nodes) names.push_back(n.name);
    auto sample = [&](double t, bool event) {
        TraceSample s;
        s.time = t;
        s.total_volume = net.total_volume();
        s.pressure = net.pressure();
        for (std::size_t i = 0; i < net.size(); ++i) s.volumes.push_back(net.node(i).volume);
        s.event = event;
        return s;
    };

    const std::string mode = cfg.text("network", "mode", "contact");
    InjectionTrace trace;
    Json summary{{"mode", mode}, {"nodes", names}, {"initial_total_mm3", total}};
    if (mode == "inject") {
        const double duration = cfg.number("network", "duration_s", 60.0);
        const double dt = cfg.number("network", "dt_s", 0.5);
        trace = net.inject(flow_rate(cfg, "network", flags), duration, dt);
    } else if (mode == "contact") {
        const std::string node = cfg.text("network", "contact_node", names.front());
        const std::size_t idx = net.find(node);
        const double stroke =
            cfg.number("network", "stroke_mm3", setup.default_stroke.value_or(0.0));
        const long steps = cfg.integer("network", "steps", 400);
        if (!(stroke > 0.0)) throw ValidationError(cfg.origin() + ": [network] stroke_mm3 must be positive");
        if (steps < 1) throw ValidationError(cfg.origin() + ": [network] steps must be >= 1");
        trace.samples.push_back(sample(0.0, false));
        double applied = 0.0;
        for (long k = 1; k <= steps; ++k) {
            const double d = stroke * static_cast<double>(k) / static_cast<double>(steps);
            try {
                const auto ev = net.apply_contact_displacement(idx, d - applied);
                applied = d;
                trace.events.insert(trace.events.end(), ev.begin(), ev.end());
                trace.samples.push_back(sample(static_cast<double>(k), !ev.empty()));
            } catch (const CoverageError& e) {
                trace.truncated = true;
                trace.diagnostic = e.what();
                break;
            }
        }
        summary["contact_node"] = node;
        summary["displaced_mm3"] = applied;
    } else if (mode == "random") {
        const long ops = cfg.integer("network", "operations", 1000);
        if (ops < 1) throw ValidationError(cfg.origin() + ": [network] operations must be >= 1");
        const std::size_t contact = net.find(cfg.text("network", "contact_node", names.front()));
        const double step = cfg.number("network", "step_mm3", 200.0);
        if (!(step > 0.0)) throw ValidationError(cfg.origin() + ": [network] step_mm3 must be positive");
        std::mt19937_64 rng(flags.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double worst = 0.0;
        long rejected = 0;
        std::map<std::string, long> reasons;
        trace.samples.push_back(sample(0.0, false));
        for (long k = 1; k <= ops; ++k) {
            try {
                std::vector<SnapEvent> ev;
                if (unit(rng) < 0.5) {
                    ev = net.set_total_volume(net.total_volume() + (unit(rng) - 0.5) * 2.0 * step);
                } else {
                    const double dv = (unit(rng) - 0.4) * 2.0 * step;
                    ev = net.apply_contact_displacement(contact, std::max(dv, -net.node(contact).displaced));
                }
                trace.events.insert(trace.events.end(), ev.begin(), ev.end());
                trace.samples.push_back(sample(static_cast<double>(k), !ev.empty()));
            } catch (const ValidationError& e) {
                ++rejected;
                ++reasons[e.what()];
            } catch (const SolverError& e) {
                ++rejected;
                ++reasons[e.what()];
            }
            worst = std::max(worst, std::abs(net.balance_error()));
        }
        summary["operations"] = ops;
        summary["rejected_operations"] = rejected;
        summary["rejection_reasons"] = reasons;
        summary["max_balance_error"] = worst;
    } else {
        throw ValidationError(cfg.origin() + ": [network] mode: expected inject, contact or random, got '" + mode + "'");
    }
    bundle.write("trace.csv", csv_of([&](std::ostream& o) { io::write_injection_trace_csv(o, trace, names); }));
    bundle.write("events.csv", csv_of([&](std::ostream& o) { io::write_events_csv(o, trace.events); }));
    summary["final_pressure_kPa"] = net.pressure();
    summary["final_total_mm3"] = net.total_volume();
    summary["balance_error"] = net.balance_error();
    summary["events"] = trace.events.size();
    summary["truncated"] = trace.truncated;
    if (!trace.diagnostic.empty()) summary["diagnostic"] = trace.diagnostic;
    bundle.write_json("summary.json", summary);
    std::cout << "network: " << trace.events.size() << " snap events, final p = " << net.pressure() << " kPa\n";
}

void run_grasp(const Config& cfg, const Flags& flags, io::ResultBundle& bundle) {
    cfg.check({{"grasp",
                {"mode", "object", "k_o_N_per_mm", "size_mm", "preset", "fixture_gap_mm", "contact_gap_mm",
                 "snap_displacement_mm", "hold_threshold_kPa", "compliance_mm3_per_kPa", "stroke_mm3", "steps",
                 "flow_mm3s", "duration_s", "dt_s", "plateau_volume_mm3", "hold_steps"}},
               {"beam", kBeamKeys}});
    const auto s = build_scenario(cfg, true);
    const std::string mode = cfg.text("grasp", "mode", "grasp");
    Json summary;
    GraspTrace trace;
    if (mode == "quasistatic") {
        const double duration = cfg.number("grasp", "duration_s", 40.0);
        const double dt = cfg.number("grasp", "dt_s", 0.25);
        const double plateau = cfg.number("grasp", "plateau_volume_mm3", kPlateauVolume);
        trace = simulate_quasistatic_test(s, flow_rate(cfg, "grasp", flags), duration, dt, plateau);
        summary = io::grasp_summary_json(trace);
        summary.erase("outcome");
        const auto b = detect_phases(trace);
        summary["phase_II_start"] = b.contact ? Json(*b.contact) : Json(nullptr);
        summary["phase_III_start"] = b.completion ? Json(*b.completion) : Json(nullptr);
        summary["plateau_volume_mm3"] = plateau;
    } else if (mode == "grasp") {
        if (!s.object) throw ValidationError(cfg.origin() + ": [grasp] object 'none' needs mode = quasistatic");
        const long steps = cfg.integer("grasp", "steps", 400);
        if (steps < 1) throw ValidationError(cfg.origin() + ": [grasp] steps must be >= 1");
        trace = simulate_grasp(s, full_stroke_profile(s, static_cast<int>(steps)));
        summary = io::grasp_summary_json(trace);
        const auto w = size_window(s.fixture_gap, s.snap_displacement);
        summary["window_mm"] = Json::array({w.min_size, w.max_size});
        if (trace.outcome == GraspOutcome::Grasped) {
            const long hold = cfg.integer("grasp", "hold_steps", 10000);
            const auto h = hold_without_source(trace, static_cast<int>(hold));
            summary["hold"] = Json{{"steps", hold}, {"pressure_change_kPa", h.pressure_change}, {"events", h.events}};
        }
    } else {
        throw ValidationError(cfg.origin() + ": [grasp] mode: expected grasp or quasistatic, got '" + mode + "'");
    }
    summary["object"] = s.object ? Json{{"label", s.object->label},
                                        {"size_mm", s.object->size},
                                        {"k_o_N_per_mm", s.object->is_rigid() ? Json("rigid") : Json(s.object->stiffness)}}
                                 : Json(nullptr);
    summary["fixture"] = io::beam_json(s.fixture);
    bundle.write("trace.csv", csv_of([&](std::ostream& o) { io::write_grasp_trace_csv(o, trace); }));
    bundle.write_json("summary.json", summary);
    std::cout << "grasp (" << mode << "): ";
    if (mode == "grasp") std::cout << to_string(trace.outcome) << ", ";
    std::cout << "pressure " << trace.plateau_pressure << " kPa\n";
}

std::vector<CalibrationTarget> parse_targets(const Config& cfg) {
    const std::string text = cfg.text("calibrate", "targets", "stiff:14, soft:3");
    std::vector<CalibrationTarget> out;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ',');) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ValidationError(cfg.origin() + ": [calibrate] targets: expected label:kPa pairs, got '" + item + "'");
        }
        CalibrationTarget t;
        t.label = item.substr(0, colon);
        t.label.erase(0, t.label.find_first_not_of(' '));
        t.label.erase(t.label.find_last_not_of(' ') + 1);
        t.pressure = io::parse_number(item.substr(colon + 1), cfg.origin() + ": [calibrate] target " + t.label);
        out.push_back(t);
    }
    return out;
}

void run_calibrate(const Config& cfg, const Flags&, io::ResultBundle& bundle) {
    cfg.check({{"calibrate", {"targets", "fit_area", "plateau_volume_mm3"}}, {"beam", kBeamKeys}});
    const auto targets = parse_targets(cfg);
    const auto base = build_scenario(cfg, false);
    const bool fit_area = cfg.flag("calibrate", "fit_area", true);
    const double plateau = cfg.number("calibrate", "plateau_volume_mm3", kPlateauVolume);
    const auto r = calibrate_fixture(targets, base, fit_area, plateau);
    bundle.write_json("calibration.json", io::calibration_json(r, targets));
    std::ostringstream csv;
    io::write_csv_row(csv, {"label", "k_o_N_per_mm", "target_kPa", "predicted_kPa", "residual_kPa"});
    for (std::size_t i = 0; i < targets.size(); ++i) {
        io::write_csv_row(csv, {targets[i].label, io::format_number(block_object(targets[i].label).stiffness),
                                io::format_number(targets[i].pressure), io::format_number(r.predicted[i]),
                                io::format_number(r.residuals[i])});
    }
    bundle.write("residuals.csv", csv.str());
    std::ostringstream ini;
    io::write_beam_ini(ini, r.fixture);
    bundle.write("fixture.ini", ini.str());
    std::cout << "calibrate: k_b = " << r.stiffness << " N/mm, A_eff = " << r.effective_area
              << " mm^2, rms residual = " << r.rms << " kPa\n";
}

fs::path default_out(const std::string& command) {
    const char* root = std::getenv("SNAPGRIP_OUT");
    return fs::path(root && *root ? root : "snapgrip-out") / command;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Snap-through hydraulic gripper simulator"};
    app.require_subcommand(1);
    Flags flags;
    std::vector<double> angles;
    double flow = 0.0, max_volume = 0.0;
    std::vector<CLI::Option*> angle_opts, flow_opts, volume_opts;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"trace", "trace one chamber's pressure-volume equilibrium path"},
        {"sweep", "bistability criteria over tilt angles"},
        {"beam", "fixture beam compliance and deflection-to-pressure table"},
        {"network", "hydraulic network run (contact stroke, injection or randomized operations)"},
        {"grasp", "grasp or quasi-static block test"},
        {"calibrate", "fit fixture stiffness to observed plateau pressures"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "INI configuration file");
        sub->add_option("--out", flags.out, "output directory (default $SNAPGRIP_OUT/<command>)");
        sub->add_option("--seed", flags.seed, "seed for randomized runs");
        if (name == "sweep") {
            angle_opts.push_back(sub->add_option("--angles", angles, "tilt angles in degrees")->delimiter(','));
        }
        if (name == "network" || name == "grasp") {
            flow_opts.push_back(sub->add_option("--flow-mm3s", flow, "injection flow (mm^3/s)"));
        }
        if (name == "trace" || name == "sweep") {
            volume_opts.push_back(
                sub->add_option("--max-volume-mm3", max_volume, "volume change at which tracing stops (mm^3)"));
        }
        sub->callback([&flags, name = name]() { flags.command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    auto given = [](const std::vector<CLI::Option*>& opts) {
        return std::any_of(opts.begin(), opts.end(), [](const CLI::Option* o) { return o->count() > 0; });
    };
    if (given(angle_opts)) flags.angles = angles;
    if (given(flow_opts)) flags.flow = flow;
    if (given(volume_opts)) flags.max_volume = max_volume;

    std::optional<io::ResultBundle> bundle;
    try {
        const Config cfg = flags.config.empty() ? Config::empty() : Config::load(flags.config);
        bundle.emplace(flags.out.empty() ? default_out(flags.command) : fs::path(flags.out), flags.command, cfg,
                       flags.seed);
        if (flags.command == "trace") run_trace(cfg, flags, *bundle);
        else if (flags.command == "sweep") run_sweep(cfg, flags, *bundle);
        else if (flags.command == "beam") run_beam(cfg, flags, *bundle);
        else if (flags.command == "network") run_network(cfg, flags, *bundle);
        else if (flags.command == "grasp") run_grasp(cfg, flags, *bundle);
        else if (flags.command == "calibrate") run_calibrate(cfg, flags, *bundle);
        bundle->finish("ok");
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (bundle) bundle->finish("validation-error", e.what());
        return kExitValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        if (bundle) bundle->finish("solver-error", e.what());
        return kExitSolver;
    } catch (const AnalysisError& e) {
        std::cerr << "analysis failure: " << e.what() << "\n";
        if (bundle) bundle->finish("analysis-error", e.what());
        return kExitSolver;
    }
}
