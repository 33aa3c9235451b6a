#include "snapgrip/grasp_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <boost/math/tools/minima.hpp>

#include "snapgrip/chamber.hpp"
#include "snapgrip/continuation.hpp"
#include "snapgrip/error.hpp"
#include "snapgrip/materials.hpp"
#include "snapgrip/membrane.hpp"
#include "snapgrip/pv_analysis.hpp"

namespace snapgrip {

namespace {

Characteristic trace_chamber(ChamberGeometry g, const ChamberDefaults& o, const std::string& name) {
    g.tilt_deg = o.tilt_deg;
    const auto mesh = build_mesh(g, o.n_segments);
    ContinuationControl control;
    control.max_step = o.max_step;
    control.termination_factor = o.termination_factor;
    control.max_volume_change = 2.5 * sweep_volume_cap(g, 1.0);
    const MembraneModel model(mesh, material_from_catalog(o.material));
    const auto path = trace_equilibrium_path(model, control);
    return Characteristic::from_path(path, model, name);
}

CalibratedChambers build_chambers(const ChamberDefaults& o) {
    if (!(o.critical_pressure > 0.0) || !(o.snap_volume > 0.0)) {
        throw ValidationError("chamber defaults: critical pressure and snap volume must be positive");
    }
    Characteristic grip = trace_chamber(ChamberGeometry::gripping(), o, "gripping");
    Characteristic contact = trace_chamber(ChamberGeometry::contact(), o, "contact");

    const auto snap = build_snap_path(grip.to_path());
    if (snap.jumps.empty()) throw AnalysisError("gripping chamber shows no snap-through to calibrate against");
    const double landing = snap.jumps.front().volume - grip.volume.front();

    CalibratedChambers out;
    out.length_factor = std::cbrt(o.snap_volume / landing);
    out.pressure_factor = o.critical_pressure / grip.critical_pressure();
    out.gripping = grip.similar(out.length_factor).normalized(o.critical_pressure);
    out.contact = contact.similar(out.length_factor).scaled(out.pressure_factor);

    const std::vector<NodeSpec> spec{{"contact", out.contact, 1}};
    const double snapped = HydraulicNetwork::total_volume_at_pressure(spec, 0.0);
    out.contact_stroke = snapped - out.contact.volume.front();
    return out;
}

bool same_defaults(const ChamberDefaults& a, const ChamberDefaults& b) {
    return a.n_segments == b.n_segments && a.tilt_deg == b.tilt_deg && a.material == b.material &&
           a.critical_pressure == b.critical_pressure && a.snap_volume == b.snap_volume &&
           a.termination_factor == b.termination_factor && a.max_step == b.max_step;
}

/// Linear interpolation of a per-point column at polyline parameter sigma.
double at_position(const std::vector<double>& column, double sigma) {
    const double last = static_cast<double>(column.size() - 1);
    sigma = std::clamp(sigma, 0.0, last);
    const auto k = std::min(static_cast<std::size_t>(sigma), column.size() - 2);
    const double t = sigma - static_cast<double>(k);
    return column[k] + t * (column[k + 1] - column[k]);
}

struct LoadedChamber {
    Characteristic c;
    std::vector<double> source;  ///< parameter on the free curve per point
    ContactLoad load;
    double completion = -1.0;    ///< snap completion on the free curve
};

LoadedChamber loaded_gripper(const GraspScenario& s, double gap) {
    LoadedChamber out;
    out.load.gap = gap;
    out.load.effective_area = s.fixture.effective_area;
    if (s.object) {
        const double k_b = compliance(s.fixture).stiffness;
        out.load.stiffness = series_stiffness(k_b, s.object->stiffness);
        out.load.force_cap = k_b * s.snap_displacement;
    }
    out.c = with_contact_load(s.gripping, out.load, &out.source);
    out.completion = snap_completion_position(s.gripping);
    return out;
}

struct MembraneReading {
    double displacement = 0.0;
    double force = 0.0;
    bool snapped = false;
};

MembraneReading read_membrane(const LoadedChamber& lc, const NodeState& st) {
    MembraneReading r;
    r.displacement = at_position(lc.c.displacement, st.position);
    r.force = lc.load.force(r.displacement);
    r.snapped = lc.completion >= 0.0 && at_position(lc.source, st.position) >= lc.completion;
    return r;
}

void require_positive(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0) throw ValidationError(std::string(what) + " must be positive and finite");
}

}  // namespace

const CalibratedChambers& calibrated_chambers(const ChamberDefaults& options) {
    static std::mutex mutex;
    static std::vector<std::pair<ChamberDefaults, CalibratedChambers>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    for (const auto& [key, value] : cache) {
        if (same_defaults(key, options)) return value;
    }
    cache.emplace_back(options, build_chambers(options));
    return cache.back().second;
}

double block_stiffness(const MaterialParams& material, const BlockSpec& block) {
    material.validate();
    require_positive(block.face_area, "block face area");
    require_positive(block.length, "block length");
    return material.youngs_modulus() * block.face_area / block.length;
}

ObjectModel block_object(const std::string& label, double size, const BlockSpec& block) {
    std::string name = label;
    if (label == "stiff") name = "dragon-skin-00-30";
    if (label == "soft") name = "ecoflex-00-30";
    ObjectModel o;
    o.stiffness = block_stiffness(material_from_catalog(name), block);
    o.size = size;
    o.label = label;
    o.validate();
    return o;
}

const std::vector<std::string>& block_series() {
    static const std::vector<std::string> series = [] {
        std::vector<std::string> names{"ecoflex-gel-2", "ecoflex-00-10", "ecoflex-00-30", "dragon-skin-00-20",
                                       "dragon-skin-00-30"};
        std::stable_sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
            return material_from_catalog(a).c10 < material_from_catalog(b).c10;
        });
        return names;
    }();
    return series;
}

SizeWindow size_window(double fixture_gap, double snap_displacement) {
    require_positive(fixture_gap, "fixture gap");
    require_positive(snap_displacement, "snap displacement");
    return {std::max(0.0, fixture_gap - 2.0 * snap_displacement), fixture_gap};
}

void GraspScenario::validate() const {
    gripping.validate();
    contact.validate();
    fixture.validate();
    if (object) object->validate();
    require_positive(fixture_gap, "fixture gap");
    require_positive(snap_displacement, "snap displacement");
    if (!std::isfinite(contact_gap) || contact_gap < 0.0) throw ValidationError("contact gap must be >= 0");
    if (!std::isfinite(compliance) || compliance < 0.0) throw ValidationError("circuit compliance must be >= 0");
    if (!std::isfinite(hold_threshold)) throw ValidationError("hold threshold must be finite");
    if (!std::isfinite(contact_stroke) || contact_stroke < 0.0) {
        throw ValidationError("contact stroke must be finite and >= 0");
    }
}

namespace {

GraspScenario uncalibrated_scenario() {
    const auto& ch = calibrated_chambers();
    GraspScenario s;
    s.gripping = ch.gripping;
    s.contact = ch.contact;
    s.contact_stroke = ch.contact_stroke;
    s.fixture = FixtureBeam::defaults();
    s.object = ObjectModel::rigid(30.0);
    return s;
}

}  // namespace

GraspScenario GraspScenario::defaults() {
    GraspScenario s = uncalibrated_scenario();
    s.fixture = default_calibration().fixture;
    return s;
}

std::string to_string(WindowCheck w) {
    switch (w) {
        case WindowCheck::InWindow: return "in-window";
        case WindowCheck::TooLarge: return "too-large";
        case WindowCheck::TooSmall: return "too-small";
    }
    return "unknown";
}

WindowCheck grasp_feasibility(const GraspScenario& scenario) {
    if (!scenario.object) throw ValidationError("grasp feasibility needs an object");
    scenario.object->validate();
    const SizeWindow w = size_window(scenario.fixture_gap, scenario.snap_displacement);
    const double size = scenario.object->size;
    if (size > w.max_size) return WindowCheck::TooLarge;
    if (size < w.min_size) return WindowCheck::TooSmall;
    return WindowCheck::InWindow;
}

std::string to_string(GraspOutcome o) {
    switch (o) {
        case GraspOutcome::Grasped: return "grasped";
        case GraspOutcome::FilteredTooLarge: return "filtered-too-large";
        case GraspOutcome::FilteredTooSmall: return "filtered-too-small";
        case GraspOutcome::NoTrigger: return "no-trigger";
        case GraspOutcome::NotHeld: return "not-held";
    }
    return "unknown";
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::I: return "I";
        case Phase::II: return "II";
        case Phase::III: return "III";
    }
    return "?";
}

PhaseBoundaries detect_phases(GraspTrace& trace) {
    PhaseBoundaries b;
    if (trace.has_object) {
        for (std::size_t k = 0; k < trace.samples.size(); ++k) {
            if (trace.samples[k].displacement >= trace.gap) {
                b.contact = k;
                break;
            }
        }
    }
    if (b.contact) {
        for (std::size_t k = *b.contact; k < trace.samples.size(); ++k) {
            if (trace.samples[k].snapped) {
                b.completion = k;
                break;
            }
        }
    }
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        Phase ph = Phase::I;
        if (b.contact && k >= *b.contact) ph = Phase::II;
        if (b.completion && k >= *b.completion) ph = Phase::III;
        trace.samples[k].phase = ph;
    }
    return b;
}

namespace {

struct QuasistaticSetup {
    LoadedChamber chamber;
    std::vector<NodeSpec> spec;
    double start = 0.0;
};

QuasistaticSetup quasistatic_setup(const GraspScenario& scenario) {
    scenario.validate();
    QuasistaticSetup q;
    q.chamber = loaded_gripper(scenario, scenario.contact_gap);
    q.spec = {{"gripping", q.chamber.c, 0}};
    q.start = HydraulicNetwork::total_volume_at_pressure(q.spec, 0.0, scenario.compliance);
    return q;
}

}  // namespace

GraspTrace simulate_quasistatic_test(const GraspScenario& scenario, double flow, double duration, double dt,
                                     double plateau_volume) {
    require_positive(flow, "flow");
    require_positive(duration, "duration");
    require_positive(dt, "sampling interval");
    if (!std::isfinite(plateau_volume) || plateau_volume < 0.0) {
        throw ValidationError("plateau volume must be finite and >= 0");
    }
    const auto q = quasistatic_setup(scenario);
    auto net = HydraulicNetwork::assemble(q.spec, q.start, scenario.compliance);

    GraspTrace trace;
    trace.has_object = scenario.object.has_value();
    trace.gap = scenario.contact_gap;
    auto record = [&](double t, double injected, bool event) {
        const auto m = read_membrane(q.chamber, net.node(0));
        trace.samples.push_back({t, injected, net.pressure(), m.displacement, m.force, m.snapped, event, Phase::I});
    };
    record(0.0, 0.0, false);

    const auto steps = static_cast<long>(std::ceil(duration / dt - 1e-9));
    bool plateau_done = false;
    for (long k = 1; k <= steps; ++k) {
        const double t = std::min(duration, static_cast<double>(k) * dt);
        const double injected = flow * t;
        const double prev = trace.samples.back().volume;
        try {
            // Read the plateau exactly on the way past it.
            if (!plateau_done && plateau_volume > prev && plateau_volume <= injected) {
                for (auto& e : net.set_total_volume(q.start + plateau_volume)) trace.events.push_back(e);
                trace.plateau_pressure = net.pressure();
                plateau_done = true;
            }
            const auto ev = net.set_total_volume(q.start + injected);
            for (const auto& e : ev) trace.events.push_back(e);
            record(t, injected, !ev.empty());
        } catch (const CoverageError& e) {
            trace.truncated = true;
            trace.diagnostic = e.what();
            break;
        }
    }
    if (!plateau_done) trace.plateau_pressure = trace.samples.back().pressure;
    for (auto& e : trace.events) {
        e.time = e.total_before - q.start;
    }
    if (!trace.events.empty()) trace.trigger_volume = trace.events.front().total_before - q.start;
    trace.outcome = trace.events.empty() ? GraspOutcome::NoTrigger : GraspOutcome::NotHeld;
    trace.network = std::make_shared<HydraulicNetwork>(std::move(net));
    detect_phases(trace);
    return trace;
}

double plateau_pressure(const GraspScenario& scenario, double plateau_volume) {
    if (!std::isfinite(plateau_volume) || plateau_volume < 0.0) {
        throw ValidationError("plateau volume must be finite and >= 0");
    }
    const auto q = quasistatic_setup(scenario);
    auto net = HydraulicNetwork::assemble(q.spec, q.start, scenario.compliance);
    net.set_total_volume(q.start + plateau_volume);
    return net.pressure();
}

std::vector<double> full_stroke_profile(const GraspScenario& scenario, int steps) {
    if (steps < 1) throw ValidationError("profile needs at least one step");
    require_positive(scenario.contact_stroke, "contact stroke");
    std::vector<double> out(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) out[static_cast<std::size_t>(k)] = scenario.contact_stroke * k / steps;
    out.back() = scenario.contact_stroke;
    return out;
}

namespace {

double side_gap(const GraspScenario& s) {
    return s.object ? std::max(0.0, 0.5 * (s.fixture_gap - s.object->size)) : s.contact_gap;
}

}  // namespace

HydraulicNetwork grasp_network(const GraspScenario& scenario) {
    scenario.validate();
    const auto gripper = loaded_gripper(scenario, side_gap(scenario));
    const std::vector<NodeSpec> spec{
        {"contact", scenario.contact, 1}, {"gripping-1", gripper.c, 0}, {"gripping-2", gripper.c, 0}};
    const double total = HydraulicNetwork::total_volume_at_pressure(spec, 0.0, scenario.compliance);
    return HydraulicNetwork::assemble(spec, total, scenario.compliance);
}

GraspTrace simulate_grasp(const GraspScenario& scenario, const std::vector<double>& profile) {
    scenario.validate();
    if (!scenario.object) throw ValidationError("grasp simulation needs an object");
    if (profile.empty()) throw ValidationError("displacement profile is empty");
    for (double d : profile) {
        if (!std::isfinite(d) || d < 0.0) throw ValidationError("displacement profile values must be finite and >= 0");
    }

    GraspTrace trace;
    trace.has_object = true;
    switch (grasp_feasibility(scenario)) {
        case WindowCheck::TooLarge: trace.outcome = GraspOutcome::FilteredTooLarge; return trace;
        case WindowCheck::TooSmall: trace.outcome = GraspOutcome::FilteredTooSmall; return trace;
        case WindowCheck::InWindow: break;
    }

    const double gap = side_gap(scenario);
    trace.gap = gap;
    const auto gripper = loaded_gripper(scenario, gap);
    auto net = grasp_network(scenario);

    const double stroke = scenario.contact_stroke;
    auto record = [&](double t, double d, bool event) {
        const auto m = read_membrane(gripper, net.node(1));
        trace.samples.push_back({t, d, net.pressure(), m.displacement, m.force, m.snapped, event, Phase::I});
    };
    double applied = 0.0;
    record(0.0, 0.0, false);
    for (std::size_t k = 0; k < profile.size(); ++k) {
        double d = profile[k];
        if (stroke > 0.0 && d > stroke) {
            trace.truncated = true;
            trace.diagnostic = "profile exceeds the contact chamber stroke; truncated at " + std::to_string(stroke);
            d = stroke;
        }
        if (d != applied) {
            try {
                const auto ev = net.apply_contact_displacement(0, d - applied);
                applied = d;
                for (auto e : ev) {
                    e.time = static_cast<double>(k);
                    trace.events.push_back(e);
                    if (trace.trigger_volume < 0.0) trace.trigger_volume = d;
                }
                record(static_cast<double>(k), d, !ev.empty());
            } catch (const CoverageError& e) {
                trace.truncated = true;
                trace.diagnostic = e.what();
                break;
            }
        }
        if (trace.truncated) break;
    }

    trace.plateau_pressure = net.pressure();
    if (trace.events.empty()) {
        trace.outcome = GraspOutcome::NoTrigger;
    } else {
        bool held = net.pressure() >= scenario.hold_threshold;
        for (std::size_t i = 1; i <= 2; ++i) {
            const auto m = read_membrane(gripper, net.node(i));
            held = held && m.snapped && m.displacement >= gap;
        }
        trace.outcome = held ? GraspOutcome::Grasped : GraspOutcome::NotHeld;
    }
    trace.network = std::make_shared<HydraulicNetwork>(std::move(net));
    detect_phases(trace);
    return trace;
}

HoldResult hold_without_source(const GraspTrace& trace, int steps, double dt) {
    if (!trace.network) throw ValidationError("trace has no final circuit state to hold");
    if (steps < 1) throw ValidationError("hold needs at least one step");
    require_positive(dt, "hold interval");
    HydraulicNetwork net = *trace.network;
    const double p0 = net.pressure();
    const auto held = net.inject(0.0, dt * steps, dt);
    HoldResult r;
    for (const auto& s : held.samples) r.pressure_change = std::max(r.pressure_change, std::abs(s.pressure - p0));
    r.events = held.events.size();
    return r;
}

namespace {

GraspScenario with_fixture(GraspScenario s, double k_b, double area, double k_base) {
    s.fixture.youngs_modulus *= k_b / k_base;
    s.fixture.effective_area = area;
    return s;
}

struct Fit {
    double log_k = 0.0;
    double sse = std::numeric_limits<double>::infinity();
};

/// Grid scan then Brent refinement on the best bracket of a 1-D objective.
template <class F>
std::pair<double, double> scan_minimize(F f, double lo, double hi, int grid) {
    std::vector<double> xs(static_cast<std::size_t>(grid)), fs(xs.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        xs[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid - 1);
        fs[k] = f(xs[k]);
        if (fs[k] < fs[best]) best = k;
    }
    const double a = xs[best == 0 ? 0 : best - 1];
    const double b = xs[std::min(best + 1, xs.size() - 1)];
    const auto r = boost::math::tools::brent_find_minima(f, a, b, 40);
    if (r.second < fs[best]) return {r.first, r.second};
    return {xs[best], fs[best]};
}

}  // namespace

CalibrationResult calibrate_fixture(const std::vector<CalibrationTarget>& targets, const GraspScenario& base,
                                    bool fit_area, double plateau_volume) {
    if (targets.size() < 2) {
        throw ValidationError("calibration is under-determined: at least two (label, pressure) targets required");
    }
    base.validate();
    std::vector<double> k_o;
    for (const auto& t : targets) {
        if (!std::isfinite(t.pressure)) throw ValidationError("calibration target pressure must be finite");
        k_o.push_back(t.stiffness > 0.0 ? t.stiffness : block_object(t.label).stiffness);
    }

    const double k_base = compliance(base.fixture).stiffness;
    auto predict = [&](double k_b, double area) {
        std::vector<double> out;
        GraspScenario s = with_fixture(base, k_b, area, k_base);
        for (double k : k_o) {
            s.object = ObjectModel{k, base.object ? base.object->size : 30.0, "target"};
            out.push_back(plateau_pressure(s, plateau_volume));
        }
        return out;
    };
    auto sse = [&](double k_b, double area) {
        const auto p = predict(k_b, area);
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - targets[i].pressure) * (p[i] - targets[i].pressure);
        return acc;
    };
    auto fit_k = [&](double area) {
        return scan_minimize([&](double lk) { return sse(std::exp(lk), area); }, std::log(1e-2), std::log(1e3), 31);
    };

    double area = base.fixture.effective_area;
    double log_k = 0.0;
    if (fit_area) {
        const auto r = scan_minimize([&](double la) { return fit_k(std::exp(la)).second; }, std::log(50.0),
                                     std::log(5e4), 21);
        area = std::exp(r.first);
    }
    log_k = fit_k(area).first;

    CalibrationResult res;
    res.stiffness = std::exp(log_k);
    res.effective_area = area;
    res.fixture = with_fixture(base, res.stiffness, area, k_base).fixture;
    res.fixture.calibrated = true;
    res.predicted = predict(res.stiffness, area);
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        res.residuals.push_back(res.predicted[i] - targets[i].pressure);
        acc += res.residuals.back() * res.residuals.back();
    }
    res.rms = std::sqrt(acc / static_cast<double>(targets.size()));
    return res;
}

const CalibrationResult& default_calibration() {
    static const CalibrationResult result =
        calibrate_fixture({{"stiff", 14.0, 0.0}, {"soft", 3.0, 0.0}}, uncalibrated_scenario(), true);
    return result;
}

}  // namespace snapgrip
