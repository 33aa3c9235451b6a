#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "snapgrip/grasp_sim.hpp"

using namespace snapgrip;

namespace {

const double kFlow = syringe_flow(28.7, 0.2);

GraspScenario with_block(const std::string& label, double size = 30.0) {
    auto s = GraspScenario::defaults();
    s.object = block_object(label, size);
    return s;
}

GraspScenario with_stiffness(double k_o) {
    auto s = GraspScenario::defaults();
    ObjectModel o;
    o.stiffness = k_o;
    o.size = 30.0;
    s.object = o;
    return s;
}

// Volume-controlled response of a polyline, walked point by point: advance
// while volume rises; past a fold, resume on the first later piece that
// rises through the fold volume.
struct PolylineWalk {
    const Characteristic& c;
    std::size_t k = 0;

    double operator()(double v) {
        const auto& vol = c.volume;
        while (true) {
            if (vol[k + 1] > vol[k]) {
                if (v <= vol[k + 1]) {
                    return c.pressure[k] + (c.pressure[k + 1] - c.pressure[k]) * (v - vol[k]) / (vol[k + 1] - vol[k]);
                }
                if (k + 2 >= vol.size()) return NAN;
                if (vol[k + 2] > vol[k + 1]) {
                    ++k;
                    continue;
                }
                const double fold = vol[k + 1];
                std::size_t j = k + 1;
                while (j + 1 < vol.size() && !(vol[j] <= fold && vol[j + 1] > fold)) ++j;
                if (j + 1 >= vol.size()) return NAN;
                k = j;
                continue;
            }
            ++k;
        }
    }
};

bool contiguous_phases(const GraspTrace& t) {
    for (std::size_t k = 1; k < t.samples.size(); ++k) {
        if (static_cast<int>(t.samples[k].phase) < static_cast<int>(t.samples[k - 1].phase)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("size windows of the two fixture presets") {
    const auto small = size_window(kSmallFixtureGap, 10.0);
    CHECK(small.min_size == 20.0);
    CHECK(small.max_size == 40.0);
    const auto large = size_window(kLargeFixtureGap, 10.0);
    CHECK(large.min_size == 80.0);
    CHECK(large.max_size == 100.0);
    CHECK(size_window(40.0, 20.0).min_size == 0.0);
    CHECK(size_window(40.0, 35.0).min_size == 0.0);
    CHECK_THROWS_AS(size_window(0.0, 10.0), ValidationError);
    CHECK_THROWS_AS(size_window(40.0, -1.0), ValidationError);
}

TEST_CASE("feasibility against the small window") {
    auto s = GraspScenario::defaults();
    s.object = ObjectModel::rigid(15.0);
    CHECK(grasp_feasibility(s) == WindowCheck::TooSmall);
    s.object = ObjectModel::rigid(30.0);
    CHECK(grasp_feasibility(s) == WindowCheck::InWindow);
    s.object = ObjectModel::rigid(50.0);
    CHECK(grasp_feasibility(s) == WindowCheck::TooLarge);
    s.object = ObjectModel::rigid(20.0);
    CHECK(grasp_feasibility(s) == WindowCheck::InWindow);
    s.object = ObjectModel::rigid(40.0);
    CHECK(grasp_feasibility(s) == WindowCheck::InWindow);
}

TEST_CASE("filtered objects never snap") {
    for (double size : {5.0, 15.0, 19.9, 40.1, 50.0, 90.0}) {
        auto s = GraspScenario::defaults();
        s.object = ObjectModel::rigid(size);
        const auto t = simulate_grasp(s, full_stroke_profile(s, 50));
        CHECK(t.events.empty());
        CHECK((t.outcome == GraspOutcome::FilteredTooLarge || t.outcome == GraspOutcome::FilteredTooSmall));
        CHECK(t.outcome != GraspOutcome::Grasped);
    }
}

TEST_CASE("calibrated plateau pressures for stiff and soft blocks") {
    const auto& cal = default_calibration();
    CHECK(cal.stiffness > 0.0);
    CHECK(cal.fixture.calibrated);
    const double stiff = plateau_pressure(with_block("stiff"));
    const double soft = plateau_pressure(with_block("soft"));
    CHECK(std::abs(stiff - 14.0) <= 0.2 * 14.0);
    CHECK(std::abs(soft - 3.0) <= 0.2 * 3.0);
    CHECK(soft >= 2.0);
    CHECK(soft <= 4.0);
    REQUIRE(cal.residuals.size() == 2);
    CHECK(cal.predicted[0] - 14.0 == doctest::Approx(cal.residuals[0]));
}

TEST_CASE("plateau pressure never falls with object stiffness") {
    double previous = -1e9;
    for (const auto& label : block_series()) {
        const double p = plateau_pressure(with_block(label));
        CHECK(p >= previous);
        previous = p;
    }
    previous = -1e9;
    for (int k = 0; k < 10; ++k) {
        const double k_o = 0.01 * std::pow(10.0, 0.4 * k);
        const double p = plateau_pressure(with_stiffness(k_o));
        CHECK(p >= previous);
        previous = p;
    }
}

TEST_CASE("pressure at the start of phase III never falls with object stiffness") {
    double previous = -1e9;
    for (const auto& label : block_series()) {
        auto t = simulate_quasistatic_test(with_block(label), kFlow, 40.0, 0.25);
        const auto b = detect_phases(t);
        REQUIRE(b.completion.has_value());
        const double p = t.samples[*b.completion].pressure;
        CHECK(p >= previous - 1e-9);
        previous = p;
    }
}

TEST_CASE("without an object the test follows the volume-controlled path") {
    auto s = GraspScenario::defaults();
    s.object.reset();
    const auto t = simulate_quasistatic_test(s, kFlow, 40.0, 0.5);
    const double v0 = s.gripping.volume.front();
    PolylineWalk walk{s.gripping};
    REQUIRE(t.samples.size() == 81);
    for (const auto& smp : t.samples) {
        CHECK(smp.pressure == doctest::Approx(walk(v0 + smp.volume)).epsilon(1e-9).scale(1.0));
        CHECK(smp.force == 0.0);
    }
    CHECK_FALSE(t.events.empty());
}

TEST_CASE("stiff block runs through three contiguous phases") {
    auto t = simulate_quasistatic_test(with_block("stiff"), kFlow, 40.0, 0.25);
    const auto b = detect_phases(t);
    REQUIRE(b.contact.has_value());
    REQUIRE(b.completion.has_value());
    CHECK(*b.contact > 0);
    CHECK(*b.completion > *b.contact);
    CHECK(contiguous_phases(t));
    CHECK(t.samples.front().phase == Phase::I);
    CHECK(t.samples.back().phase == Phase::III);
    CHECK(t.samples[*b.contact - 1].displacement < t.gap);
    CHECK(t.samples[*b.contact].force >= 0.0);

    auto again = t;
    const auto b2 = detect_phases(again);
    CHECK(b2.contact == b.contact);
    CHECK(b2.completion == b.completion);
    for (std::size_t k = 0; k < t.samples.size(); ++k) CHECK(again.samples[k].phase == t.samples[k].phase);
}

TEST_CASE("phase boundaries survive halving the sampling interval") {
    const auto s = with_block("stiff");
    auto coarse = simulate_quasistatic_test(s, kFlow, 40.0, 0.25);
    auto fine = simulate_quasistatic_test(s, kFlow, 40.0, 0.125);
    const auto bc = detect_phases(coarse);
    const auto bf = detect_phases(fine);
    REQUIRE(bc.contact);
    REQUIRE(bf.contact);
    REQUIRE(bc.completion);
    REQUIRE(bf.completion);
    CHECK(std::abs(coarse.samples[*bc.contact].time - fine.samples[*bf.contact].time) <= 0.25);
    CHECK(std::abs(coarse.samples[*bc.completion].time - fine.samples[*bf.completion].time) <= 0.25);
}

TEST_CASE("free trace carries no contact phases") {
    auto s = GraspScenario::defaults();
    s.object.reset();
    auto t = simulate_quasistatic_test(s, kFlow, 40.0, 0.25);
    const auto b = detect_phases(t);
    CHECK_FALSE(b.contact.has_value());
    CHECK_FALSE(b.completion.has_value());
    for (const auto& smp : t.samples) CHECK(smp.phase == Phase::I);
}

TEST_CASE("full trigger stroke grasps a rigid in-window object") {
    const auto s = GraspScenario::defaults();
    const auto t = simulate_grasp(s, full_stroke_profile(s, 200));
    CHECK(t.outcome == GraspOutcome::Grasped);
    CHECK(t.samples.back().pressure >= 6.0);
    std::size_t gripping = 0;
    for (const auto& e : t.events) gripping += (e.node == kGrippingNodes[0] || e.node == kGrippingNodes[1]);
    CHECK(gripping == 2);
    CHECK(t.trigger_volume > 0.0);
    CHECK(t.trigger_volume < s.contact_stroke);
}

TEST_CASE("flexible package is held at a reduced pressure") {
    const auto s = with_block("soft", 35.0);
    const auto t = simulate_grasp(s, full_stroke_profile(s, 200));
    CHECK(t.outcome == GraspOutcome::Grasped);
    const double p = t.samples.back().pressure;
    CHECK(p == doctest::Approx(4.0).epsilon(0.25));
    const auto rigid = simulate_grasp(GraspScenario::defaults(), full_stroke_profile(GraspScenario::defaults(), 200));
    CHECK(p < rigid.samples.back().pressure);
}

TEST_CASE("zero stroke does not trigger") {
    const auto s = GraspScenario::defaults();
    const auto t = simulate_grasp(s, std::vector<double>(5, 0.0));
    CHECK(t.outcome == GraspOutcome::NoTrigger);
    CHECK(t.events.empty());
    CHECK(t.trigger_volume < 0.0);
}

TEST_CASE("profile beyond the stroke is truncated") {
    const auto s = GraspScenario::defaults();
    const auto t = simulate_grasp(s, {0.0, 0.5 * s.contact_stroke, 2.0 * s.contact_stroke});
    CHECK(t.truncated);
    REQUIRE_FALSE(t.samples.empty());
    CHECK(t.samples.back().volume <= s.contact_stroke);
}

TEST_CASE("grasped state holds without a source") {
    const auto s = GraspScenario::defaults();
    const auto t = simulate_grasp(s, full_stroke_profile(s, 100));
    REQUIRE(t.outcome == GraspOutcome::Grasped);
    const auto h = hold_without_source(t, 10000);
    CHECK(h.pressure_change == 0.0);
    CHECK(h.events == 0);
}

TEST_CASE("a known fixture stiffness is recovered from its own predictions") {
    auto base = GraspScenario::defaults();
    const double k_true = 0.6 * default_calibration().stiffness;
    const auto compl_true = compliance(base.fixture);
    auto truth = base;
    truth.fixture.youngs_modulus *= k_true / compl_true.stiffness;

    std::vector<CalibrationTarget> targets;
    for (const std::string label : {"stiff", "dragon-skin-00-20", "soft"}) {
        auto s = truth;
        s.object = block_object(label);
        targets.push_back({label, plateau_pressure(s), 0.0});
    }
    const auto fit = calibrate_fixture(targets, base, false);
    CHECK(fit.stiffness == doctest::Approx(k_true).epsilon(0.01));
    CHECK(fit.rms < 0.05);
    CHECK(fit.effective_area == doctest::Approx(base.fixture.effective_area));
}

TEST_CASE("calibration needs two targets") {
    const auto base = GraspScenario::defaults();
    CHECK_THROWS_AS(calibrate_fixture({{"stiff", 14.0, 0.0}}, base), ValidationError);
    CHECK_THROWS_AS(calibrate_fixture({}, base), ValidationError);
}

TEST_CASE("block objects") {
    const auto& series = block_series();
    REQUIRE(series.size() == 5);
    CHECK(series.front() == "ecoflex-gel-2");
    CHECK(series.back() == "dragon-skin-00-30");
    double previous = 0.0;
    for (const auto& label : series) {
        const double k = block_stiffness(material_from_catalog(label));
        CHECK(k > previous);
        previous = k;
    }
    CHECK(block_object("stiff").stiffness == block_object("dragon-skin-00-30").stiffness);
    CHECK(block_object("soft").stiffness == block_object("ecoflex-00-30").stiffness);
    CHECK_THROWS(block_object("granite"));
}

TEST_CASE("scenario validation") {
    auto s = GraspScenario::defaults();
    CHECK_NOTHROW(s.validate());
    s.fixture_gap = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = GraspScenario::defaults();
    s.contact_gap = -1.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = GraspScenario::defaults();
    s.snap_displacement = 0.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
}
