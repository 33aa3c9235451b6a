#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"

#include "snapgrip/chamber.hpp"
#include "snapgrip/continuation.hpp"
#include "snapgrip/error.hpp"
#include "snapgrip/pv_analysis.hpp"

using namespace snapgrip;

namespace {

const MaterialParams kDragonSkin{0.1, 0.0, 1000.0};

EquilibriumPath sampled(double t0, double t1, int n, double (*v)(double), double (*p)(double)) {
    std::vector<double> vs, ps;
    for (int i = 0; i <= n; ++i) {
        const double t = t0 + (t1 - t0) * i / n;
        vs.push_back(v(t));
        ps.push_back(p(t));
    }
    return path_from_curve(vs, ps);
}

double cubic_p(double v) { return (v - 1.0) * (v - 2.0) * (v - 3.0); }
double identity(double t) { return t; }

// S-shaped curve: V = t^3 - 3t folds at t = -1 (V = 2) and t = 1 (V = -2);
// pressure falls along the arc and turns negative.
double s_volume(double t) { return t * t * t - 3.0 * t; }
double s_pressure(double t) { return 0.5 - t; }

EquilibriumPath s_curve(int n) { return sampled(-2.0, 2.5, n, s_volume, s_pressure); }

// History-continuous volume control on a densely parameterized curve: walk
// the arc while volume rises, and at a fold scan forward for the first later
// point where the volume is reached again with volume still rising.
double brute_force_snap_pressure(double target) {
    const int n = 200000;
    const double t0 = -2.0, t1 = 2.5;
    auto t_at = [&](int i) { return t0 + (t1 - t0) * i / n; };
    int i = 0;
    while (i < n) {
        const double va = s_volume(t_at(i)), vb = s_volume(t_at(i + 1));
        if (vb >= va) {
            if (target <= vb) {
                const double f = (target - va) / (vb - va);
                return s_pressure(t_at(i)) + f * (s_pressure(t_at(i + 1)) - s_pressure(t_at(i)));
            }
            ++i;
            continue;
        }
        // Fold: the held volume is va; land on the first rising crossing.
        int j = i + 1;
        while (j < n && !(s_volume(t_at(j)) <= va && s_volume(t_at(j + 1)) >= va)) ++j;
        if (target <= va) return s_pressure(t_at(j + 1));
        i = j;
    }
    return NAN;
}

const EquilibriumPath& trace(double tilt) {
    static std::map<double, EquilibriumPath> cache;
    auto it = cache.find(tilt);
    if (it != cache.end()) return it->second;
    const auto g = ChamberGeometry::gripping(tilt);
    ContinuationControl c;
    c.max_step = 0.1;
    c.max_volume_change = sweep_volume_cap(g, 2.5);
    return cache[tilt] = trace_equilibrium_path(build_mesh(g, 64), kDragonSkin, c);
}

}  // namespace

TEST_CASE("monotone path has no limit points") {
    const auto path = sampled(0.0, 5.0, 50, identity, [](double t) { return 2.0 * t + std::sin(t); });
    CHECK(find_limit_points(path).empty());
    const auto report = classify_bistability(path);
    CHECK_FALSE(report.has_enclosed_area);
    CHECK_FALSE(report.has_negative_pressure);
    CHECK_FALSE(report.bistable());
    CHECK(report.enclosed_area == 0.0);
    CHECK_THROWS_AS(critical_pressure(path), AnalysisError);
    CHECK_THROWS_AS(released_energy(path), AnalysisError);
}

TEST_CASE("limit points of a dense cubic sit at the derivative roots") {
    const auto path = sampled(0.5, 3.5, 600, identity, cubic_p);
    const auto limits = find_limit_points(path);
    REQUIRE(limits.size() == 2);
    CHECK(limits[0].kind == LimitKind::PressureLimit);
    CHECK(limits[0].maximum);
    CHECK(limits[0].volume == doctest::Approx(2.0 - 1.0 / std::sqrt(3.0)).epsilon(1e-5));
    CHECK(limits[1].volume == doctest::Approx(2.0 + 1.0 / std::sqrt(3.0)).epsilon(1e-5));
    CHECK_FALSE(limits[1].maximum);
    CHECK(limits[0].arc_length < limits[1].arc_length);

    const auto cp = critical_pressure(path);
    CHECK(cp.p_s == doctest::Approx(cubic_p(2.0 - 1.0 / std::sqrt(3.0))).epsilon(1e-8));
    CHECK(cp.termination_pressure == doctest::Approx(1.5 * cp.p_s));
}

TEST_CASE("limit point detection rejects short or repeated paths") {
    CHECK_THROWS_AS(find_limit_points(path_from_curve({1.0, 2.0}, {0.0, 1.0})), ValidationError);
    CHECK_THROWS_AS(path_from_curve({1.0, 2.0, 2.0, 3.0}, {0.0, 1.0, 1.0, 2.0}), ValidationError);
}

TEST_CASE("volume folds of the S-curve") {
    const auto limits = find_limit_points(s_curve(900));
    int volume_limits = 0;
    for (const auto& l : limits) {
        if (l.kind != LimitKind::VolumeLimit) continue;
        ++volume_limits;
        CHECK(std::abs(std::abs(l.volume) - 2.0) < 1e-5);
    }
    CHECK(volume_limits == 2);
}

TEST_CASE("snap pressure matches a brute-force volume-controlled walk") {
    const auto path = s_curve(900);
    for (double v : {-1.9, -1.0, 0.0, 1.0, 1.99, 2.01, 2.5, 4.0, 6.0, 8.0}) {
        CAPTURE(v);
        CHECK(snap_jump_pressure(path, v) == doctest::Approx(brute_force_snap_pressure(v)).epsilon(1e-4));
    }
    CHECK_THROWS_AS(snap_jump_pressure(path, -3.0), ValidationError);
    CHECK_THROWS_AS(snap_jump_pressure(path, 9.0), ValidationError);
}

TEST_CASE("snap path jumps at constant volume") {
    const auto snap = build_snap_path(s_curve(900));
    REQUIRE(snap.jumps.size() == 1);
    const auto& j = snap.jumps[0];
    CHECK(j.volume == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(j.pressure_before == doctest::Approx(1.5).epsilon(1e-5));
    CHECK(j.pressure_after == doctest::Approx(-1.5).epsilon(1e-5));
    for (std::size_t i = 1; i < snap.samples.size(); ++i) CHECK(snap.samples[i].volume >= snap.samples[i - 1].volume);
    CHECK_FALSE(snap.truncated);
}

TEST_CASE("released energy of the toy curve equals the integral over the unstable arc") {
    // U_post - U_pre is the integral of p dV from t = -1 to t = 2 with
    // p = 1/2 - t and dV = (3t^2 - 3) dt.
    auto antiderivative = [](double t) {
        return 0.5 * (t * t * t - 3.0 * t) - (0.75 * t * t * t * t - 1.5 * t * t);
    };
    const double released = -(antiderivative(2.0) - antiderivative(-1.0));
    const auto path = s_curve(3000);
    CHECK(released_energy(path) == doctest::Approx(released).epsilon(1e-4));
    CHECK(released > 0.0);
}

TEST_CASE("bistability criteria of the toy curve survive resampling") {
    const auto a = classify_bistability(s_curve(900));
    const auto b = classify_bistability(s_curve(1800));
    CHECK(a.has_enclosed_area);
    CHECK(a.has_negative_pressure);
    CHECK(a.bistable());
    CHECK(a.enclosed_area > 0.0);
    CHECK(a.min_pressure < 0.0);
    CHECK_FALSE(a.has_critical_pressure);
    CHECK(b.bistable() == a.bistable());
    CHECK(b.has_enclosed_area == a.has_enclosed_area);
    CHECK(b.has_negative_pressure == a.has_negative_pressure);
    CHECK(std::abs(b.enclosed_area - a.enclosed_area) < 0.01 * a.enclosed_area);
}

TEST_CASE("report invariants") {
    for (const auto* path : {&trace(45.0), &trace(40.0), &trace(30.0)}) {
        const auto r = classify_bistability(*path);
        if (r.has_enclosed_area) CHECK(r.enclosed_area > 0.0);
        CHECK(r.has_negative_pressure == (r.min_pressure < -kNegativePressureEpsilon));
        if (r.has_critical_pressure) CHECK(r.p_s == critical_pressure(*path).p_s);
    }
}

TEST_CASE("45 degree gripping chamber is bistable") {
    const auto& path = trace(45.0);
    const auto r = classify_bistability(path);
    CHECK(r.bistable());
    CHECK(r.released_energy > 0.0);
    CHECK(released_energy(path) == doctest::Approx(r.released_energy));
    const auto cp = critical_pressure(path);
    CHECK(cp.p_s > 0.0);
    CHECK(cp.termination_pressure == doctest::Approx(1.5 * cp.p_s));

    int pressure_limits = 0;
    for (const auto& l : find_limit_points(path)) pressure_limits += l.kind == LimitKind::PressureLimit;
    CHECK(pressure_limits >= 2);

    // At the fold the controlled response drops.
    const auto snap = build_snap_path(path);
    REQUIRE_FALSE(snap.jumps.empty());
    const auto& j = snap.jumps.front();
    CHECK(j.pressure_after < j.pressure_before);
    CHECK(snap_jump_pressure(path, j.volume) == doctest::Approx(j.pressure_after));
    // Below the fold the controlled response is the equilibrium path itself.
    const auto& s = path.samples[3];
    CHECK(snap_jump_pressure(path, s.volume) == doctest::Approx(s.pressure).epsilon(1e-9));
}

TEST_CASE("snap path samples on both sides of every jump share the volume") {
    const auto snap = build_snap_path(trace(45.0));
    for (const auto& j : snap.jumps) {
        int hits = 0;
        for (const auto& s : snap.samples) {
            if (std::abs(s.volume - j.volume) <= 1e-10 * j.volume) ++hits;
        }
        CHECK(hits >= 2);
    }
}

TEST_CASE("35 degree chamber has no enclosed area") {
    const auto r = classify_bistability(trace(35.0));
    CHECK_FALSE(r.has_enclosed_area);
    CHECK_FALSE(r.bistable());
}

TEST_CASE("tilt sweep flag pattern and ordering") {
    SweepOptions o;
    const auto res = tilt_sweep(ChamberGeometry::gripping(), kDefaultSweepAngles, kDragonSkin, o);
    REQUIRE(res.entries.size() == 5);
    double previous = -1.0;
    for (const auto& e : res.entries) {
        CAPTURE(e.angle_deg);
        REQUIRE(e.ok);
        CHECK(e.report.has_enclosed_area == (e.angle_deg >= 40.0));
        CHECK(e.report.has_negative_pressure == (e.angle_deg == 45.0));
        CHECK(e.report.enclosed_area >= previous);
        previous = e.report.enclosed_area;
    }
    REQUIRE(res.recommended_angle.has_value());
    CHECK(*res.recommended_angle == 45.0);
}

TEST_CASE("single-angle sweep equals a direct classification") {
    SweepOptions o;
    const auto res = tilt_sweep(ChamberGeometry::gripping(), {45.0}, kDragonSkin, o);
    REQUIRE(res.entries.size() == 1);
    const auto direct = classify_bistability(trace(45.0));
    const auto& r = res.entries[0].report;
    CHECK(r.p_s == direct.p_s);
    CHECK(r.enclosed_area == direct.enclosed_area);
    CHECK(r.min_pressure == direct.min_pressure);
    CHECK(r.bistable() == direct.bistable());
}

TEST_CASE("sweep results do not depend on the thread count") {
    SweepOptions one, many;
    one.threads = 1;
    many.threads = 4;
    one.n_segments = many.n_segments = 32;
    const std::vector<double> angles{45.0, 30.0, 40.0};
    const auto a = tilt_sweep(ChamberGeometry::gripping(), angles, kDragonSkin, one);
    const auto b = tilt_sweep(ChamberGeometry::gripping(), angles, kDragonSkin, many);
    for (std::size_t i = 0; i < angles.size(); ++i) {
        CHECK(a.entries[i].angle_deg == angles[i]);
        CHECK(a.entries[i].report.p_s == b.entries[i].report.p_s);
        CHECK(a.entries[i].report.enclosed_area == b.entries[i].report.enclosed_area);
    }
}

TEST_CASE("sweep isolates per-angle failures") {
    SweepOptions o;
    o.n_segments = 32;
    // 80 degrees is a valid angle, but the band would rise past the cavity floor.
    const auto res = tilt_sweep(ChamberGeometry::gripping(), {45.0, 80.0, 40.0}, kDragonSkin, o);
    REQUIRE(res.entries.size() == 3);
    CHECK(res.entries[0].ok);
    CHECK_FALSE(res.entries[1].ok);
    CHECK_FALSE(res.entries[1].error.empty());
    CHECK(res.entries[2].ok);
    CHECK_THROWS_AS(tilt_sweep(ChamberGeometry::gripping(), {45.0, 95.0}, kDragonSkin, o), ValidationError);
    CHECK_THROWS_AS(tilt_sweep(ChamberGeometry::gripping(), {}, kDragonSkin, o), ValidationError);
}
