#include "snapgrip/pv_analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "snapgrip/error.hpp"

namespace snapgrip {

namespace {

struct HermiteBasis {
    double h00, h10, h01, h11;
};

HermiteBasis basis(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2};
}

HermiteBasis basis_slope(double t) {
    const double t2 = t * t;
    return {6 * t2 - 6 * t, 3 * t2 - 4 * t + 1, -6 * t2 + 6 * t, 3 * t2 - 2 * t};
}

double hermite(const HermiteBasis& b, double f0, double d0, double f1, double d1, double h) {
    return b.h00 * f0 + b.h10 * h * d0 + b.h01 * f1 + b.h11 * h * d1;
}

// Slope with respect to the normalized parameter t.
double hermite_slope(double t, double f0, double d0, double f1, double d1, double h) {
    return hermite(basis_slope(t), f0, d0, f1, d1, h);
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

struct Bracket {
    std::size_t index;  // sample preceding the sign change
    bool at_sample;     // derivative exactly zero at samples[index]
};

// Sign changes of a sampled derivative, skipping exact zeros.
std::vector<Bracket> sign_changes(const std::vector<PathSample>& s, double PathSample::*member) {
    std::vector<Bracket> out;
    std::size_t last = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const int sg = sign(s[i].*member);
        if (sg == 0) continue;
        if (last < s.size() && sign(s[last].*member) != sg) {
            if (i == last + 1) {
                out.push_back({last, false});
            } else {
                out.push_back({last + 1, true});
            }
        }
        last = i;
    }
    return out;
}

void check_path(const EquilibriumPath& path) {
    const auto& s = path.samples;
    if (s.size() < 3) throw ValidationError("path analysis needs at least 3 samples");
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i].volume == s[i - 1].volume && s[i].pressure == s[i - 1].pressure) {
            throw ValidationError("path has duplicate consecutive samples at index " + std::to_string(i));
        }
        if (!(s[i].arc_length > s[i - 1].arc_length)) {
            throw ValidationError("path arc length is not strictly increasing at index " + std::to_string(i));
        }
    }
}

PathSample sample_at(const PathPoint& p, Stability st) {
    PathSample s;
    s.arc_length = p.arc_length;
    s.volume = p.volume;
    s.pressure = p.pressure;
    s.energy = p.energy;
    s.stability = st;
    return s;
}

// Parameter t in [0, 1] of the interval where the interpolated volume equals v.
double solve_volume(const PathSample& a, const PathSample& b, double v) {
    double lo = 0.0;
    double hi = 1.0;
    const double flo = a.volume - v;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = interpolate(a, b, mid).volume - v;
        if ((f < 0.0) == (flo < 0.0) && f != 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
}

// Trapezoidal integral of p dV over a polyline of points.
double integrate_p_dv(const std::vector<PathPoint>& pts) {
    double acc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        acc += 0.5 * (pts[i].pressure + pts[i - 1].pressure) * (pts[i].volume - pts[i - 1].volume);
    }
    return acc;
}

PathPoint point_of(const PathSample& s) { return {s.arc_length, s.volume, s.pressure, s.energy}; }

}  // namespace

PathPoint interpolate(const PathSample& a, const PathSample& b, double t) {
    const double h = b.arc_length - a.arc_length;
    const HermiteBasis bs = basis(t);
    PathPoint p;
    p.arc_length = a.arc_length + t * h;
    p.volume = hermite(bs, a.volume, a.dvds, b.volume, b.dvds, h);
    p.pressure = hermite(bs, a.pressure, a.dpds, b.pressure, b.dpds, h);
    p.energy = hermite(bs, a.energy, a.pressure * a.dvds, b.energy, b.pressure * b.dvds, h);
    return p;
}

PathPoint refine_extremum(const PathSample& a, const PathSample& b, ExtremumKind kind) {
    const bool pr = kind == ExtremumKind::Pressure;
    const double f0 = pr ? a.pressure : a.volume;
    const double f1 = pr ? b.pressure : b.volume;
    const double d0 = pr ? a.dpds : a.dvds;
    const double d1 = pr ? b.dpds : b.dvds;
    const double h = b.arc_length - a.arc_length;
    double lo = 0.0;
    double hi = 1.0;
    double slo = hermite_slope(0.0, f0, d0, f1, d1, h);
    const double shi = hermite_slope(1.0, f0, d0, f1, d1, h);
    if (sign(slo) == sign(shi)) {
        // No bracket on the interpolant; fall back to the larger-magnitude end.
        const double t = std::abs(d0) < std::abs(d1) ? 0.0 : 1.0;
        return interpolate(a, b, t);
    }
    const double scale = std::max(std::abs(a.volume), std::abs(b.volume));
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double sm = hermite_slope(mid, f0, d0, f1, d1, h);
        if (sign(sm) == sign(slo)) {
            lo = mid;
            slo = sm;
        } else {
            hi = mid;
        }
        const PathPoint pl = interpolate(a, b, lo);
        const PathPoint ph = interpolate(a, b, hi);
        if (std::abs(ph.volume - pl.volume) <= kFoldRelativeTolerance * 1e-3 * scale && hi - lo < 1e-9) break;
        if (hi - lo < 1e-14) break;
    }
    return interpolate(a, b, 0.5 * (lo + hi));
}

std::string to_string(LimitKind k) { return k == LimitKind::PressureLimit ? "pressure-limit" : "volume-limit"; }

EquilibriumPath path_from_curve(const std::vector<double>& volume, const std::vector<double>& pressure,
                                const std::vector<Stability>& stability) {
    const std::size_t n = volume.size();
    if (pressure.size() != n) throw ValidationError("curve: volume and pressure columns differ in length");
    if (!stability.empty() && stability.size() != n) {
        throw ValidationError("curve: stability column length differs");
    }
    if (n < 3) throw ValidationError("curve needs at least 3 points, got " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(volume[i]) || !std::isfinite(pressure[i])) {
            throw ValidationError("curve: non-finite value at row " + std::to_string(i));
        }
    }
    const auto [vmin, vmax] = std::minmax_element(volume.begin(), volume.end());
    const auto [pmin, pmax] = std::minmax_element(pressure.begin(), pressure.end());
    const double vs = *vmax - *vmin > 0.0 ? *vmax - *vmin : 1.0;
    const double ps = *pmax - *pmin > 0.0 ? *pmax - *pmin : 1.0;

    EquilibriumPath path;
    path.termination = Termination::Ingested;
    path.reference_volume = volume.front();
    path.samples.resize(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            const double ds = std::hypot((volume[i] - volume[i - 1]) / vs, (pressure[i] - pressure[i - 1]) / ps);
            if (!(ds > 0.0)) throw ValidationError("curve: duplicate consecutive points at row " + std::to_string(i));
            s += ds;
        }
        auto& smp = path.samples[i];
        smp.arc_length = s;
        smp.volume = volume[i];
        smp.pressure = pressure[i];
        smp.stability = stability.empty() ? Stability::Stable : stability[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 == n ? n - 1 : i + 1;
        const double ds = path.samples[b].arc_length - path.samples[a].arc_length;
        path.samples[i].dvds = (volume[b] - volume[a]) / ds;
        path.samples[i].dpds = (pressure[b] - pressure[a]) / ds;
    }
    for (std::size_t i = 1; i < n; ++i) {
        path.samples[i].energy = path.samples[i - 1].energy +
                                 0.5 * (pressure[i] + pressure[i - 1]) * (volume[i] - volume[i - 1]);
    }
    double max_ds = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        max_ds = std::max(max_ds, path.samples[i].arc_length - path.samples[i - 1].arc_length);
    }
    path.max_step = max_ds;
    if (stability.empty()) {
        // Without tags, a sample is volume-stable when it lies on a
        // volume-increasing stretch.
        for (auto& smp : path.samples) smp.stability = smp.dvds > 0.0 ? Stability::Stable : Stability::Unstable;
    }
    mark_limit_samples(path);
    return path;
}

std::vector<LimitPoint> find_limit_points(const EquilibriumPath& path) {
    check_path(path);
    const auto& s = path.samples;
    std::vector<LimitPoint> out;
    auto add = [&](const Bracket& br, LimitKind kind) {
        LimitPoint lp;
        lp.kind = kind;
        PathPoint pt;
        if (br.at_sample) {
            pt = point_of(s[br.index]);
            lp.path_index = br.index;
        } else {
            pt = refine_extremum(s[br.index], s[br.index + 1],
                                 kind == LimitKind::PressureLimit ? ExtremumKind::Pressure : ExtremumKind::Volume);
            lp.path_index = br.index;
        }
        const double before = kind == LimitKind::PressureLimit ? s[br.index].dpds : s[br.index].dvds;
        lp.maximum = br.at_sample ? (kind == LimitKind::PressureLimit ? s[br.index - 1].dpds : s[br.index - 1].dvds) > 0.0
                                  : before > 0.0;
        lp.volume = pt.volume;
        lp.pressure = pt.pressure;
        lp.arc_length = pt.arc_length;
        lp.energy = pt.energy;
        out.push_back(lp);
    };
    for (const auto& br : sign_changes(s, &PathSample::dpds)) add(br, LimitKind::PressureLimit);
    for (const auto& br : sign_changes(s, &PathSample::dvds)) add(br, LimitKind::VolumeLimit);
    std::stable_sort(out.begin(), out.end(),
                     [](const LimitPoint& a, const LimitPoint& b) { return a.arc_length < b.arc_length; });
    return out;
}

void mark_limit_samples(EquilibriumPath& path) {
    auto& s = path.samples;
    for (auto& smp : s) smp.is_limit_point = smp.stability == Stability::Limit;
    if (s.size() < 3) return;
    std::vector<LimitPoint> lps;
    try {
        lps = find_limit_points(path);
    } catch (const ValidationError&) {
        return;
    }
    for (const auto& lp : lps) {
        std::size_t i = lp.path_index;
        if (i + 1 < s.size() &&
            std::abs(s[i + 1].arc_length - lp.arc_length) < std::abs(s[i].arc_length - lp.arc_length)) {
            ++i;
        }
        s[i].is_limit_point = true;
    }
}

CriticalPressure critical_pressure(const EquilibriumPath& path, double termination_factor) {
    for (const auto& lp : find_limit_points(path)) {
        if (lp.kind == LimitKind::PressureLimit && lp.maximum) {
            return {lp.pressure, termination_factor * lp.pressure, lp};
        }
    }
    throw AnalysisError("no critical pressure: the path has no pressure maximum (monostable)");
}

SnapPath build_snap_path(const EquilibriumPath& path) {
    check_path(path);
    const auto& s = path.samples;
    const std::size_t n = s.size();
    SnapPath out;
    out.samples.push_back(s.front());

    std::size_t k = 0;  // current interval [k, k+1]
    while (k + 1 < n) {
        const bool fold = s[k].dvds > 0.0 && s[k + 1].dvds <= 0.0 &&
                          !(s[k + 1].dvds == 0.0 && k + 2 < n && s[k + 2].dvds > 0.0);
        if (!fold) {
            out.samples.push_back(s[k + 1]);
            ++k;
            continue;
        }
        PathPoint f = refine_extremum(s[k], s[k + 1], ExtremumKind::Volume);
        // The fold volume is the larger of the interpolated maximum and the
        // bracketing samples, so the snap path stays volume-monotone.
        if (f.volume < s[k].volume) f = point_of(s[k]);
        const double vf = f.volume;

        std::size_t j = k + 1;
        bool found = false;
        for (; j + 1 < n; ++j) {
            if (s[j].volume < vf && s[j + 1].volume >= vf) {
                const bool tagged_unstable =
                    s[j].stability == Stability::Unstable && s[j + 1].stability == Stability::Unstable;
                if (!tagged_unstable) {
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            out.samples.push_back(sample_at(f, Stability::Limit));
            out.truncated = true;
            out.diagnostic = "fold at V = " + std::to_string(vf) + " mm^3 has no landing branch within the path";
            break;
        }
        const double t = solve_volume(s[j], s[j + 1], vf);
        PathPoint l = interpolate(s[j], s[j + 1], t);
        l.volume = vf;

        std::vector<PathPoint> loop{f};
        for (std::size_t i = k + 1; i <= j; ++i) loop.push_back(point_of(s[i]));
        loop.push_back(l);
        const double area = -integrate_p_dv(loop);

        JumpEvent ev;
        ev.volume = vf;
        ev.pressure_before = f.pressure;
        ev.pressure_after = l.pressure;
        ev.energy_before = f.energy;
        ev.energy_after = l.energy;
        ev.arc_before = f.arc_length;
        ev.arc_after = l.arc_length;
        out.jumps.push_back(ev);
        out.enclosed_areas.push_back(area);

        if (out.samples.back().volume < vf || out.samples.back().arc_length < f.arc_length) {
            out.samples.push_back(sample_at(f, Stability::Limit));
        }
        out.samples.push_back(sample_at(l, Stability::Stable));
        if (s[j + 1].volume > vf) out.samples.push_back(s[j + 1]);
        k = j + 1;
    }
    return out;
}

double snap_jump_pressure(const SnapPath& snap, double v) {
    const auto& s = snap.samples;
    if (s.empty() || !std::isfinite(v) || v < s.front().volume || v > s.back().volume) {
        throw ValidationError("snap_jump_pressure: volume " + std::to_string(v) + " mm^3 outside path coverage");
    }
    // Last sample with volume <= v; at a jump this is the post-jump point.
    std::size_t i = 0;
    while (i + 1 < s.size() && s[i + 1].volume <= v) ++i;
    if (s[i].volume == v || i + 1 == s.size()) return s[i].pressure;
    const double t = (v - s[i].volume) / (s[i + 1].volume - s[i].volume);
    return s[i].pressure + t * (s[i + 1].pressure - s[i].pressure);
}

double snap_jump_pressure(const EquilibriumPath& path, double at_volume) {
    return snap_jump_pressure(build_snap_path(path), at_volume);
}

BistabilityReport classify_bistability(const EquilibriumPath& path) {
    BistabilityReport rep;
    rep.limit_points = find_limit_points(path);
    const SnapPath snap = build_snap_path(path);
    rep.jumps = snap.jumps;
    double area = 0.0;
    for (double a : snap.enclosed_areas) area += a;
    rep.enclosed_area = snap.jumps.empty() ? 0.0 : area;
    rep.has_enclosed_area = !snap.jumps.empty() && rep.enclosed_area > 0.0;
    if (!rep.has_enclosed_area) rep.enclosed_area = 0.0;

    double pmin = std::numeric_limits<double>::infinity();
    for (const auto& smp : path.samples) pmin = std::min(pmin, smp.pressure);
    for (const auto& lp : rep.limit_points) pmin = std::min(pmin, lp.pressure);
    rep.min_pressure = pmin;
    rep.has_negative_pressure = pmin < -kNegativePressureEpsilon;

    for (const auto& lp : rep.limit_points) {
        if (lp.kind == LimitKind::PressureLimit && lp.maximum) {
            rep.has_critical_pressure = true;
            rep.p_s = lp.pressure;
            break;
        }
    }
    if (!snap.jumps.empty()) {
        rep.released_energy = snap.jumps.front().energy_before - snap.jumps.front().energy_after;
    }
    return rep;
}

double released_energy(const EquilibriumPath& path) {
    const SnapPath snap = build_snap_path(path);
    if (snap.jumps.empty()) throw AnalysisError("released_energy: path has no isochoric snap (monostable)");
    return snap.jumps.front().energy_before - snap.jumps.front().energy_after;
}

VolumeControlledResult volume_controlled_response(const EquilibriumPath& path, double target_dv, double alpha_t) {
    if (!(target_dv >= 0.0) || !std::isfinite(target_dv)) {
        throw ValidationError("volume_controlled_response: target_dV must be finite and >= 0");
    }
    VolumeControlledResult res;
    res.alpha_t = alpha_t;
    res.target_volume_change = target_dv;
    res.path.reference_volume = path.reference_volume;
    res.path.max_step = path.max_step;
    res.path.termination = path.termination;
    const double v0 = path.reference_volume;
    const double vt = v0 + target_dv;

    std::vector<PathSample> samples;
    std::vector<JumpEvent> jumps;
    bool truncated_snap = false;
    std::string snap_diag;
    if (path.samples.size() >= 3) {
        const SnapPath snap = build_snap_path(path);
        samples = snap.samples;
        jumps = snap.jumps;
        truncated_snap = snap.truncated;
        snap_diag = snap.diagnostic;
    } else {
        samples = path.samples;
    }

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& smp = samples[i];
        if (smp.volume <= vt) {
            res.path.samples.push_back(smp);
            continue;
        }
        const auto& prev = samples[i - 1];
        PathSample cut;
        const double t = (vt - prev.volume) / (smp.volume - prev.volume);
        cut.volume = vt;
        cut.pressure = prev.pressure + t * (smp.pressure - prev.pressure);
        cut.energy = prev.energy + t * (smp.energy - prev.energy);
        cut.arc_length = prev.arc_length + t * (smp.arc_length - prev.arc_length);
        cut.stability = Stability::Stable;
        res.path.samples.push_back(cut);
        break;
    }
    for (const auto& j : jumps) {
        if (j.volume <= vt) res.jumps.push_back(j);
    }
    const double reached = res.path.samples.empty() ? 0.0 : res.path.samples.back().volume - v0;
    res.reached_volume_change = reached;
    res.volume_ratio = v0 > 0.0 ? reached / v0 : 0.0;
    res.equivalent_delta_t = thermal_equivalent_delta_t(alpha_t, res.volume_ratio);
    if (reached < target_dv * (1.0 - 1e-12)) {
        res.truncated = true;
        res.diagnostic = "target volume change " + std::to_string(target_dv) + " mm^3 beyond path coverage (" +
                         std::to_string(reached) + " mm^3 reached)";
        if (truncated_snap) res.diagnostic += "; " + snap_diag;
        if (!path.diagnostic.empty()) res.diagnostic += "; " + path.diagnostic;
    }
    res.path.diagnostic = res.diagnostic;
    return res;
}

double sweep_volume_cap(const ChamberGeometry& geom, double factor) {
    const double ro = geom.rim_radius();
    const double ri = geom.boss_radius();
    const double frustum = std::numbers::pi * geom.rise() / 3.0 * (ro * ro + ro * ri + ri * ri);
    return factor * frustum;
}

SweepResult tilt_sweep(const ChamberGeometry& geom_template, const std::vector<double>& angles,
                       const MaterialParams& mat, const SweepOptions& options) {
    if (angles.empty()) throw ValidationError("tilt_sweep: angle list is empty");
    for (double a : angles) {
        if (!std::isfinite(a) || a <= 0.0 || a >= 90.0) {
            throw ValidationError("tilt_sweep: angle " + std::to_string(a) + " outside (0, 90) degrees");
        }
    }
    mat.validate();
    options.control.validate();

    SweepResult result;
    result.entries.resize(angles.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < angles.size(); i = next++) {
            SweepEntry& e = result.entries[i];
            e.angle_deg = angles[i];
            try {
                ChamberGeometry g = geom_template;
                g.tilt_deg = angles[i];
                const MeridianMesh mesh = build_mesh(g, options.n_segments);
                ContinuationControl ctrl = options.control;
                ctrl.max_volume_change = std::min(ctrl.max_volume_change, sweep_volume_cap(g, options.max_volume_factor));
                EquilibriumPath path = trace_equilibrium_path(mesh, mat, ctrl, options.model);
                e.report = classify_bistability(path);
                e.ok = true;
                if (options.keep_paths) e.path = std::move(path);
            } catch (const std::exception& ex) {
                e.ok = false;
                e.error = ex.what();
            }
        }
    };
    unsigned nthreads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(angles.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<double> bistable;
    for (const auto& e : result.entries) {
        if (e.ok && e.report.bistable()) bistable.push_back(e.angle_deg);
    }
    if (!bistable.empty()) {
        result.recommended_angle = *std::min_element(bistable.begin(), bistable.end());
        if (bistable.size() == 1) {
            result.note = "unique angle meeting both criteria";
        } else {
            result.note = "smallest of " + std::to_string(bistable.size()) + " angles meeting both criteria";
        }
    } else {
        result.note = "no angle meets both criteria";
    }
    return result;
}

}  // namespace snapgrip
