#include "snapgrip/characteristic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "snapgrip/error.hpp"
#include "snapgrip/pv_analysis.hpp"

namespace snapgrip {

std::string to_string(PieceClass c) {
    switch (c) {
        case PieceClass::Follower: return "follower";
        case PieceClass::Leader: return "leader";
        case PieceClass::Unstable: return "unstable";
    }
    return "unknown";
}

namespace {

double apex_displacement(const MembraneModel& model, const Eigen::VectorXd& state,
                         const std::vector<Point2>& reference) {
    const auto nodes = model.nodes(state);
    double u = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) u = std::max(u, nodes[i].z - reference[i].z);
    return u;
}

}  // namespace

Characteristic Characteristic::from_path(const EquilibriumPath& path, std::string name) {
    Characteristic c;
    c.name = std::move(name);
    c.volume.reserve(path.samples.size());
    for (const auto& s : path.samples) {
        c.volume.push_back(s.volume);
        c.pressure.push_back(s.pressure);
        c.stability.push_back(s.stability);
    }
    c.validate();
    return c;
}

Characteristic Characteristic::from_path(const EquilibriumPath& path, const MembraneModel& model,
                                         std::string name) {
    Characteristic c = from_path(path, std::move(name));
    if (!path.has_states()) throw ValidationError("characteristic: path carries no states for displacements");
    const auto reference = model.nodes(model.reference_dofs());
    for (const auto& s : path.samples) c.displacement.push_back(apex_displacement(model, s.state, reference));
    return c;
}

void Characteristic::validate() const {
    const std::size_t n = volume.size();
    if (n < 3) throw ValidationError("characteristic '" + name + "': at least 3 points required");
    if (pressure.size() != n || stability.size() != n || (!displacement.empty() && displacement.size() != n)) {
        throw ValidationError("characteristic '" + name + "': column lengths differ");
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(volume[k]) || !std::isfinite(pressure[k])) {
            throw ValidationError("characteristic '" + name + "': non-finite value at point " + std::to_string(k));
        }
        if (!displacement.empty() && !std::isfinite(displacement[k])) {
            throw ValidationError("characteristic '" + name + "': non-finite displacement at point " +
                                  std::to_string(k));
        }
        if (k > 0 && volume[k] == volume[k - 1] && pressure[k] == pressure[k - 1]) {
            throw ValidationError("characteristic '" + name + "': duplicate consecutive point at " +
                                  std::to_string(k));
        }
    }
}

double Characteristic::critical_pressure() const {
    for (std::size_t k = 1; k + 1 < pressure.size(); ++k) {
        if (pressure[k] >= pressure[k - 1] && pressure[k + 1] < pressure[k]) return pressure[k];
    }
    throw AnalysisError("characteristic '" + name + "': pressure has no local maximum");
}

Characteristic Characteristic::scaled(double factor) const {
    if (!std::isfinite(factor) || factor <= 0.0) throw ValidationError("pressure scale factor must be positive");
    Characteristic c = *this;
    for (double& p : c.pressure) p *= factor;
    return c;
}

Characteristic Characteristic::normalized(double target_kpa) const {
    if (!std::isfinite(target_kpa) || target_kpa <= 0.0) {
        throw ValidationError("normalization target must be a positive pressure");
    }
    Characteristic c = scaled(target_kpa / critical_pressure());
    // Pin the maximum exactly; the ratio above may be off by one ulp.
    for (std::size_t k = 1; k + 1 < c.pressure.size(); ++k) {
        if (pressure[k] >= pressure[k - 1] && pressure[k + 1] < pressure[k]) {
            c.pressure[k] = target_kpa;
            break;
        }
    }
    return c;
}

Characteristic Characteristic::similar(double s) const {
    if (!std::isfinite(s) || s <= 0.0) throw ValidationError("similarity factor must be positive");
    Characteristic c = *this;
    const double s3 = s * s * s;
    for (double& v : c.volume) v *= s3;
    for (double& u : c.displacement) u *= s;
    return c;
}

PieceClass Characteristic::piece_class(int piece) const {
    const auto k = static_cast<std::size_t>(piece);
    if (piece < 0 || k + 1 >= volume.size()) throw ValidationError("piece index out of range");
    const double dp = pressure[k + 1] - pressure[k];
    const double dv = volume[k + 1] - volume[k];
    const bool tagged_unstable = stability[k] == Stability::Unstable || stability[k + 1] == Stability::Unstable;
    if (dp < 0.0) return PieceClass::Leader;
    if (dp > 0.0) {
        if (tagged_unstable) return PieceClass::Unstable;
        return dv >= 0.0 ? PieceClass::Follower : PieceClass::Leader;
    }
    if (piece > 0) return piece_class(piece - 1);
    return dv > 0.0 ? PieceClass::Follower : PieceClass::Leader;
}

std::vector<PieceRegion> Characteristic::regions() const {
    std::vector<PieceRegion> out;
    const int pieces = static_cast<int>(volume.size()) - 1;
    int branch = 0;
    for (int k = 0; k < pieces; ++k) {
        const PieceClass c = piece_class(k);
        if (!out.empty() && out.back().kind == c) {
            out.back().last_piece = k;
            continue;
        }
        PieceRegion r{c, k, k, -1};
        if (c == PieceClass::Follower) r.branch = branch++;
        out.push_back(r);
    }
    return out;
}

EquilibriumPath Characteristic::to_path() const {
    validate();
    EquilibriumPath path = path_from_curve(volume, pressure, stability);
    return path;
}

void ContactLoad::validate() const {
    if (!std::isfinite(gap) || gap < 0.0) throw ValidationError("contact gap must be finite and >= 0");
    if (std::isnan(stiffness) || stiffness < 0.0 || std::isinf(stiffness)) {
        throw ValidationError("contact stiffness k_eq must be finite and >= 0");
    }
    if (std::isnan(force_cap) || force_cap < 0.0) throw ValidationError("contact force cap must be >= 0");
    if (!std::isfinite(effective_area) || effective_area <= 0.0) {
        throw ValidationError("contact effective area must be positive");
    }
}

double ContactLoad::force(double u) const {
    return std::min(stiffness * std::max(0.0, u - gap), force_cap);
}

double ContactLoad::pressure(double u) const { return force(u) / effective_area * kKPaPerMPa; }

std::vector<Stability> infer_stability(const std::vector<double>& volume) {
    const std::size_t m = volume.size();
    std::vector<Stability> out(m, Stability::Stable);
    if (m < 2) return out;
    for (std::size_t k = 0; k < m; ++k) {
        const bool falls_before = k > 0 && volume[k] < volume[k - 1];
        const bool falls_after = k + 1 < m && volume[k + 1] < volume[k];
        if ((k == 0 || falls_before) && (k + 1 == m || falls_after)) out[k] = Stability::Unstable;
    }
    return out;
}

double point_displacement(const Characteristic& c, std::size_t k, double fallback_area) {
    if (c.has_displacement()) return c.displacement[k];
    if (!(fallback_area > 0.0)) throw ValidationError("characteristic has no displacement column and no area");
    return (c.volume[k] - c.volume.front()) / fallback_area;
}

Characteristic with_contact_load(const Characteristic& c, const ContactLoad& load,
                                 std::vector<double>* source_position) {
    c.validate();
    load.validate();
    const double area = load.displacement_area > 0.0 ? load.displacement_area : load.effective_area;
    std::vector<double> u(c.points());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = point_displacement(c, k, area);

    std::vector<double> kinks{load.gap};
    if (load.stiffness > 0.0 && std::isfinite(load.force_cap)) kinks.push_back(load.gap + load.force_cap / load.stiffness);

    Characteristic out;
    out.name = c.name;
    std::vector<double> pos;
    double at = 0.0;
    auto push = [&](double v, double p, double uu, Stability s) {
        pos.push_back(at);
        out.volume.push_back(v);
        out.pressure.push_back(p + load.pressure(uu));
        out.displacement.push_back(uu);
        out.stability.push_back(s);
    };
    for (std::size_t k = 0; k + 1 < c.points(); ++k) {
        at = static_cast<double>(k);
        push(c.volume[k], c.pressure[k], u[k], c.stability[k]);
        std::vector<double> ts;
        for (double kink : kinks) {
            const double du = u[k + 1] - u[k];
            if (du == 0.0) continue;
            const double t = (kink - u[k]) / du;
            if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
        }
        std::sort(ts.begin(), ts.end());
        const Stability inserted = (c.stability[k] == Stability::Unstable && c.stability[k + 1] == Stability::Unstable)
                                       ? Stability::Unstable
                                       : Stability::Stable;
        for (double t : ts) {
            at = static_cast<double>(k) + t;
            push(c.volume[k] + t * (c.volume[k + 1] - c.volume[k]),
                 c.pressure[k] + t * (c.pressure[k + 1] - c.pressure[k]), u[k] + t * (u[k + 1] - u[k]), inserted);
        }
    }
    at = static_cast<double>(c.points() - 1);
    push(c.volume.back(), c.pressure.back(), u.back(), c.stability.back());

    // The spring stiffens the membrane, so tags inherited from the free curve
    // are re-derived from the loaded shape wherever the load acts.
    if (load.stiffness > 0.0) {
        const auto shape = infer_stability(out.volume);
        for (std::size_t k = 0; k < out.points(); ++k) {
            if (out.displacement[k] > load.gap) out.stability[k] = shape[k];
        }
    }

    // A flat stretch of the free curve can meet the load exactly; drop repeats.
    Characteristic dedup;
    dedup.name = out.name;
    if (source_position) source_position->clear();
    for (std::size_t k = 0; k < out.points(); ++k) {
        if (k > 0 && out.volume[k] == dedup.volume.back() && out.pressure[k] == dedup.pressure.back()) continue;
        dedup.volume.push_back(out.volume[k]);
        dedup.pressure.push_back(out.pressure[k]);
        dedup.displacement.push_back(out.displacement[k]);
        dedup.stability.push_back(out.stability[k]);
        if (source_position) source_position->push_back(pos[k]);
    }
    dedup.validate();
    return dedup;
}

double snap_completion_position(const Characteristic& c) {
    for (const auto& r : c.regions()) {
        if (r.kind == PieceClass::Follower && r.branch == 1) return r.first_point();
    }
    return -1.0;
}

}  // namespace snapgrip
