#include "snapgrip/chamber.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "snapgrip/error.hpp"

namespace snapgrip {

namespace {

constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }

void require_positive(double v, const char* name) {
    if (!std::isfinite(v) || v <= 0.0) {
        throw ValidationError(std::string("chamber geometry: ") + name + " must be positive and finite");
    }
}

// Signed volume swept between the axis and one revolved meridian segment.
double segment_volume(const Point2& a, const Point2& b) {
    return -2.0 * kPi * (b.r - a.r) * (2.0 * a.r * a.z + a.r * b.z + b.r * a.z + 2.0 * b.r * b.z) / 6.0;
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.r - o.r) * (b.z - o.z) - (a.z - o.z) * (b.r - o.r);
}

bool segments_cross(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    return ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) &&
           ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
}

}  // namespace

std::string to_string(ChamberKind kind) {
    return kind == ChamberKind::Contact ? "contact" : "gripping";
}

ChamberGeometry ChamberGeometry::gripping(double tilt_deg) {
    ChamberGeometry g;
    g.kind = ChamberKind::Gripping;
    g.tilt_deg = tilt_deg;
    return g;
}

ChamberGeometry ChamberGeometry::contact(double tilt_deg) {
    ChamberGeometry g;
    g.kind = ChamberKind::Contact;
    g.tilt_deg = tilt_deg;
    return g;
}

double ChamberGeometry::outer_radius() const { return kind == ChamberKind::Contact ? 0.5 * a : r; }

double ChamberGeometry::rim_radius() const { return outer_radius() - 0.5 * wall; }

double ChamberGeometry::boss_radius() const { return (kind == ChamberKind::Contact ? 0.5 * b : r - w) + 0.5 * wall; }

double ChamberGeometry::cavity_depth() const { return kind == ChamberKind::Contact ? c : m + z; }

double ChamberGeometry::rise() const { return band_span() * std::tan(deg2rad(tilt_deg)); }

double ChamberGeometry::face_area() const { return kPi * outer_radius() * outer_radius(); }

void ChamberGeometry::validate() const {
    if (!std::isfinite(tilt_deg) || tilt_deg <= 0.0 || tilt_deg >= 90.0) {
        throw ValidationError("chamber geometry: tilt_deg must lie in (0, 90)");
    }
    require_positive(wall, "wall");
    if (kind == ChamberKind::Contact) {
        require_positive(a, "a");
        require_positive(b, "b");
        require_positive(c, "c");
        if (b >= a) throw ValidationError("chamber geometry: contact boss b must be smaller than a");
    } else {
        require_positive(R, "R");
        require_positive(r, "r");
        require_positive(w, "w");
        require_positive(m, "m");
        require_positive(z, "z");
        if (w >= r) throw ValidationError("chamber geometry: band width w must be smaller than r");
        if (R <= r) throw ValidationError("chamber geometry: body radius R must exceed r");
    }
    if (clearance() <= 0.0) {
        throw ValidationError("chamber geometry: recessed band (rise " + std::to_string(rise()) +
                              " mm) reaches the cavity floor (depth " + std::to_string(cavity_depth()) +
                              " mm); reduce tilt_deg");
    }
    if (band_span() <= wall) throw ValidationError("chamber geometry: free band span must exceed the wall thickness");
}

ChamberGeometry chamber_from_ini(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError(std::string("chamber config: ") + e.what());
    }
    ChamberGeometry g;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) throw ValidationError("chamber config: unexpected section [" + key + "]");
        const std::string v = node.get_value<std::string>();
        if (key == "kind") {
            if (v == "gripping") {
                g.kind = ChamberKind::Gripping;
            } else if (v == "contact") {
                g.kind = ChamberKind::Contact;
            } else {
                throw ValidationError("chamber config: kind must be 'gripping' or 'contact', got '" + v + "'");
            }
            continue;
        }
        double* slot = nullptr;
        if (key == "tilt_deg") slot = &g.tilt_deg;
        else if (key == "wall") slot = &g.wall;
        else if (key == "a") slot = &g.a;
        else if (key == "b") slot = &g.b;
        else if (key == "c") slot = &g.c;
        else if (key == "R") slot = &g.R;
        else if (key == "r") slot = &g.r;
        else if (key == "w") slot = &g.w;
        else if (key == "m") slot = &g.m;
        else if (key == "z") slot = &g.z;
        else {
            throw ValidationError("chamber config: unknown key '" + key +
                                  "' (expected kind, tilt_deg, wall, a, b, c, R, r, w, m, z)");
        }
        try {
            std::size_t used = 0;
            *slot = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::logic_error&) {
            throw ValidationError("chamber config: " + key + " must be a number, got '" + v + "'");
        }
    }
    g.validate();
    return g;
}

ChamberGeometry chamber_from_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open chamber config '" + path + "'");
    return chamber_from_ini(in);
}

std::size_t MeridianMesh::free_dofs() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) n += (fix_r[i] ? 0 : 1) + (fix_z[i] ? 0 : 1);
    return n;
}

double MeridianMesh::reference_arc_length() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        s += std::hypot(nodes[i + 1].r - nodes[i].r, nodes[i + 1].z - nodes[i].z);
    }
    return s;
}

double MeridianMesh::reference_volume() const { return cavity_volume(*this, nodes); }

double MeridianMesh::max_radius() const {
    double m = 0.0;
    for (const auto& p : nodes) m = std::max(m, p.r);
    return m;
}

void MeridianMesh::validate() const {
    const std::size_t n = nodes.size();
    if (n < 3) throw ValidationError("meridian mesh needs at least two segments");
    if (thickness.size() != n - 1 || fix_r.size() != n || fix_z.size() != n) {
        throw ValidationError("meridian mesh arrays have inconsistent sizes");
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double len = std::hypot(nodes[i + 1].r - nodes[i].r, nodes[i + 1].z - nodes[i].z);
        if (!(len > 0.0)) throw ValidationError("meridian mesh has a zero-length segment");
        if (!(thickness[i] > 0.0)) throw ValidationError("meridian mesh thickness must be positive");
    }
    for (const auto& p : nodes) {
        if (!std::isfinite(p.r) || !std::isfinite(p.z) || p.r < 0.0) {
            throw ValidationError("meridian mesh nodes must be finite with r >= 0");
        }
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // The membrane energy integrates over the reference radius, which must
        // be positive in the interior of every segment.
        if (nodes[i].r <= 0.0 && nodes[i + 1].r <= 0.0) {
            throw ValidationError("meridian mesh segment lies on the axis");
        }
    }
    if (free_dofs() == 0) throw ValidationError("meridian mesh has no free degrees of freedom");
}

MeridianMesh build_mesh(const ChamberGeometry& geom, int n_segments) {
    geom.validate();
    if (n_segments < kMinSegments) {
        throw ValidationError("build_mesh: n_segments must be >= " + std::to_string(kMinSegments) + ", got " +
                              std::to_string(n_segments));
    }
    const double ro = geom.rim_radius();
    const double ri = geom.boss_radius();
    const double h = geom.rise();

    MeridianMesh mesh;
    mesh.nodes.resize(n_segments + 1);
    for (int i = 0; i <= n_segments; ++i) {
        const double s = static_cast<double>(i) / n_segments;
        mesh.nodes[i] = {ro + (ri - ro) * s, -h * s};
    }
    mesh.thickness.assign(n_segments, geom.wall);
    mesh.fix_r.assign(n_segments + 1, 0);
    mesh.fix_z.assign(n_segments + 1, 0);
    mesh.fix_r.front() = mesh.fix_z.front() = 1;
    mesh.fix_r.back() = 1;
    mesh.start_condition = EndCondition::Clamped;
    mesh.end_condition = EndCondition::RigidBoss;
    mesh.boss_radius = ri;
    mesh.base_volume = kPi * ro * ro * geom.cavity_depth();
    mesh.validate();
    return mesh;
}

MeridianMesh build_balloon_mesh(double radius, double thickness, int n_segments) {
    if (!(radius > 0.0) || !(thickness > 0.0)) {
        throw ValidationError("balloon mesh: radius and thickness must be positive");
    }
    if (n_segments < kMinSegments) {
        throw ValidationError("balloon mesh: n_segments must be >= " + std::to_string(kMinSegments));
    }
    MeridianMesh mesh;
    mesh.nodes.resize(n_segments + 1);
    for (int i = 0; i <= n_segments; ++i) {
        const double t = kPi * i / n_segments;
        mesh.nodes[i] = {radius * std::sin(t), -radius * std::cos(t)};
    }
    mesh.nodes.front().r = 0.0;
    mesh.nodes.back().r = 0.0;
    mesh.thickness.assign(n_segments, thickness);
    mesh.fix_r.assign(n_segments + 1, 0);
    mesh.fix_z.assign(n_segments + 1, 0);
    mesh.fix_r.front() = mesh.fix_z.front() = 1;
    mesh.fix_r.back() = 1;
    mesh.start_condition = EndCondition::AxisSymmetric;
    mesh.end_condition = EndCondition::AxisSymmetric;
    mesh.validate();
    return mesh;
}

MeridianMesh build_cylinder_mesh(double radius, double height, double thickness, int n_per_side) {
    if (!(radius > 0.0) || !(height > 0.0) || !(thickness > 0.0) || n_per_side < 1) {
        throw ValidationError("cylinder mesh: dimensions and resolution must be positive");
    }
    MeridianMesh mesh;
    auto add_line = [&](Point2 a, Point2 b, bool include_end) {
        for (int i = 0; i < n_per_side + (include_end ? 1 : 0); ++i) {
            const double s = static_cast<double>(i) / n_per_side;
            mesh.nodes.push_back({a.r + (b.r - a.r) * s, a.z + (b.z - a.z) * s});
        }
    };
    add_line({0.0, 0.0}, {radius, 0.0}, false);
    add_line({radius, 0.0}, {radius, height}, false);
    add_line({radius, height}, {0.0, height}, true);
    const std::size_t n = mesh.nodes.size();
    mesh.thickness.assign(n - 1, thickness);
    mesh.fix_r.assign(n, 0);
    mesh.fix_z.assign(n, 0);
    mesh.fix_r.front() = mesh.fix_z.front() = 1;
    mesh.fix_r.back() = 1;
    mesh.start_condition = EndCondition::Free;
    mesh.end_condition = EndCondition::Free;
    mesh.validate();
    return mesh;
}

double cavity_volume(const MeridianMesh& mesh, const std::vector<Point2>& deformed) {
    if (deformed.size() != mesh.nodes.size()) {
        throw ValidationError("enclosed_volume: state has " + std::to_string(deformed.size()) +
                              " nodes, mesh has " + std::to_string(mesh.nodes.size()));
    }
    double v = mesh.base_volume;
    for (std::size_t i = 0; i + 1 < deformed.size(); ++i) v += segment_volume(deformed[i], deformed[i + 1]);
    v += kPi * mesh.boss_radius * mesh.boss_radius * deformed.back().z;
    return v;
}

bool profile_self_intersects(const std::vector<Point2>& nodes) {
    for (const auto& p : nodes) {
        if (p.r < 0.0) return true;
    }
    const std::size_t n = nodes.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 2; j + 1 < n; ++j) {
            if (segments_cross(nodes[i], nodes[i + 1], nodes[j], nodes[j + 1])) return true;
        }
    }
    return false;
}

VolumeResult enclosed_volume(const MeridianMesh& mesh, const std::vector<Point2>& deformed) {
    return {cavity_volume(mesh, deformed), profile_self_intersects(deformed)};
}

}  // namespace snapgrip
