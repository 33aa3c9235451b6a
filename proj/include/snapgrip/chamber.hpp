#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snapgrip {

enum class ChamberKind { Contact, Gripping };

std::string to_string(ChamberKind kind);

/// Design parameters of the two chamber types (mm, degrees).
///
/// Both chambers carry a conical snap band of uniform wall thickness between
/// a clamped rim and a rigid central boss that translates along the axis.
/// The band is recessed into the cavity in the as-cast state. Its mid-surface
/// is clamped at the inner faces of the rim and boss walls, half a wall
/// thickness inside the outline dimensions:
///
///   contact:  rim a/2 - wall/2, boss b/2 + wall/2, cavity depth c,
///             band rise d = span * tan(tilt)
///   gripping: rim r - wall/2, boss r - w + wall/2, cavity depth m + z,
///             band rise h = span * tan(tilt), boss clearance k = m + z - h
///
/// The outer body radius R only enters through the feasibility check R > r.
struct ChamberGeometry {
    ChamberKind kind = ChamberKind::Gripping;
    double tilt_deg = 45.0;
    double wall = 2.0;

    double a = 35.0;
    double b = 20.0;
    double c = 12.0;

    double R = 30.0;
    double r = 13.0;
    double w = 8.5;
    double m = 8.0;
    double z = 7.5;

    static ChamberGeometry gripping(double tilt_deg = 45.0);
    static ChamberGeometry contact(double tilt_deg = 45.0);

    /// Outline radius of the snap face (a/2 or r).
    double outer_radius() const;
    /// Radius where the band mid-surface is clamped.
    double rim_radius() const;
    double boss_radius() const;
    double band_span() const { return rim_radius() - boss_radius(); }
    double cavity_depth() const;

    /// Rise of the snap band: d for the contact chamber, h for the gripping one.
    double rise() const;
    /// Clearance between recessed boss and cavity floor (k for gripping).
    double clearance() const { return cavity_depth() - rise(); }

    /// Projected area of the snap face, pi * outer_radius^2 (mm^2).
    double face_area() const;

    /// Throws ValidationError on out-of-range tilt, non-positive lengths or
    /// non-positive derived dimensions.
    void validate() const;
};

/// Key/value form mirroring the figure parameter names:
///   kind = gripping | contact, tilt_deg, wall, a, b, c, R, r, w, m, z
ChamberGeometry chamber_from_ini(std::istream& in);
ChamberGeometry chamber_from_ini_file(const std::string& path);

struct Point2 {
    double r = 0.0;
    double z = 0.0;
};

/// Rotation condition applied to the bending term at a meridian end.
enum class EndCondition {
    Free,           ///< no rotational restraint
    Clamped,        ///< rotation fixed to the reference tangent
    RigidBoss,      ///< rotation locked to a flat boss translating with the end node
    AxisSymmetric,  ///< node on the axis, meridian smooth across it
};

/// Axisymmetric meridian of a snap membrane: node 0 ... n, piecewise linear.
struct MeridianMesh {
    std::vector<Point2> nodes;
    std::vector<double> thickness;       ///< per segment, reference (mm)
    std::vector<unsigned char> fix_r;    ///< per node
    std::vector<unsigned char> fix_z;    ///< per node
    EndCondition start_condition = EndCondition::Clamped;
    EndCondition end_condition = EndCondition::RigidBoss;
    /// Boss disk radius; its swept volume pi*r^2*z_end is part of the cavity.
    double boss_radius = 0.0;
    /// Constant part of the cavity volume (rigid walls).
    double base_volume = 0.0;

    std::size_t segments() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    std::size_t free_dofs() const;
    double reference_arc_length() const;
    double reference_volume() const;
    double max_radius() const;

    void validate() const;
};

inline constexpr int kMinSegments = 16;

/// Meridian of the chamber's snap band with n_segments >= 16 equal segments.
MeridianMesh build_mesh(const ChamberGeometry& geom, int n_segments);

/// Closed thin sphere (pole to pole) used as an inflation oracle. The south
/// pole is fixed axially to remove the rigid translation.
MeridianMesh build_balloon_mesh(double radius, double thickness, int n_segments);

/// Closed cylinder cavity (bottom center -> rim -> top rim -> top center).
MeridianMesh build_cylinder_mesh(double radius, double height, double thickness, int n_per_side);

struct VolumeResult {
    double volume = 0.0;
    bool self_intersecting = false;
};

/// Cavity volume bounded by the revolved meridian, the boss and the rigid
/// walls. Exact for piecewise-linear profiles.
VolumeResult enclosed_volume(const MeridianMesh& mesh, const std::vector<Point2>& deformed);

/// Volume without the self-intersection scan.
double cavity_volume(const MeridianMesh& mesh, const std::vector<Point2>& deformed);

bool profile_self_intersects(const std::vector<Point2>& nodes);

}  // namespace snapgrip
