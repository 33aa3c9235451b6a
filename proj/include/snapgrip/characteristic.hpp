#pragma once

#include <string>
#include <vector>

#include "snapgrip/continuation.hpp"
#include "snapgrip/membrane.hpp"

namespace snapgrip {

/// Local behaviour of one polyline piece under pressure control.
///   Follower: pressure and volume both rise (no negative stiffness mode)
///   Leader:   one negative mode; the chamber can be held only by the rest of
///             a volume-controlled circuit
///   Unstable: two or more negative modes
enum class PieceClass { Follower, Leader, Unstable };

std::string to_string(PieceClass c);

/// Maximal run of pieces with the same class.
struct PieceRegion {
    PieceClass kind = PieceClass::Follower;
    int first_piece = 0;
    int last_piece = 0;
    int branch = -1;  ///< ordinal among Follower regions, -1 otherwise

    int first_point() const { return first_piece; }
    int last_point() const { return last_piece + 1; }
};

/// Pressure-volume characteristic of one chamber as an arc-ordered polyline,
/// optionally with the membrane apex displacement at every point.
struct Characteristic {
    std::string name;
    std::vector<double> volume;        ///< mm^3
    std::vector<double> pressure;      ///< kPa
    std::vector<Stability> stability;  ///< volume-control tags
    std::vector<double> displacement;  ///< mm, empty when unknown

    static Characteristic from_path(const EquilibriumPath& path, std::string name = {});
    /// Also records the apex displacement of every sample state.
    static Characteristic from_path(const EquilibriumPath& path, const MembraneModel& model,
                                    std::string name = {});

    /// Throws ValidationError for fewer than 3 points, non-finite values,
    /// duplicate consecutive points or mismatched column lengths.
    void validate() const;

    std::size_t points() const { return volume.size(); }
    bool has_displacement() const { return !displacement.empty(); }

    /// Pressure of the first local maximum along the arc. Throws
    /// AnalysisError when pressure never turns down.
    double critical_pressure() const;

    /// Every pressure multiplied by factor (linear in the material modulus).
    Characteristic scaled(double factor) const;
    /// Pressures scaled so that critical_pressure() equals target_kpa.
    Characteristic normalized(double target_kpa) const;
    /// Geometrically similar chamber enlarged by the length factor s:
    /// volumes scale by s^3, displacements by s, pressures are unchanged.
    Characteristic similar(double s) const;

    PieceClass piece_class(int piece) const;
    std::vector<PieceRegion> regions() const;

    EquilibriumPath to_path() const;
};

/// Volume-control tags from the curve shape alone, assuming at most one
/// negative stiffness mode: a point is unstable only between two
/// volume-decreasing pieces (an end point needs its one piece decreasing).
std::vector<Stability> infer_stability(const std::vector<double>& volume);

/// Object contact felt by a membrane through the fixture: once the apex
/// displacement exceeds gap the reaction k_eq (u - gap), capped at
/// force_cap, acts on the effective area.
struct ContactLoad {
    double gap = 2.0;                  ///< mm
    double stiffness = 0.0;            ///< k_eq, N/mm
    double force_cap = 0.0;            ///< N, plateau level (inf for none)
    double effective_area = 0.0;       ///< mm^2
    /// Used when the characteristic carries no displacement column.
    double displacement_area = 0.0;    ///< mm^2

    void validate() const;
    double force(double u) const;          ///< N
    double pressure(double u) const;       ///< kPa
};

/// Apex displacement at point k; falls back to (V_k - V_0) / area.
double point_displacement(const Characteristic& c, std::size_t k, double fallback_area);

/// Characteristic of the chamber pressed against the load: the contact
/// pressure is added along the arc, with extra points inserted where the
/// load engages and where it saturates so the sum stays piecewise linear.
/// source_position, when given, receives the polyline parameter of every
/// output point on the input curve.
Characteristic with_contact_load(const Characteristic& c, const ContactLoad& load,
                                 std::vector<double>* source_position = nullptr);

/// Arc position (polyline parameter) where the free chamber's configuration
/// enters its first post-snap Follower region, i.e. the snap is complete.
/// Returns -1 when the characteristic has a single Follower region.
double snap_completion_position(const Characteristic& c);

}  // namespace snapgrip
