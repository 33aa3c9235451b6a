#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <string>

namespace snapgrip {

struct BeamSegment {
    double length = 0.0;          ///< L_i, mm
    double second_moment = 0.0;   ///< I_i, mm^4
    double inclination = 0.0;     ///< theta_i, rad

    void validate() const;
};

struct BeamNode {
    double x = 0.0;
    double y = 0.0;
};

/// Three-segment piecewise-straight Euler-Bernoulli clamping beam loaded by a
/// vertical tip force. Built-in end at the origin.
struct FixtureBeam {
    std::array<BeamSegment, 3> segments;
    double youngs_modulus = 0.0;  ///< E, MPa
    double effective_area = 0.0;  ///< A_eff, mm^2
    bool calibrated = false;

    void validate() const;
    /// Cumulative node coordinates x_i = x_{i-1} + L_i cos(theta_i), etc.
    std::array<BeamNode, 4> nodes() const;
    double tip_x() const { return nodes()[3].x; }

    /// Uncalibrated default: a printed-plastic fixture with the gripping
    /// chamber face area as A_eff.
    static FixtureBeam defaults();
};

/// Tip deflection in the load direction (mm) for a vertical tip load P (N).
double tip_deflection(const FixtureBeam& beam, double load);

struct BeamCompliance {
    double compliance = 0.0;  ///< C_b, mm/N
    double stiffness = 0.0;   ///< k_b, N/mm
};

/// Throws AnalysisError for a beam with vanishing compliance.
BeamCompliance compliance(const FixtureBeam& beam);

/// Object stiffness; rigid objects are represented by an infinite k_o.
struct ObjectModel {
    double stiffness = 1.0;  ///< k_o, N/mm
    double size = 30.0;      ///< characteristic size, mm
    std::string label = "object";

    static ObjectModel rigid(double size, std::string label = "rigid");
    bool is_rigid() const { return std::isinf(stiffness); }
    void validate() const;
};

/// Harmonic series combination k_b k_o / (k_b + k_o); k_o = inf returns k_b.
double series_stiffness(double k_b, double k_o);

/// p = delta / (A_eff C_b), kPa.
double pressure_from_deflection(const FixtureBeam& beam, double deflection);
double pressure_from_deflection(double deflection, double effective_area, double compliance_mm_per_n);

/// Key/value form: E, A_eff, L1..L3, I1..I3, theta1_deg..theta3_deg, calibrated.
FixtureBeam beam_from_ini(std::istream& in);
FixtureBeam beam_from_ini_file(const std::string& path);

}  // namespace snapgrip
