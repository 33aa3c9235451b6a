#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snapgrip/chamber.hpp"
#include "snapgrip/continuation.hpp"
#include "snapgrip/materials.hpp"

namespace snapgrip {

// Criteria thresholds.
inline constexpr double kNegativePressureEpsilon = 1e-6;  ///< kPa
inline constexpr double kFoldRelativeTolerance = 1e-6;

enum class ExtremumKind { Pressure, Volume };

/// A point on the cubic Hermite interpolant (in arc length) of a path interval.
struct PathPoint {
    double arc_length = 0.0;
    double volume = 0.0;
    double pressure = 0.0;
    double energy = 0.0;
};

/// Evaluates the Hermite interpolant between two consecutive samples at
/// fraction t in [0, 1]. Energy uses dU/ds = p dV/ds.
PathPoint interpolate(const PathSample& a, const PathSample& b, double t);

/// Locates the extremum of pressure or volume between two samples whose
/// tangents bracket a sign change, by bisection on the interpolant slope.
PathPoint refine_extremum(const PathSample& a, const PathSample& b, ExtremumKind kind);

enum class LimitKind { PressureLimit, VolumeLimit };

std::string to_string(LimitKind k);

struct LimitPoint {
    LimitKind kind = LimitKind::PressureLimit;
    double volume = 0.0;    ///< mm^3
    double pressure = 0.0;  ///< kPa
    double arc_length = 0.0;
    double energy = 0.0;
    std::size_t path_index = 0;  ///< index of the sample preceding the point
    bool maximum = true;          ///< local maximum of the limited quantity
};

/// Builds a path from a bare (V, p) polyline: arc length from chords in
/// range-normalized coordinates, tangents by central differences and
/// energy U = integral of p dV. Stability tags are optional.
EquilibriumPath path_from_curve(const std::vector<double>& volume, const std::vector<double>& pressure,
                                const std::vector<Stability>& stability = {});

/// Flags the sample closest to every refined limit point.
void mark_limit_samples(EquilibriumPath& path);

/// All sign changes of dp/ds and dV/ds, refined, ordered by arc length.
/// Throws ValidationError for fewer than 3 samples or duplicate consecutive samples.
std::vector<LimitPoint> find_limit_points(const EquilibriumPath& path);

struct CriticalPressure {
    double p_s = 0.0;                  ///< kPa
    double termination_pressure = 0.0;  ///< 1.5 p_s
    LimitPoint limit;
};

/// First pressure-limit point. Throws AnalysisError on a monostable path.
CriticalPressure critical_pressure(const EquilibriumPath& path, double termination_factor = 1.5);

/// History-continuous volume-controlled response of a path: follows the
/// stable branch and jumps isochorically at every volume maximum to the first
/// later crossing of the same volume on a stable, volume-increasing branch.
struct SnapPath {
    std::vector<PathSample> samples;  ///< volume non-decreasing
    std::vector<JumpEvent> jumps;
    std::vector<double> enclosed_areas;  ///< per jump, kPa*mm^3
    bool truncated = false;              ///< a fold without a landing point
    std::string diagnostic;
};

SnapPath build_snap_path(const EquilibriumPath& path);

/// Pressure on the snap path at the given volume. At a jump volume the
/// post-jump pressure is returned. Throws ValidationError outside coverage.
double snap_jump_pressure(const EquilibriumPath& path, double at_volume);
double snap_jump_pressure(const SnapPath& snap, double at_volume);

struct BistabilityReport {
    bool has_enclosed_area = false;
    double enclosed_area = 0.0;  ///< kPa*mm^3
    bool has_negative_pressure = false;
    double min_pressure = 0.0;  ///< kPa
    bool has_critical_pressure = false;
    double p_s = 0.0;  ///< kPa, first pressure limit (0 when absent)
    double released_energy = 0.0;  ///< kPa*mm^3, first snap (0 when absent)
    std::vector<LimitPoint> limit_points;
    std::vector<JumpEvent> jumps;
    bool bistable() const { return has_enclosed_area && has_negative_pressure; }
};

BistabilityReport classify_bistability(const EquilibriumPath& path);

/// Strain energy released by the first isochoric snap (U_pre - U_post).
/// Throws AnalysisError on a path without a snap.
double released_energy(const EquilibriumPath& path);

struct SweepOptions {
    int n_segments = 64;
    ContinuationControl control = [] {
        ContinuationControl c;
        c.max_step = 0.1;
        return c;
    }();
    ModelOptions model;
    /// Volume cap for angles without a pressure limit, as a multiple of the
    /// recessed frustum volume of the band.
    double max_volume_factor = 2.5;
    unsigned threads = 0;  ///< 0: hardware concurrency
    bool keep_paths = false;
};

struct SweepEntry {
    double angle_deg = 0.0;
    bool ok = false;
    std::string error;
    BistabilityReport report;
    EquilibriumPath path;  ///< filled when keep_paths
};

struct SweepResult {
    std::vector<SweepEntry> entries;  ///< in input order
    std::optional<double> recommended_angle;
    std::string note;
};

inline const std::vector<double> kDefaultSweepAngles = {25.0, 30.0, 35.0, 40.0, 45.0};

/// Volume change at which a trace of this geometry stops when no pressure
/// limit is reached.
double sweep_volume_cap(const ChamberGeometry& geom, double factor);

/// Independent traces per angle, evaluated in parallel; failures are isolated
/// per entry. Output order and values do not depend on the thread count.
SweepResult tilt_sweep(const ChamberGeometry& geom_template, const std::vector<double>& angles,
                       const MaterialParams& mat, const SweepOptions& options = {});

}  // namespace snapgrip
