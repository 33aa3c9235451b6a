#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "snapgrip/characteristic.hpp"
#include "snapgrip/fixture_beam.hpp"
#include "snapgrip/hydraulic_network.hpp"

namespace snapgrip {

// ---------------------------------------------------------------------------
// Default chamber characteristics

struct ChamberDefaults {
    int n_segments = 64;
    double tilt_deg = 45.0;
    std::string material = "dragon-skin-00-30";
    double critical_pressure = 6.0;    ///< kPa, gripping p_s after scaling
    double snap_volume = 3500.0;       ///< mm^3, gripping snap completion
    double termination_factor = 3.0;
    double max_step = 0.1;
};

/// Gripping and contact characteristics traced from the chamber templates and
/// calibrated by two exact symmetries of the model: a common pressure factor
/// (modulus) fixes the gripping p_s, and a common length factor (geometric
/// similarity) places the end of the free gripping snap at snap_volume.
struct CalibratedChambers {
    Characteristic gripping;
    Characteristic contact;
    double length_factor = 1.0;
    double pressure_factor = 1.0;
    double contact_stroke = 0.0;  ///< mm^3, snapped state at 0 kPa back to undeformed
};

/// Results for the default options are computed once per process.
const CalibratedChambers& calibrated_chambers(const ChamberDefaults& options = {});

// ---------------------------------------------------------------------------
// Objects

/// Silicone test block pressed on one face: k_o = E A / L with E = 6 C10.
struct BlockSpec {
    double face_area = 400.0;  ///< mm^2
    double length = 20.0;      ///< mm
};

double block_stiffness(const MaterialParams& material, const BlockSpec& block = {});
/// Label is a catalog material name or one of the aliases "stiff"
/// (dragon-skin-00-30) and "soft" (ecoflex-00-30).
ObjectModel block_object(const std::string& label, double size = 30.0, const BlockSpec& block = {});

/// The five block materials in increasing stiffness.
const std::vector<std::string>& block_series();

// ---------------------------------------------------------------------------
// Scenario

struct SizeWindow {
    double min_size = 0.0;  ///< mm
    double max_size = 0.0;  ///< mm
    bool contains(double size) const { return size >= min_size && size <= max_size; }
};

/// Upper limit: fixture gap. Lower limit: gap minus two snap strokes, floored at 0.
SizeWindow size_window(double fixture_gap, double snap_displacement);

inline constexpr double kSmallFixtureGap = 40.0;   ///< mm
inline constexpr double kLargeFixtureGap = 100.0;  ///< mm

struct GraspScenario {
    Characteristic gripping;
    Characteristic contact;
    FixtureBeam fixture;
    std::optional<ObjectModel> object;
    double fixture_gap = kSmallFixtureGap;  ///< mm
    double contact_gap = 2.0;               ///< mm, quasi-static test only
    double snap_displacement = 10.0;        ///< mm
    double compliance = 0.0;                ///< mm^3/kPa
    double hold_threshold = 0.0;            ///< kPa
    double contact_stroke = 0.0;            ///< mm^3

    void validate() const;

    /// Calibrated chambers, calibrated fixture, rigid 30 mm object, small preset.
    static GraspScenario defaults();
};

enum class WindowCheck { InWindow, TooLarge, TooSmall };
std::string to_string(WindowCheck w);

WindowCheck grasp_feasibility(const GraspScenario& scenario);

enum class GraspOutcome { Grasped, FilteredTooLarge, FilteredTooSmall, NoTrigger, NotHeld };
std::string to_string(GraspOutcome o);

enum class Phase { I, II, III };
std::string to_string(Phase p);

struct GraspSample {
    double time = 0.0;          ///< s
    double volume = 0.0;        ///< injected or displaced volume, mm^3
    double pressure = 0.0;      ///< kPa
    double displacement = 0.0;  ///< membrane apex displacement, mm
    double force = 0.0;         ///< object reaction, N
    bool snapped = false;       ///< membrane past its snap
    bool event = false;
    Phase phase = Phase::I;
};

struct GraspTrace {
    std::vector<GraspSample> samples;
    std::vector<SnapEvent> events;
    GraspOutcome outcome = GraspOutcome::NoTrigger;
    bool has_object = false;
    double gap = 0.0;                ///< mm, contact gap of the traced membrane
    double plateau_pressure = 0.0;   ///< kPa, at the plateau volume or the end
    double trigger_volume = -1.0;    ///< mm^3 at the first snap, -1 without
    bool truncated = false;
    std::string diagnostic;
    std::shared_ptr<HydraulicNetwork> network;  ///< final state
};

struct PhaseBoundaries {
    std::optional<std::size_t> contact;     ///< first sample of phase II
    std::optional<std::size_t> completion;  ///< first sample of phase III
};

/// Relabels the trace from its contact and snap flags and returns the
/// boundaries; a trace without contact is phase I throughout.
PhaseBoundaries detect_phases(GraspTrace& trace);

inline constexpr double kPlateauVolume = 3500.0;  ///< mm^3

/// Single gripping chamber in its fixture, inflated at constant flow. The
/// object spring acts in series with the fixture and saturates at the snap
/// stroke. The plateau pressure is read at plateau_volume.
GraspTrace simulate_quasistatic_test(const GraspScenario& scenario, double flow, double duration,
                                     double dt = 0.25, double plateau_volume = kPlateauVolume);

/// Pressure at plateau_volume only (one equilibrium walk, no sampling).
double plateau_pressure(const GraspScenario& scenario, double plateau_volume = kPlateauVolume);

inline constexpr std::size_t kContactNode = 0;
inline constexpr std::size_t kGrippingNodes[2] = {1, 2};

/// Contact chamber on its snapped branch and two undeformed gripping chambers
/// at 0 kPa. With an object the gripping chambers carry its contact load at
/// the per-side gap (fixture_gap - size) / 2.
HydraulicNetwork grasp_network(const GraspScenario& scenario);

/// Contact chamber pushed by the object along profile (cumulative displaced
/// volume, mm^3) with the two gripping chambers facing the object.
GraspTrace simulate_grasp(const GraspScenario& scenario, const std::vector<double>& profile);

/// Ramp from 0 to the contact stroke in steps increments.
std::vector<double> full_stroke_profile(const GraspScenario& scenario, int steps = 200);

struct HoldResult {
    double pressure_change = 0.0;
    std::size_t events = 0;
};

/// Advances the final network of a trace by steps zero-flow intervals.
HoldResult hold_without_source(const GraspTrace& trace, int steps, double dt = 1.0);

// ---------------------------------------------------------------------------
// Fixture calibration

struct CalibrationTarget {
    std::string label;
    double pressure = 0.0;  ///< kPa
    double stiffness = 0.0; ///< k_o, N/mm; 0 derives it from the label
};

struct CalibrationResult {
    FixtureBeam fixture;
    double stiffness = 0.0;       ///< k_b, N/mm
    double effective_area = 0.0;  ///< mm^2
    std::vector<double> predicted;
    std::vector<double> residuals;  ///< predicted - target, kPa
    double rms = 0.0;
};

/// Least-squares fit of k_b (the fixture modulus is rescaled to match) and,
/// when fit_area is set, of A_eff, against plateau pressures.
CalibrationResult calibrate_fixture(const std::vector<CalibrationTarget>& targets, const GraspScenario& base,
                                    bool fit_area = true, double plateau_volume = kPlateauVolume);

/// Stiff 14 kPa and soft 3 kPa on the default scenario; computed once.
const CalibrationResult& default_calibration();

}  // namespace snapgrip
