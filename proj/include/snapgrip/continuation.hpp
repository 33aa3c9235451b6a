#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snapgrip/chamber.hpp"
#include "snapgrip/materials.hpp"
#include "snapgrip/membrane.hpp"

namespace snapgrip {

/// Arc-length continuation settings. Step lengths are measured in the
/// combined norm sqrt(|du|^2 / n_dofs + psi^2 dp^2) (mm), so they read as an
/// RMS nodal displacement and do not depend on mesh resolution.
struct ContinuationControl {
    double initial_step = 0.1;
    double min_step = 1e-7;
    double max_step = 0.25;
    double max_arc_length = std::numeric_limits<double>::infinity();
    int max_steps = 5000;
    double tolerance = 1e-8;   ///< relative residual at accepted samples
    int max_iterations = 200;  ///< corrector iterations before the step is cut
    double max_volume_change = std::numeric_limits<double>::infinity();  ///< mm^3
    /// Stop once pressure reaches this multiple of the first pressure maximum.
    double termination_factor = 1.5;
    /// Load scale psi (mm/MPa); 0 selects |K0^-1 dV/du| / sqrt(n_dofs), which
    /// makes the traced path independent of the C10 scale.
    double load_scale = 0.0;

    void validate() const;
};

/// Stability under volume control (the experimentally imposed loading).
enum class Stability { Stable, Unstable, Limit };

std::string to_string(Stability s);
Stability stability_from_string(const std::string& s);

struct PathSample {
    double arc_length = 0.0;
    double volume = 0.0;    ///< mm^3
    double pressure = 0.0;  ///< kPa
    double dvds = 0.0;      ///< tangent, mm^3 per unit arc
    double dpds = 0.0;      ///< tangent, kPa per unit arc
    double energy = 0.0;    ///< stored strain energy, kPa*mm^3
    double residual = 0.0;  ///< relative equilibrium residual
    Stability stability = Stability::Stable;
    /// Negative eigenvalues of the pressure-controlled tangent stiffness, or -1
    /// when unknown (ingested curves).
    int negative_modes = -1;
    bool is_limit_point = false;
    Eigen::VectorXd state;  ///< free nodal coordinates; empty for ingested curves
};

enum class Termination {
    CriticalPressure,  ///< reached termination_factor * p_s
    MaxVolume,
    MaxArcLength,
    MaxSteps,
    StepTooSmall,  ///< corrector failed down to min_step; partial path
    Ingested,
};

std::string to_string(Termination t);

struct EquilibriumPath {
    std::vector<PathSample> samples;
    double reference_volume = 0.0;
    double max_step = 0.0;
    Termination termination = Termination::MaxSteps;
    std::string diagnostic;

    bool has_states() const { return !samples.empty() && samples.front().state.size() > 0; }
};

/// Traces the pressure-volume equilibrium path from the undeformed state with
/// a Crisfield-type arc-length predictor-corrector. Throws SolverError when the
/// starting tangent is singular.
EquilibriumPath trace_equilibrium_path(const MembraneModel& model, const ContinuationControl& ctrl);

EquilibriumPath trace_equilibrium_path(const MeridianMesh& mesh, const MaterialParams& mat,
                                       const ContinuationControl& ctrl, const ModelOptions& options = {});

/// Relative volume change of a liquid-filled cavity heated by dT with linear
/// expansion coefficient alpha_T: dV/V0 = 3 alpha_T dT.
double thermal_volume_ratio(double alpha_t, double delta_t);
/// Inverse of thermal_volume_ratio.
double thermal_equivalent_delta_t(double alpha_t, double volume_ratio);

inline constexpr double kWaterExpansionCoefficient = 0.0034;

struct JumpEvent {
    double volume = 0.0;
    double pressure_before = 0.0;
    double pressure_after = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    double arc_before = 0.0;  ///< arc position of the fold
    double arc_after = 0.0;   ///< arc position of the landing point
};

struct VolumeControlledResult {
    /// Volume-monotone response: stable branch samples plus the two end points
    /// of every isochoric jump.
    EquilibriumPath path;
    std::vector<JumpEvent> jumps;
    double target_volume_change = 0.0;
    double reached_volume_change = 0.0;
    double volume_ratio = 0.0;         ///< dV / V0
    double alpha_t = kWaterExpansionCoefficient;
    double equivalent_delta_t = 0.0;   ///< dV / V0 / (3 alpha_T), K
    bool truncated = false;
    std::string diagnostic;
};

/// Response of an ideal volume-controlled inflation up to target_dv.
VolumeControlledResult volume_controlled_inflate(const MembraneModel& model, double target_dv,
                                                 ContinuationControl ctrl,
                                                 double alpha_t = kWaterExpansionCoefficient);

/// Same construction on an already traced path.
VolumeControlledResult volume_controlled_response(const EquilibriumPath& path, double target_dv,
                                                  double alpha_t = kWaterExpansionCoefficient);

}  // namespace snapgrip
