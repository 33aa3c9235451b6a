#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "snapgrip/characteristic.hpp"
#include "snapgrip/error.hpp"

namespace snapgrip {

/// Requested state lies outside the sampled part of a characteristic.
class CoverageError : public SolverError {
public:
    using SolverError::SolverError;
};

/// Piston advance 0.2 mm/s in a 28.7 mm bore syringe.
double syringe_flow(double bore_diameter_mm, double piston_speed_mm_s);

struct NodeSpec {
    std::string name;
    Characteristic characteristic;
    int branch = 0;  ///< index of the pressure-stable (Follower) branch
};

enum class NodeMode { Follower, Leader, Held };

std::string to_string(NodeMode m);

struct NodeState {
    std::string name;
    NodeMode mode = NodeMode::Follower;
    int region = 0;          ///< index into the characteristic's regions
    int branch = 0;          ///< Follower branch, -1 while leading
    double position = 0.0;   ///< polyline parameter; negative below the first point
    double volume = 0.0;     ///< liquid in the chamber, mm^3
    double displaced = 0.0;  ///< volume pushed out by an object, mm^3
};

struct SnapEvent {
    std::size_t node = 0;
    std::string name;
    long step = 0;
    double time = 0.0;
    double p_before = 0.0;  ///< kPa
    double p_after = 0.0;
    double v_before = 0.0;  ///< mm^3
    double v_after = 0.0;
    double total_before = 0.0;
    double total_after = 0.0;
    int region_before = -1;  ///< index into the node characteristic's regions
    int region_after = -1;
};

struct TraceSample {
    double time = 0.0;          ///< s
    double total_volume = 0.0;  ///< mm^3
    double pressure = 0.0;      ///< kPa
    std::vector<double> volumes;
    bool event = false;
};

struct InjectionTrace {
    std::vector<TraceSample> samples;
    std::vector<SnapEvent> events;
    bool truncated = false;
    std::string diagnostic;
};

/// Closed liquid circuit of chambers sharing one pressure, with an optional
/// linear compliance C (mm^3/kPa) storing C*p of liquid.
///
/// Every chamber not pushed by an object sits either on a pressure-stable
/// branch of its characteristic (Follower) or, for at most one chamber, on a
/// falling-pressure part held in place by the rest of the circuit (Leader).
/// Changes of the liquid budget move the state continuously; when the
/// circuit folds, the state jumps at constant total volume to the next
/// stable equilibrium further along, and every chamber whose characteristic
/// region differs across the jump is reported as a SnapEvent.
class HydraulicNetwork {
public:
    static HydraulicNetwork assemble(std::vector<NodeSpec> nodes, double total_volume, double compliance = 0.0);

    /// Liquid volume for which every node rests on its branch at pressure p.
    static double total_volume_at_pressure(const std::vector<NodeSpec>& nodes, double pressure,
                                           double compliance = 0.0);

    /// Pushes dv of liquid out of the node (negative values release). While
    /// its displaced volume is positive the node holds V_engage - D.
    std::vector<SnapEvent> apply_contact_displacement(std::size_t node, double dv);

    /// Sets the circuit's liquid volume and re-equilibrates.
    std::vector<SnapEvent> set_total_volume(double total);

    /// Quasi-static injection at constant flow, sampled every dt.
    InjectionTrace inject(double flow, double duration, double dt);

    std::size_t size() const { return nodes_.size(); }
    const NodeState& node(std::size_t i) const { return state_.at(i); }
    const Characteristic& characteristic(std::size_t i) const { return nodes_.at(i).c; }
    std::size_t find(const std::string& name) const;

    double pressure() const { return pressure_; }
    double total_volume() const { return total_; }
    double compliance() const { return compliance_; }
    double stored_volume() const { return compliance_ * pressure_; }
    /// (sum of node volumes + stored volume - total) / total.
    double balance_error() const;
    double time() const { return time_; }
    long step() const { return step_; }
    int leader() const { return leader_; }
    const std::vector<SnapEvent>& events() const { return log_; }

    /// Pressure implied by node i's characteristic at its current position;
    /// equals pressure() for free nodes.
    double node_pressure(std::size_t i) const;

private:
    struct Node {
        Characteristic c;
        std::vector<PieceRegion> regions;
        std::vector<int> piece_region;
        double extension_slope = 0.0;  ///< dV/dp below the first point, 0 if none
        double engaged_volume = 0.0;
        int engaged_region = -1;
        double engaged_position = 0.0;
    };

    struct SubPiece;
    struct Snapshot {
        std::vector<int> regions;
        std::vector<double> volumes;
        double pressure = 0.0;
        double total = 0.0;
        int leader = -1;
    };

    HydraulicNetwork() = default;

    double target() const;
    double free_sum() const;
    double follower_volume(std::size_t i, double p, double* position = nullptr, int* region = nullptr) const;
    double region_lo(std::size_t i, int region) const;
    double region_hi(std::size_t i, int region) const;
    void set_pressure(double p);
    void set_leader_position(double sigma);
    bool promote_at_bound(int dir, bool allow);
    bool demote_leader();
    SubPiece next_subpiece(int dir, int sign_e, double f_goal = 0.0) const;
    void apply_subpiece(const SubPiece& sp, double t);
    bool direct_landing(int dir, double f_goal);
    int node_region(std::size_t i) const;
    Snapshot snapshot() const;
    std::vector<SnapEvent> advance(double target_total, bool assembling = false);

    std::vector<Node> nodes_;
    std::vector<NodeState> state_;
    double total_ = 0.0;
    double compliance_ = 0.0;
    double pressure_ = 0.0;
    double solved_target_ = 0.0;
    bool solved_ = false;
    int leader_ = -1;
    int direction_ = 1;  ///< walking direction of the mode last used
    double time_ = 0.0;
    long step_ = 0;
    std::vector<SnapEvent> log_;
};

}  // namespace snapgrip
