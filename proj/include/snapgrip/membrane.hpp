#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "snapgrip/chamber.hpp"
#include "snapgrip/materials.hpp"

namespace snapgrip {

struct ModelOptions {
    /// Multiplier on the wall bending energy; 0 gives a pure membrane.
    double bending_scale = 1.0;
};

/// Energy, volume and their derivatives at one configuration. Units: N*mm for
/// energy, mm^3 for volume, dofs in mm.
struct ModelEvaluation {
    double energy = 0.0;
    double volume = 0.0;
    Eigen::VectorXd energy_gradient;
    Eigen::VectorXd volume_gradient;
    Eigen::SparseMatrix<double> energy_hessian;
    Eigen::SparseMatrix<double> volume_hessian;
};

/// Discrete axisymmetric Neo-Hookean shell of revolution.
///
/// Stretching uses the incompressible membrane reduction integrated with a
/// two-point Gauss rule per segment. Bending is a discrete Kirchhoff term with
/// plate modulus D = E t^3 / (12 (1 - nu^2)) at nu = 1/2, acting on the change
/// of meridional and circumferential curvature; its end conditions follow the
/// mesh EndCondition flags.
class MembraneModel {
public:
    MembraneModel(MeridianMesh mesh, MaterialParams material, ModelOptions options = {});

    const MeridianMesh& mesh() const { return mesh_; }
    const MaterialParams& material() const { return material_; }
    const ModelOptions& options() const { return options_; }

    int dofs() const { return static_cast<int>(dof_node_.size()); }
    Eigen::VectorXd reference_dofs() const;
    std::vector<Point2> nodes(const Eigen::VectorXd& u) const;

    double energy(const Eigen::VectorXd& u) const;
    double volume(const Eigen::VectorXd& u) const;
    ModelEvaluation evaluate(const Eigen::VectorXd& u, bool with_hessians = true) const;

    /// Pressure scale C10 * t / L used to normalize residuals (MPa).
    double pressure_scale() const { return pressure_scale_; }

private:
    struct Ghost {
        bool active = false;
        bool moves_with_node = false;  // offset from the end node vs fixed point
        Point2 value;
    };

    double coord(const Eigen::VectorXd& u, int node, int comp) const;
    Point2 ghost_reference(const Ghost& g, const Point2& end_node) const;

    MeridianMesh mesh_;
    MaterialParams material_;
    ModelOptions options_;
    std::vector<int> dof_node_;
    std::vector<int> dof_comp_;
    std::vector<int> node_dof_r_;
    std::vector<int> node_dof_z_;
    std::vector<double> seg_len0_;
    std::vector<double> node_len0_;
    Ghost start_ghost_;
    Ghost end_ghost_;
    std::vector<double> bend_ref_angle_;   // per node: reference turning angle
    std::vector<double> circ_ref_curv_;    // per segment
    double pressure_scale_ = 1.0;
};

}  // namespace snapgrip
