#include "snapgrip/membrane.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "snapgrip/error.hpp"
#include "snapgrip/jet.hpp"

namespace snapgrip {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPoisson = 0.5;
const std::array<double, 2> kGauss = {0.5 - 0.5 / std::numbers::sqrt3, 0.5 + 0.5 / std::numbers::sqrt3};

template <int N>
struct JetPoint {
    Jet2<N> r;
    Jet2<N> z;
};

template <int N>
Jet2<N> turning_angle(const JetPoint<N>& a, const JetPoint<N>& b, const JetPoint<N>& c) {
    const Jet2<N> e1r = b.r - a.r;
    const Jet2<N> e1z = b.z - a.z;
    const Jet2<N> e2r = c.r - b.r;
    const Jet2<N> e2z = c.z - b.z;
    return atan2(e1r * e2z - e1z * e2r, e1r * e2r + e1z * e2z);
}

double turning_angle(const Point2& a, const Point2& b, const Point2& c) {
    const double e1r = b.r - a.r;
    const double e1z = b.z - a.z;
    const double e2r = c.r - b.r;
    const double e2z = c.z - b.z;
    return std::atan2(e1r * e2z - e1z * e2r, e1r * e2r + e1z * e2z);
}

template <int N>
Jet2<N> circumferential_curvature(const JetPoint<N>& a, const JetPoint<N>& b) {
    const Jet2<N> dr = b.r - a.r;
    const Jet2<N> dz = b.z - a.z;
    const Jet2<N> len = sqrt(dr * dr + dz * dz);
    return dz / (len * (0.5 * (a.r + b.r)));
}

double circumferential_curvature(const Point2& a, const Point2& b) {
    return (b.z - a.z) / (std::hypot(b.r - a.r, b.z - a.z) * 0.5 * (a.r + b.r));
}

struct TripletSink {
    std::vector<Eigen::Triplet<double>> triplets;
};

template <int N, std::size_t M>
void scatter(const Jet2<N>& e, const std::array<int, M>& map, double& value, Eigen::VectorXd& grad,
             TripletSink* hess) {
    value += e.v;
    for (int a = 0; a < N; ++a) {
        if (map[a] < 0) continue;
        grad[map[a]] += e.g[a];
        if (!hess) continue;
        for (int b = 0; b < N; ++b) {
            if (map[b] < 0 || e.h(a, b) == 0.0) continue;
            hess->triplets.emplace_back(map[a], map[b], e.h(a, b));
        }
    }
}

}  // namespace

MembraneModel::MembraneModel(MeridianMesh mesh, MaterialParams material, ModelOptions options)
    : mesh_(std::move(mesh)), material_(material), options_(options) {
    mesh_.validate();
    material_.validate();
    if (material_.d1 != 0.0) {
        throw ValidationError("membrane model requires an incompressible material (d1 = 0)");
    }
    if (!(options_.bending_scale >= 0.0) || !std::isfinite(options_.bending_scale)) {
        throw ValidationError("bending_scale must be finite and non-negative");
    }
    const auto& X = mesh_.nodes;
    const int n = static_cast<int>(X.size());
    node_dof_r_.assign(n, -1);
    node_dof_z_.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        if (!mesh_.fix_r[i]) {
            node_dof_r_[i] = static_cast<int>(dof_node_.size());
            dof_node_.push_back(i);
            dof_comp_.push_back(0);
        }
        if (!mesh_.fix_z[i]) {
            node_dof_z_[i] = static_cast<int>(dof_node_.size());
            dof_node_.push_back(i);
            dof_comp_.push_back(1);
        }
    }
    seg_len0_.resize(n - 1);
    for (int i = 0; i + 1 < n; ++i) seg_len0_[i] = std::hypot(X[i + 1].r - X[i].r, X[i + 1].z - X[i].z);
    node_len0_.resize(n);
    node_len0_.front() = seg_len0_.front();
    node_len0_.back() = seg_len0_.back();
    for (int i = 1; i + 1 < n; ++i) node_len0_[i] = 0.5 * (seg_len0_[i - 1] + seg_len0_[i]);

    auto make_ghost = [&](EndCondition cond, int end, int neighbor) {
        Ghost g;
        switch (cond) {
            case EndCondition::Free:
                break;
            case EndCondition::Clamped:
                g.active = true;
                g.value = {2.0 * X[end].r - X[neighbor].r, 2.0 * X[end].z - X[neighbor].z};
                break;
            case EndCondition::RigidBoss:
                g.active = true;
                g.moves_with_node = true;
                g.value = {-seg_len0_[end == 0 ? 0 : n - 2], 0.0};
                break;
            case EndCondition::AxisSymmetric:
                g.active = true;
                break;
        }
        return g;
    };
    start_ghost_ = make_ghost(mesh_.start_condition, 0, 1);
    end_ghost_ = make_ghost(mesh_.end_condition, n - 1, n - 2);

    bend_ref_angle_.assign(n, 0.0);
    for (int i = 1; i + 1 < n; ++i) bend_ref_angle_[i] = turning_angle(X[i - 1], X[i], X[i + 1]);
    if (start_ghost_.active) {
        const Point2 g = mesh_.start_condition == EndCondition::AxisSymmetric ? Point2{-X[1].r, X[1].z}
                                                                              : ghost_reference(start_ghost_, X[0]);
        bend_ref_angle_[0] = turning_angle(g, X[0], X[1]);
    }
    if (end_ghost_.active) {
        const Point2 g = mesh_.end_condition == EndCondition::AxisSymmetric
                             ? Point2{-X[n - 2].r, X[n - 2].z}
                             : ghost_reference(end_ghost_, X[n - 1]);
        bend_ref_angle_[n - 1] = turning_angle(X[n - 2], X[n - 1], g);
    }
    circ_ref_curv_.resize(n - 1);
    for (int i = 0; i + 1 < n; ++i) circ_ref_curv_[i] = circumferential_curvature(X[i], X[i + 1]);

    double tmean = 0.0;
    for (double t : mesh_.thickness) tmean += t;
    tmean /= static_cast<double>(mesh_.thickness.size());
    pressure_scale_ = material_.c10 * tmean / mesh_.reference_arc_length();
}

Point2 MembraneModel::ghost_reference(const Ghost& g, const Point2& end_node) const {
    return g.moves_with_node ? Point2{end_node.r + g.value.r, end_node.z + g.value.z} : g.value;
}

Eigen::VectorXd MembraneModel::reference_dofs() const {
    Eigen::VectorXd u(dofs());
    for (int k = 0; k < dofs(); ++k) {
        const auto& p = mesh_.nodes[dof_node_[k]];
        u[k] = dof_comp_[k] == 0 ? p.r : p.z;
    }
    return u;
}

double MembraneModel::coord(const Eigen::VectorXd& u, int node, int comp) const {
    const int d = comp == 0 ? node_dof_r_[node] : node_dof_z_[node];
    if (d >= 0) return u[d];
    return comp == 0 ? mesh_.nodes[node].r : mesh_.nodes[node].z;
}

std::vector<Point2> MembraneModel::nodes(const Eigen::VectorXd& u) const {
    if (u.size() != dofs()) throw ValidationError("state vector size does not match the mesh");
    std::vector<Point2> out(mesh_.nodes.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {coord(u, static_cast<int>(i), 0), coord(u, static_cast<int>(i), 1)};
    }
    return out;
}

double MembraneModel::energy(const Eigen::VectorXd& u) const { return evaluate(u, false).energy; }

double MembraneModel::volume(const Eigen::VectorXd& u) const { return cavity_volume(mesh_, nodes(u)); }

ModelEvaluation MembraneModel::evaluate(const Eigen::VectorXd& u, bool with_hessians) const {
    if (u.size() != dofs()) throw ValidationError("state vector size does not match the mesh");
    const int n = static_cast<int>(mesh_.nodes.size());
    const int nd = dofs();
    const auto& X0 = mesh_.nodes;
    const double c10 = material_.c10;

    ModelEvaluation ev;
    ev.energy_gradient = Eigen::VectorXd::Zero(nd);
    ev.volume_gradient = Eigen::VectorXd::Zero(nd);
    TripletSink hu;
    TripletSink hv;
    TripletSink* hu_ptr = with_hessians ? &hu : nullptr;
    TripletSink* hv_ptr = with_hessians ? &hv : nullptr;

    // Stretching and volume, one segment at a time.
    for (int s = 0; s + 1 < n; ++s) {
        using J = Jet2<4>;
        const std::array<int, 4> map = {node_dof_r_[s], node_dof_z_[s], node_dof_r_[s + 1], node_dof_z_[s + 1]};
        const J ra = J::variable(coord(u, s, 0), 0);
        const J za = J::variable(coord(u, s, 1), 1);
        const J rb = J::variable(coord(u, s + 1, 0), 2);
        const J zb = J::variable(coord(u, s + 1, 1), 3);

        const double l0 = seg_len0_[s];
        const J dr = rb - ra;
        const J dz = zb - za;
        const J lm2 = (dr * dr + dz * dz) / (l0 * l0);
        J e(0.0);
        for (double g : kGauss) {
            const double r0 = X0[s].r + g * (X0[s + 1].r - X0[s].r);
            const J rr = ra + g * dr;
            const J lc = rr / r0;
            const J lc2 = lc * lc;
            const J w = c10 * (lm2 + lc2 + reciprocal(lm2 * lc2) - 3.0);
            e = e + w * (0.5 * mesh_.thickness[s] * 2.0 * kPi * r0 * l0);
        }
        scatter(e, map, ev.energy, ev.energy_gradient, hu_ptr);

        const J vol = (-2.0 * kPi / 6.0) * (dr * (2.0 * ra * za + ra * zb + rb * za + 2.0 * rb * zb));
        scatter(vol, map, ev.volume, ev.volume_gradient, hv_ptr);
    }
    ev.volume += mesh_.base_volume;
    const double boss_area = kPi * mesh_.boss_radius * mesh_.boss_radius;
    ev.volume += boss_area * coord(u, n - 1, 1);
    if (node_dof_z_[n - 1] >= 0) ev.volume_gradient[node_dof_z_[n - 1]] += boss_area;

    // Bending, one node stencil (previous, node, next) at a time.
    if (options_.bending_scale > 0.0) {
        using J = Jet2<6>;
        for (int i = 0; i < n; ++i) {
            const bool first = i == 0;
            const bool last = i == n - 1;
            std::array<int, 6> map = {-1, -1, -1, -1, -1, -1};
            std::array<JetPoint<6>, 3> pts;
            for (int k = 0; k < 3; ++k) {
                const int node = i - 1 + k;
                if (node < 0 || node >= n) continue;
                pts[k].r = J::variable(coord(u, node, 0), 2 * k);
                pts[k].z = J::variable(coord(u, node, 1), 2 * k + 1);
                map[2 * k] = node_dof_r_[node];
                map[2 * k + 1] = node_dof_z_[node];
            }
            bool has_angle = true;
            auto fill_ghost = [&](const Ghost& g, EndCondition cond, int slot, int end_slot, int inner_slot) {
                if (!g.active) {
                    has_angle = false;
                    return;
                }
                if (cond == EndCondition::AxisSymmetric) {
                    pts[slot].r = -pts[inner_slot].r;
                    pts[slot].z = pts[inner_slot].z;
                } else if (g.moves_with_node) {
                    pts[slot].r = pts[end_slot].r + g.value.r;
                    pts[slot].z = pts[end_slot].z + g.value.z;
                } else {
                    pts[slot].r = J(g.value.r);
                    pts[slot].z = J(g.value.z);
                }
            };
            if (first) fill_ghost(start_ghost_, mesh_.start_condition, 0, 1, 2);
            if (last) fill_ghost(end_ghost_, mesh_.end_condition, 2, 1, 0);

            const double lbar = node_len0_[i];
            J km(0.0);
            if (has_angle) km = (turning_angle(pts[0], pts[1], pts[2]) - bend_ref_angle_[i]) / lbar;

            J kc(0.0);
            double tnode = 0.0;
            if (first) {
                kc = circumferential_curvature(pts[1], pts[2]) - circ_ref_curv_[0];
                tnode = mesh_.thickness[0];
            } else if (last) {
                kc = circumferential_curvature(pts[0], pts[1]) - circ_ref_curv_[n - 2];
                tnode = mesh_.thickness[n - 2];
            } else {
                kc = 0.5 * ((circumferential_curvature(pts[0], pts[1]) - circ_ref_curv_[i - 1]) +
                            (circumferential_curvature(pts[1], pts[2]) - circ_ref_curv_[i]));
                tnode = 0.5 * (mesh_.thickness[i - 1] + mesh_.thickness[i]);
            }
            const double area = 2.0 * kPi * X0[i].r * lbar;
            if (area == 0.0) continue;
            const double plate = options_.bending_scale * 6.0 * c10 * tnode * tnode * tnode /
                                 (12.0 * (1.0 - kPoisson * kPoisson));
            const J eb = (0.5 * plate * area) * (km * km + kc * kc + 2.0 * kPoisson * km * kc);
            scatter(eb, map, ev.energy, ev.energy_gradient, hu_ptr);
        }
    }

    if (with_hessians) {
        ev.energy_hessian.resize(nd, nd);
        ev.energy_hessian.setFromTriplets(hu.triplets.begin(), hu.triplets.end());
        ev.volume_hessian.resize(nd, nd);
        ev.volume_hessian.setFromTriplets(hv.triplets.begin(), hv.triplets.end());
    }
    return ev;
}

}  // namespace snapgrip
