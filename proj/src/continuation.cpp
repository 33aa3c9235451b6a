#include "snapgrip/continuation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "snapgrip/error.hpp"
#include "snapgrip/pv_analysis.hpp"

namespace snapgrip {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

SpMat tangent_stiffness(const ModelEvaluation& ev, double p) {
    SpMat k = ev.energy_hessian - p * ev.volume_hessian;
    k.makeCompressed();
    return k;
}

// [K  -gV; a^T  b] as a sparse (n+1) x (n+1) matrix.
SpMat bordered(const SpMat& k, const Eigen::VectorXd& gv, const Eigen::VectorXd& a, double b) {
    const int n = static_cast<int>(k.rows());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(k.nonZeros() + 2 * n + 1);
    for (int col = 0; col < k.outerSize(); ++col) {
        for (SpMat::InnerIterator it(k, col); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (int i = 0; i < n; ++i) {
        if (gv[i] != 0.0) t.emplace_back(i, n, -gv[i]);
        if (a[i] != 0.0) t.emplace_back(n, i, a[i]);
    }
    t.emplace_back(n, n, b);
    SpMat m(n + 1, n + 1);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

bool solve_bordered(const SpMat& m, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    Eigen::SparseLU<SpMat> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success) return false;
    x = lu.solve(rhs);
    return lu.info() == Eigen::Success && x.allFinite();
}

// Number of negative pivots of an LDL^T factorization (Sylvester inertia), or
// -1 when the factorization breaks down on an exactly singular pivot.
int negative_modes(const SpMat& k) {
    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.compute(k);
    if (ldlt.info() != Eigen::Success) return -1;
    const Eigen::VectorXd d = ldlt.vectorD();
    int neg = 0;
    for (int i = 0; i < d.size(); ++i) {
        if (d[i] == 0.0) return -1;
        if (d[i] < 0.0) ++neg;
    }
    return neg;
}

Stability classify(int neg, double dvds, double dpds) {
    if (neg < 0) return Stability::Limit;
    const double prod = dvds * dpds;
    if (prod == 0.0) return Stability::Limit;
    if ((neg == 0 && prod > 0.0) || (neg == 1 && prod < 0.0)) return Stability::Stable;
    return Stability::Unstable;
}

struct Tangent {
    Eigen::VectorXd du;
    double dp = 0.0;
};

class Tracer {
public:
    Tracer(const MembraneModel& model, const ContinuationControl& ctrl)
        : model_(model), ctrl_(ctrl), n_(model.dofs()), w_(1.0 / model.dofs()) {}

    EquilibriumPath run();

private:
    double norm2(const Eigen::VectorXd& du, double dp) const { return w_ * du.squaredNorm() + psi2_ * dp * dp; }

    Tangent tangent(const ModelEvaluation& ev, double p, const Tangent& ref, bool first) const;
    bool correct(Eigen::VectorXd& u, double& p, const Eigen::VectorXd& un, double pn, double dl, int& iters,
                 double& residual) const;
    PathSample make_sample(const Eigen::VectorXd& u, double p, const ModelEvaluation& ev, const Tangent& t,
                           double s, double residual) const;
    double force_scale(const ModelEvaluation& ev, double p) const {
        return ev.volume_gradient.norm() * std::max(std::abs(p), model_.pressure_scale());
    }

    const MembraneModel& model_;
    const ContinuationControl& ctrl_;
    int n_;
    double w_;
    double psi2_ = 1.0;
};

Tangent Tracer::tangent(const ModelEvaluation& ev, double p, const Tangent& ref, bool first) const {
    const SpMat k = tangent_stiffness(ev, p);
    Eigen::VectorXd a;
    double b = 0.0;
    if (first) {
        a = Eigen::VectorXd::Zero(n_);
        b = 1.0;
    } else {
        a = w_ * ref.du;
        b = psi2_ * ref.dp;
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_ + 1);
    rhs[n_] = 1.0;
    Eigen::VectorXd x;
    if (!solve_bordered(bordered(k, ev.volume_gradient, a, b), rhs, x)) {
        throw SolverError("singular bordered tangent system");
    }
    Tangent t{x.head(n_), x[n_]};
    const double nrm = std::sqrt(norm2(t.du, t.dp));
    t.du /= nrm;
    t.dp /= nrm;
    return t;
}

bool Tracer::correct(Eigen::VectorXd& u, double& p, const Eigen::VectorXd& un, double pn, double dl, int& iters,
                     double& residual) const {
    for (iters = 1; iters <= ctrl_.max_iterations; ++iters) {
        ModelEvaluation ev;
        try {
            ev = model_.evaluate(u, true);
        } catch (const std::exception&) {
            return false;
        }
        const Eigen::VectorXd r = ev.energy_gradient - p * ev.volume_gradient;
        const Eigen::VectorXd du = u - un;
        const double dp = p - pn;
        const double g = 0.5 * (norm2(du, dp) - dl * dl);
        const double fs = force_scale(ev, p);
        if (!r.allFinite() || !std::isfinite(g)) return false;
        residual = r.norm() / fs;
        if (residual <= ctrl_.tolerance && std::abs(g) <= ctrl_.tolerance * dl * dl) {
            --iters;
            return true;
        }
        if (residual > 1e12) return false;
        const SpMat m = bordered(tangent_stiffness(ev, p), ev.volume_gradient, w_ * du, psi2_ * dp);
        Eigen::VectorXd rhs(n_ + 1);
        rhs.head(n_) = -r;
        rhs[n_] = -g;
        Eigen::VectorXd x;
        if (!solve_bordered(m, rhs, x)) return false;
        u += x.head(n_);
        p += x[n_];
    }
    return false;
}

PathSample Tracer::make_sample(const Eigen::VectorXd& u, double p, const ModelEvaluation& ev, const Tangent& t,
                               double s, double residual) const {
    PathSample smp;
    smp.arc_length = s;
    smp.volume = ev.volume;
    smp.pressure = p * kKPaPerMPa;
    smp.dvds = ev.volume_gradient.dot(t.du);
    smp.dpds = t.dp * kKPaPerMPa;
    smp.energy = ev.energy * kKPaPerMPa;
    smp.residual = residual;
    smp.negative_modes = negative_modes(tangent_stiffness(ev, p));
    smp.stability = classify(smp.negative_modes, smp.dvds, smp.dpds);
    smp.state = u;
    return smp;
}

EquilibriumPath Tracer::run() {
    EquilibriumPath path;
    Eigen::VectorXd u = model_.reference_dofs();
    double p = 0.0;
    ModelEvaluation ev = model_.evaluate(u, true);
    path.reference_volume = ev.volume;
    path.max_step = ctrl_.max_step;

    {
        Eigen::SimplicialLDLT<SpMat> ldlt(tangent_stiffness(ev, 0.0));
        if (ldlt.info() != Eigen::Success) throw SolverError("singular tangent stiffness at the undeformed state");
        const Eigen::VectorXd c = ldlt.solve(ev.volume_gradient);
        if (!c.allFinite() || c.norm() == 0.0) {
            throw SolverError("singular tangent stiffness at the undeformed state");
        }
        const double psi = ctrl_.load_scale > 0.0 ? ctrl_.load_scale : std::sqrt(w_) * c.norm();
        psi2_ = psi * psi;
    }

    Tangent t = tangent(ev, p, {}, true);
    if (t.dp < 0.0) {
        t.du = -t.du;
        t.dp = -t.dp;
    }
    double s = 0.0;
    path.samples.push_back(make_sample(u, p, ev, t, s, 0.0));
    if (ctrl_.max_arc_length <= 0.0) {
        path.termination = Termination::MaxArcLength;
        return path;
    }

    double dl = std::min(ctrl_.initial_step, ctrl_.max_step);
    double p_crit = std::numeric_limits<double>::quiet_NaN();
    const double v0 = path.reference_volume;

    for (int step = 0;; ++step) {
        if (step >= ctrl_.max_steps) {
            path.termination = Termination::MaxSteps;
            path.diagnostic = "stopped after max_steps = " + std::to_string(ctrl_.max_steps);
            break;
        }
        const double remaining = ctrl_.max_arc_length - s;
        const double h = std::min(dl, remaining);

        Eigen::VectorXd un = u;
        const double pn = p;
        Eigen::VectorXd ut = u + h * t.du;
        double pt = p + h * t.dp;
        int iters = 0;
        double residual = 0.0;
        bool ok = correct(ut, pt, un, pn, h, iters, residual);
        ModelEvaluation evn;
        Tangent tn;
        if (ok) {
            evn = model_.evaluate(ut, true);
            try {
                tn = tangent(evn, pt, t, false);
            } catch (const SolverError&) {
                ok = false;
            }
        }
        if (ok) {
            // Orient along the secant; a step that doubled back is rejected.
            const Eigen::VectorXd sdu = ut - un;
            const double sdp = pt - pn;
            const double along = w_ * sdu.dot(t.du) + psi2_ * sdp * t.dp;
            if (along <= 0.0) ok = false;
            if (w_ * sdu.dot(tn.du) + psi2_ * sdp * tn.dp < 0.0) {
                tn.du = -tn.du;
                tn.dp = -tn.dp;
            }
        }
        if (!ok) {
            dl = 0.5 * h;
            if (dl < ctrl_.min_step) {
                path.termination = Termination::StepTooSmall;
                path.diagnostic = "corrector failed to converge at arc length " + std::to_string(s) +
                                  " down to min_step; partial path returned";
                break;
            }
            continue;
        }

        u = ut;
        p = pt;
        s += h;
        const double prev_dpds = t.dp;
        t = tn;
        path.samples.push_back(make_sample(u, p, evn, t, s, residual));

        if (std::isnan(p_crit) && prev_dpds > 0.0 && t.dp <= 0.0) {
            const std::size_t k = path.samples.size();
            p_crit = refine_extremum(path.samples[k - 2], path.samples[k - 1], ExtremumKind::Pressure).pressure;
        }
        if (!std::isnan(p_crit) && p * kKPaPerMPa >= ctrl_.termination_factor * p_crit && p_crit > 0.0) {
            path.termination = Termination::CriticalPressure;
            break;
        }
        if (evn.volume - v0 >= ctrl_.max_volume_change) {
            path.termination = Termination::MaxVolume;
            break;
        }
        if (s >= ctrl_.max_arc_length) {
            path.termination = Termination::MaxArcLength;
            break;
        }
        if (iters <= 4) {
            dl = std::min(1.5 * h, ctrl_.max_step);
        } else if (iters > 10) {
            dl = std::max(0.7 * h, ctrl_.min_step);
        } else {
            dl = h;
        }
    }
    mark_limit_samples(path);
    return path;
}

}  // namespace

void ContinuationControl::validate() const {
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0)) throw ValidationError(std::string("continuation control: ") + name + " must be positive");
    };
    pos(initial_step, "initial_step");
    pos(min_step, "min_step");
    pos(max_step, "max_step");
    pos(tolerance, "tolerance");
    pos(termination_factor, "termination_factor");
    pos(max_volume_change, "max_volume_change");
    if (min_step > max_step) throw ValidationError("continuation control: min_step exceeds max_step");
    if (max_iterations < 1) throw ValidationError("continuation control: max_iterations must be >= 1");
    if (max_steps < 0) throw ValidationError("continuation control: max_steps must be >= 0");
    if (!(max_arc_length >= 0.0)) throw ValidationError("continuation control: max_arc_length must be >= 0");
    if (!(load_scale >= 0.0) || !std::isfinite(load_scale)) {
        throw ValidationError("continuation control: load_scale must be finite and >= 0");
    }
}

std::string to_string(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Unstable: return "unstable";
        case Stability::Limit: return "limit";
    }
    return "unknown";
}

Stability stability_from_string(const std::string& s) {
    if (s == "stable") return Stability::Stable;
    if (s == "unstable") return Stability::Unstable;
    if (s == "limit") return Stability::Limit;
    throw ValidationError("unknown stability tag '" + s + "' (expected stable, unstable or limit)");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::CriticalPressure: return "critical-pressure";
        case Termination::MaxVolume: return "max-volume";
        case Termination::MaxArcLength: return "max-arc-length";
        case Termination::MaxSteps: return "max-steps";
        case Termination::StepTooSmall: return "step-too-small";
        case Termination::Ingested: return "ingested";
    }
    return "unknown";
}

EquilibriumPath trace_equilibrium_path(const MembraneModel& model, const ContinuationControl& ctrl) {
    ctrl.validate();
    return Tracer(model, ctrl).run();
}

EquilibriumPath trace_equilibrium_path(const MeridianMesh& mesh, const MaterialParams& mat,
                                       const ContinuationControl& ctrl, const ModelOptions& options) {
    const MembraneModel model(mesh, mat, options);
    return trace_equilibrium_path(model, ctrl);
}

double thermal_volume_ratio(double alpha_t, double delta_t) {
    if (!std::isfinite(alpha_t) || !std::isfinite(delta_t) || alpha_t <= 0.0) {
        throw ValidationError("thermal_volume_ratio: alpha_T must be positive and inputs finite");
    }
    return 3.0 * alpha_t * delta_t;
}

double thermal_equivalent_delta_t(double alpha_t, double volume_ratio) {
    if (!std::isfinite(alpha_t) || !std::isfinite(volume_ratio) || alpha_t <= 0.0) {
        throw ValidationError("thermal_equivalent_delta_t: alpha_T must be positive and inputs finite");
    }
    return volume_ratio / (3.0 * alpha_t);
}

VolumeControlledResult volume_controlled_inflate(const MembraneModel& model, double target_dv,
                                                 ContinuationControl ctrl, double alpha_t) {
    if (!(target_dv >= 0.0) || !std::isfinite(target_dv)) {
        throw ValidationError("volume_controlled_inflate: target_dV must be finite and >= 0");
    }
    ctrl.termination_factor = std::numeric_limits<double>::infinity();
    ctrl.max_volume_change = target_dv > 0.0 ? target_dv : std::numeric_limits<double>::min();
    if (target_dv == 0.0) ctrl.max_arc_length = 0.0;
    const EquilibriumPath path = trace_equilibrium_path(model, ctrl);
    return volume_controlled_response(path, target_dv, alpha_t);
}

}  // namespace snapgrip
