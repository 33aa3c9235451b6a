#include "snapgrip/hydraulic_network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace snapgrip {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long kMaxWalkSteps = 200000;

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

double syringe_flow(double bore_diameter_mm, double piston_speed_mm_s) {
    if (!(bore_diameter_mm > 0.0) || !(piston_speed_mm_s >= 0.0)) {
        throw ValidationError("syringe_flow: bore must be positive and speed non-negative");
    }
    const double r = 0.5 * bore_diameter_mm;
    return std::numbers::pi * r * r * piston_speed_mm_s;
}

std::string to_string(NodeMode m) {
    switch (m) {
        case NodeMode::Follower: return "follower";
        case NodeMode::Leader: return "leader";
        case NodeMode::Held: return "held";
    }
    return "unknown";
}

// One stretch of the network equilibrium curve over which the liquid
// function F (free volume plus stored volume) is linear in the parameter.
struct HydraulicNetwork::SubPiece {
    bool leader_mode = false;
    double a = 0.0;  // pressure (follower mode) or leader position
    double b = 0.0;
    double fa = 0.0;
    double fb = 0.0;
    bool stable = true;
    bool conflict = false;  // a follower leaves its branch while the leader moves
};

HydraulicNetwork HydraulicNetwork::assemble(std::vector<NodeSpec> nodes, double total_volume, double compliance) {
    if (nodes.empty()) throw ValidationError("network needs at least one chamber");
    if (!std::isfinite(total_volume) || total_volume <= 0.0) {
        throw ValidationError("network total volume must be positive");
    }
    if (!std::isfinite(compliance) || compliance < 0.0) {
        throw ValidationError("network compliance must be finite and >= 0 (mm^3/kPa)");
    }
    HydraulicNetwork net;
    net.total_ = total_volume;
    net.compliance_ = compliance;
    for (auto& spec : nodes) {
        spec.characteristic.validate();
        Node n;
        n.c = std::move(spec.characteristic);
        n.regions = n.c.regions();
        n.piece_region.resize(n.c.points() - 1);
        for (std::size_t r = 0; r < n.regions.size(); ++r) {
            for (int k = n.regions[r].first_piece; k <= n.regions[r].last_piece; ++k) {
                n.piece_region[k] = static_cast<int>(r);
            }
        }
        const auto& first = n.regions.front();
        if (first.kind == PieceClass::Follower) {
            n.extension_slope = (n.c.volume[1] - n.c.volume[0]) / (n.c.pressure[1] - n.c.pressure[0]);
        }
        NodeState st;
        st.name = spec.name.empty() ? "node" + std::to_string(net.nodes_.size()) : spec.name;
        st.region = -1;
        for (std::size_t r = 0; r < n.regions.size(); ++r) {
            if (n.regions[r].branch == spec.branch) st.region = static_cast<int>(r);
        }
        if (st.region < 0) {
            throw ValidationError("chamber '" + st.name + "': no pressure-stable branch " +
                                  std::to_string(spec.branch));
        }
        st.branch = spec.branch;
        net.nodes_.push_back(std::move(n));
        net.state_.push_back(std::move(st));
    }
    for (std::size_t i = 0; i < net.state_.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (net.state_[i].name == net.state_[j].name) {
                throw ValidationError("duplicate chamber name '" + net.state_[i].name + "'");
            }
        }
    }

    double lo = -kInf, hi = kInf;
    for (std::size_t i = 0; i < net.nodes_.size(); ++i) {
        lo = std::max(lo, net.region_lo(i, net.state_[i].region));
        hi = std::min(hi, net.region_hi(i, net.state_[i].region));
    }
    if (!(lo <= hi)) throw ValidationError("chamber branches share no common pressure");
    net.set_pressure(std::clamp(0.0, lo, hi));
    try {
        net.advance(total_volume, true);
    } catch (const SolverError& e) {
        throw ValidationError(std::string("infeasible initial volume: ") + e.what());
    }
    return net;
}

double HydraulicNetwork::total_volume_at_pressure(const std::vector<NodeSpec>& nodes, double pressure,
                                                  double compliance) {
    if (!std::isfinite(pressure)) throw ValidationError("pressure must be finite");
    double v = compliance * pressure;
    for (const auto& spec : nodes) {
        const auto& c = spec.characteristic;
        c.validate();
        const auto regions = c.regions();
        const PieceRegion* reg = nullptr;
        for (const auto& r : regions) {
            if (r.branch == spec.branch) reg = &r;
        }
        if (!reg) throw ValidationError("chamber '" + spec.name + "': no branch " + std::to_string(spec.branch));
        const int a = reg->first_point(), b = reg->last_point();
        if (pressure > c.pressure[b] || (reg->first_piece > 0 && pressure < c.pressure[a])) {
            throw ValidationError("chamber '" + spec.name + "': pressure outside branch " +
                                  std::to_string(spec.branch));
        }
        if (pressure < c.pressure[a]) {
            v += c.volume[0] + (pressure - c.pressure[0]) * (c.volume[1] - c.volume[0]) / (c.pressure[1] - c.pressure[0]);
            continue;
        }
        int k = a;
        while (k + 1 < b && c.pressure[k + 1] < pressure) ++k;
        const double dp = c.pressure[k + 1] - c.pressure[k];
        const double t = dp > 0.0 ? (pressure - c.pressure[k]) / dp : 0.0;
        v += c.volume[k] + t * (c.volume[k + 1] - c.volume[k]);
    }
    return v;
}

std::size_t HydraulicNetwork::find(const std::string& name) const {
    for (std::size_t i = 0; i < state_.size(); ++i) {
        if (state_[i].name == name) return i;
    }
    throw ValidationError("no chamber named '" + name + "'");
}

double HydraulicNetwork::balance_error() const {
    double sum = stored_volume();
    for (const auto& s : state_) sum += s.volume;
    return (sum - total_) / total_;
}

double HydraulicNetwork::node_pressure(std::size_t i) const {
    const auto& n = nodes_.at(i);
    const double s = state_.at(i).position;
    if (s < 0.0) return n.c.pressure[0] + s * (n.c.pressure[1] - n.c.pressure[0]);
    const int k = std::min(static_cast<int>(s), static_cast<int>(n.c.points()) - 2);
    const double t = s - k;
    return n.c.pressure[k] + t * (n.c.pressure[k + 1] - n.c.pressure[k]);
}

double HydraulicNetwork::region_lo(std::size_t i, int region) const {
    const auto& r = nodes_[i].regions[region];
    if (r.first_piece == 0 && nodes_[i].extension_slope > 0.0) return -kInf;
    return nodes_[i].c.pressure[r.first_point()];
}

double HydraulicNetwork::region_hi(std::size_t i, int region) const {
    return nodes_[i].c.pressure[nodes_[i].regions[region].last_point()];
}

double HydraulicNetwork::follower_volume(std::size_t i, double p, double* position, int* region) const {
    const auto& n = nodes_[i];
    const int r = state_[i].region;
    if (region) *region = r;
    const auto& reg = n.regions[r];
    const auto& cp = n.c.pressure;
    const auto& cv = n.c.volume;
    const int a = reg.first_point(), b = reg.last_point();
    // Breakpoints reached through the leader's interpolation may miss by an ulp.
    const double slack = 1e-12 * std::max(1.0, std::abs(p));
    if (p < cp[a] && p >= cp[a] - slack) p = cp[a];
    if (p > cp[b] && p <= cp[b] + slack) p = cp[b];
    if (p < cp[a]) {
        if (reg.first_piece != 0 || !(n.extension_slope > 0.0)) {
            throw CoverageError("chamber '" + state_[i].name + "' driven below its branch");
        }
        if (position) *position = (p - cp[0]) / (cp[1] - cp[0]);
        return cv[0] + (p - cp[0]) * n.extension_slope;
    }
    if (p > cp[b]) throw CoverageError("chamber '" + state_[i].name + "' driven above its branch");
    // First piece whose upper pressure reaches p.
    auto it = std::lower_bound(cp.begin() + a + 1, cp.begin() + b + 1, p);
    const int k = static_cast<int>(it - cp.begin()) - 1;
    const double dp = cp[k + 1] - cp[k];
    const double t = dp > 0.0 ? (p - cp[k]) / dp : 0.0;
    if (position) *position = k + t;
    return cv[k] + t * (cv[k + 1] - cv[k]);
}

void HydraulicNetwork::set_pressure(double p) {
    pressure_ = p;
    for (std::size_t i = 0; i < state_.size(); ++i) {
        auto& s = state_[i];
        if (s.mode != NodeMode::Follower) continue;
        s.volume = follower_volume(i, p, &s.position);
    }
}

void HydraulicNetwork::set_leader_position(double sigma) {
    const auto& c = nodes_[leader_].c;
    const int k = std::min(static_cast<int>(sigma), static_cast<int>(c.points()) - 2);
    const double t = sigma - k;
    auto& s = state_[leader_];
    s.position = sigma;
    s.volume = c.volume[k] + t * (c.volume[k + 1] - c.volume[k]);
    const double p = c.pressure[k] + t * (c.pressure[k + 1] - c.pressure[k]);
    const int piece = direction_ > 0 ? k : std::max(0, static_cast<int>(std::ceil(sigma)) - 1);
    s.region = nodes_[leader_].piece_region[piece];
    set_pressure(p);
}

double HydraulicNetwork::target() const {
    double held = 0.0;
    for (const auto& s : state_) {
        if (s.mode == NodeMode::Held) held += s.volume;
    }
    return total_ - held;
}

double HydraulicNetwork::free_sum() const {
    double f = compliance_ * pressure_;
    for (const auto& s : state_) {
        if (s.mode != NodeMode::Held) f += s.volume;
    }
    return f;
}

int HydraulicNetwork::node_region(std::size_t i) const {
    const auto& s = state_[i];
    if (s.mode == NodeMode::Held) return -1;
    if (s.mode == NodeMode::Follower) return s.region;
    // A leader parked on the end of a Follower region still belongs to it.
    const auto& n = nodes_[i];
    const double sigma = s.position;
    if (sigma == std::floor(sigma)) {
        const int k = static_cast<int>(sigma);
        const int behind = direction_ > 0 ? k - 1 : k;
        if (behind >= 0 && behind < static_cast<int>(n.piece_region.size())) {
            const int r = n.piece_region[behind];
            if (n.regions[r].kind == PieceClass::Follower) return r;
        }
    }
    return s.region;
}

HydraulicNetwork::Snapshot HydraulicNetwork::snapshot() const {
    Snapshot snap;
    for (std::size_t i = 0; i < state_.size(); ++i) {
        snap.regions.push_back(node_region(i));
        snap.volumes.push_back(state_[i].volume);
    }
    snap.pressure = pressure_;
    snap.total = free_sum() + (total_ - target());
    snap.leader = leader_;
    return snap;
}

// Turns the first follower sitting on the end of its branch (in the walking
// direction) into the leader.
bool HydraulicNetwork::promote_at_bound(int dir, bool allow) {
    for (std::size_t i = 0; i < state_.size(); ++i) {
        auto& s = state_[i];
        if (s.mode != NodeMode::Follower) continue;
        const auto& n = nodes_[i];
        const auto& reg = n.regions[s.region];
        int sigma = -1;
        if (dir > 0 && pressure_ >= n.c.pressure[reg.last_point()]) {
            if (reg.last_point() == static_cast<int>(n.c.points()) - 1) {
                throw CoverageError("chamber '" + s.name + "' reached the end of its characteristic");
            }
            sigma = reg.last_point();
        } else if (dir < 0 && std::isfinite(region_lo(i, s.region)) && pressure_ <= n.c.pressure[reg.first_point()]) {
            if (reg.first_point() == 0) {
                throw CoverageError("chamber '" + s.name + "' reached the start of its characteristic");
            }
            sigma = reg.first_point();
        }
        if (sigma < 0) continue;
        if (!allow) throw SolverError("chamber '" + s.name + "' leaves its branch");
        leader_ = static_cast<int>(i);
        direction_ = dir;
        s.mode = NodeMode::Leader;
        s.branch = -1;
        set_leader_position(sigma);
        return true;
    }
    return false;
}

// A leader that reaches a Follower piece rejoins the common-pressure group.
bool HydraulicNetwork::demote_leader() {
    if (leader_ < 0) return false;
    auto& s = state_[leader_];
    const auto& n = nodes_[leader_];
    const double sigma = s.position;
    if (sigma != std::floor(sigma)) return false;
    const int k = static_cast<int>(sigma);
    const int ahead = direction_ > 0 ? k : k - 1;
    if (ahead < 0 || ahead >= static_cast<int>(n.piece_region.size())) {
        throw CoverageError("chamber '" + s.name + "' ran off its characteristic");
    }
    const int r = n.piece_region[ahead];
    if (n.regions[r].kind != PieceClass::Follower) return false;
    s.mode = NodeMode::Follower;
    s.region = r;
    s.branch = n.regions[r].branch;
    leader_ = -1;
    // Forward entry climbs the branch from its foot, backward entry descends it.
    set_pressure(n.c.pressure[k]);
    return true;
}

HydraulicNetwork::SubPiece HydraulicNetwork::next_subpiece(int dir, int sign_e, double f_goal) const {
    SubPiece sp;
    sp.fa = free_sum();
    const double e = target();
    if (leader_ < 0) {
        sp.leader_mode = false;
        sp.a = pressure_;
        double next = dir > 0 ? kInf : -kInf;
        double slope = compliance_;
        bool any_free = false;
        for (std::size_t i = 0; i < state_.size(); ++i) {
            const auto& s = state_[i];
            if (s.mode != NodeMode::Follower) continue;
            any_free = true;
            const auto& n = nodes_[i];
            const auto& reg = n.regions[s.region];
            const auto& cp = n.c.pressure;
            if (dir > 0) {
                for (int k = reg.first_point(); k <= reg.last_point(); ++k) {
                    if (cp[k] > pressure_) {
                        next = std::min(next, cp[k]);
                        break;
                    }
                }
            } else {
                bool found = false;
                for (int k = reg.last_point(); k >= reg.first_point(); --k) {
                    if (cp[k] < pressure_) {
                        next = std::max(next, cp[k]);
                        found = true;
                        break;
                    }
                }
                if (!found) slope += n.extension_slope;
            }
        }
        if (!any_free && compliance_ <= 0.0) throw SolverError("no free chamber or compliance takes up the liquid");
        if (!std::isfinite(next)) {
            // Only linear extensions (or the compliance) remain ahead.
            if (!(slope > 0.0)) throw CoverageError("liquid balance has no solution below the characteristics");
            const double need = std::max({1.0, std::abs(e - sp.fa), std::abs(f_goal - sp.fa)}) / slope;
            next = pressure_ + dir * 2.0 * need;
        }
        sp.b = next;
        // Evaluate F at the far end without mutating the state.
        double f = compliance_ * next;
        for (std::size_t i = 0; i < state_.size(); ++i) {
            const auto& s = state_[i];
            if (s.mode == NodeMode::Follower) f += follower_volume(i, next);
        }
        sp.fb = f;
        sp.stable = (sp.fb - sp.fa) * sign_e >= 0.0;
        return sp;
    }

    sp.leader_mode = true;
    const auto& ln = nodes_[leader_];
    const auto& c = ln.c;
    const double sigma = state_[leader_].position;
    const int last = static_cast<int>(c.points()) - 1;
    double end = dir > 0 ? std::floor(sigma) + 1.0 : std::ceil(sigma) - 1.0;
    if (end > last || end < 0.0) throw CoverageError("chamber '" + state_[leader_].name + "' ran off its characteristic");
    const int piece = dir > 0 ? static_cast<int>(std::floor(sigma)) : static_cast<int>(end);
    const double p0 = c.pressure[piece], p1 = c.pressure[piece + 1];
    auto p_at = [&](double s) { return p0 + (s - piece) * (p1 - p0); };
    const double pa = p_at(sigma);
    double pb = p_at(end);
    // Follower breakpoints cut the leader piece where F changes slope.
    for (std::size_t i = 0; i < state_.size(); ++i) {
        const auto& s = state_[i];
        if (s.mode != NodeMode::Follower) continue;
        const auto& n = nodes_[i];
        const auto& reg = n.regions[s.region];
        const double lo = region_lo(i, s.region), hi = region_hi(i, s.region);
        if ((pb > pa && pa >= hi) || (pb < pa && pa <= lo)) {
            sp.conflict = true;
            sp.a = sigma;
            sp.b = sigma;
            sp.fb = sp.fa;
            sp.stable = false;
            return sp;
        }
        for (int k = reg.first_point(); k <= reg.last_point(); ++k) {
            const double q = n.c.pressure[k];
            if ((q - pa) * (pb - q) > 0.0) {
                const double at = piece + (q - p0) / (p1 - p0);
                if ((at - sigma) * dir > 0.0) {
                    end = at;
                    pb = q;
                }
            }
        }
    }
    sp.a = sigma;
    sp.b = end;
    const double vb = c.volume[piece] + (end - piece) * (c.volume[piece + 1] - c.volume[piece]);
    double f = compliance_ * pb + vb;
    for (std::size_t i = 0; i < state_.size(); ++i) {
        const auto& s = state_[i];
        if (s.mode == NodeMode::Follower) f += follower_volume(i, pb);
    }
    sp.fb = f;
    const PieceClass kind = c.piece_class(piece);
    sp.stable = kind == PieceClass::Leader && (sp.fb - sp.fa) * sign_e > 0.0 && (pb - pa) * sign_e <= 0.0;
    return sp;
}

void HydraulicNetwork::apply_subpiece(const SubPiece& sp, double t) {
    const double x = t >= 1.0 ? sp.b : sp.a + t * (sp.b - sp.a);
    if (sp.leader_mode) {
        set_leader_position(x);
    } else {
        set_pressure(x);
    }
}

// Puts every free chamber on a pressure-stable branch with the leader moved
// to its next branch along dir (and any chamber pushed past the end of its
// branch moved on as well), at the common pressure where F equals f_goal.
bool HydraulicNetwork::direct_landing(int dir, double f_goal) {
    const std::vector<NodeState> saved = state_;
    const int saved_leader = leader_;
    const double saved_pressure = pressure_;
    auto fail = [&]() {
        state_ = saved;
        leader_ = saved_leader;
        pressure_ = saved_pressure;
        return false;
    };
    auto next_branch = [&](std::size_t i, int from_piece) {
        const auto& n = nodes_[i];
        const int pieces = static_cast<int>(n.piece_region.size());
        for (int k = from_piece; k >= 0 && k < pieces; k += dir) {
            const int r = n.piece_region[k];
            if (n.regions[r].kind == PieceClass::Follower) return r;
        }
        return -1;
    };
    auto move_on = [&](std::size_t i, int r) {
        auto& st = state_[i];
        st.mode = NodeMode::Follower;
        st.region = r;
        st.branch = nodes_[i].regions[r].branch;
    };
    if (leader_ >= 0) {
        const double sigma = state_[leader_].position;
        const int piece = dir > 0 ? static_cast<int>(std::floor(sigma)) : static_cast<int>(std::ceil(sigma)) - 1;
        const int r = next_branch(leader_, piece);
        if (r < 0) return fail();
        move_on(leader_, r);
        leader_ = -1;
    }
    auto free_f = [&](double p) {
        double f = compliance_ * p;
        for (std::size_t i = 0; i < state_.size(); ++i) {
            if (state_[i].mode == NodeMode::Follower) f += follower_volume(i, p);
        }
        return f;
    };
    for (std::size_t round = 0; round <= state_.size(); ++round) {
        double lo = -kInf, hi = kInf;
        for (std::size_t i = 0; i < state_.size(); ++i) {
            if (state_[i].mode != NodeMode::Follower) continue;
            lo = std::max(lo, region_lo(i, state_[i].region));
            hi = std::min(hi, region_hi(i, state_[i].region));
        }
        // Chambers whose branch ends first (in the walking direction) fold too.
        const double edge = dir > 0 ? hi : lo;
        const bool short_range = !(lo <= hi);
        const bool overshoot = !short_range && std::isfinite(edge) && (f_goal - free_f(edge)) * dir > 0.0;
        if (short_range || overshoot) {
            bool moved = false;
            for (std::size_t i = 0; i < state_.size(); ++i) {
                if (state_[i].mode != NodeMode::Follower) continue;
                const auto& reg = nodes_[i].regions[state_[i].region];
                const double own = dir > 0 ? region_hi(i, state_[i].region) : region_lo(i, state_[i].region);
                const bool ends = short_range ? (dir > 0 ? own < lo : own > hi) : own == edge;
                if (!ends) continue;
                const int r = next_branch(i, dir > 0 ? reg.last_piece + 1 : reg.first_piece - 1);
                if (r < 0) return fail();
                move_on(i, r);
                moved = true;
            }
            if (!moved) return fail();
            continue;
        }
        const double other = dir > 0 ? lo : hi;
        if (std::isfinite(other) && (free_f(other) - f_goal) * dir > 0.0) return fail();
        // F is continuous and increasing in p on pressure-stable branches.
        double a = std::isfinite(lo) ? lo : std::min(hi, saved_pressure) - 1.0;
        double b = hi;
        while (free_f(a) > f_goal) a -= 2.0 * (b - a);
        for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
            const double m = 0.5 * (a + b);
            (free_f(m) < f_goal ? a : b) = m;
        }
        set_pressure(0.5 * (a + b));
        return true;
    }
    return fail();
}

std::vector<SnapEvent> HydraulicNetwork::advance(double target_total, bool assembling) {
    total_ = target_total;
    const double e = target();
    std::vector<SnapEvent> events;
    if (solved_ && e == solved_target_) return events;

    const int sign_e = sign(e - free_sum());
    if (sign_e == 0) {
        solved_ = true;
        solved_target_ = e;
        return events;
    }

    int dir = sign_e;
    if (leader_ >= 0) {
        // Walk the way along which F approaches the target stably.
        auto stable_towards = [&](int d) {
            direction_ = d;
            try {
                return next_subpiece(d, sign_e).stable;
            } catch (const CoverageError&) {
                return false;
            }
        };
        dir = stable_towards(1) ? 1 : (stable_towards(-1) ? -1 : 1);
        direction_ = dir;
    }

    bool in_snap = false;
    Snapshot fold;
    double f_fold = 0.0;
    auto land = [&]() {
        in_snap = false;
        const Snapshot after = snapshot();
        for (std::size_t i = 0; i < state_.size(); ++i) {
            if (fold.regions[i] == after.regions[i]) continue;
            SnapEvent ev;
            ev.node = i;
            ev.name = state_[i].name;
            ev.p_before = fold.pressure;
            ev.p_after = pressure_;
            ev.v_before = fold.volumes[i];
            ev.v_after = state_[i].volume;
            ev.total_before = fold.total;
            ev.total_after = after.total;
            ev.region_before = fold.regions[i];
            ev.region_after = after.regions[i];
            events.push_back(ev);
        }
    };
    for (long iter = 0;; ++iter) {
        if (iter > kMaxWalkSteps) {
            throw SolverError("snap cascade did not settle (cycling between branches)");
        }
        if (leader_ < 0) {
            if (promote_at_bound(dir, !assembling)) continue;
        } else if (demote_leader()) {
            continue;
        }
        if (leader_ >= 0) direction_ = dir;
        const SubPiece sp = next_subpiece(dir, sign_e, in_snap ? f_fold : e);
        if (sp.conflict) {
            // A second chamber folds while the leader is still moving: the
            // walk cannot follow two leaders, so land directly.
            if (assembling) throw SolverError("initial state is not a stable equilibrium");
            if (!in_snap) {
                fold = snapshot();
                f_fold = sp.fa;
            }
            if (!direct_landing(dir, f_fold)) {
                throw SolverError("chambers '" + state_[leader_].name + "' and another chamber fold simultaneously");
            }
            land();
            continue;
        }
        if (!in_snap) {
            if (!sp.stable) {
                if (assembling) throw SolverError("initial state is not a stable equilibrium");
                in_snap = true;
                fold = snapshot();
                f_fold = sp.fa;
                continue;
            }
            if ((e - sp.fb) * sign_e <= 0.0) {
                const double t = sp.fb == sp.fa ? 1.0 : (e - sp.fa) / (sp.fb - sp.fa);
                apply_subpiece(sp, std::clamp(t, 0.0, 1.0));
                break;
            }
            apply_subpiece(sp, 1.0);
            continue;
        }
        if (sp.stable && (sp.fa - f_fold) * sign_e <= 0.0 && (sp.fb - f_fold) * sign_e >= 0.0) {
            const double t = sp.fb == sp.fa ? 1.0 : (f_fold - sp.fa) / (sp.fb - sp.fa);
            apply_subpiece(sp, std::clamp(t, 0.0, 1.0));
            land();
            continue;
        }
        apply_subpiece(sp, 1.0);
    }
    solved_ = true;
    solved_target_ = e;
    return events;
}

std::vector<SnapEvent> HydraulicNetwork::apply_contact_displacement(std::size_t node, double dv) {
    if (node >= state_.size()) throw ValidationError("apply_contact_displacement: no chamber " + std::to_string(node));
    if (!std::isfinite(dv)) throw ValidationError("apply_contact_displacement: displaced volume must be finite");
    ++step_;
    if (dv == 0.0) return {};
    const HydraulicNetwork backup = *this;
    auto& s = state_[node];
    auto& n = nodes_[node];
    double d = s.displaced + dv;
    if (d < 0.0) {
        if (d < -1e-9 * std::max(1.0, n.engaged_volume)) {
            throw ValidationError("apply_contact_displacement: release exceeds the displaced volume");
        }
        d = 0.0;
    }
    if (s.mode != NodeMode::Held && static_cast<int>(node) == leader_) {
        throw SolverError("chamber '" + s.name + "' is mid-snap and cannot be engaged");
    }
    const double engaged = s.mode == NodeMode::Held ? n.engaged_volume : s.volume;
    const double v_min = *std::min_element(n.c.volume.begin(), n.c.volume.end());
    if (engaged - d < v_min) {
        throw ValidationError("apply_contact_displacement: chamber '" + s.name + "' pushed beyond its stroke (" +
                              std::to_string(engaged - v_min) + " mm^3)");
    }
    std::vector<SnapEvent> events;
    try {
        if (s.mode != NodeMode::Held) {
            n.engaged_volume = s.volume;
            n.engaged_region = s.region;
            n.engaged_position = s.position;
            s.mode = NodeMode::Held;
        }
        s.displaced = d;
        s.volume = n.engaged_volume - d;
        if (d == 0.0) {
            // Released: the chamber follows the circuit pressure again.
            s.mode = NodeMode::Follower;
            s.region = n.engaged_region;
            s.branch = n.regions[s.region].branch;
            s.volume = follower_volume(node, pressure_, &s.position);
        }
        solved_ = false;
        events = advance(total_);
    } catch (...) {
        *this = backup;
        throw;
    }
    for (auto& ev : events) {
        ev.step = step_;
        ev.time = time_;
    }
    log_.insert(log_.end(), events.begin(), events.end());
    return events;
}

std::vector<SnapEvent> HydraulicNetwork::set_total_volume(double total) {
    if (!std::isfinite(total) || total <= 0.0) throw ValidationError("total volume must be positive");
    ++step_;
    const HydraulicNetwork backup = *this;
    std::vector<SnapEvent> events;
    try {
        events = advance(total);
    } catch (...) {
        *this = backup;
        throw;
    }
    for (auto& ev : events) {
        ev.step = step_;
        ev.time = time_;
    }
    log_.insert(log_.end(), events.begin(), events.end());
    return events;
}

InjectionTrace HydraulicNetwork::inject(double flow, double duration, double dt) {
    if (!std::isfinite(flow) || flow < 0.0) throw ValidationError("inject: flow must be >= 0");
    if (!std::isfinite(duration) || duration < 0.0) throw ValidationError("inject: duration must be >= 0");
    if (!std::isfinite(dt) || dt <= 0.0) throw ValidationError("inject: time step must be positive");
    InjectionTrace trace;
    auto record = [&](bool event) {
        TraceSample smp;
        smp.time = time_;
        smp.total_volume = total_;
        smp.pressure = pressure_;
        for (const auto& s : state_) smp.volumes.push_back(s.volume);
        smp.event = event;
        trace.samples.push_back(std::move(smp));
    };
    record(false);
    const double t0 = time_;
    const double v0 = total_;
    const long steps = static_cast<long>(std::ceil(duration / dt - 1e-9));
    for (long k = 1; k <= steps; ++k) {
        const double elapsed = std::min(duration, static_cast<double>(k) * dt);
        const double saved_time = time_;
        time_ = t0 + elapsed;
        std::vector<SnapEvent> events;
        try {
            events = set_total_volume(v0 + flow * elapsed);
        } catch (const CoverageError& e) {
            time_ = saved_time;
            trace.truncated = true;
            trace.diagnostic = e.what();
            break;
        }
        trace.events.insert(trace.events.end(), events.begin(), events.end());
        record(!events.empty());
    }
    return trace;
}

}  // namespace snapgrip
