#pragma once

// In-box dynamics of a piecewise-affine network: focal points, the exact
// exponential flow, exit times and the wall-to-wall transition map.
//
// Inside a box the system is affine with diagonal decay, so every coordinate
// relaxes independently toward the focal coordinate:
//     x_i(t) = phi_i + e^{-gamma_i t} (x_i - phi_i).

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "pwa/network.hpp"

namespace pwa {

inline void require_input(const Network& net, double u) {
    if (!(u >= 0.0) || u > net.input_bound + kThetaTol)
        throw StructureError("input u out of [0, U]");
}

/// phi_i(a, u) = kappa_i(a) / (gamma_i^1(a) u + gamma_i^0(a)).
inline Point focal_point(const Network& net, const BoxIndex& a, double u) {
    require_input(net, u);
    Point phi(static_cast<std::size_t>(net.dim()));
    for (int i = 0; i < net.dim(); ++i) {
        const double g = net.decay(a, i, u);
        if (!(g > 0.0)) throw StructureError("non-positive decay rate on box " + box_label(net, a));
        phi[static_cast<std::size_t>(i)] = net.kappa(a, i) / g;
    }
    return phi;
}

/// Closed-form flow after time t >= 0 inside box a.
inline Point flow_at(const Network& net, const BoxIndex& a, const Point& x, double t, double u) {
    if (!(t >= 0.0)) throw StructureError("flow time must be >= 0");
    const Point phi = focal_point(net, a, u);
    Point y(x.size());
    for (int i = 0; i < net.dim(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double e = std::exp(-net.decay(a, i, u) * t);
        y[k] = e * x[k] + (1.0 - e) * phi[k];  // identity at t = 0, phi in the limit
    }
    return y;
}

struct ExitDirections {
    std::vector<int> up;    // i with phi_i > theta_i^+(a), upper face interior
    std::vector<int> down;  // i with phi_i < theta_i^-(a), lower face interior

    bool none() const { return up.empty() && down.empty(); }
    std::size_t count() const { return up.size() + down.size(); }
};

/// Escaping directions of box a under input u. Walls at the range bounds
/// (theta^0 and theta^q) are caps, never escaped through. A focal coordinate
/// within kThetaTol of an interior face raises H2Error.
inline ExitDirections exit_directions(const Network& net, const BoxIndex& a, double u) {
    const Point phi = focal_point(net, a, u);
    ExitDirections out;
    for (int i = 0; i < net.dim(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const bool hi_interior = net.interior_threshold(i, a[k] + 1);
        const bool lo_interior = net.interior_threshold(i, a[k]);
        if (hi_interior && std::abs(phi[k] - net.theta_hi(a, i)) <= kThetaTol)
            throw H2Error("focal coordinate of '" + net.variables[k].name + "' lies on threshold " +
                          std::to_string(net.theta_hi(a, i)) + " at box " + box_label(net, a));
        if (lo_interior && std::abs(phi[k] - net.theta_lo(a, i)) <= kThetaTol)
            throw H2Error("focal coordinate of '" + net.variables[k].name + "' lies on threshold " +
                          std::to_string(net.theta_lo(a, i)) + " at box " + box_label(net, a));
        if (hi_interior && phi[k] > net.theta_hi(a, i)) out.up.push_back(i);
        if (lo_interior && phi[k] < net.theta_lo(a, i)) out.down.push_back(i);
    }
    return out;
}

struct ExitEvent {
    double tau = 0.0;        // exit time of the box from x
    int dir = -1;            // arg-min escaping direction
    int sign = 0;            // +1 crossed the upper face, -1 the lower
    double threshold = 0.0;  // crossed threshold value
};

/// Time in direction i until the flow from x hits the crossed threshold:
/// tau_i = (1/gamma_i) ln((phi_i - x_i)/(phi_i - theta)).
inline double exit_time(const Network& net, const BoxIndex& a, const Point& x, double u, int i, double theta) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double phi = net.kappa(a, i) / net.decay(a, i, u);
    const double ratio = (phi - x[k]) / (phi - theta);
    if (!(ratio > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log(ratio) / net.decay(a, i, u);
}

/// Exit event of box a from point x (closure of the box; points may sit on
/// incoming faces). Errors: NoExitError when the box holds its focal point,
/// BoundaryError when x already sits on an exit face, TieError when two
/// directions race within relative tolerance kTieTolRel.
inline ExitEvent exit_event(const Network& net, const BoxIndex& a, const Point& x, double u) {
    if (x.size() != static_cast<std::size_t>(net.dim())) throw StructureError("point dimension mismatch");
    for (int i = 0; i < net.dim(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (x[k] < net.theta_lo(a, i) - kThetaTol || x[k] > net.theta_hi(a, i) + kThetaTol)
            throw StructureError("point outside box " + box_label(net, a));
    }
    const ExitDirections dirs = exit_directions(net, a, u);
    if (dirs.none()) throw NoExitError("box " + box_label(net, a) + " contains its focal point");

    std::vector<ExitEvent> races;
    auto consider = [&](int i, int sign) {
        const double theta = sign > 0 ? net.theta_hi(a, i) : net.theta_lo(a, i);
        const double tau = exit_time(net, a, x, u, i, theta);
        races.push_back({tau, i, sign, theta});
    };
    for (int i : dirs.up) consider(i, +1);
    for (int i : dirs.down) consider(i, -1);

    std::sort(races.begin(), races.end(), [](const ExitEvent& l, const ExitEvent& r) { return l.tau < r.tau; });
    const ExitEvent& best = races.front();
    if (!(best.tau > 0.0))
        throw BoundaryError("point already on the exit wall of direction '" +
                            net.variables[static_cast<std::size_t>(best.dir)].name + "' at box " + box_label(net, a));
    if (races.size() > 1 && races[1].tau - best.tau <= kTieTolRel * best.tau) {
        std::ostringstream os;
        os << "exit race tie between directions '" << net.variables[static_cast<std::size_t>(best.dir)].name
           << "' and '" << net.variables[static_cast<std::size_t>(races[1].dir)].name << "' at box "
           << box_label(net, a);
        throw TieError(os.str());
    }
    return best;
}

struct TransitionResult {
    Point point;     // on the shared wall, crossed coordinate set exactly
    BoxIndex box;    // a +- e_dir
    ExitEvent event;
};

/// Wall-to-wall transition map T^a x = phi + exp(-tau(x) Gamma) (x - phi).
/// The crossed coordinate is assigned the threshold value exactly; all other
/// coordinates must land strictly inside the wall, else TieError.
inline TransitionResult transition_map(const Network& net, const BoxIndex& a, const Point& x, double u) {
    const ExitEvent ev = exit_event(net, a, x, u);
    Point y = flow_at(net, a, x, ev.tau, u);
    y[static_cast<std::size_t>(ev.dir)] = ev.threshold;
    for (int j = 0; j < net.dim(); ++j) {
        if (j == ev.dir) continue;
        const std::size_t k = static_cast<std::size_t>(j);
        if ((net.interior_threshold(j, a[k]) && std::abs(y[k] - net.theta_lo(a, j)) <= kThetaTol) ||
            (net.interior_threshold(j, a[k] + 1) && std::abs(y[k] - net.theta_hi(a, j)) <= kThetaTol))
            throw TieError("transition lands on a wall intersection at box " + box_label(net, a));
    }
    return {std::move(y), a.neighbor(ev.dir, ev.sign), ev};
}

// ---------------------------------------------------------------------------
// Validation (H1, H2, unstable walls)
// ---------------------------------------------------------------------------

struct H1Violation {
    int var;        // kappa_var or gamma_var changes across an x_var wall
    BoxIndex box;
};

struct H2Violation {
    BoxIndex box;
    int var;
    double input;
    double focal;
    int threshold;  // interior threshold index the focal coordinate sits on
};

struct UnstableWall {
    BoxIndex lower, upper;  // adjacent boxes; wall at theta_dir^{lower[dir]+1}
    int dir;
    double input;
};

struct RangeViolation {
    BoxIndex box;
    int var;
    double input;
    double focal;  // beyond the variable's range cap
};

struct ValidityReport {
    std::vector<H1Violation> h1_violations;
    std::vector<H2Violation> h2_violations;
    std::vector<UnstableWall> unstable_walls;
    std::vector<RangeViolation> out_of_range;

    bool clean() const {
        return h1_violations.empty() && h2_violations.empty() && unstable_walls.empty() && out_of_range.empty();
    }
};

/// Static checks. Structural defects throw; H1/H2/wall findings are warnings.
/// H1 is judged per wall: kappa_i or gamma_i takes different values on the two
/// boxes across an x_i-threshold. H2 is sampled at the given input values
/// (it depends on u under control). Unstable walls repel on both sides.
inline ValidityReport validate_network(const Network& net, const std::vector<double>& inputs) {
    check_structure(net);
    ValidityReport rep;
    const int n = net.dim();

    for_each_box(net, [&](const BoxIndex& a) {
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            if (a[k] + 1 >= net.boxes_along(i)) continue;
            const BoxIndex b = a.neighbor(i, +1);
            const bool differs = net.kappa(a, i) != net.kappa(b, i) ||
                                 net.decay0[k].eval(a) != net.decay0[k].eval(b) ||
                                 net.decay1[k].eval(a) != net.decay1[k].eval(b);
            if (differs) {
                rep.h1_violations.push_back({i, a});
                rep.h1_violations.push_back({i, b});
            }
        }
    });

    for (double u : inputs) {
        require_input(net, u);
        for_each_box(net, [&](const BoxIndex& a) {
            const Point phi = focal_point(net, a, u);
            for (int i = 0; i < n; ++i) {
                const std::size_t k = static_cast<std::size_t>(i);
                const Variable& v = net.variables[k];
                for (int t = 1; t < net.boxes_along(i); ++t)
                    if (std::abs(phi[k] - v.thresholds[static_cast<std::size_t>(t)]) <= kThetaTol)
                        rep.h2_violations.push_back({a, i, u, phi[k], t});
                if (phi[k] > v.thresholds.back() + kThetaTol)
                    rep.out_of_range.push_back({a, i, u, phi[k]});
            }
        });
        for_each_box(net, [&](const BoxIndex& a) {
            for (int i = 0; i < n; ++i) {
                const std::size_t k = static_cast<std::size_t>(i);
                if (a[k] + 1 >= net.boxes_along(i)) continue;
                const BoxIndex b = a.neighbor(i, +1);
                const double theta = net.theta_hi(a, i);
                const double lo = focal_point(net, a, u)[k];
                const double hi = focal_point(net, b, u)[k];
                // both sides repel: the wall cannot be reached by trajectories
                if (lo < theta - kThetaTol && hi > theta + kThetaTol) {
                    bool seen = false;
                    for (const UnstableWall& w : rep.unstable_walls)
                        if (w.lower == a && w.dir == i) seen = true;
                    if (!seen) rep.unstable_walls.push_back({a, b, i, u});
                }
            }
        });
    }
    return rep;
}

/// Default H2 sample set {0, U}.
inline ValidityReport validate_network(const Network& net) {
    std::vector<double> inputs{0.0};
    if (net.input_bound > 0.0) inputs.push_back(net.input_bound);
    return validate_network(net, inputs);
}

/// Box holding a point strictly inside; throws if any coordinate is on an
/// interior threshold (within tolerance) or outside the range.
inline BoxIndex box_of_point(const Network& net, const Point& x) {
    if (x.size() != static_cast<std::size_t>(net.dim())) throw StructureError("point dimension mismatch");
    BoxIndex a(std::vector<int>(x.size(), 0));
    for (int i = 0; i < net.dim(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const Variable& v = net.variables[k];
        if (!(x[k] > 0.0) || x[k] >= v.thresholds.back())
            throw StructureError("coordinate '" + v.name + "' outside the variable range");
        int cell = 0;
        for (int t = 1; t < net.boxes_along(i); ++t) {
            const double theta = v.thresholds[static_cast<std::size_t>(t)];
            if (std::abs(x[k] - theta) <= kThetaTol)
                throw StructureError("point lies on a threshold of '" + v.name + "'");
            if (x[k] > theta) cell = t;
        }
        a[k] = cell;
    }
    return a;
}

}  // namespace pwa
