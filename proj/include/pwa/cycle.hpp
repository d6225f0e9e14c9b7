#pragma once

// Analysis of cyclic box sequences: alignment of focal points, the common
// wall-intersection point, the first return map and its differential, and
// the classification into damped oscillation vs unique stable limit cycle.
//
// The per-step map through a box with exit coordinate s toward threshold
// theta_s is
//     F_j(x) = phi_j + r(x)^{gamma_j/gamma_s} (x_j - phi_j),
//     r(x)   = (phi_s - theta_s)/(phi_s - x_s)  in (0, 1],
// and its differential, restricted to wall tangents (dx_{entry} = 0), has
//     dF_j/dx_j = r^{b_j},
//     dF_j/dx_s = b_j r^{b_j} (x_j - phi_j)/(phi_s - x_s),   b_j = gamma_j/gamma_s,
// with row s identically zero. The return-map differential is the ordered
// product; its spectral radius on the (n-1)-dimensional wall tangent space
// decides the alternative. Cross-checked against central finite differences
// in the test suite.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pwa/graph.hpp"

namespace pwa {

// ---------------------------------------------------------------------------
// Cycle sequences
// ---------------------------------------------------------------------------

/// Ordered boxes a^0..a^{l-1} forming a cycle in the box lattice, with the
/// switching coordinate, crossing sign and crossed threshold of every step.
struct CycleSequence {
    std::vector<BoxIndex> boxes;
    std::vector<int> switching;       // s_i: a^{i+1} = a^i + signs[i] e_{s_i}
    std::vector<int> signs;           // +1 / -1
    std::vector<int> thresholds;      // crossed threshold index per step

    std::size_t length() const { return boxes.size(); }

    static CycleSequence from_boxes(const Network& net, std::vector<BoxIndex> seq) {
        if (seq.size() < 2) throw StructureError("a cycle needs at least two boxes");
        CycleSequence c;
        c.boxes = std::move(seq);
        const std::size_t l = c.boxes.size();
        for (std::size_t i = 0; i < l; ++i) {
            const BoxIndex& cur = c.boxes[i];
            const BoxIndex& nxt = c.boxes[(i + 1) % l];
            if (!net.contains(cur)) throw StructureError("cycle box outside the lattice");
            int dir = -1, sign = 0;
            for (int j = 0; j < net.dim(); ++j) {
                const int d = nxt[static_cast<std::size_t>(j)] - cur[static_cast<std::size_t>(j)];
                if (d == 0) continue;
                if (dir != -1 || (d != 1 && d != -1))
                    throw StructureError("consecutive cycle boxes must differ by one lattice step");
                dir = j;
                sign = d;
            }
            if (dir == -1) throw StructureError("consecutive cycle boxes are equal");
            c.switching.push_back(dir);
            c.signs.push_back(sign);
            c.thresholds.push_back(sign > 0 ? cur[static_cast<std::size_t>(dir)] + 1 : cur[static_cast<std::size_t>(dir)]);
        }
        return c;
    }
};

struct AlignmentReport {
    bool aligned = false;
    bool all_variables_switch = false;
    // steps where consecutive focal points differ in more than one
    // coordinate, with the coordinates that differ
    std::vector<std::pair<std::size_t, std::vector<int>>> witness;
};

/// Consecutive focal points along the cycle may differ in at most one
/// coordinate. (Equal consecutive focal points occur whenever two walls of
/// the same direction are crossed in a row and are allowed.)
inline AlignmentReport check_alignment(const Network& net, const ControlLaw& law, const CycleSequence& cyc) {
    AlignmentReport rep;
    const std::size_t l = cyc.length();
    std::vector<Point> phis;
    for (const BoxIndex& a : cyc.boxes) phis.push_back(focal_point(net, a, law.at(a)));
    rep.aligned = true;
    for (std::size_t i = 0; i < l; ++i) {
        std::vector<int> diff;
        for (int j = 0; j < net.dim(); ++j)
            if (std::abs(phis[(i + 1) % l][static_cast<std::size_t>(j)] - phis[i][static_cast<std::size_t>(j)]) > kThetaTol)
                diff.push_back(j);
        if (diff.size() > 1) {
            rep.aligned = false;
            rep.witness.emplace_back(i, diff);
        }
    }
    std::set<int> sw(cyc.switching.begin(), cyc.switching.end());
    rep.all_variables_switch = static_cast<int>(sw.size()) == net.dim();
    return rep;
}

/// The single point on the intersection of all crossed walls, defined when
/// all variables switch and exactly one threshold is crossed per direction.
inline std::optional<Point> cycle_point(const Network& net, const CycleSequence& cyc) {
    std::vector<std::set<int>> crossed(static_cast<std::size_t>(net.dim()));
    for (std::size_t i = 0; i < cyc.length(); ++i)
        crossed[static_cast<std::size_t>(cyc.switching[i])].insert(cyc.thresholds[i]);
    for (int j = 0; j < net.dim(); ++j)
        if (crossed[static_cast<std::size_t>(j)].empty())
            throw StructureError("cycle_point requires every variable to switch along the cycle");
    Point p(static_cast<std::size_t>(net.dim()));
    for (int j = 0; j < net.dim(); ++j) {
        if (crossed[static_cast<std::size_t>(j)].size() > 1) return std::nullopt;
        p[static_cast<std::size_t>(j)] = net.threshold(j, *crossed[static_cast<std::size_t>(j)].begin());
    }
    return p;
}

// ---------------------------------------------------------------------------
// First return map
// ---------------------------------------------------------------------------

namespace detail {

struct CycleWalk {
    Point end;
    double time = 0.0;
    Eigen::MatrixXd jacobian;  // full n x n product (row of last exit is zero)
};

/// Walk one full loop from a point on the wall between a^0 and a^1,
/// verifying en route that the exits prescribed by the cycle win every race.
inline CycleWalk walk_cycle(const Network& net, const ControlLaw& law, const CycleSequence& cyc, const Point& start,
                            bool with_jacobian) {
    const int n = net.dim();
    const std::size_t l = cyc.length();

    // start must lie on the wall crossed by step 0 (closure of the shared face)
    const int s0 = cyc.switching[0];
    const double theta0 = net.threshold(s0, cyc.thresholds[0]);
    if (std::abs(start[static_cast<std::size_t>(s0)] - theta0) > kThetaTol)
        throw StructureError("start point is not on the cycle's initial wall");
    const BoxIndex& a1 = cyc.boxes[1 % l];
    for (int j = 0; j < n; ++j) {
        const std::size_t k = static_cast<std::size_t>(j);
        if (start[k] < net.theta_lo(a1, j) - kThetaTol || start[k] > net.theta_hi(a1, j) + kThetaTol)
            throw StructureError("start point is outside the cycle's initial wall");
    }

    CycleWalk walk;
    walk.end = start;
    walk.end[static_cast<std::size_t>(s0)] = theta0;
    if (with_jacobian) walk.jacobian = Eigen::MatrixXd::Identity(n, n);

    for (std::size_t step = 1; step <= l; ++step) {
        const BoxIndex& box = cyc.boxes[step % l];
        const int s = cyc.switching[step % l];
        const int sign = cyc.signs[step % l];
        const double theta = net.threshold(s, cyc.thresholds[step % l]);
        const double u = law.at(box);
        const Point phi = focal_point(net, box, u);
        const std::size_t ks = static_cast<std::size_t>(s);

        if ((sign > 0 && !(phi[ks] > theta)) || (sign < 0 && !(phi[ks] < theta)))
            throw DeviationError("focal point of box " + box_label(net, box) +
                                 " does not drive the prescribed crossing");
        const double denom = phi[ks] - walk.end[ks];
        if (denom == 0.0)
            throw DeviationError("singular configuration: the switching coordinate sits at its focal value in box " +
                                 box_label(net, box));
        const double r = (phi[ks] - theta) / denom;
        if (!(r > 0.0) || r > 1.0 + kTieTolRel)
            throw DeviationError("start point of a step lies beyond the prescribed wall at box " +
                                 box_label(net, box));
        const double gs = net.decay(box, s, u);
        const double tau = -std::log(std::min(r, 1.0)) / gs;

        // the prescribed exit must win against every other escaping direction
        const ExitDirections dirs = exit_directions(net, box, u);
        auto race = [&](int j, int jsign) {
            if (j == s && jsign == sign) return;
            const double th = jsign > 0 ? net.theta_hi(box, j) : net.theta_lo(box, j);
            const double tj = exit_time(net, box, walk.end, u, j, th);
            if (tj < tau - kTieTolRel * std::max(tau, 1.0))
                throw DeviationError("trajectory leaves box " + box_label(net, box) + " through direction '" +
                                     net.variables[static_cast<std::size_t>(j)].name +
                                     "' before the prescribed crossing");
            if (std::abs(tj - tau) <= kTieTolRel * std::max(tau, 1.0))
                throw TieError("exit race tie along the cycle at box " + box_label(net, box));
        };
        for (int j : dirs.up) race(j, +1);
        for (int j : dirs.down) race(j, -1);

        if (with_jacobian) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
            for (int j = 0; j < n; ++j) {
                if (j == s) continue;
                const std::size_t kj = static_cast<std::size_t>(j);
                const double b = net.decay(box, j, u) / gs;
                const double rb = std::pow(r, b);
                m(j, j) = rb;
                m(j, s) += b * rb * (walk.end[kj] - phi[kj]) / denom;
            }
            walk.jacobian = m * walk.jacobian;
        }

        Point next(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            const std::size_t kj = static_cast<std::size_t>(j);
            next[kj] = phi[kj] + std::pow(r, net.decay(box, j, u) / gs) * (walk.end[kj] - phi[kj]);
        }
        next[ks] = theta;
        walk.end = std::move(next);
        walk.time += tau;
    }
    return walk;
}

}  // namespace detail

/// First return map T: W -> W, W the wall between a^0 and a^1; the composite
/// of the cycle's local transition maps. Errors if the true trajectory from x
/// would deviate from the cycle.
inline Point return_map(const Network& net, const ControlLaw& law, const CycleSequence& cyc, const Point& x) {
    return detail::walk_cycle(net, law, cyc, x, false).end;
}

/// Loop time of the return map at x (period when x is a fixed point).
inline double return_time(const Network& net, const ControlLaw& law, const CycleSequence& cyc, const Point& x) {
    return detail::walk_cycle(net, law, cyc, x, false).time;
}

/// Differential of the return map restricted to wall coordinates: the
/// (n-1)x(n-1) matrix obtained by deleting the wall's fixed coordinate.
inline Eigen::MatrixXd return_map_jacobian(const Network& net, const ControlLaw& law, const CycleSequence& cyc,
                                           const Point& x) {
    const auto walk = detail::walk_cycle(net, law, cyc, x, true);
    const int n = net.dim();
    const int s0 = cyc.switching[0];
    Eigen::MatrixXd m(n - 1, n - 1);
    for (int r = 0, i = 0; r < n; ++r) {
        if (r == s0) continue;
        for (int c = 0, j = 0; c < n; ++c) {
            if (c == s0) continue;
            m(i, j) = walk.jacobian(r, c);
            ++j;
        }
        ++i;
    }
    return m;
}

/// Spectral radius: dense eigenvalues up to 8x8, seeded power iteration above.
inline double spectral_radius(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    if (m.rows() == 1) return std::abs(m(0, 0));
    if (m.rows() <= 8) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    }
    std::mt19937 rng(0x5eedu);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd v(m.rows());
    for (int i = 0; i < m.rows(); ++i) v(i) = unif(rng);
    v.normalize();
    double rho = 0.0;
    for (int it = 0; it < 1000; ++it) {
        Eigen::VectorXd w = m * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        rho = norm;
        v = w / norm;
    }
    return rho;
}

// ---------------------------------------------------------------------------
// Interaction graph
// ---------------------------------------------------------------------------

struct InteractionEdge {
    int from, to;  // regulator -> regulated
    Sign sign;
    int threshold;

    auto operator<=>(const InteractionEdge&) const = default;
};

struct InteractionGraph {
    std::vector<InteractionEdge> edges;
};

/// Signed regulator edges read syntactically off the production terms.
inline InteractionGraph interaction_graph(const Network& net) {
    InteractionGraph ig;
    for (int i = 0; i < net.dim(); ++i)
        for (const Term& t : net.production[static_cast<std::size_t>(i)].terms)
            for (const StepFactor& f : t.factors) {
                InteractionEdge e{f.var, i, f.sign, f.threshold};
                if (std::find(ig.edges.begin(), ig.edges.end(), e) == ig.edges.end()) ig.edges.push_back(e);
            }
    std::sort(ig.edges.begin(), ig.edges.end());
    return ig;
}

/// Single n-cycle with in/out degree one everywhere and an odd number of
/// inhibitions.
inline bool is_negative_feedback_loop(const InteractionGraph& ig, int n) {
    if (static_cast<int>(ig.edges.size()) != n) return false;
    std::vector<int> succ(static_cast<std::size_t>(n), -1);
    int inhibitions = 0;
    for (const InteractionEdge& e : ig.edges) {
        if (e.from == e.to) return false;
        if (succ[static_cast<std::size_t>(e.from)] != -1) return false;  // out-degree > 1
        succ[static_cast<std::size_t>(e.from)] = e.to;
        if (e.sign == Sign::minus) ++inhibitions;
    }
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (int s : succ) {
        if (s < 0) return false;
        ++indeg[static_cast<std::size_t>(s)];
    }
    for (int d : indeg)
        if (d != 1) return false;
    int v = 0, steps = 0;
    do {
        v = succ[static_cast<std::size_t>(v)];
        ++steps;
    } while (v != 0 && steps <= n);
    return steps == n && (inhibitions % 2 == 1);
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

enum class CycleCase {
    damped_to_intersection,             // all iterates converge to the wall-intersection point
    unique_limit_cycle,                 // spectral radius > 1, single threshold per direction
    unique_limit_cycle_multi_threshold, // two distinct thresholds crossed in some direction
    spectral_boundary,                  // |rho - 1| below resolution, both outcomes possible
    inapplicable,
};

inline const char* to_string(CycleCase c) {
    switch (c) {
        case CycleCase::damped_to_intersection: return "damped-to-intersection";
        case CycleCase::unique_limit_cycle: return "unique-limit-cycle";
        case CycleCase::unique_limit_cycle_multi_threshold: return "unique-limit-cycle-multi-threshold";
        case CycleCase::spectral_boundary: return "spectral-boundary";
        case CycleCase::inapplicable: return "inapplicable";
    }
    return "?";
}

struct CycleVerdict {
    CycleCase kind = CycleCase::inapplicable;
    bool aligned = false;
    bool all_variables_switch = false;
    bool single_threshold_per_direction = false;
    bool lambda_boundary = false;  // |lambda - 1| < kLambdaBoundaryTol, settled by loop structure
    std::optional<Point> theta_c;
    std::optional<double> lambda;
    std::optional<Point> periodic_point;
    std::optional<double> period;
    std::optional<double> residual;  // |T q - q|_inf at the located fixed point
    std::string reason;              // why inapplicable / boundary
};

inline constexpr double kLambdaBoundaryTol = 1e-9;
inline constexpr double kFixedPointStepTol = 1e-12;
inline constexpr int kFixedPointMaxIter = 100000;

/// Interior point of the cycle's initial wall (face centroid).
inline Point wall_centroid(const Network& net, const CycleSequence& cyc) {
    const std::size_t l = cyc.length();
    const BoxIndex& a1 = cyc.boxes[1 % l];
    Point p(static_cast<std::size_t>(net.dim()));
    for (int j = 0; j < net.dim(); ++j)
        p[static_cast<std::size_t>(j)] = 0.5 * (net.theta_lo(a1, j) + net.theta_hi(a1, j));
    p[static_cast<std::size_t>(cyc.switching[0])] = net.threshold(cyc.switching[0], cyc.thresholds[0]);
    return p;
}

/// Plain fixed-point iteration of the return map. Callers use this in the
/// regimes where the map has a unique attracting fixed point on the wall.
inline std::pair<Point, int> iterate_to_fixed_point(const Network& net, const ControlLaw& law,
                                                    const CycleSequence& cyc, Point x,
                                                    double step_tol = kFixedPointStepTol,
                                                    int max_iter = kFixedPointMaxIter) {
    for (int it = 1; it <= max_iter; ++it) {
        Point y = return_map(net, law, cyc, x);
        double step = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) step = std::max(step, std::abs(y[k] - x[k]));
        x = std::move(y);
        if (step < step_tol) return {x, it};
    }
    return {x, kFixedPointMaxIter};
}

/// Classify an invariant aligned cycle: spectral radius of the return-map
/// differential at the wall-intersection point when a single threshold is
/// crossed per direction, otherwise the multi-threshold limit-cycle case.
/// Preconditions that fail yield the inapplicable verdict with a reason.
inline CycleVerdict classify_cycle(const Network& net, const ControlLaw& law, const CycleSequence& cyc) {
    CycleVerdict v;

    // invariance with unique successors: each box's exits are exactly the
    // prescribed step (no escaping edge, no competing exit)
    for (std::size_t i = 0; i < cyc.length(); ++i) {
        const BoxIndex& a = cyc.boxes[i];
        ExitDirections dirs;
        try {
            dirs = exit_directions(net, a, law.at(a));
        } catch (const H2Error& e) {
            v.reason = e.what();
            return v;
        }
        const bool single = dirs.count() == 1;
        const bool matches = (cyc.signs[i] > 0) ? (dirs.up == std::vector<int>{cyc.switching[i]} && dirs.down.empty())
                                                : (dirs.down == std::vector<int>{cyc.switching[i]} && dirs.up.empty());
        if (!single || !matches) {
            v.reason = "box " + box_label(net, a) + " does not have the cycle step as its unique exit";
            return v;
        }
    }

    const AlignmentReport ar = check_alignment(net, law, cyc);
    v.aligned = ar.aligned;
    v.all_variables_switch = ar.all_variables_switch;
    if (!ar.aligned) {
        v.reason = "focal points are not aligned along the cycle";
        return v;
    }
    if (!ar.all_variables_switch) {
        v.reason = "not every variable switches along the cycle";
        return v;
    }

    const std::optional<Point> theta_c = cycle_point(net, cyc);
    v.single_threshold_per_direction = theta_c.has_value();

    auto locate_fixed_point = [&](CycleCase kind) {
        auto [q, iters] = iterate_to_fixed_point(net, law, cyc, wall_centroid(net, cyc));
        const Point tq = return_map(net, law, cyc, q);
        double res = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) res = std::max(res, std::abs(tq[k] - q[k]));
        v.kind = kind;
        v.periodic_point = q;
        v.residual = res;
        v.period = return_time(net, law, cyc, q);
        (void)iters;
    };

    if (theta_c) {
        v.theta_c = theta_c;
        const Eigen::MatrixXd dt = return_map_jacobian(net, law, cyc, *theta_c);
        const double lambda = spectral_radius(dt);
        v.lambda = lambda;
        if (std::abs(lambda - 1.0) < kLambdaBoundaryTol) {
            // numerically unresolvable alternative; for single negative
            // feedback loops the outcome is determined by the dimension
            if (is_negative_feedback_loop(interaction_graph(net), net.dim())) {
                v.lambda_boundary = true;
                if (net.dim() == 2) {
                    v.kind = CycleCase::damped_to_intersection;
                    v.reason = "spectral radius at the boundary; negative 2-loop implies damped oscillation";
                } else {
                    locate_fixed_point(CycleCase::unique_limit_cycle);
                    v.reason = "spectral radius at the boundary; negative loop in dimension >= 3";
                }
            } else {
                v.kind = CycleCase::spectral_boundary;
                v.reason = "spectral radius within " + std::to_string(kLambdaBoundaryTol) + " of 1";
            }
        } else if (lambda < 1.0) {
            v.kind = CycleCase::damped_to_intersection;
        } else {
            locate_fixed_point(CycleCase::unique_limit_cycle);
        }
    } else {
        locate_fixed_point(CycleCase::unique_limit_cycle_multi_threshold);
        v.lambda = spectral_radius(return_map_jacobian(net, law, cyc, *v.periodic_point));
    }
    return v;
}

// ---------------------------------------------------------------------------
// Parallel-wall crossing (worst-case exit races)
// ---------------------------------------------------------------------------

struct RaceEntry {
    int dir;
    int sign;
    double tau_worst;  // exit time from the opposite face
};

/// Worst-case race table: for each escaping direction, the time to cross the
/// exit wall starting from the opposite face. exp(-tau_worst) is the
/// dimensionless race constant compared by the crossing criterion.
inline std::vector<RaceEntry> exit_race(const Network& net, const ControlLaw& law, const BoxIndex& a) {
    const double u = law.at(a);
    const ExitDirections dirs = exit_directions(net, a, u);
    std::vector<RaceEntry> table;
    auto add = [&](int i, int sign) {
        const double exit = sign > 0 ? net.theta_hi(a, i) : net.theta_lo(a, i);
        const double far = sign > 0 ? net.theta_lo(a, i) : net.theta_hi(a, i);
        Point x(static_cast<std::size_t>(net.dim()), 0.0);
        x[static_cast<std::size_t>(i)] = far;
        table.push_back({i, sign, exit_time(net, a, x, u, i, exit)});
    };
    for (int i : dirs.up) add(i, +1);
    for (int i : dirs.down) add(i, -1);
    return table;
}

/// The unique direction whose opposite walls can be crossed in succession:
/// it must win the worst-case race against every other escaping direction.
/// nullopt when fewer than two directions escape or no strict winner exists.
inline std::optional<int> crossing_direction(const Network& net, const ControlLaw& law, const BoxIndex& a) {
    const std::vector<RaceEntry> table = exit_race(net, law, a);
    if (table.size() < 2) return std::nullopt;
    for (const RaceEntry& cand : table) {
        bool wins = true;
        for (const RaceEntry& other : table)
            if (other.dir != cand.dir && !(cand.tau_worst < other.tau_worst)) wins = false;
        if (wins) return cand.dir;
    }
    return std::nullopt;
}

/// True iff the controller direction wins the worst-case race at the
/// designated re-entry box of an extended network, so trajectories cross the
/// controller's wall rather than the pair of parallel walls of any other
/// direction.
inline bool check_fast_controller(const Network& net_ext, const BoxIndex& box, int dir) {
    if (!net_ext.contains(box)) throw StructureError("re-entry box outside the lattice");
    const auto winner = crossing_direction(net_ext, ControlLaw{}, box);
    return winner.has_value() && *winner == dir;
}

}  // namespace pwa
