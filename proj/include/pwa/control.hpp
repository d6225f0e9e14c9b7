#pragma once

// Qualitative control synthesis: per-box admissible input intervals that make
// a prescribed transition graph appear in closed loop, and the mechanical
// construction of a dynamic-feedback controller variable.
//
// For each box the target's out-edges confine the focal point coordinatewise:
//     up-edge    phi_i > theta_i^+(a)
//     down-edge  phi_i < theta_i^-(a)
//     no edge    theta_i^-(a) < phi_i < theta_i^+(a)
// (bounds at the range caps are vacuous). Each bound inverts to a bound on u,
//     (kappa_i(a) - gamma_i^0(a) theta) / (gamma_i^1(a) theta),
// oriented by the sign of gamma_i^1(a); the admissible set per box is the
// intersection of these one-sided intervals with [0, U].

#include <optional>
#include <set>
#include <vector>

#include "pwa/graph.hpp"

namespace pwa {

// Open intervals thinner than this are treated as infeasible; a synthesized
// law must stay clear of H2 coincidences.
inline constexpr double kFeasibilityMargin = 1e-9;

struct TargetGraph {
    std::vector<Edge> edges;  // sorted, unit lattice steps

    static TargetGraph from_edges(const Network& net, std::vector<Edge> edges) {
        for (Edge& e : edges) {
            if (!net.contains(e.from) || !net.contains(e.to))
                throw StructureError("target edge endpoint outside the lattice");
            int dir = -1, sign = 0;
            for (int j = 0; j < net.dim(); ++j) {
                const int d = e.to[static_cast<std::size_t>(j)] - e.from[static_cast<std::size_t>(j)];
                if (d == 0) continue;
                if (dir != -1 || (d != 1 && d != -1))
                    throw StructureError("target edges must be unit lattice steps");
                dir = j;
                sign = d;
            }
            if (dir == -1) throw StructureError("target contains a self-loop");
            e.dir = dir;
            e.sign = sign;
        }
        std::sort(edges.begin(), edges.end());
        TargetGraph t;
        t.edges = std::move(edges);
        return t;
    }

    static TargetGraph from_graph(const TransitionGraph& tg) {
        TargetGraph t;
        t.edges = tg.edges;
        return t;
    }

    std::vector<Edge> out_edges(const BoxIndex& a) const {
        std::vector<Edge> out;
        for (const Edge& e : edges)
            if (e.from == a) out.push_back(e);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Focal regions and input intervals
// ---------------------------------------------------------------------------

/// Per-direction confinement of the focal coordinate, as threshold indices;
/// absent bounds are range caps (vacuous).
struct FocalBound {
    int dir = 0;
    std::optional<int> lo;  // phi_dir > theta_dir^lo
    std::optional<int> hi;  // phi_dir < theta_dir^hi
};

/// Contradiction in a target: both (a, a+e_i) and (a, a-e_i) demanded.
struct ContradictionError : StructureError {
    using StructureError::StructureError;
};

inline std::vector<FocalBound> focal_region_for_box(const Network& net, const BoxIndex& a,
                                                    const std::vector<Edge>& out_edges) {
    std::vector<FocalBound> bounds;
    for (int i = 0; i < net.dim(); ++i) {
        bool up = false, down = false;
        for (const Edge& e : out_edges) {
            if (e.from != a) throw StructureError("edge does not start at the given box");
            if (e.dir != i) continue;
            (e.sign > 0 ? up : down) = true;
        }
        if (up && down)
            throw ContradictionError("target demands both walls of direction '" +
                                     net.variables[static_cast<std::size_t>(i)].name + "' crossed at box " +
                                     box_label(net, a));
        FocalBound b{i, std::nullopt, std::nullopt};
        const std::size_t k = static_cast<std::size_t>(i);
        if (up) {
            b.lo = a[k] + 1;  // beyond the upper face (interior by lattice bounds)
        } else if (down) {
            b.hi = a[k];
        } else {
            if (net.interior_threshold(i, a[k])) b.lo = a[k];
            if (net.interior_threshold(i, a[k] + 1)) b.hi = a[k] + 1;
        }
        bounds.push_back(b);
    }
    return bounds;
}

/// One u-bound derived from a focal confinement, with its provenance.
struct UTerm {
    int dir = 0;
    int threshold = 0;       // theta index the bound comes from
    bool lower = false;      // bound type on u (lower vs upper)
    double value = 0.0;
    bool u_independent = false;  // gamma^1 = 0: constraint holds or fails for all u
    bool violated = false;       // only with u_independent
};

struct Certificate {
    BoxIndex box;
    std::string reason;
    std::vector<UTerm> conflict;  // the pair (or single term) that empties the interval
};

struct UInterval {
    double lo = 0.0, hi = 0.0;  // open interval, already intersected with [0, U]
    std::vector<UTerm> terms;
    std::optional<Certificate> certificate;

    bool feasible() const { return !certificate.has_value() && hi - lo > kFeasibilityMargin; }
    double midpoint() const { return 0.5 * (lo + hi); }
};

/// Intersect the per-direction u-bounds with [0, U]. An empty result is a
/// value carrying a certificate, not an error.
inline UInterval u_interval(const Network& net, const BoxIndex& a, const std::vector<FocalBound>& bounds) {
    UInterval iv;
    iv.lo = 0.0;
    iv.hi = net.input_bound;
    std::optional<UTerm> best_lo, best_hi;

    auto apply = [&](int i, int theta_index, bool focal_upper_bound) {
        const double theta = net.threshold(i, theta_index);
        const double kap = net.kappa(a, i);
        const double g0 = net.decay0[static_cast<std::size_t>(i)].eval(a);
        const double g1 = net.decay1[static_cast<std::size_t>(i)].eval(a);
        UTerm term{i, theta_index, false, 0.0, false, false};
        if (g1 == 0.0) {
            const double phi = kap / g0;
            term.u_independent = true;
            term.violated = focal_upper_bound ? !(phi < theta) : !(phi > theta);
            iv.terms.push_back(term);
            if (term.violated && !iv.certificate)
                iv.certificate = Certificate{a,
                                             "focal coordinate of '" + net.variables[static_cast<std::size_t>(i)].name +
                                                 "' cannot satisfy its bound for any input (gamma^1 = 0)",
                                             {term}};
            return;
        }
        const double bound = (kap - g0 * theta) / (g1 * theta);
        // phi < theta  <=>  u > bound when gamma^1 > 0 (reverse orientation otherwise)
        term.lower = focal_upper_bound == (g1 > 0.0);
        term.value = bound;
        iv.terms.push_back(term);
        if (term.lower) {
            if (bound > iv.lo) {
                iv.lo = bound;
                best_lo = term;
            }
        } else {
            if (bound < iv.hi) {
                iv.hi = bound;
                best_hi = term;
            }
        }
    };

    for (const FocalBound& b : bounds) {
        if (b.hi) apply(b.dir, *b.hi, true);
        if (b.lo) apply(b.dir, *b.lo, false);
    }
    if (!iv.certificate && !(iv.hi - iv.lo > kFeasibilityMargin)) {
        Certificate c;
        c.box = a;
        c.reason = "admissible input interval is empty";
        if (best_lo) c.conflict.push_back(*best_lo);
        if (best_hi) c.conflict.push_back(*best_hi);
        iv.certificate = std::move(c);
    }
    return iv;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

struct BoxSynthesis {
    BoxIndex box;
    UInterval interval;
};

struct SynthesisResult {
    bool feasible = false;
    std::vector<BoxSynthesis> boxes;      // one per box of A*
    std::vector<Certificate> certificates;
    ControlLaw law;                       // midpoints on A*, default elsewhere
    bool verified = false;                // TG(law) == target
    GraphDiff mismatch;                   // when verification fails
};

/// Solve the global control problem for a target graph: A* from the diff
/// against TG(0), one admissible interval per box of A*, suggested law at the
/// interval midpoints (0 outside A*), then a closed-loop verification pass.
inline SynthesisResult synthesize(const Network& net, const TargetGraph& target) {
    const TransitionGraph tg0 = build_transition_graph(net, ControlLaw{});
    TransitionGraph tstar;
    tstar.nodes = tg0.nodes;
    tstar.edges = target.edges;
    const GraphDiff diff = graph_diff(tg0, tstar);

    SynthesisResult res;
    res.law = ControlLaw{0.0};
    res.feasible = true;
    for (const BoxIndex& a : diff.changed) {
        UInterval iv;
        try {
            iv = u_interval(net, a, focal_region_for_box(net, a, target.out_edges(a)));
        } catch (const ContradictionError& e) {
            iv.certificate = Certificate{a, e.what(), {}};
        }
        if (!iv.feasible()) {
            res.feasible = false;
            if (iv.certificate) res.certificates.push_back(*iv.certificate);
        } else {
            res.law.set(a, iv.midpoint());
        }
        res.boxes.push_back({a, std::move(iv)});
    }
    if (res.feasible) {
        const TransitionGraph closed = build_transition_graph(net, res.law);
        res.mismatch = graph_diff(closed, tstar);
        res.verified = res.mismatch.empty();
    }
    return res;
}

// ---------------------------------------------------------------------------
// Dynamic feedback
// ---------------------------------------------------------------------------

namespace detail {

/// Disjoint cover of a box set by axis-aligned index rectangles (greedy grow
/// along each axis from the lexicographically first uncovered box).
inline std::vector<std::pair<BoxIndex, BoxIndex>> rectangle_cover(const std::set<BoxIndex>& boxes) {
    std::set<BoxIndex> left = boxes;
    std::vector<std::pair<BoxIndex, BoxIndex>> rects;  // inclusive [lo, hi]
    while (!left.empty()) {
        BoxIndex lo = *left.begin(), hi = lo;
        const int n = static_cast<int>(lo.size());
        for (int d = 0; d < n; ++d) {
            // try extending the whole current rectangle one slab at a time
            for (;;) {
                BoxIndex problo = lo, probhi = hi;
                problo[static_cast<std::size_t>(d)] = probhi[static_cast<std::size_t>(d)] =
                    hi[static_cast<std::size_t>(d)] + 1;
                bool all = true;
                std::vector<BoxIndex> slab;
                BoxIndex cur = problo;
                for (;;) {
                    if (!left.count(cur)) {
                        all = false;
                        break;
                    }
                    slab.push_back(cur);
                    int j = n - 1;
                    for (; j >= 0; --j) {
                        if (cur[static_cast<std::size_t>(j)] < probhi[static_cast<std::size_t>(j)]) {
                            ++cur[static_cast<std::size_t>(j)];
                            for (int m = j + 1; m < n; ++m) cur[static_cast<std::size_t>(m)] = problo[static_cast<std::size_t>(m)];
                            break;
                        }
                    }
                    if (j < 0) break;
                }
                if (!all) break;
                hi[static_cast<std::size_t>(d)] += 1;
            }
        }
        // remove covered boxes
        BoxIndex cur = lo;
        for (;;) {
            left.erase(cur);
            int j = n - 1;
            for (; j >= 0; --j) {
                if (cur[static_cast<std::size_t>(j)] < hi[static_cast<std::size_t>(j)]) {
                    ++cur[static_cast<std::size_t>(j)];
                    for (int m = j + 1; m < n; ++m) cur[static_cast<std::size_t>(m)] = lo[static_cast<std::size_t>(m)];
                    break;
                }
            }
            if (j < 0) break;
        }
        rects.emplace_back(lo, hi);
    }
    return rects;
}

}  // namespace detail

/// Extend the network with a controller gene y: thresholds {0, theta_y,
/// 1/gamma_y}, production 1 exactly on the boxes of active_boxes (encoded as
/// step-function products), decay gamma_y. Each controlled variable's decay
/// gains gamma_i^1 * upsilon * s+(y, theta_y); the result is autonomous.
inline Network extend_with_controller(const Network& net, const std::set<BoxIndex>& active_boxes, double upsilon,
                                      double theta_y, double gamma_y, const std::set<int>& controlled_vars) {
    if (!(theta_y > 0.0) || !(gamma_y > 0.0) || !(theta_y * gamma_y < 1.0))
        throw StructureError("controller parameters must satisfy 0 < theta_y * gamma_y < 1");
    if (!(upsilon >= 0.0)) throw StructureError("upsilon must be >= 0");
    for (const BoxIndex& a : active_boxes)
        if (!net.contains(a)) throw StructureError("active box outside the lattice");
    for (int i : controlled_vars)
        if (i < 0 || i >= net.dim()) throw StructureError("controlled variable index out of range");

    Network ext = net;
    const int n = net.dim();
    const int yvar = n;

    std::string yname = "y";
    for (bool clash = true; clash;) {
        clash = false;
        for (const Variable& v : ext.variables)
            if (v.name == yname) {
                yname += "_";
                clash = true;
            }
    }
    ext.variables.push_back({yname, {0.0, theta_y, 1.0 / gamma_y}});

    StepPolynomial yprod;
    for (const auto& [lo, hi] : detail::rectangle_cover(active_boxes)) {
        Term t;
        t.coefficient = 1.0;
        for (int d = 0; d < n; ++d) {
            const std::size_t k = static_cast<std::size_t>(d);
            if (lo[k] > 0) t.factors.push_back({d, lo[k], Sign::plus});
            if (hi[k] < net.boxes_along(d) - 1) t.factors.push_back({d, hi[k] + 1, Sign::minus});
        }
        yprod.terms.push_back(std::move(t));
    }
    ext.production.push_back(std::move(yprod));
    ext.decay0.push_back({{Term{gamma_y, {}}}});
    ext.decay1.push_back({});

    // u is replaced by upsilon s+(y, theta_y) on the controlled decay channels
    for (int i : controlled_vars) {
        const std::size_t k = static_cast<std::size_t>(i);
        for (const Term& t : ext.decay1[k].terms) {
            Term gained = t;
            gained.coefficient *= upsilon;
            gained.factors.push_back({yvar, 1, Sign::plus});
            ext.decay0[k].terms.push_back(std::move(gained));
        }
    }
    for (int i = 0; i < n; ++i) ext.decay1[static_cast<std::size_t>(i)].terms.clear();
    ext.input_bound = 0.0;

    check_structure(ext);
    // the encoding must reproduce membership exactly
    for_each_box(ext, [&](const BoxIndex& b) {
        BoxIndex proj(std::vector<int>(b.a.begin(), b.a.begin() + n));
        const double got = ext.production[static_cast<std::size_t>(yvar)].eval(b);
        const double want = active_boxes.count(proj) ? 1.0 : 0.0;
        if (got != want)
            throw StructureError("active-box set not encodable as step products near box " + box_label(ext, b));
    });
    return ext;
}

}  // namespace pwa
