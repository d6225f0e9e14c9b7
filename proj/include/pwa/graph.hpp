#pragma once

// State transition graph: boxes as nodes, an edge (a, a +- e_i) whenever
// direction i escapes box a under the per-box input of a control law.
// Also structural queries: fixed boxes, SCCs and elementary cycles,
// invariance and graph diffing.

#include <map>
#include <set>
#include <vector>

#include "pwa/dynamics.hpp"

namespace pwa {

// ---------------------------------------------------------------------------
// Control laws
// ---------------------------------------------------------------------------

/// Qualitative feedback: one input value per box, default for unlisted boxes.
class ControlLaw {
public:
    ControlLaw() = default;
    explicit ControlLaw(double default_u) : default_(default_u) {}

    static ControlLaw uniform(double u) { return ControlLaw(u); }

    void set(const BoxIndex& a, double u) { entries_[a] = u; }

    double at(const BoxIndex& a) const {
        auto it = entries_.find(a);
        return it == entries_.end() ? default_ : it->second;
    }

    double default_value() const { return default_; }
    const std::map<BoxIndex, double>& entries() const { return entries_; }

    void check_against(const Network& net) const {
        auto ok = [&](double u) { return u >= 0.0 && u <= net.input_bound + kThetaTol; };
        if (!ok(default_)) throw StructureError("law default value outside [0, U]");
        for (const auto& [a, u] : entries_) {
            if (!net.contains(a)) throw StructureError("law entry for a box outside the lattice");
            if (!ok(u)) throw StructureError("law value outside [0, U] at box " + box_label(net, a));
        }
    }

private:
    double default_ = 0.0;
    std::map<BoxIndex, double> entries_;
};

// ---------------------------------------------------------------------------
// Transition graph
// ---------------------------------------------------------------------------

struct Edge {
    BoxIndex from, to;
    int dir = 0;
    int sign = 0;  // +1 up, -1 down

    auto operator<=>(const Edge&) const = default;
};

struct TransitionGraph {
    std::vector<BoxIndex> nodes;       // lexicographic
    std::vector<Edge> edges;           // sorted by (from, dir, sign)
    std::vector<BoxIndex> fixed;       // out-degree 0
    std::vector<UnstableWall> unstable_walls;

    std::vector<Edge> out_edges(const BoxIndex& a) const {
        std::vector<Edge> out;
        for (const Edge& e : edges)
            if (e.from == a) out.push_back(e);
        return out;
    }

    bool has_edge(const BoxIndex& from, const BoxIndex& to) const {
        for (const Edge& e : edges)
            if (e.from == from && e.to == to) return true;
        return false;
    }

    bool operator==(const TransitionGraph& other) const {
        return nodes == other.nodes && edges == other.edges;
    }
};

/// Build TG(u) for a control law. Deterministic: nodes lexicographic, edges
/// sorted by (from, dir, sign). Unstable walls (both sides repelling, only
/// possible where H1 fails) are annotated, never edges.
inline TransitionGraph build_transition_graph(const Network& net, const ControlLaw& law) {
    law.check_against(net);
    TransitionGraph tg;
    tg.nodes = all_boxes(net);
    for (const BoxIndex& a : tg.nodes) {
        const ExitDirections dirs = exit_directions(net, a, law.at(a));
        std::vector<Edge> out;
        for (int i : dirs.down) out.push_back({a, a.neighbor(i, -1), i, -1});
        for (int i : dirs.up) out.push_back({a, a.neighbor(i, +1), i, +1});
        std::sort(out.begin(), out.end());
        if (out.empty()) tg.fixed.push_back(a);
        tg.edges.insert(tg.edges.end(), out.begin(), out.end());
    }
    std::sort(tg.edges.begin(), tg.edges.end());
    for (const BoxIndex& a : tg.nodes) {
        for (int i = 0; i < net.dim(); ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            if (a[k] + 1 >= net.boxes_along(i)) continue;
            const BoxIndex b = a.neighbor(i, +1);
            const double theta = net.theta_hi(a, i);
            const double lo = focal_point(net, a, law.at(a))[k];
            const double hi = focal_point(net, b, law.at(b))[k];
            if (lo < theta - kThetaTol && hi > theta + kThetaTol)
                tg.unstable_walls.push_back({a, b, i, law.at(a)});
        }
    }
    return tg;
}

inline std::set<BoxIndex> fixed_boxes(const TransitionGraph& tg) {
    return {tg.fixed.begin(), tg.fixed.end()};
}

/// True iff no edge leaves S.
inline bool is_invariant(const TransitionGraph& tg, const std::set<BoxIndex>& s) {
    for (const Edge& e : tg.edges)
        if (s.count(e.from) && !s.count(e.to)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// SCCs and elementary cycles
// ---------------------------------------------------------------------------

struct CycleEnumeration {
    std::vector<std::vector<BoxIndex>> sccs;    // components with >= 1 edge
    std::vector<std::vector<BoxIndex>> cycles;  // elementary cycles up to the length budget
    bool truncated = false;                     // some cycle may have been pruned
};

namespace detail {

struct AdjGraph {
    std::vector<BoxIndex> nodes;
    std::map<BoxIndex, int> index;
    std::vector<std::vector<int>> adj;

    explicit AdjGraph(const TransitionGraph& tg) {
        nodes = tg.nodes;
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i) index[nodes[static_cast<std::size_t>(i)]] = i;
        adj.assign(nodes.size(), {});
        for (const Edge& e : tg.edges) adj[static_cast<std::size_t>(index.at(e.from))].push_back(index.at(e.to));
    }
};

// Tarjan, iterative.
inline std::vector<std::vector<int>> tarjan_sccs(const AdjGraph& g) {
    const int n = static_cast<int>(g.nodes.size());
    std::vector<int> idx(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0);
    std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
    std::vector<int> stack;
    std::vector<std::vector<int>> sccs;
    int counter = 0;

    struct Frame {
        int v;
        std::size_t child;
    };
    for (int root = 0; root < n; ++root) {
        if (idx[static_cast<std::size_t>(root)] != -1) continue;
        std::vector<Frame> call{{root, 0}};
        idx[static_cast<std::size_t>(root)] = low[static_cast<std::size_t>(root)] = counter++;
        stack.push_back(root);
        on_stack[static_cast<std::size_t>(root)] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            const auto& out = g.adj[static_cast<std::size_t>(f.v)];
            if (f.child < out.size()) {
                const int w = out[f.child++];
                if (idx[static_cast<std::size_t>(w)] == -1) {
                    idx[static_cast<std::size_t>(w)] = low[static_cast<std::size_t>(w)] = counter++;
                    stack.push_back(w);
                    on_stack[static_cast<std::size_t>(w)] = true;
                    call.push_back({w, 0});
                } else if (on_stack[static_cast<std::size_t>(w)]) {
                    low[static_cast<std::size_t>(f.v)] = std::min(low[static_cast<std::size_t>(f.v)], idx[static_cast<std::size_t>(w)]);
                }
            } else {
                if (low[static_cast<std::size_t>(f.v)] == idx[static_cast<std::size_t>(f.v)]) {
                    std::vector<int> comp;
                    while (true) {
                        const int w = stack.back();
                        stack.pop_back();
                        on_stack[static_cast<std::size_t>(w)] = false;
                        comp.push_back(w);
                        if (w == f.v) break;
                    }
                    sccs.push_back(std::move(comp));
                }
                const int v = f.v;
                call.pop_back();
                if (!call.empty())
                    low[static_cast<std::size_t>(call.back().v)] =
                        std::min(low[static_cast<std::size_t>(call.back().v)], low[static_cast<std::size_t>(v)]);
            }
        }
    }
    return sccs;
}

}  // namespace detail

/// SCC decomposition (components with at least one edge; self-loops cannot
/// occur on the box lattice) plus elementary cycles enumerated by bounded
/// DFS with canonical starts. Budgets: max cycle length (default
/// 2 n max q_i) and a hard cap on the number of cycles.
inline CycleEnumeration strongly_connected_cycles(const Network& net, const TransitionGraph& tg,
                                                  int max_len = 0, std::size_t max_cycles = 10000) {
    if (max_len <= 0) {
        int maxq = 1;
        for (int i = 0; i < net.dim(); ++i) maxq = std::max(maxq, net.boxes_along(i));
        max_len = 2 * net.dim() * maxq;
    }
    detail::AdjGraph g(tg);
    CycleEnumeration result;

    const auto sccs = detail::tarjan_sccs(g);
    std::vector<int> scc_of(g.nodes.size(), -1);
    for (std::size_t c = 0; c < sccs.size(); ++c)
        for (int v : sccs[c]) scc_of[static_cast<std::size_t>(v)] = static_cast<int>(c);
    for (const auto& comp : sccs) {
        if (comp.size() < 2) continue;
        std::vector<BoxIndex> boxes;
        for (int v : comp) boxes.push_back(g.nodes[static_cast<std::size_t>(v)]);
        std::sort(boxes.begin(), boxes.end());
        result.sccs.push_back(std::move(boxes));
    }

    // Elementary cycles: DFS from each start using only nodes >= start within
    // the same SCC; a path longer than the budget is pruned and flagged.
    const int n = static_cast<int>(g.nodes.size());
    std::vector<bool> on_path(static_cast<std::size_t>(n), false);
    std::vector<int> path;
    std::function<void(int, int)> dfs = [&](int start, int v) {
        if (result.cycles.size() >= max_cycles) {
            result.truncated = true;
            return;
        }
        on_path[static_cast<std::size_t>(v)] = true;
        path.push_back(v);
        for (int w : g.adj[static_cast<std::size_t>(v)]) {
            if (w == start && path.size() >= 2) {
                std::vector<BoxIndex> cyc;
                for (int p : path) cyc.push_back(g.nodes[static_cast<std::size_t>(p)]);
                result.cycles.push_back(std::move(cyc));
                if (result.cycles.size() >= max_cycles) result.truncated = true;
            } else if (w > start && !on_path[static_cast<std::size_t>(w)] &&
                       scc_of[static_cast<std::size_t>(w)] == scc_of[static_cast<std::size_t>(start)]) {
                if (static_cast<int>(path.size()) >= max_len)
                    result.truncated = true;
                else
                    dfs(start, w);
            }
        }
        path.pop_back();
        on_path[static_cast<std::size_t>(v)] = false;
    };
    for (int v = 0; v < n; ++v)
        if (scc_of[static_cast<std::size_t>(v)] >= 0 &&
            sccs[static_cast<std::size_t>(scc_of[static_cast<std::size_t>(v)])].size() >= 2)
            dfs(v, v);
    return result;
}

// ---------------------------------------------------------------------------
// Graph diff
// ---------------------------------------------------------------------------

struct GraphDiff {
    std::vector<Edge> missing;          // in target, not in graph
    std::vector<Edge> extra;            // in graph, not in target
    std::vector<BoxIndex> changed;      // boxes whose out-edge sets differ (A*)

    bool empty() const { return missing.empty() && extra.empty(); }
};

/// Exact symmetric difference of edge sets plus the set of initial vertices
/// whose successors differ. Node sets must agree.
inline GraphDiff graph_diff(const TransitionGraph& tg, const TransitionGraph& target) {
    if (tg.nodes != target.nodes) throw StructureError("graph diff: node sets differ");
    GraphDiff d;
    std::set_difference(target.edges.begin(), target.edges.end(), tg.edges.begin(), tg.edges.end(),
                        std::back_inserter(d.missing));
    std::set_difference(tg.edges.begin(), tg.edges.end(), target.edges.begin(), target.edges.end(),
                        std::back_inserter(d.extra));
    std::set<BoxIndex> changed;
    for (const Edge& e : d.missing) changed.insert(e.from);
    for (const Edge& e : d.extra) changed.insert(e.from);
    d.changed.assign(changed.begin(), changed.end());
    return d;
}

}  // namespace pwa
