#pragma once

// Exact event-driven simulation: wall-to-wall composition of transition maps
// under a control law, with asymptotic-behavior detection. The closed-form
// flow makes every step exact up to roundoff; there is no integration error.

#include <deque>
#include <map>
#include <vector>

#include "pwa/graph.hpp"

namespace pwa {

struct Budget {
    long max_events = 100000;
    double max_time = 1e6;
    double zeno_eps = 1e-8;     // inter-event time threshold
    int zeno_run = 10;          // consecutive sub-threshold events
    double periodic_tol = 1e-9; // wall-point recurrence tolerance
};

struct Event {
    double t = 0.0;
    Point x;        // entry point (on a wall except for the initial event)
    BoxIndex box;   // box entered
};

enum class VerdictKind { equilibrium, periodic, zeno, budget_exhausted, tie_abort };

inline const char* to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::equilibrium: return "equilibrium";
        case VerdictKind::periodic: return "periodic";
        case VerdictKind::zeno: return "zeno";
        case VerdictKind::budget_exhausted: return "budget-exhausted";
        case VerdictKind::tie_abort: return "tie-abort";
    }
    return "?";
}

struct Verdict {
    VerdictKind kind = VerdictKind::budget_exhausted;
    BoxIndex box;                 // equilibrium box / recurrence box
    Point point;                  // limit / orbit point / accumulation estimate
    std::vector<BoxIndex> cycle;  // periodic: the repeating box sequence
    double period = 0.0;
    std::string detail;
};

struct Trajectory {
    std::vector<Event> events;
    Verdict verdict;

    double duration() const { return events.empty() ? 0.0 : events.back().t; }
};

/// Simulate from a point strictly inside a box. Verdicts: equilibrium when a
/// box holds its focal point; periodic on wall-point recurrence (tolerance
/// budget.periodic_tol, at least one full loop); zeno when budget.zeno_run
/// consecutive inter-event times fall below budget.zeno_eps; tie_abort on
/// wall-intersection hits; budget_exhausted otherwise.
inline Trajectory simulate(const Network& net, const ControlLaw& law, const Point& x0, const Budget& budget = {}) {
    law.check_against(net);
    Trajectory traj;
    BoxIndex box = box_of_point(net, x0);
    Point x = x0;
    double t = 0.0;
    traj.events.push_back({t, x, box});

    // recent visits per box, for recurrence detection
    std::map<BoxIndex, std::deque<std::size_t>> visits;
    std::deque<double> recent_dts;

    for (long ev = 0; ev < budget.max_events; ++ev) {
        const double u = law.at(box);
        ExitDirections dirs;
        try {
            dirs = exit_directions(net, box, u);
        } catch (const H2Error& e) {
            throw H2Error(std::string(e.what()) + " (under the supplied law)");
        }
        if (dirs.none()) {
            traj.verdict.kind = VerdictKind::equilibrium;
            traj.verdict.box = box;
            traj.verdict.point = focal_point(net, box, u);
            traj.verdict.detail = "flow relaxes to the focal point of box " + box_label(net, box);
            return traj;
        }

        TransitionResult step;
        try {
            step = transition_map(net, box, x, u);
        } catch (const Error& e) {
            traj.verdict.kind = VerdictKind::tie_abort;
            traj.verdict.box = box;
            traj.verdict.point = x;
            traj.verdict.detail = e.what();
            return traj;
        }

        t += step.event.tau;
        x = step.point;
        box = step.box;
        traj.events.push_back({t, x, box});
        const std::size_t here = traj.events.size() - 1;

        if (t > budget.max_time) break;

        // periodicity: same box entered at (almost) the same wall point
        auto& seen = visits[box];
        for (std::size_t prev : seen) {
            const Event& p = traj.events[prev];
            double dist = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) dist = std::max(dist, std::abs(p.x[k] - x[k]));
            if (dist < budget.periodic_tol) {
                traj.verdict.kind = VerdictKind::periodic;
                traj.verdict.box = box;
                traj.verdict.point = x;
                traj.verdict.period = t - p.t;
                for (std::size_t i = prev; i < here; ++i) traj.verdict.cycle.push_back(traj.events[i].box);
                traj.verdict.detail = "wall point recurred after " + std::to_string(here - prev) + " transitions";
                return traj;
            }
        }
        seen.push_back(here);
        if (seen.size() > 8) seen.pop_front();

        // zeno: a run of vanishing inter-event times
        recent_dts.push_back(step.event.tau);
        if (static_cast<int>(recent_dts.size()) > budget.zeno_run) recent_dts.pop_front();
        if (static_cast<int>(recent_dts.size()) == budget.zeno_run) {
            bool all_small = true;
            for (double dt : recent_dts)
                if (dt >= budget.zeno_eps) all_small = false;
            if (all_small) {
                traj.verdict.kind = VerdictKind::zeno;
                traj.verdict.box = box;
                traj.verdict.point = x;  // accumulation estimate
                traj.verdict.detail = std::to_string(budget.zeno_run) + " consecutive inter-event times below " +
                                      std::to_string(budget.zeno_eps);
                return traj;
            }
        }
    }
    traj.verdict.kind = VerdictKind::budget_exhausted;
    traj.verdict.box = box;
    traj.verdict.point = x;
    return traj;
}

/// State at an arbitrary time within a recorded trajectory (closed-form
/// evaluation on the segment containing t; an equilibrium tail extends past
/// the last event).
inline Point evaluate_at(const Network& net, const ControlLaw& law, const Trajectory& traj, double t) {
    if (traj.events.empty()) throw StructureError("empty trajectory");
    if (t < 0.0) throw StructureError("time must be >= 0");
    std::size_t seg = 0;
    for (std::size_t i = 0; i + 1 < traj.events.size(); ++i)
        if (traj.events[i + 1].t <= t) seg = i + 1;
    if (t > traj.events.back().t && traj.verdict.kind != VerdictKind::equilibrium) t = traj.events.back().t;
    const Event& e = traj.events[seg];
    return flow_at(net, e.box, e.x, t - e.t, law.at(e.box));
}

struct Series {
    std::vector<double> t;
    std::vector<Point> x;
    std::vector<BoxIndex> box;
};

/// Dense sampling of a trajectory on a uniform grid over [0, duration]; the
/// final time is always included.
inline Series sample(const Network& net, const ControlLaw& law, const Trajectory& traj, double dt) {
    if (!(dt > 0.0)) throw StructureError("sample step must be > 0");
    if (traj.events.empty()) throw StructureError("empty trajectory");
    const double tend = traj.duration();
    Series s;
    std::size_t seg = 0;
    auto box_at = [&](double t) {
        while (seg + 1 < traj.events.size() && traj.events[seg + 1].t <= t) ++seg;
        return traj.events[seg].box;
    };
    for (double t = 0.0;; t += dt) {
        const bool last = t >= tend;
        const double tt = last ? tend : t;
        s.t.push_back(tt);
        s.x.push_back(evaluate_at(net, law, traj, tt));
        s.box.push_back(box_at(tt));
        if (last) break;
    }
    return s;
}

}  // namespace pwa
