#pragma once

// File formats: network / law / target-graph JSON (strict schemas, unknown
// keys rejected), graph exports (DOT + JSON edge list), trajectory CSV and
// JSON reports for validation, synthesis and cycle verdicts.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "pwa/control.hpp"
#include "pwa/cycle.hpp"
#include "pwa/sim.hpp"

namespace pwa {

using json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw StructureError(where + ": expected a JSON object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (key == k) ok = true;
        if (!ok) throw StructureError(where + ": unknown key '" + key + "'");
    }
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructureError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw StructureError("invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

inline BoxIndex parse_box(const json& j, const Network& net, const std::string& where) {
    if (!j.is_array()) throw StructureError(where + ": a box is an array of lattice indices");
    BoxIndex a;
    for (const auto& v : j) a.a.push_back(v.get<int>());
    if (!net.contains(a)) throw StructureError(where + ": box outside the lattice");
    return a;
}

inline json box_json(const BoxIndex& a) {
    json j = json::array();
    for (int v : a.a) j.push_back(v);
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Network schema
// ---------------------------------------------------------------------------

inline Network network_from_json(const json& j) {
    detail::reject_unknown_keys(j, {"variables", "production", "decay0", "decay1", "input_bound"}, "network");
    if (!j.contains("variables") || !j.contains("production") || !j.contains("decay0"))
        throw StructureError("network: 'variables', 'production' and 'decay0' are required");

    Network net;
    for (const json& vj : j.at("variables")) {
        detail::reject_unknown_keys(vj, {"name", "thresholds"}, "variable");
        Variable v;
        v.name = vj.at("name").get<std::string>();
        for (const auto& t : vj.at("thresholds")) v.thresholds.push_back(t.get<double>());
        net.variables.push_back(std::move(v));
    }
    const int n = net.dim();
    net.production.resize(static_cast<std::size_t>(n));
    net.decay0.resize(static_cast<std::size_t>(n));
    net.decay1.resize(static_cast<std::size_t>(n));

    auto parse_terms = [&](const json& arr, std::vector<StepPolynomial>& into, const std::string& what) {
        if (!arr.is_array()) throw StructureError(what + ": expected an array of terms");
        for (const json& tj : arr) {
            detail::reject_unknown_keys(tj, {"target", "coefficient", "factors"}, what + " term");
            const int target = net.var_index(tj.at("target").get<std::string>());
            Term t;
            t.coefficient = tj.at("coefficient").get<double>();
            if (tj.contains("factors"))
                for (const json& fj : tj.at("factors")) {
                    detail::reject_unknown_keys(fj, {"var", "threshold_index", "sign"}, "factor");
                    StepFactor f;
                    f.var = net.var_index(fj.at("var").get<std::string>());
                    f.threshold = fj.at("threshold_index").get<int>();
                    const std::string s = fj.at("sign").get<std::string>();
                    if (s == "+")
                        f.sign = Sign::plus;
                    else if (s == "-")
                        f.sign = Sign::minus;
                    else
                        throw StructureError("factor sign must be '+' or '-'");
                    t.factors.push_back(f);
                }
            into[static_cast<std::size_t>(target)].terms.push_back(std::move(t));
        }
    };
    parse_terms(j.at("production"), net.production, "production");
    parse_terms(j.at("decay0"), net.decay0, "decay0");
    if (j.contains("decay1")) parse_terms(j.at("decay1"), net.decay1, "decay1");
    if (j.contains("input_bound")) net.input_bound = j.at("input_bound").get<double>();

    check_structure(net);
    return net;
}

inline Network load_network(const std::string& path) { return network_from_json(detail::load_json(path)); }

inline json network_to_json(const Network& net) {
    json j;
    j["variables"] = json::array();
    for (const Variable& v : net.variables) j["variables"].push_back({{"name", v.name}, {"thresholds", v.thresholds}});
    auto dump_terms = [&](const std::vector<StepPolynomial>& polys) {
        json arr = json::array();
        for (int i = 0; i < net.dim(); ++i)
            for (const Term& t : polys[static_cast<std::size_t>(i)].terms) {
                json tj;
                tj["target"] = net.variables[static_cast<std::size_t>(i)].name;
                tj["coefficient"] = t.coefficient;
                if (!t.factors.empty()) {
                    tj["factors"] = json::array();
                    for (const StepFactor& f : t.factors)
                        tj["factors"].push_back({{"var", net.variables[static_cast<std::size_t>(f.var)].name},
                                                 {"threshold_index", f.threshold},
                                                 {"sign", std::string(1, sign_char(f.sign))}});
                }
                arr.push_back(std::move(tj));
            }
        return arr;
    };
    j["production"] = dump_terms(net.production);
    j["decay0"] = dump_terms(net.decay0);
    j["decay1"] = dump_terms(net.decay1);
    j["input_bound"] = net.input_bound;
    return j;
}

// ---------------------------------------------------------------------------
// Law and target schemas
// ---------------------------------------------------------------------------

inline ControlLaw law_from_json(const json& j, const Network& net) {
    detail::reject_unknown_keys(j, {"default", "entries"}, "law");
    ControlLaw law(j.contains("default") ? j.at("default").get<double>() : 0.0);
    if (j.contains("entries"))
        for (const json& ej : j.at("entries")) {
            detail::reject_unknown_keys(ej, {"box", "u"}, "law entry");
            law.set(detail::parse_box(ej.at("box"), net, "law entry"), ej.at("u").get<double>());
        }
    law.check_against(net);
    return law;
}

inline ControlLaw load_law(const std::string& path, const Network& net) {
    return law_from_json(detail::load_json(path), net);
}

inline json law_to_json(const ControlLaw& law) {
    json j;
    j["default"] = law.default_value();
    j["entries"] = json::array();
    for (const auto& [a, u] : law.entries()) j["entries"].push_back({{"box", detail::box_json(a)}, {"u", u}});
    return j;
}

inline TargetGraph target_from_json(const json& j, const Network& net) {
    detail::reject_unknown_keys(j, {"edges"}, "target graph");
    std::vector<Edge> edges;
    for (const json& ej : j.at("edges")) {
        detail::reject_unknown_keys(ej, {"from", "to"}, "target edge");
        Edge e;
        e.from = detail::parse_box(ej.at("from"), net, "target edge");
        e.to = detail::parse_box(ej.at("to"), net, "target edge");
        edges.push_back(std::move(e));
    }
    return TargetGraph::from_edges(net, std::move(edges));
}

inline TargetGraph load_target(const std::string& path, const Network& net) {
    return target_from_json(detail::load_json(path), net);
}

// ---------------------------------------------------------------------------
// Graph exports
// ---------------------------------------------------------------------------

inline json graph_to_json(const Network& net, const TransitionGraph& tg) {
    json j;
    j["nodes"] = json::array();
    for (const BoxIndex& a : tg.nodes) j["nodes"].push_back(box_label(net, a));
    j["edges"] = json::array();
    for (const Edge& e : tg.edges)
        j["edges"].push_back({{"from", box_label(net, e.from)},
                              {"to", box_label(net, e.to)},
                              {"direction", net.variables[static_cast<std::size_t>(e.dir)].name},
                              {"sign", e.sign}});
    j["fixed"] = json::array();
    for (const BoxIndex& a : tg.fixed) j["fixed"].push_back(box_label(net, a));
    j["unstable_walls"] = json::array();
    for (const UnstableWall& w : tg.unstable_walls)
        j["unstable_walls"].push_back({{"lower", box_label(net, w.lower)},
                                       {"upper", box_label(net, w.upper)},
                                       {"direction", net.variables[static_cast<std::size_t>(w.dir)].name}});
    return j;
}

/// DOT export: fixed boxes double-circled, unstable walls dotted.
inline std::string to_dot(const Network& net, const TransitionGraph& tg) {
    std::ostringstream os;
    os << "digraph tg {\n  node [shape=circle];\n";
    const std::set<BoxIndex> fixed(tg.fixed.begin(), tg.fixed.end());
    for (const BoxIndex& a : tg.nodes) {
        os << "  \"" << box_label(net, a) << "\"";
        if (fixed.count(a)) os << " [peripheries=2]";
        os << ";\n";
    }
    for (const Edge& e : tg.edges)
        os << "  \"" << box_label(net, e.from) << "\" -> \"" << box_label(net, e.to) << "\";\n";
    for (const UnstableWall& w : tg.unstable_walls)
        os << "  \"" << box_label(net, w.upper) << "\" -> \"" << box_label(net, w.lower)
           << "\" [style=dotted, dir=none];\n";
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json validity_to_json(const Network& net, const ValidityReport& rep) {
    json j;
    j["clean"] = rep.clean();
    j["h1_violations"] = json::array();
    for (const H1Violation& v : rep.h1_violations)
        j["h1_violations"].push_back(
            {{"variable", net.variables[static_cast<std::size_t>(v.var)].name}, {"box", box_label(net, v.box)}});
    j["h2_violations"] = json::array();
    for (const H2Violation& v : rep.h2_violations)
        j["h2_violations"].push_back({{"box", box_label(net, v.box)},
                                      {"variable", net.variables[static_cast<std::size_t>(v.var)].name},
                                      {"input", v.input},
                                      {"focal", v.focal},
                                      {"threshold_index", v.threshold}});
    j["unstable_walls"] = json::array();
    for (const UnstableWall& w : rep.unstable_walls)
        j["unstable_walls"].push_back({{"lower", box_label(net, w.lower)},
                                       {"upper", box_label(net, w.upper)},
                                       {"direction", net.variables[static_cast<std::size_t>(w.dir)].name},
                                       {"input", w.input}});
    j["out_of_range"] = json::array();
    for (const RangeViolation& v : rep.out_of_range)
        j["out_of_range"].push_back({{"box", box_label(net, v.box)},
                                     {"variable", net.variables[static_cast<std::size_t>(v.var)].name},
                                     {"input", v.input},
                                     {"focal", v.focal}});
    return j;
}

inline json synthesis_to_json(const Network& net, const SynthesisResult& res) {
    json j;
    j["feasible"] = res.feasible;
    j["verified"] = res.verified;
    j["boxes"] = json::array();
    for (const BoxSynthesis& b : res.boxes) {
        json bj;
        bj["box"] = detail::box_json(b.box);
        bj["label"] = box_label(net, b.box);
        bj["feasible"] = b.interval.feasible();
        if (b.interval.feasible()) {
            bj["lo"] = b.interval.lo;
            bj["hi"] = b.interval.hi;
            bj["chosen"] = b.interval.midpoint();
        }
        bj["bounds"] = json::array();
        for (const UTerm& t : b.interval.terms) {
            json tj;
            tj["direction"] = net.variables[static_cast<std::size_t>(t.dir)].name;
            tj["threshold_index"] = t.threshold;
            if (t.u_independent) {
                tj["u_independent"] = true;
                tj["violated"] = t.violated;
            } else {
                tj["kind"] = t.lower ? "lower" : "upper";
                tj["value"] = t.value;
            }
            bj["bounds"].push_back(std::move(tj));
        }
        j["boxes"].push_back(std::move(bj));
    }
    j["certificates"] = json::array();
    for (const Certificate& c : res.certificates) {
        json cj;
        cj["box"] = box_label(net, c.box);
        cj["reason"] = c.reason;
        cj["conflict"] = json::array();
        for (const UTerm& t : c.conflict)
            cj["conflict"].push_back({{"direction", net.variables[static_cast<std::size_t>(t.dir)].name},
                                      {"threshold_index", t.threshold},
                                      {"kind", t.u_independent ? "u-independent" : (t.lower ? "lower" : "upper")},
                                      {"value", t.value}});
        j["certificates"].push_back(std::move(cj));
    }
    j["law"] = law_to_json(res.law);
    if (res.feasible && !res.verified) {
        j["mismatch"] = json::array();
        for (const Edge& e : res.mismatch.missing)
            j["mismatch"].push_back({{"missing", box_label(net, e.from) + "->" + box_label(net, e.to)}});
        for (const Edge& e : res.mismatch.extra)
            j["mismatch"].push_back({{"extra", box_label(net, e.from) + "->" + box_label(net, e.to)}});
    }
    return j;
}

inline json verdict_to_json(const Network& net, const CycleVerdict& v) {
    json j;
    j["case"] = to_string(v.kind);
    j["aligned"] = v.aligned;
    j["all_variables_switch"] = v.all_variables_switch;
    j["single_threshold_per_direction"] = v.single_threshold_per_direction;
    if (v.lambda) j["lambda"] = *v.lambda;
    if (v.lambda_boundary) j["lambda_boundary"] = true;
    if (v.theta_c) j["theta_c"] = *v.theta_c;
    if (v.periodic_point) j["periodic_point"] = *v.periodic_point;
    if (v.period) j["period"] = *v.period;
    if (v.residual) j["residual"] = *v.residual;
    if (!v.reason.empty()) j["reason"] = v.reason;
    (void)net;
    return j;
}

inline json trajectory_verdict_to_json(const Network& net, const Trajectory& traj) {
    const Verdict& v = traj.verdict;
    json j;
    j["verdict"] = to_string(v.kind);
    j["events"] = traj.events.size();
    j["duration"] = traj.duration();
    if (!v.box.a.empty()) j["box"] = box_label(net, v.box);
    if (!v.point.empty()) j["point"] = v.point;
    if (!v.cycle.empty()) {
        j["cycle"] = json::array();
        for (const BoxIndex& a : v.cycle) j["cycle"].push_back(box_label(net, a));
        j["period"] = v.period;
    }
    if (!v.detail.empty()) j["detail"] = v.detail;
    return j;
}

inline json events_to_json(const Network& net, const Trajectory& traj) {
    json j = json::array();
    for (const Event& e : traj.events) {
        json ej;
        ej["t"] = e.t;
        ej["x"] = e.x;
        ej["box"] = box_label(net, e.box);
        j.push_back(std::move(ej));
    }
    return j;
}

/// CSV with header t,x1..xn,box.
inline std::string series_to_csv(const Network& net, const Series& s) {
    std::ostringstream os;
    os.precision(17);
    os << "t";
    for (const Variable& v : net.variables) os << "," << v.name;
    os << ",box\n";
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        os << s.t[i];
        for (double x : s.x[i]) os << "," << x;
        os << "," << box_label(net, s.box[i]) << "\n";
    }
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw StructureError("cannot write '" + path + "'");
    out << content;
}

}  // namespace pwa
