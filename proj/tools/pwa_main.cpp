// Command-line front end: validation, transition-graph export, exact
// simulation, cycle analysis, input synthesis and controller extension for
// piecewise-affine gene network models.
//
// Exit codes: 0 ok (warnings allowed), 2 input/model error, 3 infeasible
// synthesis, 4 numerical abort (tie/zeno) under --strict.

#include <CLI11.hpp>

#include <filesystem>
#include <future>
#include <iostream>
#include <random>

#include "pwa/io.hpp"

namespace fs = std::filesystem;
using namespace pwa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

Point parse_point(const std::string& csv) {
    Point x;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) x.push_back(std::stod(tok));
    if (x.empty()) throw StructureError("empty coordinate list");
    return x;
}

BoxIndex parse_box_token(const std::string& tok, const Network& net) {
    BoxIndex a;
    if (tok.find('-') != std::string::npos) {
        std::stringstream ss(tok);
        std::string part;
        while (std::getline(ss, part, '-')) a.a.push_back(std::stoi(part));
    } else {
        for (char c : tok) {
            if (c < '0' || c > '9') throw StructureError("bad box token '" + tok + "'");
            a.a.push_back(c - '0');
        }
    }
    if (!net.contains(a)) throw StructureError("box '" + tok + "' outside the lattice");
    return a;
}

std::vector<BoxIndex> parse_cycle_spec(const std::string& spec, const Network& net) {
    std::vector<BoxIndex> boxes;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ';')) boxes.push_back(parse_box_token(tok, net));
    return boxes;
}

struct Common {
    std::string network_path;
    std::string law_path;
    std::string out_dir;
    double u_bound = -1.0;  // <0: keep the file's bound
    bool strict = false;
    unsigned seed = 12345;
};

Network load_net(const Common& c) {
    Network net = load_network(c.network_path);
    if (c.u_bound >= 0.0) {
        net.input_bound = c.u_bound;
        check_structure(net);
    }
    return net;
}

ControlLaw load_law_opt(const Common& c, const Network& net) {
    if (c.law_path.empty()) return ControlLaw{};
    return load_law(c.law_path, net);
}

void ensure_out_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"piecewise-affine gene network toolkit"};
    app.require_subcommand(1);

    Common c;
    std::vector<std::string> x0_specs;
    std::vector<double> check_inputs;
    std::string target_path, synthesis_path, cycle_spec, law_out, race_box_spec;
    std::vector<std::string> controlled_names;
    long max_events = 100000;
    double max_time = 1e6, zeno_eps = 1e-8, dt = 0.0;
    double theta_y = 0.5, gamma_y = 0.1;
    int max_cycle_len = 0, starts = 0;

    auto add_common = [&](CLI::App* sub, bool with_law) {
        sub->add_option("network", c.network_path, "network JSON file")->required()->check(CLI::ExistingFile);
        if (with_law) sub->add_option("--law", c.law_path, "control-law JSON file")->check(CLI::ExistingFile);
        sub->add_option("--out-dir", c.out_dir, "directory for generated files");
        sub->add_option("--u-bound", c.u_bound, "override the network's input bound U");
        sub->add_flag("--strict", c.strict, "exit 4 on tie/zeno aborts");
        sub->add_option("--seed", c.seed, "seed for randomized workflows");
    };

    CLI::App* cmd_check = app.add_subcommand("check", "validate a network file");
    add_common(cmd_check, true);
    cmd_check->add_option("--inputs", check_inputs,
                          "input values to sample (default 0, U and any --law values)");

    CLI::App* cmd_graph = app.add_subcommand("graph", "build and export the transition graph");
    add_common(cmd_graph, true);

    CLI::App* cmd_sim = app.add_subcommand("simulate", "exact event-driven simulation");
    add_common(cmd_sim, true);
    cmd_sim->add_option("--x0", x0_specs, "initial point v1,v2,... (repeatable)")->required();
    cmd_sim->add_option("--max-events", max_events, "event budget");
    cmd_sim->add_option("--max-time", max_time, "time budget");
    cmd_sim->add_option("--zeno-eps", zeno_eps, "zeno inter-event threshold");
    cmd_sim->add_option("--dt", dt, "also emit a dense series with this step");

    CLI::App* cmd_analyze = app.add_subcommand("analyze", "classify cyclic box sequences");
    add_common(cmd_analyze, true);
    cmd_analyze->add_option("--cycle", cycle_spec, "boxes like 001;000;010 (default: enumerate)");
    cmd_analyze->add_option("--max-cycle-len", max_cycle_len, "cycle length budget");
    cmd_analyze->add_option("--starts", starts, "random wall starts for orbit-consistency report");

    CLI::App* cmd_synth = app.add_subcommand("synthesize", "admissible inputs for a target graph");
    add_common(cmd_synth, false);
    cmd_synth->add_option("target", target_path, "target-graph JSON file")->required()->check(CLI::ExistingFile);
    cmd_synth->add_option("--law-out", law_out, "write the suggested law here");

    CLI::App* cmd_extend = app.add_subcommand("extend", "add a dynamic-feedback controller gene");
    add_common(cmd_extend, false);
    cmd_extend->add_option("synthesis", synthesis_path, "synthesis report JSON")->required()->check(CLI::ExistingFile);
    cmd_extend->add_option("--theta-y", theta_y, "controller threshold")->required();
    cmd_extend->add_option("--gamma-y", gamma_y, "controller decay rate")->required();
    cmd_extend->add_option("--controlled", controlled_names, "controlled variables (default: all with gamma^1 != 0)");
    cmd_extend->add_option("--race-box", race_box_spec, "re-entry box to race-check (default: auto)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_check) {
            const Network net = load_net(c);
            std::vector<double> inputs = check_inputs;
            if (inputs.empty()) {
                inputs.push_back(0.0);
                if (net.input_bound > 0.0) inputs.push_back(net.input_bound);
                if (!c.law_path.empty()) {
                    const ControlLaw law = load_law(c.law_path, net);
                    inputs.push_back(law.default_value());
                    for (const auto& [a, u] : law.entries()) inputs.push_back(u);
                    std::sort(inputs.begin(), inputs.end());
                    inputs.erase(std::unique(inputs.begin(), inputs.end()), inputs.end());
                }
            }
            emit(validity_to_json(net, validate_network(net, inputs)));
            return kExitOk;
        }

        if (*cmd_graph) {
            const Network net = load_net(c);
            const TransitionGraph tg = build_transition_graph(net, load_law_opt(c, net));
            emit(graph_to_json(net, tg));
            if (!c.out_dir.empty()) {
                ensure_out_dir(c.out_dir);
                write_file(c.out_dir + "/tg.dot", to_dot(net, tg));
                write_file(c.out_dir + "/tg.json", graph_to_json(net, tg).dump(2) + "\n");
            }
            return kExitOk;
        }

        if (*cmd_sim) {
            const Network net = load_net(c);
            const ControlLaw law = load_law_opt(c, net);
            Budget budget;
            budget.max_events = max_events;
            budget.max_time = max_time;
            budget.zeno_eps = zeno_eps;

            std::vector<Point> starts_points;
            for (const std::string& s : x0_specs) starts_points.push_back(parse_point(s));

            // independent trajectories fan out concurrently
            std::vector<std::future<Trajectory>> runs;
            for (const Point& x0 : starts_points)
                runs.push_back(std::async(std::launch::async,
                                          [&, x0]() { return simulate(net, law, x0, budget); }));

            json out = json::array();
            bool aborted = false;
            ensure_out_dir(c.out_dir);
            for (std::size_t i = 0; i < runs.size(); ++i) {
                const Trajectory traj = runs[i].get();
                if (traj.verdict.kind == VerdictKind::tie_abort || traj.verdict.kind == VerdictKind::zeno)
                    aborted = true;
                out.push_back(trajectory_verdict_to_json(net, traj));
                if (!c.out_dir.empty()) {
                    const std::string stem = c.out_dir + "/trajectory_" + std::to_string(i);
                    const double step = dt > 0.0 ? dt : std::max(traj.duration() / 500.0, 1e-6);
                    write_file(stem + ".csv", series_to_csv(net, sample(net, law, traj, step)));
                    write_file(stem + "_events.json", events_to_json(net, traj).dump(2) + "\n");
                    write_file(stem + "_verdict.json",
                               trajectory_verdict_to_json(net, traj).dump(2) + "\n");
                }
            }
            emit(out);
            return (c.strict && aborted) ? kExitNumerical : kExitOk;
        }

        if (*cmd_analyze) {
            const Network net = load_net(c);
            const ControlLaw law = load_law_opt(c, net);
            std::vector<std::vector<BoxIndex>> cycles;
            json out;
            if (!cycle_spec.empty()) {
                cycles.push_back(parse_cycle_spec(cycle_spec, net));
            } else {
                const TransitionGraph tg = build_transition_graph(net, law);
                const CycleEnumeration ce = strongly_connected_cycles(net, tg, max_cycle_len);
                cycles = ce.cycles;
                out["enumeration_truncated"] = ce.truncated;
            }
            out["cycles"] = json::array();
            for (const auto& boxes : cycles) {
                const CycleSequence cyc = CycleSequence::from_boxes(net, boxes);
                const CycleVerdict v = classify_cycle(net, law, cyc);
                json cj = verdict_to_json(net, v);
                cj["boxes"] = json::array();
                for (const BoxIndex& a : boxes) cj["boxes"].push_back(box_label(net, a));
                if (starts > 0 && v.periodic_point) {
                    std::mt19937 rng(c.seed);
                    std::uniform_real_distribution<double> unif(0.02, 0.98);
                    std::vector<Point> hits;
                    for (int s = 0; s < starts; ++s) {
                        Point x = wall_centroid(net, cyc);
                        const BoxIndex& a1 = cyc.boxes[1];
                        for (int j = 0; j < net.dim(); ++j) {
                            if (j == cyc.switching[0]) continue;
                            const std::size_t k = static_cast<std::size_t>(j);
                            x[k] = net.theta_lo(a1, j) +
                                   unif(rng) * (net.theta_hi(a1, j) - net.theta_lo(a1, j));
                        }
                        hits.push_back(iterate_to_fixed_point(net, law, cyc, x).first);
                    }
                    double spread = 0.0;
                    for (const Point& p : hits)
                        for (const Point& q : hits)
                            for (std::size_t k = 0; k < p.size(); ++k)
                                spread = std::max(spread, std::abs(p[k] - q[k]));
                    cj["multi_start"] = {{"starts", starts}, {"max_pairwise_distance", spread}};
                }
                out["cycles"].push_back(std::move(cj));
            }
            emit(out);
            return kExitOk;
        }

        if (*cmd_synth) {
            const Network net = load_net(c);
            const SynthesisResult res = synthesize(net, load_target(target_path, net));
            emit(synthesis_to_json(net, res));
            if (!c.out_dir.empty()) {
                ensure_out_dir(c.out_dir);
                write_file(c.out_dir + "/synthesis.json", synthesis_to_json(net, res).dump(2) + "\n");
            }
            if (res.feasible && !law_out.empty()) write_file(law_out, law_to_json(res.law).dump(2) + "\n");
            return res.feasible ? kExitOk : kExitInfeasible;
        }

        if (*cmd_extend) {
            const Network net = load_net(c);
            const json sj = detail::load_json(synthesis_path);
            if (!sj.contains("boxes") || !sj.value("feasible", false))
                throw StructureError("synthesis report is missing boxes or marked infeasible");
            std::set<BoxIndex> active;
            std::optional<double> upsilon;
            for (const json& bj : sj.at("boxes")) {
                const BoxIndex a = detail::parse_box(bj.at("box"), net, "synthesis box");
                active.insert(a);
                const double u = bj.at("chosen").get<double>();
                if (upsilon && std::abs(*upsilon - u) > kThetaTol)
                    throw StructureError(
                        "per-box chosen inputs differ; the single-constant controller form needs a "
                        "common value (intervals are reported per box)");
                upsilon = u;
            }
            if (!upsilon) throw StructureError("synthesis report lists no boxes to control");

            std::set<int> controlled;
            if (controlled_names.empty()) {
                for (int i = 0; i < net.dim(); ++i)
                    if (!net.decay1[static_cast<std::size_t>(i)].terms.empty()) controlled.insert(i);
            } else {
                for (const std::string& name : controlled_names) controlled.insert(net.var_index(name));
            }

            const Network ext = extend_with_controller(net, active, *upsilon, theta_y, gamma_y, controlled);
            const int ydir = ext.dim() - 1;

            // race check at re-entry boxes: controller-inactive boxes over the
            // active set with a genuine exit race
            std::vector<BoxIndex> race_boxes;
            if (!race_box_spec.empty()) {
                race_boxes.push_back(parse_box_token(race_box_spec, ext));
            } else {
                for (const BoxIndex& a : active) {
                    BoxIndex b = a;
                    b.a.push_back(0);
                    try {
                        if (exit_race(ext, ControlLaw{}, b).size() >= 2) race_boxes.push_back(b);
                    } catch (const H2Error&) {
                    }
                }
            }
            json rj = json::array();
            bool all_fast = !race_boxes.empty();
            for (const BoxIndex& b : race_boxes) {
                json entry;
                entry["box"] = box_label(ext, b);
                entry["races"] = json::array();
                for (const RaceEntry& r : exit_race(ext, ControlLaw{}, b))
                    entry["races"].push_back({{"direction", ext.variables[static_cast<std::size_t>(r.dir)].name},
                                              {"survival", std::exp(-r.tau_worst)}});
                const bool fast = check_fast_controller(ext, b, ydir);
                entry["controller_wins"] = fast;
                all_fast = all_fast && fast;
                rj.push_back(std::move(entry));
            }

            json out;
            out["network"] = network_to_json(ext);
            out["fast_controller"] = {{"satisfied", all_fast},
                                      {"race_boxes", rj},
                                      {"note", "race criterion generalizes the single re-entry argument; "
                                               "sufficiency is established for graphs with one re-entry box"}};
            emit(out);
            if (!c.out_dir.empty()) {
                ensure_out_dir(c.out_dir);
                write_file(c.out_dir + "/extended.json", network_to_json(ext).dump(2) + "\n");
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
