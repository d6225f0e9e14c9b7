#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace pwa;
using Catch::Approx;

using testutil::fd_jacobian;
using testutil::matrix_rel_err;

namespace {
double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return matrix_rel_err(a, b); }
}  // namespace

TEST_CASE("cycle sequences validate their box lists", "[cycle]") {
    const Network net = testutil::mixed_loop();
    const CycleSequence cyc = testutil::mixed_loop_cycle(net);
    CHECK(cyc.length() == 6);
    CHECK(cyc.switching == std::vector<int>{0, 0, 1, 0, 0, 1});
    CHECK(cyc.signs == std::vector<int>{1, 1, 1, -1, -1, -1});

    CHECK_THROWS_AS(CycleSequence::from_boxes(net, {{0, 0}, {1, 1}}), StructureError);   // diagonal
    CHECK_THROWS_AS(CycleSequence::from_boxes(net, {{0, 0}, {2, 0}}), StructureError);   // two steps
    CHECK_THROWS_AS(CycleSequence::from_boxes(net, {{0, 0}}), StructureError);
}

TEST_CASE("alignment of focal points", "[cycle]") {
    const Network ex1 = testutil::mixed_loop();
    const AlignmentReport a1 = check_alignment(ex1, ControlLaw{}, testutil::mixed_loop_cycle(ex1));
    CHECK(a1.aligned);
    CHECK(a1.all_variables_switch);

    const Network ex2 = testutil::coupled_loops();
    const CycleSequence cyc2 = testutil::coupled_loops_cycle(ex2);
    const AlignmentReport a2 = check_alignment(ex2, ControlLaw::uniform(0.3), cyc2);
    CHECK(a2.aligned);
    CHECK(a2.all_variables_switch);

    // under the law that acts only on A*, crossing into a controlled box
    // moves every focal coordinate: not aligned
    const ControlLaw law_star = load_law(testutil::data_path("coupled_loops_law.json"), ex2);
    const AlignmentReport a3 = check_alignment(ex2, law_star, cyc2);
    CHECK_FALSE(a3.aligned);
    CHECK_FALSE(a3.witness.empty());
}

TEST_CASE("wall-intersection point", "[cycle]") {
    const Network ex2 = testutil::coupled_loops();
    const auto theta_c = cycle_point(ex2, testutil::coupled_loops_cycle(ex2));
    REQUIRE(theta_c.has_value());
    CHECK(testutil::max_abs_diff(*theta_c, {0.5, 0.5, 0.5}) < 1e-15);

    // two thresholds crossed in the first direction: no common point
    const Network ex1 = testutil::mixed_loop();
    CHECK_FALSE(cycle_point(ex1, testutil::mixed_loop_cycle(ex1)).has_value());

    const Network loop2 = testutil::negative_loop({1.0, 1.25}, {0.5, 0.45});
    const auto c2 = cycle_point(loop2, testutil::negative_loop_cycle(loop2));
    REQUIRE(c2.has_value());
    CHECK((*c2)[0] == 0.5);
    CHECK((*c2)[1] == 0.45);

    // not every variable switches: precondition violated
    const auto partial = CycleSequence::from_boxes(ex1, {{0, 0}, {1, 0}});
    CHECK_THROWS_AS(cycle_point(ex1, partial), StructureError);
}

TEST_CASE("return map follows the cycle and matches event stepping", "[cycle]") {
    const Network net = testutil::mixed_loop();
    const CycleSequence cyc = testutil::mixed_loop_cycle(net);
    const ControlLaw zero;

    const Point x{0.5, 0.21};
    const Point tx = return_map(net, zero, cyc, x);
    CHECK(tx[0] == 0.5);  // back on the same wall
    CHECK(tx[1] > 0.0);
    CHECK(tx[1] < 0.5);

    // oracle: compose the race-based transition map around the loop
    Point y = x;
    BoxIndex box{1, 0};
    for (int step = 0; step < 6; ++step) {
        const TransitionResult tr = transition_map(net, box, y, 0.0);
        y = tr.point;
        box = tr.box;
    }
    CHECK(box == BoxIndex{1, 0});
    CHECK(testutil::max_abs_diff(y, tx) < 1e-12);

    // the loop time is positive and matches the oracle's total
    CHECK(return_time(net, zero, cyc, x) > 0.0);

    SECTION("deviating start raises") {
        // under zero input the coupled-loops cycle is not invariant
        const Network ex2 = testutil::coupled_loops();
        const CycleSequence cyc2 = testutil::coupled_loops_cycle(ex2);
        CHECK_THROWS_AS(return_map(ex2, ControlLaw{}, cyc2, Point{0.25, 0.25, 0.5}), DeviationError);
    }
}

TEST_CASE("the wall-intersection point is a fixed point of the return map", "[cycle]") {
    const Network ex2 = testutil::coupled_loops();
    const CycleSequence cyc = testutil::coupled_loops_cycle(ex2);
    const ControlLaw law = ControlLaw::uniform(0.3);
    const Point theta_c{0.5, 0.5, 0.5};
    CHECK(testutil::max_abs_diff(return_map(ex2, law, cyc, theta_c), theta_c) < 1e-12);

    const Network loop3 = testutil::negative_loop({1.0, 0.8, 1.2}, {0.5, 0.5, 0.5});
    const CycleSequence c3 = testutil::negative_loop_cycle(loop3);
    CHECK(testutil::max_abs_diff(return_map(loop3, ControlLaw{}, c3, {0.5, 0.5, 0.5}), {0.5, 0.5, 0.5}) < 1e-12);
}

TEST_CASE("return-map differential against finite differences", "[cycle]") {
    const ControlLaw zero;

    SECTION("double-threshold loop, including same-direction consecutive steps") {
        const Network net = testutil::mixed_loop();
        const CycleSequence cyc = testutil::mixed_loop_cycle(net);
        for (double w : {0.12, 0.3, 0.45}) {
            const Point x{0.5, w};
            CHECK(rel_err(return_map_jacobian(net, zero, cyc, x), fd_jacobian(net, zero, cyc, x)) < 1e-5);
        }
    }
    SECTION("random gene loops") {
        std::mt19937 rng(42);
        std::uniform_real_distribution<double> unif(0.1, 0.9);
        for (int trial = 0; trial < 5; ++trial) {
            const Network net = testutil::random_negative_loop(rng, 2 + (trial % 2));
            const CycleSequence cyc = testutil::negative_loop_cycle(net);
            for (int pt = 0; pt < 4; ++pt) {
                Point x = wall_centroid(net, cyc);
                for (int j = 0; j < net.dim(); ++j) {
                    if (j == cyc.switching[0]) continue;
                    const std::size_t k = static_cast<std::size_t>(j);
                    const BoxIndex& a1 = cyc.boxes[1];
                    x[k] = net.theta_lo(a1, j) + (0.2 + 0.6 * unif(rng)) * (net.theta_hi(a1, j) - net.theta_lo(a1, j));
                }
                CHECK(rel_err(return_map_jacobian(net, zero, cyc, x), fd_jacobian(net, zero, cyc, x)) < 1e-5);
            }
        }
    }
}

TEST_CASE("spectral radius helper", "[cycle]") {
    Eigen::MatrixXd rot(2, 2);
    rot << 0.0, 2.0, -2.0, 0.0;  // eigenvalues +-2i
    CHECK(spectral_radius(rot) == Approx(2.0).margin(1e-12));

    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(9, 9);  // power-iteration path
    for (int i = 0; i < 9; ++i) big(i, i) = 0.1 * (i + 1);
    CHECK(spectral_radius(big) == Approx(0.9).margin(1e-6));
}

TEST_CASE("dimension split for canonical gene loops", "[cycle]") {
    const ControlLaw zero;

    const Network loop2 = testutil::negative_loop({1.0, 1.25}, {0.5, 0.5});
    const CycleSequence c2 = testutil::negative_loop_cycle(loop2);
    const Eigen::MatrixXd d2 = return_map_jacobian(loop2, zero, c2, {0.5, 0.5});
    REQUIRE(d2.rows() == 1);
    CHECK(std::abs(d2(0, 0)) <= 1.0 + 1e-9);

    const CycleVerdict v2 = classify_cycle(loop2, zero, c2);
    CHECK(v2.kind == CycleCase::damped_to_intersection);
    CHECK(v2.lambda_boundary);  // spectral radius is exactly 1 in the plane
    CHECK(*v2.lambda == Approx(1.0).margin(1e-9));

    // iterates of the return map approach the intersection point
    Point x{0.5, 0.23};
    double prev = testutil::max_abs_diff(x, {0.5, 0.5});
    for (int it = 0; it < 300; ++it) {
        x = return_map(loop2, zero, c2, x);
        const double d = testutil::max_abs_diff(x, {0.5, 0.5});
        CHECK(d <= prev + 1e-15);
        prev = d;
    }
    CHECK(prev < 0.02);

    const Network loop3 = testutil::negative_loop({1.0, 0.8, 1.2}, {0.5, 0.5, 0.5});
    const CycleVerdict v3 = classify_cycle(loop3, zero, testutil::negative_loop_cycle(loop3));
    CHECK(v3.kind == CycleCase::unique_limit_cycle);
    CHECK(*v3.lambda > 1.0);
    REQUIRE(v3.periodic_point.has_value());
    CHECK(*v3.residual < 1e-10);
}

TEST_CASE("classification of the bundled fixtures", "[cycle]") {
    SECTION("mixed loop without input: unique limit cycle via double threshold") {
        const Network net = testutil::mixed_loop();
        const CycleVerdict v = classify_cycle(net, ControlLaw{}, testutil::mixed_loop_cycle(net));
        CHECK(v.kind == CycleCase::unique_limit_cycle_multi_threshold);
        CHECK(v.aligned);
        CHECK(v.all_variables_switch);
        CHECK_FALSE(v.single_threshold_per_direction);
        REQUIRE(v.periodic_point.has_value());
        CHECK(*v.residual < 1e-10);
        CHECK(*v.period > 0.0);
        CHECK((*v.periodic_point)[0] == 0.5);

        // ten random wall starts converge to the same orbit point
        std::mt19937 rng(3);
        std::uniform_real_distribution<double> unif(0.02, 0.48);
        std::vector<Point> hits;
        for (int s = 0; s < 10; ++s) {
            auto [q, iters] = iterate_to_fixed_point(net, ControlLaw{}, testutil::mixed_loop_cycle(net),
                                                     Point{0.5, unif(rng)});
            hits.push_back(q);
            (void)iters;
        }
        for (const Point& a : hits)
            for (const Point& b : hits) CHECK(testutil::max_abs_diff(a, b) < 1e-8);
    }
    SECTION("coupled loops under the uniform input: unique limit cycle via spectral radius") {
        const Network net = testutil::coupled_loops();
        const CycleVerdict v = classify_cycle(net, ControlLaw::uniform(0.3), testutil::coupled_loops_cycle(net));
        CHECK(v.kind == CycleCase::unique_limit_cycle);
        CHECK(v.aligned);
        CHECK(v.all_variables_switch);
        CHECK(v.single_threshold_per_direction);
        REQUIRE(v.theta_c.has_value());
        CHECK(testutil::max_abs_diff(*v.theta_c, {0.5, 0.5, 0.5}) < 1e-15);
        CHECK(*v.lambda > 1.0);
        REQUIRE(v.periodic_point.has_value());
        CHECK(*v.residual < 1e-10);
    }
    SECTION("non-invariant cycles are inapplicable") {
        const Network net = testutil::coupled_loops();
        const CycleVerdict v = classify_cycle(net, ControlLaw{}, testutil::coupled_loops_cycle(net));
        CHECK(v.kind == CycleCase::inapplicable);
        CHECK_FALSE(v.reason.empty());
    }
}

TEST_CASE("interaction graphs and loop recognition", "[cycle]") {
    const Network loop3 = testutil::negative_loop({1.0, 0.8, 1.2}, {0.5, 0.5, 0.5});
    CHECK(is_negative_feedback_loop(interaction_graph(loop3), 3));

    const Network loop2 = testutil::negative_loop({1.0, 1.0}, {0.5, 0.5});
    CHECK(is_negative_feedback_loop(interaction_graph(loop2), 2));

    // the mixed loop is not a pure loop: x2 has two regulators including itself
    const Network ex1 = testutil::mixed_loop();
    CHECK_FALSE(is_negative_feedback_loop(interaction_graph(ex1), 2));

    // nor are the coupled loops: x2 is regulated by both x1 and x3
    const Network ex2 = testutil::coupled_loops();
    CHECK_FALSE(is_negative_feedback_loop(interaction_graph(ex2), 3));

    // restricted to the region where the x1 inhibition of x2 is active at
    // its constant value, the system is a three-gene negative loop
    Network restricted = ex2;
    restricted.production[1].terms.clear();
    restricted.production[1].terms.push_back({1.0, {{2, 1, Sign::minus}}});
    restricted.production[1].terms.push_back({0.6, {}});
    CHECK(is_negative_feedback_loop(interaction_graph(restricted), 3));

    // a mutual-inhibition pair has an even number of inhibitions
    CHECK_FALSE(is_negative_feedback_loop(interaction_graph(testutil::bistable_switch()), 2));
}

TEST_CASE("worst-case races and the fast-controller condition", "[cycle]") {
    const Network ex1 = testutil::mixed_loop();
    const std::set<BoxIndex> active{{1, 0}, {2, 0}};

    SECTION("slow controller loses the race at the re-entry box") {
        for (double gamma_y : {0.1, 1.7}) {
            const Network ext = extend_with_controller(ex1, active, 0.5, 0.5, gamma_y, {0});
            const BoxIndex reentry{1, 0, 0};
            const auto table = exit_race(ext, ControlLaw{}, reentry);
            REQUIRE(table.size() == 2);
            double c_x1 = 0.0, c_y = 0.0;
            for (const RaceEntry& r : table) {
                if (r.dir == 0) c_x1 = std::exp(-r.tau_worst);
                if (r.dir == 2) c_y = std::exp(-r.tau_worst);
            }
            CHECK(c_x1 == Approx(0.375).margin(1e-3));
            if (gamma_y == 0.1) {
                CHECK(c_y == Approx(0.599).margin(1e-3));
                CHECK(crossing_direction(ext, ControlLaw{}, reentry) == 2);
                CHECK(check_fast_controller(ext, reentry, 2));
            } else {
                CHECK(c_y == Approx(0.328).margin(1e-3));
                CHECK(crossing_direction(ext, ControlLaw{}, reentry) == 0);
                CHECK_FALSE(check_fast_controller(ext, reentry, 2));
            }
        }
    }
    SECTION("a nearly-zero controller threshold fires immediately") {
        const Network ext = extend_with_controller(ex1, active, 0.5, 1e-6, 0.1, {0});
        CHECK(check_fast_controller(ext, {1, 0, 0}, 2));
    }
    SECTION("a single escaping direction has no crossing pair") {
        CHECK_FALSE(crossing_direction(ex1, ControlLaw{}, {0, 0}).has_value());
    }
    SECTION("at most one direction wins the race (fuzz)") {
        std::mt19937 rng(17);
        int multi_exit = 0;
        for (int trial = 0; trial < 60; ++trial) {
            const Network net = testutil::random_network(rng, 2 + (trial % 2));
            for (const BoxIndex& a : all_boxes(net)) {
                try {
                    const auto table = exit_race(net, ControlLaw{}, a);
                    if (table.size() < 2) continue;
                    ++multi_exit;
                    const auto winner = crossing_direction(net, ControlLaw{}, a);
                    int strict = 0;
                    for (const RaceEntry& cand : table) {
                        bool wins = true;
                        for (const RaceEntry& other : table)
                            if (other.dir != cand.dir && !(cand.tau_worst < other.tau_worst)) wins = false;
                        if (wins) ++strict;
                    }
                    CHECK(strict <= 1);
                    CHECK((winner.has_value() ? 1 : 0) == strict);
                } catch (const H2Error&) {
                }
            }
        }
        CHECK(multi_exit > 20);
    }
}
