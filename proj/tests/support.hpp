#pragma once

// Shared fixtures and generators for the test suites.

#include <random>
#include <string>

#include "pwa/io.hpp"

namespace testutil {

using namespace pwa;

inline std::string data_path(const std::string& name) { return std::string(PWA_DATA_DIR) + "/" + name; }

inline Network mixed_loop() { return load_network(data_path("mixed_loop.json")); }
inline Network coupled_loops() { return load_network(data_path("coupled_loops.json")); }
inline Network bistable_switch() { return load_network(data_path("bistable_switch.json")); }

inline ControlLaw mixed_loop_law() { return load_law(data_path("mixed_loop_law.json"), mixed_loop()); }

inline TargetGraph mixed_loop_target() { return load_target(data_path("mixed_loop_target.json"), mixed_loop()); }
inline TargetGraph coupled_loops_target() {
    return load_target(data_path("coupled_loops_target.json"), coupled_loops());
}

/// The 6-box loop of the two-variable fixture under zero input.
inline CycleSequence mixed_loop_cycle(const Network& net) {
    return CycleSequence::from_boxes(net, {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {1, 1}, {0, 1}});
}

/// The controlled oscillation loop of the three-variable fixture.
inline CycleSequence coupled_loops_cycle(const Network& net) {
    return CycleSequence::from_boxes(
        net, {{0, 0, 1}, {0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}});
}

/// Cyclic gene circuit x_{i-1} -> x_i with one inhibition: production of x_0
/// is kappa0 + s^-(x_{n-1}), every other x_i gets kappa0 + s^+(x_{i-1}).
inline Network negative_loop(const std::vector<double>& gammas, const std::vector<double>& thetas,
                             const std::vector<double>& kappa0 = {}) {
    const int n = static_cast<int>(gammas.size());
    Network net;
    for (int i = 0; i < n; ++i) {
        const double hi = (1.0 + (kappa0.empty() ? 0.0 : kappa0[static_cast<std::size_t>(i)])) /
                          gammas[static_cast<std::size_t>(i)];
        net.variables.push_back({"g" + std::to_string(i + 1),
                                 {0.0, thetas[static_cast<std::size_t>(i)], hi * 1.05 + 0.05}});
    }
    net.production.resize(static_cast<std::size_t>(n));
    net.decay0.resize(static_cast<std::size_t>(n));
    net.decay1.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int reg = (i + n - 1) % n;
        const Sign sign = (i == 0) ? Sign::minus : Sign::plus;
        const std::size_t k = static_cast<std::size_t>(i);
        if (!kappa0.empty() && kappa0[k] > 0.0) net.production[k].terms.push_back({kappa0[k], {}});
        net.production[k].terms.push_back({1.0, {{reg, 1, sign}}});
        net.decay0[k].terms.push_back({gammas[k], {}});
    }
    check_structure(net);
    return net;
}

/// The loop's standard cycle: ascend coordinates 1..n, then descend.
inline CycleSequence negative_loop_cycle(const Network& net) {
    const int n = net.dim();
    std::vector<BoxIndex> boxes;
    BoxIndex a(std::vector<int>(static_cast<std::size_t>(n), 0));
    boxes.push_back(a);
    for (int i = 0; i < n; ++i) {
        a[static_cast<std::size_t>(i)] = 1;
        boxes.push_back(a);
    }
    for (int i = 0; i < n - 1; ++i) {
        a[static_cast<std::size_t>(i)] = 0;
        boxes.push_back(a);
    }
    return CycleSequence::from_boxes(net, boxes);
}

/// Small random network with H1 satisfied (no self-regulation), random
/// controllable decays (gamma^1 possibly zero or negative) and U = 1.
/// Retries until H2 holds at u in {0, U}.
inline Network random_network(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int attempt = 0; attempt < 200; ++attempt) {
        Network net;
        net.input_bound = 1.0;
        for (int i = 0; i < n; ++i) {
            const double theta = 0.3 + 0.4 * unif(rng);
            net.variables.push_back({"v" + std::to_string(i + 1), {0.0, theta, 2.5 + unif(rng)}});
        }
        net.production.resize(static_cast<std::size_t>(n));
        net.decay0.resize(static_cast<std::size_t>(n));
        net.decay1.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const std::size_t k = static_cast<std::size_t>(i);
            const double g0 = 0.5 + unif(rng);
            net.decay0[k].terms.push_back({g0, {}});
            const double pick = unif(rng);
            if (pick < 0.4) {
                net.decay1[k].terms.push_back({0.3 + unif(rng), {}});
            } else if (pick < 0.6) {
                net.decay1[k].terms.push_back({-0.4 * g0 * unif(rng), {}});
            }
            const int nterms = 1 + (unif(rng) < 0.5 ? 1 : 0);
            for (int t = 0; t < nterms; ++t) {
                Term term;
                term.coefficient = 0.3 + 1.2 * unif(rng);
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;  // keep H1
                    if (unif(rng) < 0.6)
                        term.factors.push_back({j, 1, unif(rng) < 0.5 ? Sign::plus : Sign::minus});
                }
                net.production[k].terms.push_back(std::move(term));
            }
        }
        try {
            check_structure(net);
            const ValidityReport rep = validate_network(net, {0.0, net.input_bound});
            if (rep.h2_violations.empty() && rep.out_of_range.empty()) return net;
        } catch (const Error&) {
        }
    }
    throw std::runtime_error("random_network: no valid sample found");
}

/// Random negative loops with margins that keep focal points clear of
/// thresholds (for finite-difference work).
inline Network random_negative_loop(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> gammas, thetas, kappa0;
    for (int i = 0; i < n; ++i) {
        const double g = 0.6 + 0.9 * unif(rng);
        const double lo_focal = 0.25 * unif(rng) / g;  // kappa0/g
        const double hi_focal = (0.25 * unif(rng) * g + 1.0) / g;
        // theta strictly between the two focal values with >= 10% margin
        const double theta = lo_focal + (0.35 + 0.3 * unif(rng)) * (hi_focal - lo_focal);
        gammas.push_back(g);
        thetas.push_back(theta);
        kappa0.push_back(lo_focal * g);
    }
    return negative_loop(gammas, thetas, kappa0);
}

inline double max_abs_diff(const Point& a, const Point& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Exit oracle: bisection on the closed-form flow; no use of the logarithmic
/// exit-time formula.
struct BisectExit {
    double tau;
    int dir;
    int sign;
};

inline BisectExit bisect_exit(const Network& net, const BoxIndex& a, const Point& x, double u) {
    const Point phi = focal_point(net, a, u);
    BisectExit best{std::numeric_limits<double>::infinity(), -1, 0};
    for (int i = 0; i < net.dim(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        for (int sign : {+1, -1}) {
            const int face = sign > 0 ? a[k] + 1 : a[k];
            if (!net.interior_threshold(i, face)) continue;
            const double theta = net.threshold(i, face);
            if ((sign > 0 && phi[k] <= theta) || (sign < 0 && phi[k] >= theta)) continue;
            auto past = [&](double t) {
                const double v = flow_at(net, a, x, t, u)[k];
                return sign > 0 ? v >= theta : v <= theta;
            };
            double hi = 1.0;
            while (!past(hi) && hi < 1e12) hi *= 2.0;
            if (!past(hi)) continue;
            double lo = 0.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (past(mid) ? hi : lo) = mid;
            }
            if (hi < best.tau) best = {hi, i, sign};
        }
    }
    return best;
}

/// Central finite differences of the return map in wall coordinates.
inline Eigen::MatrixXd fd_jacobian(const Network& net, const ControlLaw& law, const CycleSequence& cyc,
                                   const Point& x, double h = 1e-6) {
    const int n = net.dim();
    const int s0 = cyc.switching[0];
    Eigen::MatrixXd m(n - 1, n - 1);
    int col = 0;
    for (int j = 0; j < n; ++j) {
        if (j == s0) continue;
        Point xp = x, xm = x;
        xp[static_cast<std::size_t>(j)] += h;
        xm[static_cast<std::size_t>(j)] -= h;
        const Point tp = return_map(net, law, cyc, xp);
        const Point tm = return_map(net, law, cyc, xm);
        int row = 0;
        for (int i = 0; i < n; ++i) {
            if (i == s0) continue;
            m(row, col) = (tp[static_cast<std::size_t>(i)] - tm[static_cast<std::size_t>(i)]) / (2.0 * h);
            ++row;
        }
        ++col;
    }
    return m;
}

inline double matrix_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-12, b.norm());
}

}  // namespace testutil
