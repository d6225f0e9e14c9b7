#pragma once

// Core types for piecewise-affine gene network models: threshold grids,
// boxes (regular domains), step-function polynomials and the network itself.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwa {

using Point = std::vector<double>;

// Threshold-equality tolerance. Concentrations are O(1) model units.
inline constexpr double kThetaTol = 1e-9;
// Relative tolerance for exit-time ties.
inline constexpr double kTieTolRel = 1e-12;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed network, law, target or argument.
struct StructureError : Error {
    using Error::Error;
};

/// A focal coordinate sits on an interior threshold (within tolerance).
struct H2Error : Error {
    using Error::Error;
};

/// Two exit times coincide within tolerance, or a wall intersection was hit.
struct TieError : Error {
    using Error::Error;
};

/// No escaping direction: the box contains its focal point.
struct NoExitError : Error {
    using Error::Error;
};

/// Point sits on the exit wall already (exit time would be zero).
struct BoundaryError : Error {
    using Error::Error;
};

/// Trajectory left the prescribed box sequence.
struct DeviationError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Box indices
// ---------------------------------------------------------------------------

/// Lower-corner index of a regular domain: a_i in {0,..,q_i-1}, the box being
/// the open rectangle (theta_i^{a_i}, theta_i^{a_i+1}) in every coordinate.
struct BoxIndex {
    std::vector<int> a;

    BoxIndex() = default;
    explicit BoxIndex(std::vector<int> v) : a(std::move(v)) {}
    BoxIndex(std::initializer_list<int> v) : a(v) {}

    std::size_t size() const { return a.size(); }
    int operator[](std::size_t i) const { return a[i]; }
    int& operator[](std::size_t i) { return a[i]; }

    BoxIndex neighbor(int dir, int sign) const {
        BoxIndex b(*this);
        b.a[static_cast<std::size_t>(dir)] += sign;
        return b;
    }

    auto operator<=>(const BoxIndex&) const = default;
};

// ---------------------------------------------------------------------------
// Step polynomials
// ---------------------------------------------------------------------------

enum class Sign : std::uint8_t { plus, minus };

inline char sign_char(Sign s) { return s == Sign::plus ? '+' : '-'; }

/// A single step factor s^+(x_var, theta_var^threshold) or s^-(...).
struct StepFactor {
    int var = 0;
    int threshold = 0;  // interior threshold index, 1..q-1
    Sign sign = Sign::plus;

    auto operator<=>(const StepFactor&) const = default;
};

/// coefficient * product of step factors; empty factor list = constant.
struct Term {
    double coefficient = 0.0;
    std::vector<StepFactor> factors;
};

/// Sum of terms. Piecewise constant: evaluation depends on the box index
/// only, never on coordinate values.
struct StepPolynomial {
    std::vector<Term> terms;

    double eval(const BoxIndex& box) const {
        double sum = 0.0;
        for (const Term& t : terms) {
            double v = t.coefficient;
            for (const StepFactor& f : t.factors) {
                // box lies above theta^k in coordinate j iff a_j >= k
                const bool above = box[static_cast<std::size_t>(f.var)] >= f.threshold;
                const bool on = (f.sign == Sign::plus) ? above : !above;
                if (!on) {
                    v = 0.0;
                    break;
                }
            }
            sum += v;
        }
        return sum;
    }

    bool references(int var) const {
        for (const Term& t : terms)
            for (const StepFactor& f : t.factors)
                if (f.var == var) return true;
        return false;
    }
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

struct Variable {
    std::string name;
    std::vector<double> thresholds;  // theta^0 = 0 < ... < theta^q (range cap)

    int box_count() const { return static_cast<int>(thresholds.size()) - 1; }
};

/// dx_i/dt = kappa_i(x) - (gamma_i^1(x) u + gamma_i^0(x)) x_i,  u in [0, U].
/// kappa and the decay pieces are step polynomials; everything is immutable
/// after construction and all operations on it are pure.
struct Network {
    std::vector<Variable> variables;
    std::vector<StepPolynomial> production;  // kappa_i
    std::vector<StepPolynomial> decay0;      // gamma_i^0
    std::vector<StepPolynomial> decay1;      // gamma_i^1
    double input_bound = 0.0;                // U

    int dim() const { return static_cast<int>(variables.size()); }

    int boxes_along(int i) const { return variables[static_cast<std::size_t>(i)].box_count(); }

    /// Interior thresholds have indices 1..q-1; 0 and q are range caps.
    bool interior_threshold(int i, int k) const {
        return k >= 1 && k <= boxes_along(i) - 1;
    }

    double threshold(int i, int k) const {
        return variables[static_cast<std::size_t>(i)].thresholds[static_cast<std::size_t>(k)];
    }

    double theta_lo(const BoxIndex& a, int i) const { return threshold(i, a[static_cast<std::size_t>(i)]); }
    double theta_hi(const BoxIndex& a, int i) const { return threshold(i, a[static_cast<std::size_t>(i)] + 1); }

    double kappa(const BoxIndex& a, int i) const { return production[static_cast<std::size_t>(i)].eval(a); }

    /// Total decay rate gamma_i^1(a) u + gamma_i^0(a); positive on valid networks.
    double decay(const BoxIndex& a, int i, double u) const {
        return decay1[static_cast<std::size_t>(i)].eval(a) * u + decay0[static_cast<std::size_t>(i)].eval(a);
    }

    long box_count() const {
        long c = 1;
        for (int i = 0; i < dim(); ++i) c *= boxes_along(i);
        return c;
    }

    bool contains(const BoxIndex& a) const {
        if (static_cast<int>(a.size()) != dim()) return false;
        for (int i = 0; i < dim(); ++i)
            if (a[static_cast<std::size_t>(i)] < 0 || a[static_cast<std::size_t>(i)] >= boxes_along(i)) return false;
        return true;
    }

    int var_index(const std::string& name) const {
        for (int i = 0; i < dim(); ++i)
            if (variables[static_cast<std::size_t>(i)].name == name) return i;
        throw StructureError("unknown variable '" + name + "'");
    }
};

/// Lexicographic enumeration of all boxes.
inline void for_each_box(const Network& net, const std::function<void(const BoxIndex&)>& fn) {
    const int n = net.dim();
    BoxIndex a(std::vector<int>(static_cast<std::size_t>(n), 0));
    while (true) {
        fn(a);
        int i = n - 1;
        for (; i >= 0; --i) {
            if (++a[static_cast<std::size_t>(i)] < net.boxes_along(i)) break;
            a[static_cast<std::size_t>(i)] = 0;
        }
        if (i < 0) return;
    }
}

inline std::vector<BoxIndex> all_boxes(const Network& net) {
    std::vector<BoxIndex> out;
    out.reserve(static_cast<std::size_t>(net.box_count()));
    for_each_box(net, [&](const BoxIndex& a) { out.push_back(a); });
    return out;
}

/// Compact label: digit string when every q_i <= 10 ("210"), else dash-joined.
inline std::string box_label(const Network& net, const BoxIndex& a) {
    bool compact = true;
    for (int i = 0; i < net.dim(); ++i)
        if (net.boxes_along(i) > 10) compact = false;
    std::string s;
    for (int i = 0; i < net.dim(); ++i) {
        if (!compact && i > 0) s += '-';
        s += std::to_string(a[static_cast<std::size_t>(i)]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Structural validity
// ---------------------------------------------------------------------------

/// Throws StructureError on malformed inputs: non-increasing thresholds,
/// theta^0 != 0, out-of-range or duplicated step factors, negative production
/// coefficients, or a decay rate that is not positive for every u in [0, U].
inline void check_structure(const Network& net) {
    const int n = net.dim();
    if (n == 0) throw StructureError("network has no variables");
    if (net.production.size() != static_cast<std::size_t>(n) || net.decay0.size() != static_cast<std::size_t>(n) ||
        net.decay1.size() != static_cast<std::size_t>(n))
        throw StructureError("production/decay lists must have one entry per variable");
    if (net.input_bound < 0.0) throw StructureError("input bound U must be >= 0");

    for (int i = 0; i < n; ++i) {
        const Variable& v = net.variables[static_cast<std::size_t>(i)];
        if (v.thresholds.size() < 2)
            throw StructureError("variable '" + v.name + "' needs at least {0, range cap}");
        if (v.thresholds.front() != 0.0)
            throw StructureError("variable '" + v.name + "': theta^0 must equal 0");
        for (std::size_t k = 1; k < v.thresholds.size(); ++k)
            if (!(v.thresholds[k] > v.thresholds[k - 1]))
                throw StructureError("variable '" + v.name + "': thresholds must be strictly increasing");
        for (int j = 0; j < n; ++j)
            if (i != j && net.variables[static_cast<std::size_t>(j)].name == v.name)
                throw StructureError("duplicate variable name '" + v.name + "'");
    }

    auto check_factors = [&](const StepPolynomial& p, const std::string& what, bool production_rates) {
        for (const Term& t : p.terms) {
            if (production_rates && t.coefficient < 0.0)
                throw StructureError(what + ": production coefficients must be >= 0");
            for (const StepFactor& f : t.factors) {
                if (f.var < 0 || f.var >= n) throw StructureError(what + ": factor variable out of range");
                if (!net.interior_threshold(f.var, f.threshold))
                    throw StructureError(what + ": factor threshold index " + std::to_string(f.threshold) +
                                         " is not an interior threshold of variable '" +
                                         net.variables[static_cast<std::size_t>(f.var)].name + "'");
                for (const StepFactor& g : t.factors)
                    if (&f != &g && f.var == g.var && f.threshold == g.threshold)
                        throw StructureError(what + ": two factors on the same (variable, threshold) pair");
            }
        }
    };
    for (int i = 0; i < n; ++i) {
        const std::string nm = net.variables[static_cast<std::size_t>(i)].name;
        check_factors(net.production[static_cast<std::size_t>(i)], "production of '" + nm + "'", true);
        check_factors(net.decay0[static_cast<std::size_t>(i)], "decay0 of '" + nm + "'", false);
        check_factors(net.decay1[static_cast<std::size_t>(i)], "decay1 of '" + nm + "'", false);
    }

    // gamma^0 > 0 and gamma^1 > -gamma^0/U on every box (decay positive on [0, U])
    for_each_box(net, [&](const BoxIndex& a) {
        for (int i = 0; i < n; ++i) {
            const double g0 = net.decay0[static_cast<std::size_t>(i)].eval(a);
            if (!(g0 > 0.0))
                throw StructureError("decay0 of '" + net.variables[static_cast<std::size_t>(i)].name +
                                     "' is not positive on box " + box_label(net, a));
            if (net.input_bound > 0.0) {
                const double gU = net.decay(a, i, net.input_bound);
                if (!(gU > 0.0))
                    throw StructureError("decay of '" + net.variables[static_cast<std::size_t>(i)].name +
                                         "' is not positive at u = U on box " + box_label(net, a));
            }
        }
    });
}

}  // namespace pwa
