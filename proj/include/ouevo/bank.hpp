#pragma once

#include "ouevo/derivs.hpp"
#include "ouevo/errors.hpp"
#include "ouevo/weights.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ouevo {

namespace detail {

inline Derivs linear_jet(const Vec& x, const Vec& v, int order) {
    const int n = static_cast<int>(x.size());
    Derivs d(n, order, v.dot(x));
    d.dim_hint = n;
    if (order >= 1) d.grad = v;
    return d;
}

inline Vec bank_direction(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = 1.0 / (i + 1.0);
    return v;
}

inline Vec bank_centre(int n, double shift) {
    Vec c(n);
    for (int i = 0; i < n; ++i) c(i) = shift * ((i % 2) ? -1.0 : 1.0) / (i + 1.0);
    return c;
}

/// exp(−1/(1−|y|²)) inside the unit ball, zero outside.
inline Derivs compact_bump_jet(const Vec& y, int order) {
    const int n = static_cast<int>(y.size());
    if (y.squaredNorm() >= 1.0) return Derivs::constant(n, order, 0.0);
    const Derivs v = 1.0 + (-1.0) * Derivs::squared_norm(y, order);
    return exp(-1.0 * reciprocal(v));
}

}  // namespace detail

/// Names accepted by bank_field().
inline const std::vector<std::string>& bank_names() {
    static const std::vector<std::string> names{"one",  "linear", "quadratic",    "cos",  "bump", "mixed",
                                                "poly3", "step",  "kink",         "compact_bump"};
    return names;
}

/// Built-in test fields with exact jets:
///  - one:          1
///  - linear:       ⟨v, x⟩, v_i = 1/(i+1)
///  - quadratic:    |x|²
///  - cos:          cos(x₁)
///  - bump:         exp(−|x − c|²)
///  - mixed:        sin(x₁ + ⟨v,x⟩/2)·exp(−|x|²/10) + 0.3 cos(x_N)
///  - poly3:        x₁³/10 − x₁ x_N + 1/2
///  - step:         tanh(x₁/10⁻⁵), a smoothed sign
///  - kink:         (x₁² + 10⁻¹⁰)^{1/2}, a smoothed |x₁|
///  - compact_bump: exp(−1/(1 − |x|²)) on the unit ball
inline Field bank_field(const std::string& name, int n) {
    if (n < 1 || n > kMaxDim) throw PreconditionError("bank dimension out of range");
    if (name == "one") {
        return Field::from_jet([n](const Vec&, int o) { return Derivs::constant(n, o, 1.0); }, name);
    }
    if (name == "linear") {
        const Vec v = detail::bank_direction(n);
        return Field::from_jet([v](const Vec& x, int o) { return detail::linear_jet(x, v, o); }, name);
    }
    if (name == "quadratic") {
        return Field::from_jet([](const Vec& x, int o) { return Derivs::squared_norm(x, o); }, name);
    }
    if (name == "cos") {
        return Field::from_jet([](const Vec& x, int o) { return cos(Derivs::coordinate(x, 0, o)); }, name);
    }
    if (name == "bump") {
        const Vec c = detail::bank_centre(n, 0.3);
        return Field::from_jet(
            [c](const Vec& x, int o) { return exp(-1.0 * Derivs::squared_norm(Vec(x - c), o)); }, name);
    }
    if (name == "mixed") {
        const Vec v = detail::bank_direction(n);
        return Field::from_jet(
            [v, n](const Vec& x, int o) {
                const Derivs arg = Derivs::coordinate(x, 0, o) + 0.5 * detail::linear_jet(x, v, o);
                const Derivs damp = exp(-0.1 * Derivs::squared_norm(x, o));
                return sin(arg) * damp + 0.3 * cos(Derivs::coordinate(x, n - 1, o));
            },
            name);
    }
    if (name == "poly3") {
        return Field::from_jet(
            [n](const Vec& x, int o) {
                const Derivs x1 = Derivs::coordinate(x, 0, o);
                const Derivs xn = Derivs::coordinate(x, n - 1, o);
                return 0.5 + (0.1 * (x1 * x1 * x1) + (-1.0) * (x1 * xn));
            },
            name);
    }
    if (name == "step") {
        return Field::from_jet([](const Vec& x, int o) { return tanh(1e5 * Derivs::coordinate(x, 0, o)); }, name);
    }
    if (name == "kink") {
        return Field::from_jet(
            [](const Vec& x, int o) {
                const Derivs x1 = Derivs::coordinate(x, 0, o);
                return sqrt(1e-10 + x1 * x1);
            },
            name);
    }
    if (name == "compact_bump") {
        return Field::from_jet([](const Vec& x, int o) { return detail::compact_bump_jet(x, o); }, name);
    }
    throw ConfigError("f: unknown test function '" + name + "'");
}

/// Smooth fields used for derivative and composition checks.
inline std::vector<Field> smooth_bank(int n) {
    std::vector<Field> out;
    for (const char* name : {"cos", "bump", "mixed", "poly3", "quadratic"}) out.push_back(bank_field(name, n));
    return out;
}

/// p(x)·g(x) as a field with exact jets.
inline Field weighted_product(const WeightSpec& w, std::function<Derivs(const Vec&, int)> g, std::string name) {
    return Field::from_jet([w, g](const Vec& x, int o) { return weight_jet(w, x, o) * g(x, o); }, std::move(name));
}

/// Ten nonnegative fields with 0 ≤ f ≤ p: p·(1 + cos(k x₁ + c))/2 for five
/// frequencies and p·exp(−|x − c|²) for five centres.
inline std::vector<Field> unit_ball_bank(int n, const WeightSpec& w) {
    std::vector<Field> out;
    for (int k = 1; k <= 5; ++k) {
        const double c = 0.7 * k;
        out.push_back(weighted_product(
            w,
            [k, c](const Vec& x, int o) {
                return 0.5 + 0.5 * cos(static_cast<double>(k) * Derivs::coordinate(x, 0, o) + c);
            },
            "wave" + std::to_string(k)));
    }
    for (int k = 1; k <= 5; ++k) {
        const Vec c = detail::bank_centre(n, 0.5 * k);
        out.push_back(weighted_product(
            w, [c](const Vec& x, int o) { return exp(-1.0 * Derivs::squared_norm(Vec(x - c), o)); },
            "pbump" + std::to_string(k)));
    }
    return out;
}

/// Fields in C_p with bounded weighted derivatives up to order 3.
inline std::vector<Field> equivalence_bank(int n, const WeightSpec& w) {
    std::vector<Field> out;
    out.push_back(weighted_product(w, [n](const Vec&, int o) { return Derivs::constant(n, o, 1.0); }, "p"));
    out.push_back(weighted_product(w, [](const Vec& x, int o) { return sin(Derivs::coordinate(x, 0, o)); }, "p_sin"));
    out.push_back(weighted_product(
        w, [n](const Vec& x, int o) { return cos(0.5 * detail::linear_jet(x, detail::bank_direction(n), o)); },
        "p_cos"));
    out.push_back(weighted_product(w, [](const Vec& x, int o) { return tanh(Derivs::coordinate(x, 0, o)); }, "p_tanh"));
    out.push_back(bank_field("bump", n));
    out.push_back(bank_field("mixed", n));
    out.push_back(bank_field("cos", n));
    return out;
}

}  // namespace ouevo
