#pragma once

#include "ouevo/errors.hpp"
#include "ouevo/linalg.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

namespace ouevo {

/// Value and spatial derivatives up to a given order (≤ 3) at one point.
struct Derivs {
    int order = 0;
    double value = 0.0;
    Vec grad;
    Mat hess;
    Tensor3 third;

    Derivs() = default;
    Derivs(int n, int ord, double v = 0.0) : order(ord), value(v) {
        if (ord < 0 || ord > 3) throw PreconditionError("derivative order must lie in [0, 3]");
        if (ord >= 1) grad = Vec::Zero(n);
        if (ord >= 2) hess = Mat::Zero(n, n);
        if (ord >= 3) third = Tensor3(n);
    }

    [[nodiscard]] int dim() const noexcept {
        return order >= 1 ? static_cast<int>(grad.size()) : dim_hint;
    }
    int dim_hint = 0;

    static Derivs constant(int n, int ord, double c) {
        Derivs d(n, ord, c);
        d.dim_hint = n;
        return d;
    }

    /// The coordinate function x ↦ x_i.
    static Derivs coordinate(const Vec& x, int i, int ord) {
        Derivs d(static_cast<int>(x.size()), ord, x(i));
        d.dim_hint = static_cast<int>(x.size());
        if (ord >= 1) d.grad(i) = 1.0;
        return d;
    }

    /// x ↦ |x|².
    static Derivs squared_norm(const Vec& x, int ord) {
        const int n = static_cast<int>(x.size());
        Derivs d(n, ord, x.squaredNorm());
        d.dim_hint = n;
        if (ord >= 1) d.grad = 2.0 * x;
        if (ord >= 2) d.hess = 2.0 * identity(n);
        return d;
    }

    Derivs& operator+=(const Derivs& o) {
        value += o.value;
        if (order >= 1) grad += o.grad;
        if (order >= 2) hess += o.hess;
        if (order >= 3) {
            for (std::size_t i = 0; i < third.data().size(); ++i) third.data()[i] += o.third.data()[i];
        }
        return *this;
    }

    Derivs& operator*=(double c) {
        value *= c;
        if (order >= 1) grad *= c;
        if (order >= 2) hess *= c;
        if (order >= 3) {
            for (double& v : third.data()) v *= c;
        }
        return *this;
    }

    /// D^β of this quantity for a multi-index given as a list of ≤ 3 coordinates.
    [[nodiscard]] double component(const int* idx, int len) const {
        switch (len) {
            case 0: return value;
            case 1: return grad(idx[0]);
            case 2: return hess(idx[0], idx[1]);
            default: return third(idx[0], idx[1], idx[2]);
        }
    }
};

inline Derivs operator+(Derivs a, const Derivs& b) { return a += b; }
inline Derivs operator-(Derivs a, const Derivs& b) {
    Derivs nb = b;
    nb *= -1.0;
    return a += nb;
}
inline Derivs operator*(double c, Derivs a) { return a *= c; }
inline Derivs operator+(double c, Derivs a) {
    a.value += c;
    return a;
}
inline Derivs operator+(Derivs a, double c) { return c + std::move(a); }

/// Leibniz rule for the product of two derivative jets.
inline Derivs operator*(const Derivs& f, const Derivs& g) {
    const int ord = std::min(f.order, g.order);
    const int n = ord >= 1 ? static_cast<int>(f.grad.size()) : std::max(f.dim(), g.dim());
    Derivs r(n, ord, f.value * g.value);
    r.dim_hint = n;
    if (ord >= 1) r.grad = f.grad * g.value + f.value * g.grad;
    if (ord >= 2) {
        r.hess = f.hess * g.value + f.value * g.hess + f.grad * g.grad.transpose() + g.grad * f.grad.transpose();
    }
    if (ord >= 3) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    r.third(i, j, k) = f.third(i, j, k) * g.value + f.value * g.third(i, j, k) +
                                       f.hess(i, j) * g.grad(k) + f.hess(i, k) * g.grad(j) +
                                       f.hess(j, k) * g.grad(i) + f.grad(i) * g.hess(j, k) +
                                       f.grad(j) * g.hess(i, k) + f.grad(k) * g.hess(i, j);
                }
    }
    return r;
}

/// Chain rule h∘u for a scalar function with derivatives h = {h, h', h'', h'''} at u.value.
inline Derivs compose(const Derivs& u, const std::array<double, 4>& h) {
    const int n = u.dim();
    Derivs r(n, u.order, h[0]);
    r.dim_hint = n;
    if (u.order >= 1) r.grad = h[1] * u.grad;
    if (u.order >= 2) r.hess = h[2] * u.grad * u.grad.transpose() + h[1] * u.hess;
    if (u.order >= 3) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double gi = u.grad(i), gj = u.grad(j), gk = u.grad(k);
                    r.third(i, j, k) = h[3] * gi * gj * gk +
                                       h[2] * (u.hess(i, j) * gk + u.hess(i, k) * gj + u.hess(j, k) * gi) +
                                       h[1] * u.third(i, j, k);
                }
    }
    return r;
}

inline Derivs sin(const Derivs& u) {
    const double s = std::sin(u.value), c = std::cos(u.value);
    return compose(u, {s, c, -s, -c});
}
inline Derivs cos(const Derivs& u) {
    const double s = std::sin(u.value), c = std::cos(u.value);
    return compose(u, {c, -s, -c, s});
}
inline Derivs exp(const Derivs& u) {
    const double e = std::exp(u.value);
    return compose(u, {e, e, e, e});
}
inline Derivs tanh(const Derivs& u) {
    const double t = std::tanh(u.value);
    const double d1 = 1.0 - t * t;
    return compose(u, {t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0)});
}
/// u^a for u > 0.
inline Derivs pow(const Derivs& u, double a) {
    const double v = u.value;
    return compose(u, {std::pow(v, a), a * std::pow(v, a - 1.0), a * (a - 1.0) * std::pow(v, a - 2.0),
                       a * (a - 1.0) * (a - 2.0) * std::pow(v, a - 3.0)});
}
inline Derivs sqrt(const Derivs& u) { return pow(u, 0.5); }
inline Derivs reciprocal(const Derivs& u) {
    const double v = u.value;
    return compose(u, {1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)});
}

using ScalarFn = std::function<double(const Vec&)>;
using DerivsFn = std::function<Derivs(const Vec&, int)>;

/// A scalar field on ℝᴺ, optionally with exact derivatives up to order 3.
struct Field {
    ScalarFn value;
    DerivsFn derivs;  ///< empty when no exact derivatives are known
    std::string name = "field";

    double operator()(const Vec& x) const { return value(x); }
    [[nodiscard]] bool has_derivatives() const noexcept { return static_cast<bool>(derivs); }

    /// Builds a field from a jet-valued function; the value path uses order 0.
    static Field from_jet(std::function<Derivs(const Vec&, int)> jet, std::string name) {
        Field f;
        f.value = [jet](const Vec& x) { return jet(x, 0).value; };
        f.derivs = std::move(jet);
        f.name = std::move(name);
        return f;
    }

    static Field plain(ScalarFn fn, std::string name) {
        Field f;
        f.value = std::move(fn);
        f.name = std::move(name);
        return f;
    }

    [[nodiscard]] Field scaled(double c) const {
        Field f = *this;
        const ScalarFn v = value;
        f.value = [v, c](const Vec& x) { return c * v(x); };
        if (derivs) {
            const DerivsFn d = derivs;
            f.derivs = [d, c](const Vec& x, int o) {
                Derivs r = d(x, o);
                r *= c;
                return r;
            };
        }
        return f;
    }
};

/// Central finite-difference jet of a scalar function: steps 1e-5, 1e-4, 1e-3
/// for orders 1, 2, 3.
inline Derivs finite_difference_derivs(const ScalarFn& f, const Vec& x, int order) {
    const int n = static_cast<int>(x.size());
    Derivs d(n, order, f(x));
    d.dim_hint = n;
    auto shifted = [&](std::initializer_list<std::pair<int, double>> moves) {
        Vec y = x;
        for (const auto& [i, h] : moves) y(i) += h;
        return f(y);
    };
    if (order >= 1) {
        const double h = 1e-5;
        for (int i = 0; i < n; ++i) d.grad(i) = (shifted({{i, h}}) - shifted({{i, -h}})) / (2 * h);
    }
    if (order >= 2) {
        const double h = 1e-4;
        for (int i = 0; i < n; ++i) {
            d.hess(i, i) = (shifted({{i, h}}) - 2 * d.value + shifted({{i, -h}})) / (h * h);
            for (int j = i + 1; j < n; ++j) {
                d.hess(i, j) = d.hess(j, i) = (shifted({{i, h}, {j, h}}) - shifted({{i, h}, {j, -h}}) -
                                               shifted({{i, -h}, {j, h}}) + shifted({{i, -h}, {j, -h}})) /
                                              (4 * h * h);
            }
        }
    }
    if (order >= 3) {
        const double h = 1e-3;
        // Third derivatives as central differences of the second-difference Hessian.
        auto hess_at = [&](int k, double dir) {
            Vec y = x;
            y(k) += dir;
            Mat m(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    Vec a = y, b = y, c = y, e = y;
                    a(i) += h, a(j) += h;
                    b(i) += h, b(j) -= h;
                    c(i) -= h, c(j) += h;
                    e(i) -= h, e(j) -= h;
                    m(i, j) = (f(a) - f(b) - f(c) + f(e)) / (4 * h * h);
                }
            return m;
        };
        for (int k = 0; k < n; ++k) {
            const Mat diff = (hess_at(k, h) - hess_at(k, -h)) / (2 * h);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) d.third(i, j, k) = diff(i, j);
        }
    }
    return d;
}

/// Exact jet when available, finite differences otherwise.
inline Derivs field_derivs(const Field& f, const Vec& x, int order) {
    if (f.derivs) return f.derivs(x, order);
    return finite_difference_derivs(f.value, x, order);
}

}  // namespace ouevo
