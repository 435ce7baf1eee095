#pragma once

// Independent reference values for the test suites. Nothing here calls the
// flow integrator or the quadrature engine under test.

#include "ouevo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using ouevo::Mat;
using ouevo::Vec;

/// dX = aX dt + √q dW in one dimension, held for a time Δ.
struct ScalarOu {
    double a = -1.0;
    double q = 2.0;

    [[nodiscard]] double U(double delta) const { return std::exp(a * delta); }
    [[nodiscard]] double Qc(double delta) const {
        if (a == 0.0) return q * delta;
        return q * std::expm1(2.0 * a * delta) / (2.0 * a);
    }
};

/// A = [[0,1],[-1,0]]: U(Δ) is rotation by −Δ, and Q = I gives Qc = Δ·I.
inline Mat rotation_U(double delta) {
    Mat u(2, 2);
    u << std::cos(delta), std::sin(delta), -std::sin(delta), std::cos(delta);
    return u;
}

/// Composite Gauss–Legendre rule on [lo, hi] with 5 nodes per panel.
inline double integrate(const std::function<double(double)>& f, double lo, double hi, int panels = 64) {
    static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                0.9061798459386640};
    static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                0.2369268850561891};
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * h;
        for (int k = 0; k < 5; ++k) total += 0.5 * h * w[k] * f(mid + 0.5 * h * x[k]);
    }
    return total;
}

/// Diagonal time-dependent model a_i(t), q_i(t), h_i(t): U, g and Qc from the
/// exact exponent ∫a and quadrature of the variation-of-constants integrals.
struct DiagonalModel {
    std::function<double(int, double)> a;
    std::function<double(int, double)> a_integral;  ///< ∫_s^t a_i via closed form: a_integral(i,t) − a_integral(i,s)
    std::function<double(int, double)> q;
    std::function<double(int, double)> h;
    int n = 1;

    [[nodiscard]] double exponent(int i, double s, double t) const { return a_integral(i, t) - a_integral(i, s); }
    [[nodiscard]] Mat U(double s, double t) const {
        Mat u = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) u(i, i) = std::exp(exponent(i, s, t));
        return u;
    }
    [[nodiscard]] Vec g(double s, double t) const {
        Vec v(n);
        for (int i = 0; i < n; ++i)
            v(i) = integrate([&](double r) { return std::exp(exponent(i, r, t)) * h(i, r); }, s, t);
        return v;
    }
    [[nodiscard]] Mat Qc(double s, double t) const {
        Mat m = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            m(i, i) = integrate([&](double r) { return std::exp(2.0 * exponent(i, r, t)) * q(i, r); }, s, t);
        return m;
    }
};

/// E|X|^2 and E|X|^4 for X ~ N(0, Σ).
inline double gaussian_moment2(const Mat& cov) { return cov.trace(); }
inline double gaussian_moment4(const Mat& cov) {
    const double tr = cov.trace();
    return tr * tr + 2.0 * (cov * cov).trace();
}

/// Thomas algorithm for a tridiagonal system; sub[0] and sup[n−1] are ignored.
inline std::vector<double> tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                                       std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    return x;
}

/// Crank–Nicolson solver for the one-dimensional backward problem
///   ∂_s u + ½q(s)u'' + (a(s)x + h(s))u' + f(s,x) = 0,  u(T) = φ,
/// on [−L, L]. At the boundary the second derivative is dropped and the
/// drift term uses a one-sided difference into the interior.
struct CrankNicolson1D {
    std::function<double(double)> a, q, h;
    std::function<double(double)> phi;
    std::function<double(double, double)> f;  ///< f(s, x); may be empty
    double L = 8.0;
    int cells = 1600;
    int steps = 400;

    /// u(s, ·) on the grid x_j = −L + j·dx.
    [[nodiscard]] std::vector<double> solve(double s, double T) const {
        const int m = cells + 1;
        const double dx = 2.0 * L / cells;
        const double dt = (T - s) / steps;
        std::vector<double> x(m), u(m);
        for (int j = 0; j < m; ++j) {
            x[j] = -L + j * dx;
            u[j] = phi(x[j]);
        }
        // Spatial operator at time r as tridiagonal rows (lo, mid, hi).
        auto op = [&](double r, std::vector<double>& lo, std::vector<double>& mid, std::vector<double>& hi) {
            lo.assign(m, 0.0);
            mid.assign(m, 0.0);
            hi.assign(m, 0.0);
            const double ar = a(r), qr = q(r), hr = h(r);
            for (int j = 0; j < m; ++j) {
                const double b = ar * x[j] + hr;
                if (j == 0 || j == m - 1) {
                    if (j == 0 && b > 0.0) {
                        mid[j] = -b / dx;
                        hi[j] = b / dx;
                    } else if (j == m - 1 && b < 0.0) {
                        mid[j] = b / dx;
                        lo[j] = -b / dx;
                    }
                    continue;
                }
                const double diff = 0.5 * qr / (dx * dx);
                lo[j] = diff - 0.5 * b / dx;
                mid[j] = -2.0 * diff;
                hi[j] = diff + 0.5 * b / dx;
            }
        };
        std::vector<double> lo, mid, hi, lo2, mid2, hi2;
        for (int k = steps; k > 0; --k) {
            const double r1 = s + k * dt, r0 = r1 - dt;
            op(r1, lo, mid, hi);
            op(r0, lo2, mid2, hi2);
            std::vector<double> rhs(m);
            for (int j = 0; j < m; ++j) {
                double lu = mid[j] * u[j];
                if (j > 0) lu += lo[j] * u[j - 1];
                if (j < m - 1) lu += hi[j] * u[j + 1];
                rhs[j] = u[j] + 0.5 * dt * lu;
                if (f) rhs[j] += 0.5 * dt * (f(r1, x[j]) + f(r0, x[j]));
            }
            std::vector<double> sub(m), diag(m), sup(m);
            for (int j = 0; j < m; ++j) {
                sub[j] = -0.5 * dt * lo2[j];
                diag[j] = 1.0 - 0.5 * dt * mid2[j];
                sup[j] = -0.5 * dt * hi2[j];
            }
            u = tridiagonal(sub, diag, sup, rhs);
        }
        return u;
    }

    /// Linear interpolation of a grid solution at x.
    [[nodiscard]] double at(const std::vector<double>& u, double xq) const {
        const double dx = 2.0 * L / cells;
        const double pos = (xq + L) / dx;
        const int j = std::clamp(static_cast<int>(std::floor(pos)), 0, cells - 1);
        const double w = pos - j;
        return (1.0 - w) * u[j] + w * u[j + 1];
    }
};

/// Central differences of a scalar function: gradient and Hessian with step h.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        Vec p = x, m = x;
        p(i) += h;
        m(i) -= h;
        g(i) = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
}

inline Mat fd_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
    const int n = static_cast<int>(x.size());
    Mat H(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Vec pp = x, pm = x, mp = x, mm = x;
            pp(i) += h;
            pp(j) += h;
            pm(i) += h;
            pm(j) -= h;
            mp(i) -= h;
            mp(j) += h;
            mm(i) -= h;
            mm(j) -= h;
            H(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
        }
    return H;
}

}  // namespace oracle
