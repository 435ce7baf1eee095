#pragma once

#include "ouevo/coeffs.hpp"
#include "ouevo/errors.hpp"
#include "ouevo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ouevo {

/// Propagator U(t,s), shift g(t,s) and covariance Q(t,s) for one pair s ≤ t.
struct FlowState {
    double s = 0.0;
    double t = 0.0;
    Mat U;
    Vec g;
    Mat Qc;
    double lambda_max = 0.0;  ///< largest eigenvalue of Qc
    double lambda_min = 0.0;  ///< smallest eigenvalue of Qc
    int steps = 0;            ///< accepted integrator steps

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(g.size()); }
    [[nodiscard]] double delta() const noexcept { return t - s; }
    /// Mean a(s,t,x) = U(t,s)x + g(t,s).
    [[nodiscard]] Vec mean(const Vec& x) const { return U * x + g; }
};

struct FlowOptions {
    double tol = 1e-10;
    double initial_step = 0.05;
    long max_steps = 2'000'000;
};

namespace detail {

struct FlowVars {
    Mat U;
    Vec g;
    Mat Q;

    FlowVars& axpy(double a, const FlowVars& o) {
        U += a * o.U;
        g += a * o.g;
        Q += a * o.Q;
        return *this;
    }
    [[nodiscard]] double max_abs() const {
        return std::max({ouevo::max_abs(U), g.size() ? g.cwiseAbs().maxCoeff() : 0.0, ouevo::max_abs(Q)});
    }
};

inline FlowVars flow_rhs(const CoefficientModel& model, double t, const FlowVars& y) {
    const Mat a = model.A_unchecked(t);
    FlowVars d;
    d.U = a * y.U;
    d.g = a * y.g + model.h_unchecked(t);
    d.Q = a * y.Q + y.Q * a.transpose() + model.Q_unchecked(t);
    return d;
}

inline FlowVars rk4_step(const CoefficientModel& model, double t, const FlowVars& y, double h) {
    const FlowVars k1 = flow_rhs(model, t, y);
    FlowVars y2 = y;
    y2.axpy(0.5 * h, k1);
    const FlowVars k2 = flow_rhs(model, t + 0.5 * h, y2);
    FlowVars y3 = y;
    y3.axpy(0.5 * h, k2);
    const FlowVars k3 = flow_rhs(model, t + 0.5 * h, y3);
    FlowVars y4 = y;
    y4.axpy(h, k3);
    const FlowVars k4 = flow_rhs(model, t + h, y4);
    FlowVars out = y;
    out.axpy(h / 6.0, k1).axpy(h / 3.0, k2).axpy(h / 3.0, k3).axpy(h / 6.0, k4);
    return out;
}

inline double diff_max(const FlowVars& a, const FlowVars& b) {
    double d = ouevo::max_abs(a.U - b.U);
    if (a.g.size()) d = std::max(d, (a.g - b.g).cwiseAbs().maxCoeff());
    return std::max(d, ouevo::max_abs(a.Q - b.Q));
}

}  // namespace detail

/// Integrates ∂ₜU = A U, ∂ₜg = A g + h, ∂ₜQc = A Qc + Qc Aᵀ + Q from (I, 0, 0) at
/// time s up to time t with classical RK4 and step-doubling error control
/// (local Richardson-extrapolated error ≤ tol·(1 + |state|)). Qc is symmetrised
/// after every accepted step.
inline FlowState flow(const CoefficientModel& model, double s, double t, const FlowOptions& opts = {}) {
    model.check_time(s);
    model.check_time(t);
    if (t < s) throw PreconditionError("flow requires s <= t");
    const int n = model.dimension();

    detail::FlowVars y{identity(n), zeros(n), Mat::Zero(n, n)};
    int steps = 0;
    if (t > s) {
        double now = s;
        double h = std::min(opts.initial_step, t - s);
        const double min_step = 1e-14 * (1.0 + std::abs(s) + std::abs(t));
        long attempts = 0;
        while (now < t) {
            if (++attempts > opts.max_steps) throw StepFailure("step budget exhausted before reaching t");
            const bool last = now + h >= t;
            if (last) h = t - now;
            const detail::FlowVars full = detail::rk4_step(model, now, y, h);
            const detail::FlowVars half = detail::rk4_step(model, now + 0.5 * h, detail::rk4_step(model, now, y, 0.5 * h), 0.5 * h);
            const double err = detail::diff_max(full, half) / 15.0;
            const double scale = opts.tol * (1.0 + half.max_abs());
            if (!std::isfinite(err)) throw StepFailure("non-finite state at t = " + std::to_string(now));
            if (err <= scale) {
                y = half;
                y.axpy(1.0 / 15.0, half).axpy(-1.0 / 15.0, full);
                y.Q = 0.5 * (y.Q + y.Q.transpose());
                now = last ? t : now + h;
                ++steps;
            }
            const double factor = err > 0.0 ? 0.9 * std::pow(scale / err, 0.2) : 4.0;
            h *= std::clamp(factor, 0.1, 4.0);
            if (h < min_step && now < t) throw StepFailure("step size underflow at t = " + std::to_string(now));
        }
    }

    FlowState out;
    out.s = s;
    out.t = t;
    out.U = std::move(y.U);
    out.g = std::move(y.g);
    out.Qc = std::move(y.Q);
    const SymEigen e = sym_eigen(out.Qc);
    out.lambda_min = e.values.minCoeff();
    out.lambda_max = e.values.maxCoeff();
    out.steps = steps;
    return out;
}

/// ‖(U(t,s+δ) − U(t,s−δ))/(2δ) + U(t,s)A(s)‖, a self-test of ∂ₛU = −U A(s).
/// Central differences make it O(δ²); the flows use a tolerance well below δ³.
inline double backward_derivative_check(const CoefficientModel& model, double s, double t, double delta = 1e-3) {
    if (!(s < t)) throw PreconditionError("backward_derivative_check requires s < t");
    delta = std::min(delta, 0.5 * (t - s));
    model.check_time(s - delta);
    const FlowOptions tight{1e-14};
    const Mat plus = flow(model, s + delta, t, tight).U;
    const Mat minus = flow(model, s - delta, t, tight).U;
    const Mat centre = flow(model, s, t, tight).U;
    return spectral_norm((plus - minus) / (2.0 * delta) + centre * model.A(s));
}

/// Constants (M, ω, H) with ‖U(t,s)‖ ≤ M e^{−ω(t−s)} and
/// ‖Q(t,s)^{−1/2}‖ ≤ H e^{−ω₋(t−s)} / (t−s)^{1/2} on the sampled pairs.
struct DecayConstants {
    double M = 1.0;
    double omega = 0.0;
    double omega_minus = 0.0;  ///< min{0, ω}
    double H = 1.0;
    /// Gronwall worst case: ω = −‖A‖∞ with ‖A‖ ≤ N·A_∞, M = 1.
    double omega_worst = 0.0;
    double fit_intercept = 0.0;  ///< least-squares log M before inflation
    std::size_t samples = 0;
};

/// Least-squares fit of log‖U(t,s)‖ = log M − ω(t−s); M is then inflated so every
/// sample satisfies the bound. Needs ≥ 8 pairs spanning a decade of t − s.
inline DecayConstants fit_decay_constants(const CoefficientModel& model,
                                          const std::vector<std::pair<double, double>>& pairs,
                                          const FlowOptions& opts = {}) {
    if (pairs.size() < 8) throw InsufficientSamples("need at least 8 (s,t) pairs, got " + std::to_string(pairs.size()));
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = 0.0;
    for (const auto& [s, t] : pairs) {
        if (!(t > s)) throw InsufficientSamples("every pair needs s < t");
        dmin = std::min(dmin, t - s);
        dmax = std::max(dmax, t - s);
    }
    if (dmax < 10.0 * dmin) throw InsufficientSamples("sampled t - s must span at least one decade");

    std::vector<FlowState> flows;
    flows.reserve(pairs.size());
    for (const auto& [s, t] : pairs) flows.push_back(flow(model, s, t, opts));

    // Regression of y = log‖U‖ on d = t − s: y = b − ω d.
    double sd = 0, sy = 0, sdd = 0, sdy = 0;
    const double k = static_cast<double>(flows.size());
    std::vector<double> logs;
    for (const auto& f : flows) {
        const double d = f.delta();
        const double y = std::log(spectral_norm(f.U));
        logs.push_back(y);
        sd += d;
        sy += y;
        sdd += d * d;
        sdy += d * y;
    }
    const double denom = k * sdd - sd * sd;
    const double slope = (k * sdy - sd * sy) / denom;
    const double intercept = (sy - slope * sd) / k;

    DecayConstants c;
    c.omega = -slope;
    c.fit_intercept = intercept;
    c.omega_minus = std::min(0.0, c.omega);
    double log_m = std::max(0.0, intercept);
    for (std::size_t i = 0; i < flows.size(); ++i) {
        log_m = std::max(log_m, logs[i] + c.omega * flows[i].delta());
    }
    c.M = std::exp(log_m);

    double h = 0.0;
    for (const auto& f : flows) {
        if (!(f.lambda_min > 0.0)) throw SingularCovariance("Q(t,s) not positive definite for t - s = " + std::to_string(f.delta()));
        const double inv_sqrt_norm = 1.0 / std::sqrt(f.lambda_min);
        h = std::max(h, inv_sqrt_norm * std::sqrt(f.delta()) * std::exp(c.omega_minus * f.delta()));
    }
    c.H = h;

    double a_inf = 0.0;
    const TimeDomain& dom = model.time_domain();
    for (int i = 0; i <= 64; ++i) {
        const double t = dom.t_min + (dom.t_max - dom.t_min) * i / 64.0;
        a_inf = std::max(a_inf, max_abs(model.A(t)));
    }
    c.omega_worst = -model.dimension() * a_inf;
    c.samples = flows.size();
    return c;
}

/// Default sampling of (s,t) pairs: t − s log-spaced over [dmin, dmax] with
/// start times spread across the domain.
inline std::vector<std::pair<double, double>> default_decay_pairs(const CoefficientModel& model, double dmin = 1e-2,
                                                                  double dmax = 2.0, int count = 16) {
    const TimeDomain& dom = model.time_domain();
    dmax = std::min(dmax, 0.5 * (dom.t_max - dom.t_min));
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < count; ++i) {
        const double frac = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
        const double d = dmin * std::pow(dmax / dmin, frac);
        const double room = dom.t_max - dom.t_min - d;
        const double s = dom.t_min + room * (0.1 + 0.8 * std::fmod(0.618033988749895 * (i + 1), 1.0));
        pairs.emplace_back(s, s + d);
    }
    return pairs;
}

}  // namespace ouevo
