#pragma once

#include "ouevo/coeffs.hpp"
#include "ouevo/derivs.hpp"
#include "ouevo/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ouevo {

/// p(x) for the given weight family.
inline double weight_value(const WeightSpec& w, const Vec& x) {
    const double u = x.squaredNorm();
    if (w.is_exponential()) return std::exp(std::pow(1.0 + u, w.gamma));
    return 1.0 + std::pow(u, w.m);
}

inline double log_weight(const WeightSpec& w, const Vec& x) {
    const double u = x.squaredNorm();
    if (w.is_exponential()) return std::pow(1.0 + u, w.gamma);
    return std::log1p(std::pow(u, w.m));
}

namespace detail {

/// {u^k, (u^k)', (u^k)'', (u^k)'''} with vanishing coefficients dropped so u = 0 is safe.
inline std::array<double, 4> power_jet(double u, int k) {
    std::array<double, 4> h{};
    double coeff = 1.0;
    for (int d = 0; d < 4; ++d) {
        const int e = k - d;
        h[d] = coeff == 0.0 ? 0.0 : coeff * std::pow(u, e);
        coeff *= e;
    }
    return h;
}

}  // namespace detail

/// Jet of p at x.
inline Derivs weight_jet(const WeightSpec& w, const Vec& x, int order) {
    const Derivs u = Derivs::squared_norm(x, order);
    if (w.is_exponential()) return exp(pow(1.0 + u, w.gamma));
    std::array<double, 4> h = detail::power_jet(u.value, w.m);
    h[0] += 1.0;
    return compose(u, h);
}

/// Jet of 1/p at x.
inline Derivs inverse_weight_jet(const WeightSpec& w, const Vec& x, int order) {
    const Derivs u = Derivs::squared_norm(x, order);
    if (w.is_exponential()) return exp(-1.0 * pow(1.0 + u, w.gamma));
    std::array<double, 4> h = detail::power_jet(u.value, w.m);
    h[0] += 1.0;
    return reciprocal(compose(u, h));
}

/// A field together with the weight defining its ambient space.
struct WeightedFunction {
    Field f;
    WeightSpec weight;
    int dim = 1;

    [[nodiscard]] double ratio(const Vec& x) const { return f(x) / weight_value(weight, x); }
};

struct NormEstimate {
    enum class Kind { Sup, Holder, Full };

    double value = 0.0;
    double radius = 0.0;
    std::size_t points = 0;
    Kind kind = Kind::Sup;
    double alpha = 0.0;
    Vec witness;  ///< point (or first point of the pair) attaining the maximum
};

/// Radii R, R/2, R/4, … down to the first level below 1/4 (at least R itself).
/// Doubling R only adds levels, so point sets are nested along dyadic chains.
inline std::vector<double> radius_levels(double R) {
    std::vector<double> out{R};
    while (out.back() / 2.0 >= 0.25) out.push_back(out.back() / 2.0);
    return out;
}

/// Evaluation points in B(0,R): the origin, ± axis points and n Halton points
/// on every radius level. Nested in n and along dyadic chains of R.
inline std::vector<Vec> norm_points(int dim, double R, std::size_t n) {
    if (!(R > 0.0) || n < 1) throw PreconditionError("norm grid needs R > 0 and n >= 1");
    const std::vector<Vec> unit = halton_ball(dim, n);
    std::vector<Vec> out{zeros(dim)};
    for (double rho : radius_levels(R)) {
        for (int i = 0; i < dim; ++i) {
            Vec e = zeros(dim);
            e(i) = rho;
            out.push_back(e);
            out.push_back(-e);
        }
        for (const auto& u : unit) out.push_back(rho * u);
    }
    return out;
}

namespace detail {

inline double checked(double v, const Vec& x, const std::string& what) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << what << " is not finite at x = " << x.transpose();
        throw EvaluationFailure(os.str());
    }
    return v;
}

}  // namespace detail

/// max |g(x)| over the given points.
template <typename G>
NormEstimate sup_over(const std::vector<Vec>& pts, G&& g) {
    NormEstimate e;
    e.points = pts.size();
    e.witness = pts.front();
    for (const auto& x : pts) {
        const double v = std::abs(detail::checked(g(x), x, "function value"));
        if (v > e.value) {
            e.value = v;
            e.witness = x;
        }
    }
    return e;
}

/// ‖f‖_{C_p} estimated as max |f|/p over norm_points(R, n).
inline NormEstimate weighted_sup_norm(const WeightedFunction& wf, double R, std::size_t n = 256) {
    NormEstimate e = sup_over(norm_points(wf.dim, R, n), [&](const Vec& x) { return wf.ratio(x); });
    e.radius = R;
    return e;
}

/// Pair geometry for Hölder quotients.
struct HolderPairs {
    std::vector<Vec> centers;
    std::vector<Vec> directions;
    std::vector<double> separations;

    [[nodiscard]] std::size_t size() const { return centers.size() * directions.size() * separations.size(); }
};

/// Centers from norm_points(R), ± axes plus Halton directions, and 13
/// separations log-spaced over [1e-4, 1], sized to roughly `budget` pairs.
inline HolderPairs holder_pairs(int dim, double R, std::size_t budget = 20000) {
    HolderPairs p;
    for (int k = 0; k <= 12; ++k) p.separations.push_back(std::pow(10.0, -4.0 + k / 3.0));
    p.directions = unit_directions(dim, static_cast<std::size_t>(4 * dim));
    const std::size_t levels = radius_levels(R).size();
    const std::size_t per_center = p.separations.size() * p.directions.size();
    const std::size_t wanted = std::max<std::size_t>(1, budget / per_center);
    const std::size_t fixed = 1 + levels * 2 * dim;
    const std::size_t n = wanted > fixed ? std::max<std::size_t>(1, (wanted - fixed) / levels) : 1;
    p.centers = norm_points(dim, R, n);
    return p;
}

/// max |g(x) − g(y)| / |x − y|^α over the pair set.
template <typename G>
NormEstimate holder_over(const HolderPairs& pairs, double alpha, G&& g) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("Hölder exponent must lie in (0, 1)");
    NormEstimate e;
    e.kind = NormEstimate::Kind::Holder;
    e.alpha = alpha;
    e.points = pairs.size();
    e.witness = pairs.centers.front();
    for (const auto& x : pairs.centers) {
        const double gx = detail::checked(g(x), x, "function value");
        for (const auto& d : pairs.directions) {
            for (double h : pairs.separations) {
                const Vec y = x + h * d;
                const double q = std::abs(gx - detail::checked(g(y), y, "function value")) / std::pow(h, alpha);
                if (q > e.value) {
                    e.value = q;
                    e.witness = x;
                }
            }
        }
    }
    return e;
}

/// [f/p]_{C_b^α} estimated over holder_pairs(R, budget).
inline NormEstimate holder_seminorm(const WeightedFunction& wf, double alpha, double R, std::size_t pair_budget = 20000) {
    NormEstimate e = holder_over(holder_pairs(wf.dim, R, pair_budget), alpha, [&](const Vec& x) { return wf.ratio(x); });
    e.radius = R;
    return e;
}

/// Multi-indices of order k as nondecreasing coordinate lists.
inline std::vector<std::vector<int>> multi_indices(int dim, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < dim; ++i) {
            cur.push_back(i);
            self(self, i);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

/// Σ_{|β| ≤ θ} max |D^β f|/p over the points.
inline double derivative_sup_sum(const WeightedFunction& wf, int theta, const std::vector<Vec>& pts) {
    double total = 0.0;
    std::vector<double> best;
    std::vector<std::vector<int>> all;
    for (int k = 0; k <= theta; ++k) {
        for (auto& b : multi_indices(wf.dim, k)) all.push_back(std::move(b));
    }
    best.assign(all.size(), 0.0);
    for (const auto& x : pts) {
        const Derivs d = field_derivs(wf.f, x, theta);
        const double p = weight_value(wf.weight, x);
        for (std::size_t b = 0; b < all.size(); ++b) {
            const double v = detail::checked(d.component(all[b].data(), static_cast<int>(all[b].size())), x, "derivative");
            best[b] = std::max(best[b], std::abs(v) / p);
        }
    }
    for (double v : best) total += v;
    return total;
}

/// Σ_{|β| ≤ θ} max |D^β(f/p)| over the points.
inline double quotient_derivative_sup_sum(const WeightedFunction& wf, int theta, const std::vector<Vec>& pts) {
    std::vector<std::vector<int>> all;
    for (int k = 0; k <= theta; ++k) {
        for (auto& b : multi_indices(wf.dim, k)) all.push_back(std::move(b));
    }
    std::vector<double> best(all.size(), 0.0);
    for (const auto& x : pts) {
        const Derivs g = field_derivs(wf.f, x, theta) * inverse_weight_jet(wf.weight, x, theta);
        for (std::size_t b = 0; b < all.size(); ++b) {
            const double v = detail::checked(g.component(all[b].data(), static_cast<int>(all[b].size())), x, "derivative");
            best[b] = std::max(best[b], std::abs(v));
        }
    }
    double total = 0.0;
    for (double v : best) total += v;
    return total;
}

/// ‖f‖_{C_p^{θ+α}}: derivative sup sum up to θ plus, when α > 0, the Hölder
/// seminorms of D^β f / p for |β| = θ.
inline NormEstimate full_norm(const WeightedFunction& wf, int theta, double alpha, double R, std::size_t n = 128,
                              std::size_t pair_budget = 20000) {
    if (theta < 0 || theta > 3) throw PreconditionError("integer smoothness must lie in [0, 3]");
    NormEstimate e;
    e.kind = NormEstimate::Kind::Full;
    e.alpha = alpha;
    e.radius = R;
    const std::vector<Vec> pts = norm_points(wf.dim, R, n);
    e.points = pts.size();
    e.value = derivative_sup_sum(wf, theta, pts);
    if (alpha > 0.0) {
        const HolderPairs pairs = holder_pairs(wf.dim, R, pair_budget);
        for (const auto& b : multi_indices(wf.dim, theta)) {
            e.value += holder_over(pairs, alpha, [&](const Vec& x) {
                           const Derivs d = field_derivs(wf.f, x, theta);
                           return d.component(b.data(), theta) / weight_value(wf.weight, x);
                       }).value;
        }
        e.points += pairs.size();
    }
    e.witness = zeros(wf.dim);
    return e;
}

struct EquivalenceReport {
    double ratio_lo = 1.0;
    double ratio_hi = 1.0;
    std::vector<double> radii;
    std::vector<double> usual;     ///< Σ_{|β|≤θ} ‖D^β f‖_{C_p}
    std::vector<double> quotient;  ///< ‖f/p‖_{C_b^θ}
};

/// Compares Σ_{|β|≤θ}‖D^β f‖_{C_p} with ‖f/p‖_{C_b^θ} on shared grids for each
/// radius in the schedule; ratio = usual / quotient (1 when both vanish).
inline EquivalenceReport norm_equivalence_check(const WeightedFunction& wf, int theta,
                                                const std::vector<double>& radii = {5.0, 10.0, 20.0},
                                                std::size_t n = 128) {
    if (theta < 0 || theta > 3) throw PreconditionError("theta must lie in [0, 3]");
    if (theta > 0 && !wf.f.has_derivatives()) {
        throw MissingDerivatives("norm equivalence needs exact derivatives of '" + wf.f.name + "'");
    }
    EquivalenceReport rep;
    rep.ratio_lo = std::numeric_limits<double>::infinity();
    rep.ratio_hi = 0.0;
    for (double R : radii) {
        const std::vector<Vec> pts = norm_points(wf.dim, R, n);
        const double a = derivative_sup_sum(wf, theta, pts);
        const double b = quotient_derivative_sup_sum(wf, theta, pts);
        double r = 1.0;
        if (b > 0.0) r = a / b;
        else if (a > 0.0) r = std::numeric_limits<double>::infinity();
        rep.radii.push_back(R);
        rep.usual.push_back(a);
        rep.quotient.push_back(b);
        rep.ratio_lo = std::min(rep.ratio_lo, r);
        rep.ratio_hi = std::max(rep.ratio_hi, r);
    }
    return rep;
}

}  // namespace ouevo
