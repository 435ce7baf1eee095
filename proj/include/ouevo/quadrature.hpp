#pragma once

#include "ouevo/errors.hpp"
#include "ouevo/linalg.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace ouevo {

/// One-dimensional rule: nodes and weights.
struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss–Hermite rule for the weight e^{-z²} on ℝ (weights sum to √π).
/// Newton iteration on the orthonormal Hermite recurrence; accurate to
/// machine precision up to a few hundred nodes.
inline Rule1D gauss_hermite_rule(int order) {
    if (order < 1) throw PreconditionError("Gauss-Hermite order must be >= 1");
    constexpr double kEps = 1e-15;
    constexpr double kPim4 = 0.7511255444649425;  // π^{-1/4}
    const int n = order;
    Rule1D rule{std::vector<double>(n), std::vector<double>(n)};
    const int half = (n + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * rule.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * rule.nodes[1];
        } else {
            z = 2.0 * z - rule.nodes[i - 2];
        }
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = kPim4;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= kEps * std::max(1.0, std::abs(z))) break;
        }
        rule.nodes[i] = z;
        rule.nodes[n - 1 - i] = -z;
        rule.weights[i] = 2.0 / (pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    if (n % 2 == 1) rule.nodes[half - 1] = 0.0;
    return rule;
}

/// Gauss–Legendre rule on [-1, 1].
inline Rule1D gauss_legendre_rule(int order) {
    if (order < 1) throw PreconditionError("Gauss-Legendre order must be >= 1");
    const int n = order;
    Rule1D rule{std::vector<double>(n), std::vector<double>(n)};
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0;
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-16) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    if (n % 2 == 1) rule.nodes[half - 1] = 0.0;
    return rule;
}

/// Points ξ and weights approximating 𝔼[F(ξ)] for ξ ~ 𝒩(0, I_N).
struct StandardNodes {
    int dim = 0;
    std::vector<Vec> points;
    std::vector<double> weights;
    bool monte_carlo = false;

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
};

/// Tensorised Gauss–Hermite nodes after the substitution ξ = √2·z.
inline StandardNodes tensor_gauss_hermite(int dim, int order, std::size_t budget = 1'000'000) {
    if (dim < 1 || dim > kMaxDim) throw PreconditionError("dimension out of range: " + std::to_string(dim));
    double count = std::pow(static_cast<double>(order), dim);
    if (count > static_cast<double>(budget)) {
        throw QuadratureOverflow("order^N = " + std::to_string(order) + "^" + std::to_string(dim) +
                                 " exceeds the tensor budget " + std::to_string(budget));
    }
    const Rule1D rule = gauss_hermite_rule(order);
    const double norm = 1.0 / std::sqrt(std::numbers::pi);
    StandardNodes out;
    out.dim = dim;
    const std::size_t total = static_cast<std::size_t>(count);
    out.points.reserve(total);
    out.weights.reserve(total);
    std::vector<int> idx(dim, 0);
    for (std::size_t k = 0; k < total; ++k) {
        Vec p(dim);
        double w = 1.0;
        for (int d = 0; d < dim; ++d) {
            p(d) = std::numbers::sqrt2 * rule.nodes[idx[d]];
            w *= rule.weights[idx[d]] * norm;
        }
        out.points.push_back(p);
        out.weights.push_back(w);
        for (int d = 0; d < dim; ++d) {
            if (++idx[d] < order) break;
            idx[d] = 0;
        }
    }
    return out;
}

// --- counter-based random numbers ------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Uniform in (0,1) determined only by (seed, counter).
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    const std::uint64_t bits = splitmix64(splitmix64(seed) ^ (counter * 0xD1B54A32D192ED03ULL));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal determined only by (seed, counter), via Box–Muller.
inline double counter_normal(std::uint64_t seed, std::uint64_t counter) {
    const double u1 = counter_uniform(seed, 2 * counter);
    const double u2 = counter_uniform(seed, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Monte Carlo nodes: n standard normal draws with equal weights.
/// Antithetic pairs are not used, so sample means are plain i.i.d. estimates.
inline StandardNodes monte_carlo_nodes(int dim, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw PreconditionError("Monte Carlo sample count must be positive");
    StandardNodes out;
    out.dim = dim;
    out.monte_carlo = true;
    out.points.reserve(n);
    out.weights.assign(n, 1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        Vec p(dim);
        for (int d = 0; d < dim; ++d) p(d) = counter_normal(seed, i * dim + d);
        out.points.push_back(p);
    }
    return out;
}

// --- low-discrepancy points ---------------------------------------------------

inline double radical_inverse(std::uint64_t index, int base) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

/// k-th Halton point in [0,1)^dim (index 0 is skipped to avoid the origin).
inline Vec halton_point(std::uint64_t k, int dim) {
    static constexpr std::array<int, kMaxDim> primes{2, 3, 5, 7, 11, 13, 17, 19};
    Vec p(dim);
    for (int d = 0; d < dim; ++d) p(d) = radical_inverse(k + 1, primes[d]);
    return p;
}

/// First n Halton points mapped into the closed unit ball (rejection from the
/// cube [-1,1]^dim). Prefixes are nested: the first m < n points are the m-point set.
inline std::vector<Vec> halton_ball(int dim, std::size_t n) {
    std::vector<Vec> out;
    out.reserve(n);
    std::uint64_t k = 0;
    while (out.size() < n) {
        Vec p = 2.0 * halton_point(k++, dim) - Vec::Ones(dim);
        if (p.squaredNorm() <= 1.0) out.push_back(p);
    }
    return out;
}

/// n unit directions: ± coordinate axes first, then normalised Halton points.
inline std::vector<Vec> unit_directions(int dim, std::size_t n) {
    std::vector<Vec> out;
    for (int d = 0; d < dim && out.size() < n; ++d) {
        Vec e = Vec::Zero(dim);
        e(d) = 1.0;
        out.push_back(e);
        if (out.size() < n) out.push_back(-e);
    }
    std::uint64_t k = 0;
    while (out.size() < n) {
        Vec p = 2.0 * halton_point(k++, dim) - Vec::Ones(dim);
        const double r = p.norm();
        if (r > 1e-3 && r <= 1.0) out.push_back(p / r);
    }
    return out;
}

}  // namespace ouevo
