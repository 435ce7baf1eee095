#pragma once

#include "ouevo/errors.hpp"
#include "ouevo/linalg.hpp"
#include "ouevo/quadrature.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>

namespace ouevo {

/// Quadrature scheme for Gaussian expectations: "gh:ORDER" or "mc:N:SEED".
struct QuadScheme {
    enum class Kind { GaussHermite, MonteCarlo };

    Kind kind = Kind::GaussHermite;
    int order = 40;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    std::size_t budget = 1'000'000;  ///< tensor node budget for Gauss–Hermite

    static QuadScheme gauss_hermite(int order) {
        QuadScheme q;
        q.order = order;
        return q;
    }
    static QuadScheme monte_carlo(std::size_t n, std::uint64_t seed) {
        QuadScheme q;
        q.kind = Kind::MonteCarlo;
        q.samples = n;
        q.seed = seed;
        return q;
    }

    static QuadScheme parse(const std::string& text) {
        std::istringstream in(text);
        std::string kind, a, b;
        std::getline(in, kind, ':');
        std::getline(in, a, ':');
        std::getline(in, b, ':');
        try {
            std::size_t used = 0;
            if (kind == "gh" && b.empty()) {
                const int order = std::stoi(a, &used);
                if (used != a.size() || order < 1) throw std::invalid_argument(a);
                return gauss_hermite(order);
            }
            if (kind == "mc") {
                const long long n = std::stoll(a, &used);
                if (used != a.size() || n < 2) throw std::invalid_argument(a);
                std::uint64_t seed = 1;
                if (!b.empty()) {
                    seed = std::stoull(b, &used);
                    if (used != b.size()) throw std::invalid_argument(b);
                }
                return monte_carlo(static_cast<std::size_t>(n), seed);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("quad: cannot parse '" + text + "'");
        }
        throw ConfigError("quad: expected 'gh:ORDER' or 'mc:N:SEED', got '" + text + "'");
    }

    [[nodiscard]] std::string to_string() const {
        if (kind == Kind::GaussHermite) return "gh:" + std::to_string(order);
        return "mc:" + std::to_string(samples) + ":" + std::to_string(seed);
    }

    [[nodiscard]] bool is_monte_carlo() const noexcept { return kind == Kind::MonteCarlo; }

    /// Standard-normal nodes for this scheme in the given dimension.
    [[nodiscard]] StandardNodes nodes(int dim) const {
        if (kind == Kind::GaussHermite) return tensor_gauss_hermite(dim, order, budget);
        return monte_carlo_nodes(dim, samples, seed);
    }
};

/// The Gaussian measure 𝒩(a, Q) with its symmetric square root.
class GaussianMeasure {
public:
    GaussianMeasure(Vec mean, const Mat& cov) : mean_(std::move(mean)), cov_(0.5 * (cov + cov.transpose())) {
        if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
            throw PreconditionError("mean and covariance dimensions differ");
        }
        eig_ = sym_eigen(cov_);
        lambda_min_ = eig_.values.minCoeff();
        lambda_max_ = eig_.values.maxCoeff();
        if (lambda_min_ < -1e-12 * std::max(1.0, lambda_max_)) {
            throw SingularCovariance("covariance has negative eigenvalue " + std::to_string(lambda_min_));
        }
        sqrt_ = sym_function(eig_, [](double v) { return std::sqrt(std::max(v, 0.0)); });
        if (positive_definite()) {
            inv_sqrt_ = sym_function(eig_, [](double v) { return 1.0 / std::sqrt(v); });
            log_det_ = 0.0;
            for (int i = 0; i < dim(); ++i) log_det_ += std::log(eig_.values(i));
        }
    }

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(mean_.size()); }
    [[nodiscard]] const Vec& mean() const noexcept { return mean_; }
    [[nodiscard]] const Mat& cov() const noexcept { return cov_; }
    [[nodiscard]] const Mat& sqrt() const noexcept { return sqrt_; }
    [[nodiscard]] double lambda_min() const noexcept { return lambda_min_; }
    [[nodiscard]] double lambda_max() const noexcept { return lambda_max_; }
    [[nodiscard]] bool positive_definite() const noexcept {
        return lambda_min_ > 1e-300 && lambda_min_ > 1e-15 * lambda_max_;
    }

    /// Q^{-1/2}; throws SingularCovariance when Q is not positive definite.
    [[nodiscard]] const Mat& inv_sqrt() const {
        require_pd();
        return inv_sqrt_;
    }

    /// (2π)^{N/2} (det Q)^{1/2}.
    [[nodiscard]] double det_factor() const {
        require_pd();
        return std::exp(0.5 * dim() * std::log(2.0 * std::numbers::pi) + 0.5 * log_det_);
    }

    [[nodiscard]] double log_density(const Vec& y) const {
        require_pd();
        const Vec z = inv_sqrt_ * (y - mean_);
        return -0.5 * z.squaredNorm() - 0.5 * dim() * std::log(2.0 * std::numbers::pi) - 0.5 * log_det_;
    }

    [[nodiscard]] double density(const Vec& y) const { return std::exp(log_density(y)); }

    /// y = a + Q^{1/2} ξ.
    [[nodiscard]] Vec push(const Vec& xi) const { return mean_ + sqrt_ * xi; }

    void require_pd() const {
        if (!positive_definite()) {
            throw SingularCovariance("covariance not positive definite (min eigenvalue " +
                                     std::to_string(lambda_min_) + ")");
        }
    }

private:
    Vec mean_;
    Mat cov_;
    SymEigen eig_;
    Mat sqrt_;
    Mat inv_sqrt_;
    double lambda_min_ = 0.0;
    double lambda_max_ = 0.0;
    double log_det_ = 0.0;
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;  ///< zero for Gauss–Hermite
};

namespace detail {

/// Evaluates f at the pushed node of largest |ξ| and rejects non-finite values.
template <typename F>
void growth_guard(const GaussianMeasure& mu, const StandardNodes& nodes, F& f) {
    std::size_t far = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double r = nodes.points[i].squaredNorm();
        if (r > best) {
            best = r;
            far = i;
        }
    }
    const Vec y = mu.push(nodes.points[far]);
    const double v = f(y);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "integrand is not finite at the outermost node y = " << y.transpose();
        throw EvaluationFailure(os.str());
    }
}

}  // namespace detail

/// 𝔼[f(a + Q^{1/2}ξ)] over prepared standard nodes, with a standard error
/// for Monte Carlo nodes.
template <typename F>
Estimate expectation_on(const GaussianMeasure& mu, const StandardNodes& nodes, F&& f) {
    if (nodes.dim != mu.dim()) throw PreconditionError("node dimension does not match the measure");
    if (!nodes.monte_carlo) mu.require_pd();
    detail::growth_guard(mu, nodes, f);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double v = f(mu.push(nodes.points[i]));
        sum += nodes.weights[i] * v;
        if (nodes.monte_carlo) sum_sq += v * v;
    }
    Estimate e{sum, 0.0};
    if (nodes.monte_carlo) {
        const double n = static_cast<double>(nodes.size());
        const double var = std::max(0.0, (sum_sq / n - sum * sum) * n / (n - 1.0));
        e.std_error = std::sqrt(var / n);
    }
    return e;
}

template <typename F>
Estimate expectation_with_error(const GaussianMeasure& mu, F&& f, const QuadScheme& scheme = {}) {
    if (!scheme.is_monte_carlo()) mu.require_pd();
    return expectation_on(mu, scheme.nodes(mu.dim()), std::forward<F>(f));
}

template <typename F>
double expectation(const GaussianMeasure& mu, F&& f, const QuadScheme& scheme = {}) {
    return expectation_with_error(mu, std::forward<F>(f), scheme).value;
}

/// ∫|y|^k 𝒩(0,Q)(dy) for even k ≤ 8.
inline double absolute_moment(const GaussianMeasure& mu, int k, const QuadScheme& scheme = {}) {
    if (k < 0 || k % 2 != 0 || k > 8) throw OddMomentUnsupported("k must be even and at most 8, got " + std::to_string(k));
    if (mu.mean().squaredNorm() != 0.0) throw PreconditionError("absolute_moment needs a centred measure");
    if (k == 0) return 1.0;
    QuadScheme s = scheme;
    if (!s.is_monte_carlo()) s.order = std::min(s.order, k / 2 + 1 + 4);
    return expectation(mu, [k](const Vec& y) { return std::pow(y.squaredNorm(), k / 2); }, s);
}

}  // namespace ouevo
