#pragma once

#include "ouevo/coeffs.hpp"
#include "ouevo/derivs.hpp"
#include "ouevo/flow.hpp"
#include "ouevo/gaussmeasure.hpp"
#include "ouevo/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <tuple>
#include <vector>

namespace ouevo {

struct EvolutionOptions {
    /// Derivative kernels refuse t − s below this.
    double singularity_floor = 1e-6;
    /// Gauss–Hermite order for nested (inner) quadrature levels; 0 reuses the outer order.
    int inner_order = 0;
    FlowOptions flow;
    std::size_t cache_limit = 4096;
};

/// Flow data for one (s,t) pair pushed through a node set: y_i = U x + g + z_i
/// with z_i = Q^{1/2} ξ_i and kernel vectors k_i = Uᵀ Q^{-1/2} ξ_i.
struct Kernel {
    double s = 0.0;
    double t = 0.0;
    Mat U;
    Vec g;
    std::vector<Vec> z;
    std::vector<Vec> k;  ///< empty when Q(t,s) is singular
    std::vector<double> w;
    bool monte_carlo = false;

    [[nodiscard]] int dim() const { return static_cast<int>(g.size()); }
    [[nodiscard]] Vec mean(const Vec& x) const { return U * x + g; }
};

/// Vector-valued field: writes `size` values for the point y.
using TensorField = std::function<void(const Vec&, double*)>;

/// Result of S_n for a schedule of radii at one point.
struct TruncationProfile {
    double composed = 0.0;            ///< P_{s,r}(P_{r,t}f)(x) on the same node set
    std::vector<double> truncated;    ///< S_n f(x) for each n
    std::vector<double> tail_mass;    ///< outer Gaussian weight outside B(0,n)
};

/// P_{s,t}f(x) = ∫ f(y) 𝒩(a(s,t,x), Q(t,s))(dy) and its spatial derivatives.
///
/// Derivatives of order k ≥ 2 split [s,t] at the midpoint: one derivative is
/// taken through the Gaussian kernel on [s, s₁] and the rest through
/// D P_{s,s₁}g = U(s₁,s)ᵀ P_{s,s₁}∇g, recursively. Order 3 therefore nests
/// three quadratures with splits at s + (t−s)/4 and s + (t−s)/2.
class EvolutionOperator {
public:
    EvolutionOperator(ModelPtr model, WeightSpec weight, QuadScheme scheme = {}, EvolutionOptions opts = {})
        : model_(std::move(model)), weight_(weight), scheme_(scheme), opts_(opts) {
        if (!model_) throw PreconditionError("evolution operator needs a model");
        weight_.validate();
        const int n = model_->dimension();
        outer_nodes_ = scheme_.nodes(n);
        if (scheme_.is_monte_carlo()) {
            inner_nodes_ = monte_carlo_nodes(n, scheme_.samples, scheme_.seed + 1);
        } else {
            inner_nodes_ = tensor_gauss_hermite(n, opts_.inner_order > 0 ? opts_.inner_order : scheme_.order,
                                                scheme_.budget);
        }
    }

    EvolutionOperator(const CoefficientModel& model, WeightSpec weight, QuadScheme scheme = {},
                      EvolutionOptions opts = {})
        : EvolutionOperator(std::make_shared<const CoefficientModel>(model), weight, scheme, opts) {}

    [[nodiscard]] const CoefficientModel& model() const { return *model_; }
    [[nodiscard]] const ModelPtr& model_ptr() const { return model_; }
    [[nodiscard]] const WeightSpec& weight() const { return weight_; }
    [[nodiscard]] const QuadScheme& scheme() const { return scheme_; }
    [[nodiscard]] const EvolutionOptions& options() const { return opts_; }
    [[nodiscard]] int dim() const { return model_->dimension(); }

    /// Cached flow for (s,t).
    std::shared_ptr<const FlowState> flow_state(double s, double t) const {
        const Key key{s, t, -1};
        if (auto hit = find(flow_cache_, key)) return hit;
        auto fresh = std::make_shared<const FlowState>(flow(*model_, s, t, opts_.flow));
        return insert(flow_cache_, key, std::move(fresh));
    }

    /// Cached kernel for (s,t) on the outer (inner = false) or nested node set.
    std::shared_ptr<const Kernel> kernel(double s, double t, bool inner = false) const {
        const Key key{s, t, inner ? 1 : 0};
        if (auto hit = find(kernel_cache_, key)) return hit;
        const auto fs = flow_state(s, t);
        const StandardNodes& nodes = inner ? inner_nodes_ : outer_nodes_;
        auto k = std::make_shared<Kernel>();
        k->s = s;
        k->t = t;
        k->U = fs->U;
        k->g = fs->g;
        k->w = nodes.weights;
        k->monte_carlo = nodes.monte_carlo;
        const GaussianMeasure mu(zeros(dim()), fs->Qc);
        k->z.reserve(nodes.size());
        for (const auto& xi : nodes.points) k->z.push_back(mu.sqrt() * xi);
        if (t > s && mu.positive_definite()) {
            const Mat kmat = fs->U.transpose() * mu.inv_sqrt();
            k->k.reserve(nodes.size());
            for (const auto& xi : nodes.points) k->k.push_back(kmat * xi);
        }
        return insert(kernel_cache_, key, std::shared_ptr<const Kernel>(std::move(k)));
    }

    void clear_caches() const {
        std::unique_lock lock(mutex_);
        flow_cache_.clear();
        kernel_cache_.clear();
    }

    // --- values ------------------------------------------------------------

    [[nodiscard]] double apply(const Field& f, double s, double t, const Vec& x) const {
        return apply_with_error(f, s, t, x).value;
    }

    /// Value plus Monte Carlo standard error (zero for Gauss–Hermite).
    [[nodiscard]] Estimate apply_with_error(const Field& f, double s, double t, const Vec& x,
                                            bool inner = false) const {
        check_point(x);
        if (s == t) {
            model_->check_time(s);
            return {f(x), 0.0};
        }
        if (t < s) throw PreconditionError("apply requires s <= t");
        const auto k = kernel(s, t, inner);
        const Vec a = k->mean(x);
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i = 0; i < k->w.size(); ++i) {
            const Vec y = a + k->z[i];
            const double v = f(y);
            if (!std::isfinite(v)) throw_evaluation(y);
            sum += k->w[i] * v;
            sum_sq += v * v;
        }
        Estimate e{sum, 0.0};
        if (k->monte_carlo) {
            const double n = static_cast<double>(k->w.size());
            e.std_error = std::sqrt(std::max(0.0, (sum_sq / n - sum * sum) * n / (n - 1.0)) / n);
        }
        return e;
    }

    // --- derivatives ---------------------------------------------------------

    [[nodiscard]] Vec gradient(const Field& f, double s, double t, const Vec& x) const {
        const std::vector<double> d = derivative(f, 1, s, t, x);
        Vec g(dim());
        for (int i = 0; i < dim(); ++i) g(i) = d[i];
        return g;
    }

    [[nodiscard]] Mat hessian(const Field& f, double s, double t, const Vec& x) const {
        const std::vector<double> d = derivative(f, 2, s, t, x);
        const int n = dim();
        Mat h(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) h(i, j) = d[i * n + j];
        return h;
    }

    [[nodiscard]] Tensor3 third_derivs(const Field& f, double s, double t, const Vec& x) const {
        const std::vector<double> d = derivative(f, 3, s, t, x);
        Tensor3 out(dim());
        out.data() = d;
        return out;
    }

    /// D^order P_{s,t}f(x) as a flattened symmetric tensor (row-major, N^order
    /// entries). With transfer = j > 0, j derivatives are first moved onto f
    /// through D P g = Uᵀ P(∇g), using the exact jet of f, and only order − j go
    /// through the kernels.
    [[nodiscard]] std::vector<double> derivative(const Field& f, int order, double s, double t, const Vec& x,
                                                 int transfer = 0) const {
        if (order < 0 || order > 3) throw PreconditionError("derivative order must lie in [0, 3]");
        if (transfer < 0 || transfer > order) throw PreconditionError("transfer must lie in [0, order]");
        check_point(x);
        if (order == 0) return {apply(f, s, t, x)};
        if (transfer > 0 && !f.has_derivatives()) {
            throw MissingDerivatives("transferring derivatives needs the exact jet of '" + f.name + "'");
        }
        if (!(t > s)) throw PreconditionError("derivatives need s < t");
        const int kernel_order = order - transfer;
        if (kernel_order > 0 && t - s < opts_.singularity_floor) {
            throw SingularCovariance("t - s = " + std::to_string(t - s) + " is below the singularity floor " +
                                     std::to_string(opts_.singularity_floor));
        }
        const int n = dim();
        const int m = transfer;
        const TensorField field = [&f, m, n](const Vec& y, double* out) {
            if (m == 0) {
                out[0] = f(y);
                return;
            }
            const Derivs d = f.derivs(y, m);
            if (m == 1) {
                for (int i = 0; i < n; ++i) out[i] = d.grad(i);
            } else if (m == 2) {
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) out[i * n + j] = d.hess(i, j);
            } else {
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        for (int k = 0; k < n; ++k) out[(i * n + j) * n + k] = d.third(i, j, k);
            }
        };
        std::vector<double> raw(ipow(n, order), 0.0);
        kernel_derivative(field, m, kernel_order, s, t, x, false, raw.data());
        if (m > 0) raw = contract_leading(raw, m, order, flow_state(s, t)->U);
        return symmetrize(raw, order);
    }

    // --- composition and truncation ---------------------------------------------

    /// Weighted sup over the grid of |P_{s,t}f − P_{s,r}(P_{r,t}f)|/p; both
    /// levels use the outer node set.
    [[nodiscard]] double compose_check(const Field& f, double s, double r, double t, const std::vector<Vec>& grid) const {
        if (!(s < r && r < t)) throw PreconditionError("compose_check requires s < r < t");
        double worst = 0.0;
        for (const auto& x : grid) {
            const double direct = apply(f, s, t, x);
            const auto k = kernel(s, r);
            const Vec a = k->mean(x);
            double composed = 0.0;
            for (std::size_t i = 0; i < k->w.size(); ++i) composed += k->w[i] * apply(f, r, t, Vec(a + k->z[i]));
            worst = std::max(worst, std::abs(direct - composed) / weight_value(weight_, x));
        }
        return worst;
    }

    /// S_n f(x) = P_{s,r}(χ_{B(0,n)} P_{r,t}f)(x).
    [[nodiscard]] double truncated(const Field& f, double s, double t, double r, double n, const Vec& x) const {
        return truncation_profile(f, s, r, t, x, {n}).truncated.front();
    }

    /// Inner values P_{r,t}f(y_i) are computed once and masked for every n.
    [[nodiscard]] TruncationProfile truncation_profile(const Field& f, double s, double r, double t, const Vec& x,
                                                       const std::vector<double>& radii) const {
        if (!(s < r && r < t)) throw PreconditionError("truncation requires s < r < t");
        for (double n : radii) {
            if (!(n > 0.0)) throw PreconditionError("truncation radius must be positive");
        }
        check_point(x);
        const auto k = kernel(s, r);
        const Vec a = k->mean(x);
        TruncationProfile p;
        p.truncated.assign(radii.size(), 0.0);
        p.tail_mass.assign(radii.size(), 0.0);
        for (std::size_t i = 0; i < k->w.size(); ++i) {
            const Vec y = a + k->z[i];
            const double v = apply(f, r, t, y);
            const double norm = y.norm();
            p.composed += k->w[i] * v;
            for (std::size_t j = 0; j < radii.size(); ++j) {
                if (norm <= radii[j]) p.truncated[j] += k->w[i] * v;
                else p.tail_mass[j] += k->w[i];
            }
        }
        return p;
    }

    /// Generic kernel recursion on tensor-valued fields. `field` has m indices;
    /// `out` receives N^{m+k} values laid out as [field indices, derivative indices].
    void kernel_derivative(const TensorField& field, int m, int k, double s, double t, const Vec& x, bool inner,
                           double* out) const {
        const int n = dim();
        const std::size_t fsize = ipow(n, m);
        const std::size_t osize = fsize * ipow(n, k);
        std::fill(out, out + osize, 0.0);
        if (k <= 1) {
            const auto ker = kernel(s, t, inner);
            if (k == 1 && ker->k.empty()) {
                throw SingularCovariance("Q(t,s) is singular on [" + std::to_string(s) + ", " + std::to_string(t) + "]");
            }
            const Vec a = ker->mean(x);
            std::vector<double> buf(fsize);
            for (std::size_t i = 0; i < ker->w.size(); ++i) {
                const Vec y = a + ker->z[i];
                field(y, buf.data());
                for (double v : buf) {
                    if (!std::isfinite(v)) throw_evaluation(y);
                }
                const double w = ker->w[i];
                if (k == 0) {
                    for (std::size_t f = 0; f < fsize; ++f) out[f] += w * buf[f];
                } else {
                    const Vec& kv = ker->k[i];
                    for (std::size_t f = 0; f < fsize; ++f) {
                        const double wf = w * buf[f];
                        for (int j = 0; j < n; ++j) out[f * n + j] += wf * kv(j);
                    }
                }
            }
            return;
        }
        const double mid = 0.5 * (s + t);
        // ψ = ∇ P_{mid,t} field, one more leading index.
        const TensorField psi = [this, &field, m, mid, t](const Vec& y, double* o) {
            kernel_derivative(field, m, 1, mid, t, y, true, o);
        };
        std::vector<double> tmp(fsize * ipow(n, k));
        kernel_derivative(psi, m + 1, k - 1, s, mid, x, inner, tmp.data());
        // out[f, i, d...] = Σ_l U(mid,s)_{l i} tmp[f, l, d...]
        const Mat& U = flow_state(s, mid)->U;
        const std::size_t rest = ipow(n, k - 1);
        for (std::size_t f = 0; f < fsize; ++f)
            for (int i = 0; i < n; ++i)
                for (int l = 0; l < n; ++l) {
                    const double u = U(l, i);
                    if (u == 0.0) continue;
                    const double* src = tmp.data() + (f * n + l) * rest;
                    double* dst = out + (f * n + i) * rest;
                    for (std::size_t d = 0; d < rest; ++d) dst[d] += u * src[d];
                }
    }

    static std::size_t ipow(int n, int k) {
        std::size_t r = 1;
        for (int i = 0; i < k; ++i) r *= static_cast<std::size_t>(n);
        return r;
    }

private:
    using Key = std::tuple<double, double, int>;

    template <typename V>
    std::shared_ptr<const V> find(const std::map<Key, std::shared_ptr<const V>>& cache, const Key& key) const {
        std::shared_lock lock(mutex_);
        const auto it = cache.find(key);
        return it == cache.end() ? nullptr : it->second;
    }

    template <typename V>
    std::shared_ptr<const V> insert(std::map<Key, std::shared_ptr<const V>>& cache, const Key& key,
                                    std::shared_ptr<const V> value) const {
        std::unique_lock lock(mutex_);
        if (cache.size() >= opts_.cache_limit) cache.clear();
        const auto [it, fresh] = cache.emplace(key, std::move(value));
        return it->second;
    }

    void check_point(const Vec& x) const {
        if (x.size() != dim()) throw PreconditionError("point dimension does not match the model");
    }

    [[noreturn]] static void throw_evaluation(const Vec& y) {
        std::ostringstream os;
        os << "integrand is not finite at y = " << y.transpose();
        throw EvaluationFailure(os.str());
    }

    /// Contracts the first m indices with U: out[i1..im, d] = Σ U_{l1 i1}…U_{lm im} in[l1..lm, d].
    static std::vector<double> contract_leading(const std::vector<double>& in, int m, int order, const Mat& U) {
        const int n = static_cast<int>(U.rows());
        std::vector<double> cur = in;
        const std::size_t total = ipow(n, order);
        for (int axis = 0; axis < m; ++axis) {
            const std::size_t inner = ipow(n, order - axis - 1);
            const std::size_t outer = total / (inner * n);
            std::vector<double> next(total, 0.0);
            for (std::size_t o = 0; o < outer; ++o)
                for (int i = 0; i < n; ++i)
                    for (int l = 0; l < n; ++l) {
                        const double u = U(l, i);
                        const double* src = cur.data() + (o * n + l) * inner;
                        double* dst = next.data() + (o * n + i) * inner;
                        for (std::size_t d = 0; d < inner; ++d) dst[d] += u * src[d];
                    }
            cur.swap(next);
        }
        return cur;
    }

    /// Averages a flattened order-k tensor over index permutations.
    std::vector<double> symmetrize(const std::vector<double>& in, int order) const {
        const int n = dim();
        if (order < 2) return in;
        std::vector<double> out(in.size());
        if (order == 2) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) out[i * n + j] = 0.5 * (in[i * n + j] + in[j * n + i]);
            return out;
        }
        auto at = [&](int i, int j, int k) { return in[(i * n + j) * n + k]; };
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    out[(i * n + j) * n + k] =
                        (at(i, j, k) + at(i, k, j) + at(j, i, k) + at(j, k, i) + at(k, i, j) + at(k, j, i)) / 6.0;
                }
        return out;
    }

    ModelPtr model_;
    WeightSpec weight_;
    QuadScheme scheme_;
    EvolutionOptions opts_;
    StandardNodes outer_nodes_;
    StandardNodes inner_nodes_;
    mutable std::shared_mutex mutex_;
    mutable std::map<Key, std::shared_ptr<const FlowState>> flow_cache_;
    mutable std::map<Key, std::shared_ptr<const Kernel>> kernel_cache_;
};

}  // namespace ouevo
