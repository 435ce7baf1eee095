#pragma once

#include "ouevo/bank.hpp"
#include "ouevo/evolution.hpp"
#include "ouevo/flow.hpp"
#include "ouevo/gaussmeasure.hpp"
#include "ouevo/parallel.hpp"
#include "ouevo/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ouevo {

// --- growth envelopes -------------------------------------------------------------

/// Envelopes W, J, G, K, H built from (M, ω, m, Q∞, ‖h‖∞). The branch for
/// |ω| below `omega_eps` is the ω = 0 case.
struct GrowthEnvelopes {
    double M = 1.0;
    double omega = 0.0;
    int m = 1;
    double Q_inf = 1.0;  ///< sup_t ‖Q(t)‖ (spectral)
    double h_inf = 0.0;  ///< sup_t |h(t)|
    int dim = 1;
    double omega_eps = 1e-9;

    [[nodiscard]] bool zero_branch() const { return std::abs(omega) < omega_eps; }
    [[nodiscard]] double omega_minus() const { return std::min(0.0, omega); }

    [[nodiscard]] double W(double rho) const {
        return M * h_inf * (zero_branch() ? rho : 1.0 / std::abs(omega));
    }
    [[nodiscard]] double J(double rho) const {
        return M * M * Q_inf * (zero_branch() ? rho : 1.0 / (2.0 * std::abs(omega)));
    }
    [[nodiscard]] double G(double rho) const {
        const double base = zero_branch() ? std::pow(rho, m) : 1.0 / std::pow(2.0 * std::abs(omega), m);
        return std::pow(2.0, m - 1) * std::pow(M, 2 * m) * std::pow(Q_inf, m) * base;
    }
    [[nodiscard]] double K(double rho, double r) const {
        return std::pow(2.0, 2 * m - 1) * (std::pow(W(rho), 2 * m) + std::pow(M, 2 * m) * std::pow(r, 2 * m));
    }
    [[nodiscard]] double H(double rho, double r) const { return W(rho) + M * (r + 1.0); }

    /// c with C_{2m} ≤ c·G·e^{−2mω₋Δ}: E|ξ|^{2m} = N(N+2)…(N+2m−2), divided by 2^{m−1}.
    [[nodiscard]] double c_theory() const {
        double c = 1.0;
        for (int j = 0; j < m; ++j) c *= dim + 2.0 * j;
        return c / std::pow(2.0, m - 1);
    }

    /// C(Δ)e^{γΔ} bounding ‖P_{s,t}‖ on C_p, γ = −2mω₋:
    /// 2^{2m−1}(M^{2m} + 2^{2m−1}(W^{2m} + cG)) e^{−2mω₋Δ}.
    [[nodiscard]] double operator_bound(double rho, double c) const {
        const double two = std::pow(2.0, 2 * m - 1);
        return two * (std::pow(M, 2 * m) + two * (std::pow(W(rho), 2 * m) + c * G(rho))) *
               std::exp(-2.0 * m * omega_minus() * rho);
    }
};

/// sup over sampled times of ‖Q(t)‖ and |h(t)|.
inline std::pair<double, double> coefficient_sups(const CoefficientModel& model, int samples = 257) {
    double q = 0.0, h = 0.0;
    const TimeDomain& d = model.time_domain();
    for (int i = 0; i < samples; ++i) {
        const double t = d.t_min + (d.t_max - d.t_min) * i / (samples - 1.0);
        q = std::max(q, spectral_norm(model.Q(t)));
        h = std::max(h, model.h(t).norm());
    }
    return {q, h};
}

inline GrowthEnvelopes make_envelopes(const CoefficientModel& model, const DecayConstants& dc, int m) {
    GrowthEnvelopes e;
    e.M = dc.M;
    e.omega = dc.omega;
    e.m = m;
    e.dim = model.dimension();
    std::tie(e.Q_inf, e.h_inf) = coefficient_sups(model);
    return e;
}

struct EnvelopeRow {
    double s = 0.0, t = 0.0, delta = 0.0;
    double g_norm = 0.0, g_bound = 0.0;
    double lambda_max = 0.0, lambda_bound = 0.0;
    double moment = 0.0, moment_bound = 0.0;  ///< C_{2m} and c_theory·G·e^{−2mω₋Δ}
    double operator_norm = 0.0, operator_bound = 0.0;
    bool ok = true;
};

struct EnvelopeReport {
    DecayConstants constants;
    GrowthEnvelopes envelopes;
    double c_fit = 0.0;  ///< max C_{2m}/(G e^{−2mω₋Δ}) over samples
    std::vector<EnvelopeRow> rows;
    std::size_t violations = 0;
};

struct EnvelopeOptions {
    double tol = 1e-8;
    double radius = 5.0;
    std::size_t points = 32;
};

/// Checks |g| ≤ W e^{−ω₋Δ}, λ_max(Q(t,s)) ≤ J e^{−2ω₋Δ}, C_{2m} ≤ cG e^{−2mω₋Δ}
/// and ‖P_{s,t}f‖_{C_p} ≤ C(Δ)‖f‖_{C_p} on the unit-ball bank, with constants
/// fitted on the sampled pairs. Violations are rows with ok = false.
inline EnvelopeReport envelope_check(const ModelPtr& model, const WeightSpec& weight,
                                     const std::vector<std::pair<double, double>>& samples,
                                     const QuadScheme& scheme = QuadScheme::gauss_hermite(20),
                                     const EnvelopeOptions& opts = {}) {
    if (weight.is_exponential()) throw PreconditionError("envelope_check needs a polynomial weight");
    EnvelopeReport rep;
    rep.constants = fit_decay_constants(*model, samples);
    rep.envelopes = make_envelopes(*model, rep.constants, weight.m);
    const GrowthEnvelopes& env = rep.envelopes;
    const int n = model->dimension();
    const int m = weight.m;
    const double c = env.c_theory();
    const EvolutionOperator op(model, weight, scheme);
    const std::vector<Field> bank = unit_ball_bank(n, weight);
    const std::vector<Vec> pts = norm_points(n, opts.radius, opts.points);
    std::vector<double> bank_norm(bank.size());
    for (std::size_t b = 0; b < bank.size(); ++b) {
        bank_norm[b] = sup_over(pts, [&](const Vec& x) { return bank[b](x) / weight_value(weight, x); }).value;
    }
    rep.rows.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto [s, t] = samples[i];
        const auto fs = op.flow_state(s, t);
        EnvelopeRow row;
        row.s = s;
        row.t = t;
        row.delta = t - s;
        const double d = row.delta;
        const double wm = std::exp(-env.omega_minus() * d);
        row.g_norm = fs->g.norm();
        row.g_bound = env.W(d) * wm;
        row.lambda_max = fs->lambda_max;
        row.lambda_bound = env.J(d) * wm * wm;
        const GaussianMeasure mu(zeros(n), fs->Qc);
        row.moment = absolute_moment(mu, 2 * m, scheme);
        row.moment_bound = c * env.G(d) * std::pow(wm, 2 * m);
        for (std::size_t b = 0; b < bank.size(); ++b) {
            const double pn = sup_over(pts, [&](const Vec& x) { return op.apply(bank[b], s, t, x) / weight_value(weight, x); }).value;
            row.operator_norm = std::max(row.operator_norm, pn / bank_norm[b]);
        }
        row.operator_bound = env.operator_bound(d, c);
        auto within = [&](double v, double bound) { return v <= bound * (1.0 + opts.tol) + opts.tol; };
        row.ok = within(row.g_norm, row.g_bound) && within(row.lambda_max, row.lambda_bound) &&
                 within(row.moment, row.moment_bound) && within(row.operator_norm, row.operator_bound);
        rep.rows[i] = row;
    });
    for (const auto& row : rep.rows) {
        if (!row.ok) ++rep.violations;
        const double g = env.G(row.delta) * std::exp(-2.0 * m * env.omega_minus() * row.delta);
        if (g > 0.0) rep.c_fit = std::max(rep.c_fit, row.moment / g);
    }
    return rep;
}

// --- smoothing rates ----------------------------------------------------------------

struct RateFit {
    double alpha = 0.0;
    double theta = 1.0;
    double slope = 0.0;
    double intercept = 0.0;
    double delta_min = 1e-3;
    double delta_max = 1.0;
    double r2 = 0.0;
    double max_residual = 0.0;  ///< largest |log-norm − fitted line|
    std::vector<double> deltas;
    std::vector<double> norms;

    [[nodiscard]] double expected() const { return -(theta - alpha) / 2.0; }
    /// r² ≥ 0.98, or for a flat curve (α = θ) residuals within 0.1 in log scale,
    /// where r² carries no information.
    [[nodiscard]] bool conclusive() const {
        return r2 >= 0.98 || (std::abs(theta - alpha) < 1e-12 && max_residual <= 0.1);
    }
};

struct RateOptions {
    double delta_min = 1e-3;
    double delta_max = 1.0;
    int count = 10;          ///< log-spaced Δ values (at least 6)
    double s = 0.0;
    double radius = 2.0;     ///< outer radius of the evaluation set
    int per_octave = 8;      ///< geometric radii per factor of two
    int transfer = -1;       ///< derivatives moved onto f; −1 picks ⌊α⌋ when f has a jet
    bool strict = true;      ///< throw InconclusiveFit; otherwise return the fit as is
};

/// Evaluation set for rate studies: 0, ±axis points on a geometric ladder from
/// R down to about 10⁻³·R·(Δ_min)^{1/2}, and Halton points in B(0,R).
inline std::vector<Vec> rate_points(int dim, const RateOptions& opts) {
    std::vector<Vec> pts{zeros(dim)};
    const double lo = 0.5 * std::sqrt(opts.delta_min) * 1e-1;
    const int steps = static_cast<int>(std::ceil(opts.per_octave * std::log2(opts.radius / lo)));
    for (int j = 0; j <= steps; ++j) {
        const double r = opts.radius * std::pow(2.0, -static_cast<double>(j) / opts.per_octave);
        for (int i = 0; i < dim; ++i) {
            Vec e = zeros(dim);
            e(i) = r;
            pts.push_back(e);
            pts.push_back(-e);
        }
    }
    if (dim > 1) {
        for (const auto& u : halton_ball(dim, 64)) pts.push_back(opts.radius * u);
    }
    return pts;
}

/// Top-order part of ‖P_{s,s+Δ}f‖_{C_p^θ}: Σ_{|β|=k} sup |D^β P f|/p for integer
/// θ = k, plus the Hölder-θ' seminorm of D^β P f/p when θ = k + θ'.
inline double top_order_norm(const EvolutionOperator& op, const Field& f, double theta, double s, double t,
                             const std::vector<Vec>& pts, int transfer) {
    const int n = op.dim();
    const int k = static_cast<int>(std::floor(theta + 1e-12));
    const double frac = theta - k;
    const std::vector<std::vector<int>> betas = multi_indices(n, k);
    std::vector<std::vector<double>> vals(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        vals[i] = op.derivative(f, k, s, t, pts[i], std::min(transfer, k));
        const double p = weight_value(op.weight(), pts[i]);
        for (double& v : vals[i]) v /= p;
    });
    double total = 0.0;
    for (const auto& beta : betas) {
        std::size_t flat = 0;
        for (int idx : beta) flat = flat * n + idx;
        std::vector<double> comp(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) comp[i] = vals[i][flat];
        if (frac > 1e-12) {
            double best = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i)
                for (std::size_t j = i + 1; j < pts.size(); ++j) {
                    const double d = (pts[i] - pts[j]).norm();
                    if (d < 1e-6 || d > 1.0) continue;
                    best = std::max(best, std::abs(comp[i] - comp[j]) / std::pow(d, frac));
                }
            total += best;
        } else {
            double best = 0.0;
            for (double v : comp) best = std::max(best, std::abs(v));
            total += best;
        }
    }
    return total;
}

/// Least-squares line through (x, y) with coefficient of determination.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    LineFit f;
    const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
    f.slope = vx > 0.0 ? cxy / vx : 0.0;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vy > 0.0 ? (cxy * cxy) / (vx * vy) : 1.0;
    return f;
}

/// Fits log ‖P_{s,s+Δ}f‖ (top order, see top_order_norm) against log Δ on a
/// log-spaced window. Throws InconclusiveFit unless conclusive().
inline RateFit smoothing_rate(const EvolutionOperator& op, const Field& f, double alpha, double theta,
                              const RateOptions& opts = {}) {
    if (!(alpha >= 0.0 && alpha <= theta)) throw PreconditionError("rates need 0 <= alpha <= theta");
    if (theta <= 0.0 || theta > 3.0) throw PreconditionError("theta must lie in (0, 3]");
    if (opts.count < 6) throw PreconditionError("rate fits need at least 6 points");
    if (!(opts.delta_min > 0.0 && opts.delta_min < opts.delta_max)) throw PreconditionError("bad rate window");
    int transfer = opts.transfer;
    if (transfer < 0) transfer = f.has_derivatives() ? static_cast<int>(std::floor(alpha + 1e-12)) : 0;
    const std::vector<Vec> pts = rate_points(op.dim(), opts);
    RateFit fit;
    fit.alpha = alpha;
    fit.theta = theta;
    fit.delta_min = opts.delta_min;
    fit.delta_max = opts.delta_max;
    std::vector<double> lx, ly;
    for (int i = 0; i < opts.count; ++i) {
        const double d = opts.delta_min * std::pow(opts.delta_max / opts.delta_min, i / (opts.count - 1.0));
        const double v = top_order_norm(op, f, theta, opts.s, opts.s + d, pts, transfer);
        fit.deltas.push_back(d);
        fit.norms.push_back(v);
        if (!(v > 0.0) || !std::isfinite(v)) throw InconclusiveFit("norm vanished or overflowed at delta = " + std::to_string(d));
        lx.push_back(std::log(d));
        ly.push_back(std::log(v));
    }
    const LineFit line = fit_line(lx, ly);
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.r2 = line.r2;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        fit.max_residual = std::max(fit.max_residual, std::abs(ly[i] - line.intercept - line.slope * lx[i]));
    }
    if (opts.strict && !fit.conclusive()) {
        throw InconclusiveFit("r^2 = " + std::to_string(fit.r2) + " below 0.98 (slope " + std::to_string(fit.slope) + ", max residual " + std::to_string(fit.max_residual) + ")");
    }
    return fit;
}

/// Default test data for a rate study: a step for α = 0, a smoothed |x|^α
/// cusp for 0 < α < 1, a kink for α = 1, and a compact bump of radius 6 when α = θ.
inline Field rate_test_function(double alpha, double theta, int dim) {
    if (std::abs(alpha - theta) < 1e-12) {
        return Field::from_jet(
            [](const Vec& x, int o) {
                Derivs d = detail::compact_bump_jet(Vec(x / 6.0), o);
                if (o >= 1) d.grad /= 6.0;
                if (o >= 2) d.hess /= 36.0;
                if (o >= 3) {
                    for (double& v : d.third.data()) v /= 216.0;
                }
                return d;
            },
            "wide_bump");
    }
    if (alpha == 0.0) return bank_field("step", dim);
    if (std::abs(alpha - 1.0) < 1e-12) return bank_field("kink", dim);
    if (alpha > 0.0 && alpha < 1.0) {
        return Field::from_jet(
            [alpha](const Vec& x, int o) {
                const Derivs x1 = Derivs::coordinate(x, 0, o);
                return pow(1e-12 + x1 * x1, alpha / 2.0);
            },
            "cusp");
    }
    if (std::abs(alpha - 2.0) < 1e-12) {
        return Field::from_jet(
            [](const Vec& x, int o) {
                const Derivs x1 = Derivs::coordinate(x, 0, o);
                return x1 * sqrt(1e-10 + x1 * x1);
            },
            "signed_square");
    }
    throw PreconditionError("no default test function for alpha = " + std::to_string(alpha));
}

// --- exponential-weight counterexample -------------------------------------------------

struct CounterexampleRow {
    double r = 0.0;
    double log_ratio = 0.0;  ///< log(P_{s,t}p(r x̂) / p(r x̂))
};

struct CounterexampleTable {
    Vec direction;
    double expansion = 1.0;  ///< |U x̂|
    std::vector<CounterexampleRow> rows;

    [[nodiscard]] bool strictly_increasing() const {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (!(rows[i].log_ratio > rows[i - 1].log_ratio)) return false;
        }
        return true;
    }
    [[nodiscard]] double log_growth() const { return rows.back().log_ratio - rows.front().log_ratio; }
};

/// Unit x̂ maximising |U x̂|, by power iteration on UᵀU.
inline Vec expanding_direction(const Mat& U) {
    const int n = static_cast<int>(U.rows());
    Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
    const Mat m = U.transpose() * U;
    for (int it = 0; it < 500; ++it) {
        Vec next = m * v;
        const double norm = next.norm();
        if (norm == 0.0) break;
        next /= norm;
        if ((next - v).norm() < 1e-14) {
            v = next;
            break;
        }
        v = next;
    }
    return v;
}

/// Rows (r, log P_{s,t}p(r x̂)/p(r x̂)) along the most expanded direction x̂,
/// computed in the log domain (log-sum-exp over quadrature nodes).
inline CounterexampleTable exponential_counterexample(const ModelPtr& model, const WeightSpec& weight, double s,
                                                      double t, const std::vector<double>& radii,
                                                      const QuadScheme& scheme = {}) {
    if (!(s < t)) throw PreconditionError("counterexample needs s < t");
    const FlowState fs = flow(*model, s, t);
    CounterexampleTable table;
    table.direction = expanding_direction(fs.U);
    table.expansion = (fs.U * table.direction).norm();
    if (!(table.expansion > 1.0 + 1e-12)) {
        throw NoExpandingDirection("||U(t,s)|| = " + std::to_string(spectral_norm(fs.U)) + " <= 1");
    }
    const GaussianMeasure mu(zeros(model->dimension()), fs.Qc);
    const StandardNodes nodes = scheme.nodes(model->dimension());
    for (double r : radii) {
        const Vec x = r * table.direction;
        const Vec a = fs.mean(x);
        double top = -std::numeric_limits<double>::infinity();
        std::vector<double> logs(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            logs[i] = std::log(nodes.weights[i]) + log_weight(weight, Vec(a + mu.sqrt() * nodes.points[i]));
            top = std::max(top, logs[i]);
        }
        double sum = 0.0;
        for (double l : logs) sum += std::exp(l - top);
        table.rows.push_back({r, top + std::log(sum) - log_weight(weight, x)});
    }
    return table;
}

// --- compactness ------------------------------------------------------------------------

struct CompactnessRow {
    double n = 0.0;
    double difference = 0.0;    ///< max over bank and grid of |S_n f − P f|/p
    double tail_mass = 0.0;     ///< max outer Gaussian mass outside B(0,n)
    double equicontinuity = 0.0;  ///< max Hölder quotient of P_{r,t}f over B(0,n)
};

struct CompactnessTable {
    std::vector<CompactnessRow> rows;
    double n_final = 0.0;

    [[nodiscard]] bool nonincreasing(double slack = 0.0) const {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].difference > rows[i - 1].difference + slack) return false;
        }
        return true;
    }
};

struct CompactnessOptions {
    double grid_radius = 2.0;
    std::size_t grid_points = 16;
    double holder_exponent = 0.5;
    std::size_t holder_budget = 400;
    int levels = 6;  ///< default schedule n_final·2^{−j}, j = levels−1 … 0
};

/// max_{|x|≤R}|a(s,r,x)| + 8 λ_max(Q(r,s))^{1/2}.
inline double compactness_radius(const EvolutionOperator& op, double s, double r, double R) {
    const auto fs = op.flow_state(s, r);
    return spectral_norm(fs->U) * R + fs->g.norm() + 8.0 * std::sqrt(std::max(0.0, fs->lambda_max));
}

/// Decay of ‖S_n f − P_{s,t}f‖_{C_p} along the n schedule (empty: dyadic up to
/// compactness_radius). P_{s,t}f is taken as the untruncated composition on
/// the same nodes, so the difference is exactly the masked tail.
inline CompactnessTable compactness_decay(const EvolutionOperator& op, double s, double r, double t,
                                          std::vector<double> schedule, const std::vector<Field>& bank,
                                          const CompactnessOptions& opts = {}) {
    if (!(s < r && r < t)) throw PreconditionError("compactness needs s < r < t");
    CompactnessTable table;
    table.n_final = compactness_radius(op, s, r, opts.grid_radius);
    if (schedule.empty()) {
        for (int j = opts.levels - 1; j >= 0; --j) schedule.push_back(table.n_final * std::pow(2.0, -j));
    }
    std::sort(schedule.begin(), schedule.end());
    const std::vector<Vec> grid = norm_points(op.dim(), opts.grid_radius, opts.grid_points);
    table.rows.resize(schedule.size());
    for (std::size_t j = 0; j < schedule.size(); ++j) table.rows[j].n = schedule[j];
    std::vector<std::vector<double>> diff(grid.size(), std::vector<double>(schedule.size(), 0.0));
    std::vector<std::vector<double>> mass(grid.size(), std::vector<double>(schedule.size(), 0.0));
    parallel_for(grid.size(), [&](std::size_t i) {
        const double p = weight_value(op.weight(), grid[i]);
        for (const auto& f : bank) {
            const TruncationProfile prof = op.truncation_profile(f, s, r, t, grid[i], schedule);
            for (std::size_t j = 0; j < schedule.size(); ++j) {
                diff[i][j] = std::max(diff[i][j], std::abs(prof.truncated[j] - prof.composed) / p);
                mass[i][j] = std::max(mass[i][j], prof.tail_mass[j]);
            }
        }
    });
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < schedule.size(); ++j) {
            table.rows[j].difference = std::max(table.rows[j].difference, diff[i][j]);
            table.rows[j].tail_mass = std::max(table.rows[j].tail_mass, mass[i][j]);
        }
    if (opts.holder_budget > 0) {
        for (auto& row : table.rows) {
            const HolderPairs pairs = holder_pairs(op.dim(), row.n, opts.holder_budget);
            for (const auto& f : bank) {
                const double q = holder_over(pairs, opts.holder_exponent, [&](const Vec& y) {
                                     return op.apply(f, r, t, y);
                                 }).value;
                row.equicontinuity = std::max(row.equicontinuity, q);
            }
        }
    }
    return table;
}

}  // namespace ouevo
