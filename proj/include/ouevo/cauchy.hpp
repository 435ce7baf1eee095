#pragma once

#include "ouevo/evolution.hpp"
#include "ouevo/hypotheses.hpp"
#include "ouevo/parallel.hpp"
#include "ouevo/quadrature.hpp"
#include "ouevo/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ouevo {

/// Source term f(r, ·) as a field for every time r.
using SourceFn = std::function<Field(double)>;

/// Backward problem D_s u + L(s)u = −f on [a,T) with u(T) = φ, solved by
/// u(s) = P_{s,T}φ + ∫_s^T P_{s,r}f(r) dr.
struct CauchyProblem {
    ModelPtr model;
    WeightSpec weight;
    double a = 0.0;
    double T = 1.0;
    Field phi;
    SourceFn source;  ///< empty for the homogeneous problem
    double theta = 0.5;

    [[nodiscard]] bool homogeneous() const { return !source; }
};

struct CauchyGrid {
    int time_steps = 16;       ///< uniform steps h_s = (T − a)/time_steps
    std::vector<Vec> points;   ///< spatial evaluation points
    bool derivatives = true;   ///< assemble ∇u and D²u
};

struct CauchyOptions {
    int gl_order = 6;          ///< Gauss–Legendre nodes per panel
    int grading_levels = 12;   ///< geometric panels toward r = s (ratio 2)
    int max_panels = 48;
    EvolutionOptions evolution;
};

struct MildSolution {
    std::vector<double> times;
    std::vector<Vec> points;
    std::vector<std::vector<double>> u;  ///< u[time][point]
    std::vector<std::vector<Vec>> grad;
    std::vector<std::vector<Mat>> hess;
    /// |Δ_s u + L(s)u + f| at interior times; NaN at the end times.
    std::vector<std::vector<double>> residual;
    double h_s = 0.0;
    double max_residual = 0.0;
    double consistency_scale = 0.0;  ///< h_s²
    int panels = 0;
    int gl_order = 0;
    std::string quad;
    std::vector<std::string> warnings;
};

/// ½Tr[Q(s)D²ψ] + ⟨A(s)x + h(s), ∇ψ⟩ from a gradient and Hessian.
inline double apply_L(const CoefficientModel& model, double s, const Vec& x, const Vec& grad, const Mat& hess) {
    return 0.5 * (model.Q(s) * hess).trace() + (model.A(s) * x + model.h(s)).dot(grad);
}

/// L(s)ψ(x) for a field with an exact jet.
inline double apply_L(const CoefficientModel& model, double s, const Field& psi, const Vec& x) {
    if (!psi.has_derivatives()) throw MissingDerivatives("L(s) needs first and second derivatives of '" + psi.name + "'");
    const Derivs d = psi.derivs(x, 2);
    return apply_L(model, s, x, d.grad, d.hess);
}

/// Composite Gauss–Legendre nodes on [s, T], geometrically graded toward r = s.
struct TimeMesh {
    std::vector<double> nodes;
    std::vector<double> weights;
    int panels = 0;
};

inline TimeMesh graded_mesh(double s, double T, const CauchyOptions& opts) {
    TimeMesh mesh;
    const double L = T - s;
    if (!(L > 0.0)) return mesh;
    const Rule1D gl = gauss_legendre_rule(opts.gl_order);
    const double first_fraction = 0.5 * (1.0 + gl.nodes.front());
    // Smallest panel keeps every node at least the singularity floor away from s.
    const double w_min = opts.evolution.singularity_floor / first_fraction;
    if (L < w_min) {
        throw SingularityBudgetExceeded("interval " + std::to_string(L) + " shorter than the smallest admissible panel " +
                                        std::to_string(w_min));
    }
    std::vector<double> edges{T};
    double width = L / 2.0;
    int levels = 0;
    while (levels < opts.grading_levels && width >= w_min) {
        edges.push_back(s + width);
        width /= 2.0;
        ++levels;
    }
    edges.push_back(s);
    std::reverse(edges.begin(), edges.end());
    mesh.panels = static_cast<int>(edges.size()) - 1;
    if (mesh.panels > opts.max_panels) {
        throw SingularityBudgetExceeded("graded mesh needs " + std::to_string(mesh.panels) + " panels, budget " +
                                        std::to_string(opts.max_panels));
    }
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double lo = edges[p], hi = edges[p + 1];
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            mesh.nodes.push_back(lo + 0.5 * (hi - lo) * (1.0 + gl.nodes[i]));
            mesh.weights.push_back(0.5 * (hi - lo) * gl.weights[i]);
        }
    }
    return mesh;
}

namespace detail {

struct PointValue {
    double u = 0.0;
    Vec grad;
    Mat hess;
};

inline void accumulate(const EvolutionOperator& op, const Field& f, double s, double t, const Vec& x, bool derivs,
                       double w, PointValue& acc) {
    const int n = op.dim();
    acc.u += w * op.apply(f, s, t, x);
    if (!derivs) return;
    const int transfer_1 = f.has_derivatives() ? 1 : 0;
    const int transfer_2 = f.has_derivatives() ? 2 : 0;
    const std::vector<double> g = op.derivative(f, 1, s, t, x, transfer_1);
    const std::vector<double> h = op.derivative(f, 2, s, t, x, transfer_2);
    for (int i = 0; i < n; ++i) {
        acc.grad(i) += w * g[i];
        for (int j = 0; j < n; ++j) acc.hess(i, j) += w * h[i * n + j];
    }
}

}  // namespace detail

/// Mild solution with derivatives on the grid and the PDE residual
/// |Δ_s u + L(s)u + f| at interior times (Δ_s the centred difference).
inline MildSolution solve(const CauchyProblem& problem, const CauchyGrid& grid, const QuadScheme& scheme = {},
                          const CauchyOptions& opts = {}) {
    if (!problem.model) throw PreconditionError("problem needs a model");
    if (!(problem.a < problem.T)) throw PreconditionError("problem needs a < T");
    if (!(problem.theta > 0.0 && problem.theta < 1.0)) throw PreconditionError("theta must lie in (0, 1)");
    if (grid.time_steps < 1 || grid.points.empty()) throw PreconditionError("grid needs time steps and points");
    if (!problem.phi.value) throw PreconditionError("problem needs terminal data");
    const CoefficientModel& model = *problem.model;
    model.check_time(problem.a);
    model.check_time(problem.T);
    const int n = model.dimension();

    EvolutionOperator op(problem.model, problem.weight, scheme, opts.evolution);
    MildSolution ms;
    ms.h_s = (problem.T - problem.a) / grid.time_steps;
    ms.consistency_scale = ms.h_s * ms.h_s;
    ms.gl_order = opts.gl_order;
    ms.quad = scheme.to_string();
    ms.points = grid.points;
    for (int j = 0; j <= grid.time_steps; ++j) ms.times.push_back(j == grid.time_steps ? problem.T : problem.a + j * ms.h_s);

    if (problem.weight.is_exponential()) {
        SamplePlan plan;
        plan.time_points = 64;
        plan.flow_pairs = 8;
        const HypothesisReport rep = validate_hypotheses(model, problem.weight, plan);
        if (!rep.get("negative_definite_A").passed) {
            ms.warnings.push_back("A(s) is not negative definite; the exponential-weight theory does not cover this run");
        }
    }

    const std::size_t nt = ms.times.size();
    const std::size_t np = grid.points.size();
    ms.u.assign(nt, std::vector<double>(np, 0.0));
    ms.grad.assign(nt, std::vector<Vec>(np, zeros(n)));
    ms.hess.assign(nt, std::vector<Mat>(np, Mat::Zero(n, n)));
    std::vector<TimeMesh> meshes(nt);
    for (std::size_t j = 0; j + 1 < nt; ++j) {
        if (!problem.homogeneous()) meshes[j] = graded_mesh(ms.times[j], problem.T, opts);
        ms.panels = std::max(ms.panels, meshes[j].panels);
    }
    // Source fields per mesh node are shared across points.
    std::vector<std::vector<Field>> sources(nt);
    if (!problem.homogeneous()) {
        for (std::size_t j = 0; j + 1 < nt; ++j) {
            for (double r : meshes[j].nodes) sources[j].push_back(problem.source(r));
        }
    }

    parallel_for(nt * np, [&](std::size_t idx) {
        const std::size_t j = idx / np, p = idx % np;
        const double s = ms.times[j];
        const Vec& x = grid.points[p];
        detail::PointValue acc{0.0, zeros(n), Mat::Zero(n, n)};
        if (j + 1 == nt) {
            const Derivs d = field_derivs(problem.phi, x, grid.derivatives ? 2 : 0);
            acc.u = d.value;
            if (grid.derivatives) {
                acc.grad = d.grad;
                acc.hess = d.hess;
            }
        } else {
            detail::accumulate(op, problem.phi, s, problem.T, x, grid.derivatives, 1.0, acc);
            const TimeMesh& mesh = meshes[j];
            for (std::size_t q = 0; q < mesh.nodes.size(); ++q) {
                detail::accumulate(op, sources[j][q], s, mesh.nodes[q], x, grid.derivatives, mesh.weights[q], acc);
            }
        }
        ms.u[j][p] = acc.u;
        ms.grad[j][p] = acc.grad;
        ms.hess[j][p] = acc.hess;
    });

    ms.residual.assign(nt, std::vector<double>(np, std::numeric_limits<double>::quiet_NaN()));
    if (grid.derivatives) {
        for (std::size_t j = 1; j + 1 < nt; ++j) {
            const double s = ms.times[j];
            const double dt = ms.times[j + 1] - ms.times[j - 1];
            const Field src = problem.homogeneous() ? Field{} : problem.source(s);
            for (std::size_t p = 0; p < np; ++p) {
                const Vec& x = grid.points[p];
                const double ds = (ms.u[j + 1][p] - ms.u[j - 1][p]) / dt;
                const double f = problem.homogeneous() ? 0.0 : src(x);
                const double r = std::abs(ds + apply_L(model, s, x, ms.grad[j][p], ms.hess[j][p]) + f);
                ms.residual[j][p] = r;
                ms.max_residual = std::max(ms.max_residual, r);
            }
        }
    }
    return ms;
}

inline MildSolution solve_homogeneous(CauchyProblem problem, const CauchyGrid& grid, const QuadScheme& scheme = {},
                                      const CauchyOptions& opts = {}) {
    problem.source = nullptr;
    return solve(problem, grid, scheme, opts);
}

inline double residual(const MildSolution& ms) { return ms.max_residual; }

/// max |g(x) − g(y)| / |x − y|^α over grid pairs with separation in [min_sep, max_sep].
inline double holder_on_grid(const std::vector<Vec>& pts, const std::vector<double>& g, double alpha,
                             double min_sep = 1e-4, double max_sep = 1.0) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double d = (pts[i] - pts[j]).norm();
            if (d < min_sep || d > max_sep) continue;
            best = std::max(best, std::abs(g[i] - g[j]) / std::pow(d, alpha));
        }
    return best;
}

struct SchauderReport {
    double ratio = 0.0;
    double solution_norm = 0.0;  ///< sup_s ‖u(s)‖_{C_p^{2+θ}}
    double data_norm = 0.0;      ///< ‖φ‖_{C_p^{2+θ}} + sup_s ‖f(s)‖_{C_p^θ}
};

namespace detail {

/// ‖·‖_{C_p^{2+θ}} on grid points from values, gradients and Hessians.
inline double grid_norm_2theta(const std::vector<Vec>& pts, const WeightSpec& w, const std::vector<double>& u,
                               const std::vector<Vec>& grad, const std::vector<Mat>& hess, double theta) {
    const int n = static_cast<int>(pts.front().size());
    double sup0 = 0.0;
    std::vector<double> sup1(n, 0.0);
    std::vector<std::vector<double>> sup2(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::vector<double>>> top(n, std::vector<std::vector<double>>(n, std::vector<double>(pts.size())));
    for (std::size_t p = 0; p < pts.size(); ++p) {
        const double pw = weight_value(w, pts[p]);
        sup0 = std::max(sup0, std::abs(u[p]) / pw);
        for (int i = 0; i < n; ++i) {
            sup1[i] = std::max(sup1[i], std::abs(grad[p](i)) / pw);
            for (int j = i; j < n; ++j) {
                sup2[i][j] = std::max(sup2[i][j], std::abs(hess[p](i, j)) / pw);
                top[i][j][p] = hess[p](i, j) / pw;
            }
        }
    }
    double total = sup0;
    for (int i = 0; i < n; ++i) {
        total += sup1[i];
        for (int j = i; j < n; ++j) total += sup2[i][j] + holder_on_grid(pts, top[i][j], theta);
    }
    return total;
}

}  // namespace detail

/// sup_s ‖u(s)‖_{C_p^{2+θ}} / (‖φ‖_{C_p^{2+θ}} + sup_s ‖f(s)‖_{C_p^θ}) with all
/// norms taken on the solution's spatial grid.
inline SchauderReport schauder_ratio(const CauchyProblem& problem, const MildSolution& ms) {
    if (ms.grad.empty() || ms.hess.empty()) throw PreconditionError("schauder_ratio needs derivatives");
    const std::vector<Vec>& pts = ms.points;
    SchauderReport rep;
    for (std::size_t j = 0; j < ms.times.size(); ++j) {
        rep.solution_norm = std::max(rep.solution_norm,
                                     detail::grid_norm_2theta(pts, problem.weight, ms.u[j], ms.grad[j], ms.hess[j], problem.theta));
    }
    std::vector<double> pu;
    std::vector<Vec> pg;
    std::vector<Mat> ph;
    for (const auto& x : pts) {
        const Derivs d = field_derivs(problem.phi, x, 2);
        pu.push_back(d.value);
        pg.push_back(d.grad);
        ph.push_back(d.hess);
    }
    const double phi_norm = detail::grid_norm_2theta(pts, problem.weight, pu, pg, ph, problem.theta);
    double f_norm = 0.0;
    if (!problem.homogeneous()) {
        for (double s : ms.times) {
            const Field f = problem.source(s);
            std::vector<double> g;
            double sup = 0.0;
            for (const auto& x : pts) {
                const double v = f(x) / weight_value(problem.weight, x);
                g.push_back(v);
                sup = std::max(sup, std::abs(v));
            }
            f_norm = std::max(f_norm, sup + holder_on_grid(pts, g, problem.theta));
        }
    }
    rep.data_norm = phi_norm + f_norm;
    rep.ratio = rep.data_norm > 0.0 ? rep.solution_norm / rep.data_norm : 0.0;
    return rep;
}

}  // namespace ouevo
