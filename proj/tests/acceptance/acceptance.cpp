// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "ouevo/ouevo.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ouevo;

namespace {

struct Result {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

ModelPtr shared(CoefficientModel m) { return std::make_shared<const CoefficientModel>(std::move(m)); }

double max_abs_diff(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff(); }

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(lo * std::pow(hi / lo, i / (count - 1.0)));
    return v;
}

// 1. Closed-form propagator and covariance; cocycle identity.
Result closed_form_flow() {
    Result r;
    const CoefficientModel ou1 = builtin_model("ou1");
    const CoefficientModel rot = builtin_model("rotation");
    const oracle::ScalarOu sc{-1.0, 2.0};
    double err = 0.0;
    for (double d : log_grid(1e-3, 2.0, 25)) {
        const double s = 0.3;
        const FlowState a = flow(ou1, s, s + d);
        err = std::max(err, std::abs(a.U(0, 0) - sc.U(d)));
        err = std::max(err, std::abs(a.Qc(0, 0) - sc.Qc(d)));
        err = std::max(err, std::abs(a.g(0)));
        const FlowState b = flow(rot, s, s + d);
        err = std::max(err, max_abs_diff(b.U, oracle::rotation_U(d)));
        err = std::max(err, max_abs_diff(b.Qc, d * identity(2)));
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double cocycle = 0.0;
    for (const char* name : {"ou1", "rotation", "periodic"}) {
        const CoefficientModel m = builtin_model(name, 2);
        for (int k = 0; k < 50; ++k) {
            double t3[3] = {u(rng), u(rng), u(rng)};
            std::sort(t3, t3 + 3);
            const FlowState sr = flow(m, t3[0], t3[1]);
            const FlowState rt = flow(m, t3[1], t3[2]);
            const FlowState st = flow(m, t3[0], t3[2]);
            cocycle = std::max(cocycle, max_abs_diff(st.U, rt.U * sr.U));
            cocycle = std::max(cocycle, (st.g - (rt.U * sr.g + rt.g)).cwiseAbs().maxCoeff());
            cocycle = std::max(cocycle, max_abs_diff(st.Qc, rt.U * sr.Qc * rt.U.transpose() + rt.Qc));
        }
    }
    r.detail << "closed-form error " << err << ", cocycle defect " << cocycle;
    r.require(err <= 1e-9, "closed form <= 1e-9");
    r.require(cocycle <= 1e-8, "cocycle <= 1e-8");
    return r;
}

Mat random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Mat b(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = g(rng);
    return b * b.transpose() / n + 0.2 * identity(n);
}

// 2. Gaussian engine: normalization, exact low moments, Monte Carlo within 4σ.
Result gaussian_engine() {
    Result r;
    std::mt19937_64 rng(11);
    const QuadScheme gh = QuadScheme::gauss_hermite(40);
    double norm_err = 0.0, mom_err = 0.0, worst_sigma = 0.0;
    for (int n = 1; n <= 3; ++n) {
        for (int rep = 0; rep < 3; ++rep) {
            const Mat cov = random_spd(n, rng);
            Vec mean(n);
            for (int i = 0; i < n; ++i) mean(i) = 0.5 * (i + 1) - rep;
            const GaussianMeasure shifted(mean, cov);
            norm_err = std::max(norm_err, std::abs(expectation(shifted, [](const Vec&) { return 1.0; }, gh) - 1.0));
            const GaussianMeasure mu(zeros(n), cov);
            const double m2 = expectation(mu, [](const Vec& y) { return y.squaredNorm(); }, gh);
            const double m4 = expectation(mu, [](const Vec& y) { return std::pow(y.squaredNorm(), 2); }, gh);
            mom_err = std::max(mom_err, std::abs(m2 - oracle::gaussian_moment2(cov)));
            mom_err = std::max(mom_err, std::abs(m4 - oracle::gaussian_moment4(cov)));
            mom_err = std::max(mom_err, std::abs(absolute_moment(mu, 4, gh) - oracle::gaussian_moment4(cov)));
            const QuadScheme mc = QuadScheme::monte_carlo(200000, 100 + 10 * n + rep);
            for (int k : {2, 4}) {
                const Estimate e =
                    expectation_with_error(mu, [k](const Vec& y) { return std::pow(y.squaredNorm(), k / 2); }, mc);
                const double exact = k == 2 ? oracle::gaussian_moment2(cov) : oracle::gaussian_moment4(cov);
                worst_sigma = std::max(worst_sigma, std::abs(e.value - exact) / e.std_error);
            }
        }
    }
    r.detail << "normalization " << norm_err << ", moment error " << mom_err << ", MC worst " << worst_sigma << " sigma";
    r.require(norm_err <= 1e-8, "normalization <= 1e-8");
    r.require(mom_err <= 1e-10, "moments <= 1e-10");
    r.require(worst_sigma <= 4.0, "Monte Carlo within 4 sigma");
    return r;
}

// 3. P1 = 1, linear and quadratic moment identities, Chapman–Kolmogorov.
Result operator_identities() {
    Result r;
    double one = 0.0, lin = 0.0, quad = 0.0, ck = 0.0;
    for (const char* name : {"ou1", "periodic", "rotation"}) {
        const int n = 2;
        const EvolutionOperator op(shared(builtin_model(name, n)), WeightSpec::polynomial(1), QuadScheme::gauss_hermite(24));
        const std::vector<Vec> grid = norm_points(n, 3.0, 24);
        const Field f1 = bank_field("one", n), fl = bank_field("linear", n), fq = bank_field("quadratic", n);
        const double s = 0.2, t = 1.1;
        const auto fs = op.flow_state(s, t);
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = 1.0 / (i + 1);
        for (const auto& x : grid) {
            const Vec a = fs->mean(x);
            one = std::max(one, std::abs(op.apply(f1, s, t, x) - 1.0));
            lin = std::max(lin, std::abs(op.apply(fl, s, t, x) - v.dot(a)));
            quad = std::max(quad, std::abs(op.apply(fq, s, t, x) - (a.squaredNorm() + fs->Qc.trace())));
        }
        const std::vector<Vec> coarse = norm_points(n, 2.0, 6);
        for (const Field& f : smooth_bank(n)) ck = std::max(ck, op.compose_check(f, s, 0.6, t, coarse));
    }
    r.detail << "P1 " << one << ", linear " << lin << ", quadratic " << quad << ", Chapman-Kolmogorov " << ck;
    r.require(one <= 1e-8 && lin <= 1e-8 && quad <= 1e-8, "identities <= 1e-8");
    r.require(ck <= 1e-6, "Chapman-Kolmogorov <= 1e-6");
    return r;
}

// 4. Derivative kernels against finite differences of apply; heat-cosine Hessian.
Result derivative_kernels() {
    Result r;
    double grad_rel = 0.0, hess_rel = 0.0;
    for (const char* name : {"ou1", "periodic"}) {
        for (int n : {1, 2}) {
            const EvolutionOperator op(shared(builtin_model(name, n)), WeightSpec::polynomial(1), QuadScheme::gauss_hermite(30));
            const double s = 0.1, t = 0.9;
            const std::vector<Vec> pts = norm_points(n, 1.5, 6);
            for (const Field& f : smooth_bank(n)) {
                auto pf = [&](const Vec& y) { return op.apply(f, s, t, y); };
                double gmax = 0.0, gerr = 0.0, hmax = 0.0, herr = 0.0;
                for (const auto& x : pts) {
                    const Vec g = op.gradient(f, s, t, x);
                    const Mat h = op.hessian(f, s, t, x);
                    gerr = std::max(gerr, (g - oracle::fd_gradient(pf, x, 1e-3)).cwiseAbs().maxCoeff());
                    herr = std::max(herr, max_abs_diff(h, oracle::fd_hessian(pf, x, 1e-3)));
                    gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
                    hmax = std::max(hmax, h.cwiseAbs().maxCoeff());
                }
                grad_rel = std::max(grad_rel, gerr / std::max(gmax, 1e-12));
                hess_rel = std::max(hess_rel, herr / std::max(hmax, 1e-12));
            }
        }
    }
    const EvolutionOperator heat(shared(builtin_model("heat")), WeightSpec::polynomial(1), QuadScheme::gauss_hermite(40));
    const Field c = bank_field("cos", 1);
    double heat_err = 0.0;
    for (double d : {0.01, 0.1, 0.5, 1.0, 2.0}) {
        for (double x0 : {-2.0, -0.7, 0.0, 0.4, 1.3, 3.0}) {
            const Vec x = Vec::Constant(1, x0);
            heat_err = std::max(heat_err, std::abs(heat.hessian(c, 0.0, d, x)(0, 0) + std::exp(-d) * std::cos(x0)));
        }
    }
    r.detail << "gradient rel " << grad_rel << ", Hessian rel " << hess_rel << ", heat-cosine Hessian " << heat_err;
    r.require(grad_rel <= 1e-4 && hess_rel <= 1e-4, "finite differences <= 1e-4 relative");
    r.require(heat_err <= 1e-6, "heat-cosine Hessian <= 1e-6");
    return r;
}

// 5. Smoothing-rate slopes on both weight families.
Result smoothing_rates() {
    Result r;
    const ModelPtr model = shared(builtin_model("ou-slow"));
    struct Case {
        double alpha, theta, tol;
    };
    for (const WeightSpec& w : {WeightSpec::polynomial(1), WeightSpec::exponential(0.25)}) {
        const EvolutionOperator op(model, w, QuadScheme::gauss_hermite(40));
        r.detail << w.to_string() << ":";
        for (const Case& c : {Case{0, 1, 0.05}, Case{0, 2, 0.1}, Case{1, 2, 0.1}}) {
            RateOptions ro;
            ro.strict = false;
            const RateFit fit = smoothing_rate(op, rate_test_function(c.alpha, c.theta, 1), c.alpha, c.theta, ro);
            r.detail << " (" << c.alpha << "," << c.theta << ") slope " << fit.slope << " r2 " << fit.r2 << ";";
            r.require(fit.r2 >= 0.98, "r2 >= 0.98");
            r.require(std::abs(fit.slope - fit.expected()) <= c.tol, "slope within tolerance");
        }
        r.detail << " ";
    }
    return r;
}

CauchyProblem heat_problem(Field phi, SourceFn f) {
    CauchyProblem p;
    p.model = shared(builtin_model("heat"));
    p.weight = WeightSpec::polynomial(1);
    p.a = 0.0;
    p.T = 1.0;
    p.phi = std::move(phi);
    p.source = std::move(f);
    return p;
}

std::vector<Vec> line_grid(double lo, double hi, int count) {
    std::vector<Vec> pts;
    for (int i = 0; i < count; ++i) pts.push_back(Vec::Constant(1, lo + (hi - lo) * i / (count - 1.0)));
    return pts;
}

// 6. Mild solution: closed forms, residual and its h_s² contraction, FD oracle.
Result mild_solution() {
    Result r;
    const QuadScheme gh = QuadScheme::gauss_hermite(40);
    CauchyGrid grid;
    grid.points = line_grid(-2.0, 2.0, 9);
    grid.time_steps = 8;

    const Field zero = Field::from_jet([](const Vec&, int o) { return Derivs::constant(1, o, 0.0); }, "zero");
    const Field one = bank_field("one", 1);
    const MildSolution m1 = solve(heat_problem(zero, [one](double) { return one; }), grid, gh);
    double e1 = 0.0;
    for (std::size_t k = 0; k < m1.times.size(); ++k)
        for (double v : m1.u[k]) e1 = std::max(e1, std::abs(v - (1.0 - m1.times[k])));

    const CauchyProblem hc = heat_problem(bank_field("cos", 1), {});
    const MildSolution m2 = solve(hc, grid, gh);
    double e2 = 0.0;
    for (std::size_t k = 0; k < m2.times.size(); ++k)
        for (std::size_t i = 0; i < m2.points.size(); ++i)
            e2 = std::max(e2, std::abs(m2.u[k][i] - std::exp(-(1.0 - m2.times[k])) * std::cos(m2.points[i](0))));

    const double quad_tol = 1e-8;
    const double bound = 10.0 * (m2.h_s * m2.h_s + quad_tol);
    CauchyGrid fine = grid;
    fine.time_steps = 16;
    const MildSolution m3 = solve(hc, fine, gh);
    const double contraction = m2.max_residual / m3.max_residual;

    // Ornstein–Uhlenbeck problem with a time-dependent source against Crank–Nicolson.
    CauchyProblem ou;
    ou.model = shared(builtin_model("ou1"));
    ou.weight = WeightSpec::polynomial(1);
    ou.a = 0.0;
    ou.T = 1.0;
    ou.phi = Field::from_jet([](const Vec& x, int o) { return cos(1.3 * Derivs::coordinate(x, 0, o)); }, "phi");
    ou.source = [](double s) {
        const double c = 0.5 * std::cos(2.0 * s);
        return Field::from_jet([c](const Vec& x, int o) { return c * sin(Derivs::coordinate(x, 0, o)); }, "f");
    };
    CauchyGrid og;
    og.points = line_grid(-2.0, 2.0, 17);
    og.time_steps = 4;
    og.derivatives = false;
    const MildSolution m4 = solve(ou, og, gh);
    oracle::CrankNicolson1D cn;
    cn.a = [](double) { return -1.0; };
    cn.q = [](double) { return 2.0; };
    cn.h = [](double) { return 0.0; };
    cn.phi = [](double x) { return std::cos(1.3 * x); };
    cn.f = [](double s, double x) { return 0.5 * std::cos(2.0 * s) * std::sin(x); };
    double fd_err = 0.0;
    for (std::size_t k = 0; k + 1 < m4.times.size(); ++k) {
        const std::vector<double> ref = cn.solve(m4.times[k], ou.T);
        for (std::size_t i = 0; i < m4.points.size(); ++i) {
            const double x = m4.points[i](0);
            if (std::abs(x) > 1.0 + 1e-12) continue;
            fd_err = std::max(fd_err, std::abs(m4.u[k][i] - cn.at(ref, x)) / weight_value(ou.weight, m4.points[i]));
        }
    }
    r.detail << "u=T-s error " << e1 << ", heat-cosine error " << e2 << ", residual " << m2.max_residual << " (bound "
             << bound << "), contraction x" << contraction << ", FD oracle " << fd_err;
    r.require(e1 <= 1e-8, "f=1 solution <= 1e-8");
    r.require(e2 <= 1e-6, "heat-cosine <= 1e-6");
    r.require(m2.max_residual <= bound && m3.max_residual <= 10.0 * (m3.h_s * m3.h_s + quad_tol), "residual bound");
    r.require(contraction >= 3.5 && contraction <= 4.5, "residual contracts about 4x");
    r.require(fd_err <= 1e-3, "finite-difference oracle <= 1e-3");
    return r;
}

// 7. Schauder ratio: finite, stable under refinement, invariant under scaling.
Result schauder() {
    Result r;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_refine = 0.0, worst_scale = 0.0;
    int problems = 0;
    bool finite = true;
    const QuadScheme gh = QuadScheme::gauss_hermite(24);
    for (const char* name : {"ou1", "periodic"}) {
        const ModelPtr model = shared(builtin_model(name));
        for (int k = 0; k < 5; ++k) {
            const double amp = 0.5 + u(rng), freq = 0.5 + 1.5 * u(rng), off = u(rng) - 0.5;
            const double famp = 0.2 + u(rng), ffreq = 0.5 + u(rng), rate = 2.0 * u(rng);
            auto make = [&](double scale) {
                CauchyProblem p;
                p.model = model;
                p.weight = WeightSpec::polynomial(1);
                p.a = 0.0;
                p.T = 1.0;
                p.theta = 0.5;
                p.phi = Field::from_jet(
                    [=](const Vec& x, int o) { return scale * (off + amp * cos(freq * Derivs::coordinate(x, 0, o))); }, "phi");
                p.source = [=](double s) {
                    const double c = scale * famp * std::cos(rate * s);
                    return Field::from_jet([=](const Vec& x, int o) { return c * sin(ffreq * Derivs::coordinate(x, 0, o)); },
                                           "f");
                };
                return p;
            };
            CauchyGrid coarse;
            coarse.points = line_grid(-2.0, 2.0, 9);
            coarse.time_steps = 4;
            CauchyGrid fine;
            fine.points = line_grid(-2.0, 2.0, 17);
            fine.time_steps = 8;
            const CauchyProblem p1 = make(1.0), p3 = make(3.7);
            const double a = schauder_ratio(p1, solve(p1, coarse, gh)).ratio;
            const double b = schauder_ratio(p1, solve(p1, fine, gh)).ratio;
            const double c = schauder_ratio(p3, solve(p3, coarse, gh)).ratio;
            finite = finite && std::isfinite(a) && std::isfinite(b) && a > 0.0;
            worst_refine = std::max(worst_refine, std::abs(b - a) / a);
            worst_scale = std::max(worst_scale, std::abs(c - a) / a);
            ++problems;
        }
    }
    r.detail << problems << " problems, refinement change " << worst_refine << ", scaling change " << worst_scale;
    r.require(problems >= 10 && finite, "finite ratios on >= 10 problems");
    r.require(worst_refine <= 0.10, "refinement within 10%");
    r.require(worst_scale <= 1e-10, "scaling invariance <= 1e-10");
    return r;
}

// 8. Exponential-weight counterexample with a polynomial control.
Result counterexample() {
    Result r;
    const ModelPtr model = shared(builtin_model("expanding"));
    std::vector<double> radii;
    for (int k = 0; k <= 10; ++k) radii.push_back(std::pow(2.0, k));
    const QuadScheme gh = QuadScheme::gauss_hermite(60);
    for (double gamma : {0.25, 0.5}) {
        const CounterexampleTable t = exponential_counterexample(model, WeightSpec::exponential(gamma), 0.0, 1.0, radii, gh);
        r.detail << "gamma " << gamma << ": log(last/first) " << t.log_growth() << "; ";
        r.require(t.strictly_increasing(), "strictly increasing");
        r.require(t.log_growth() > std::log(1e3), "last/first > 1e3");
    }
    const CounterexampleTable c = exponential_counterexample(model, WeightSpec::polynomial(1), 0.0, 1.0, radii, gh);
    double lo = 1e300, hi = -1e300;
    for (const auto& row : c.rows) {
        lo = std::min(lo, row.log_ratio);
        hi = std::max(hi, row.log_ratio);
    }
    r.detail << "control max/min " << std::exp(hi - lo);
    r.require(std::exp(hi - lo) < 10.0, "control bounded");
    return r;
}

// 9. Compactness: monotone decay and a negligible final difference.
Result compactness() {
    Result r;
    for (int n : {1, 2}) {
        const EvolutionOperator op(shared(builtin_model("ou1", n)), WeightSpec::polynomial(1), QuadScheme::gauss_hermite(n == 1 ? 40 : 20));
        CompactnessOptions co;
        co.grid_points = 12;
        co.holder_budget = 0;
        const CompactnessTable t = compactness_decay(op, 0.0, 0.5, 1.0, {}, unit_ball_bank(n, op.weight()), co);
        const auto fs = op.flow_state(0.0, 0.5);
        const double expected_n = spectral_norm(fs->U) * co.grid_radius + fs->g.norm() + 8.0 * std::sqrt(fs->lambda_max);
        r.detail << "N=" << n << ": n_final " << t.n_final << ", final difference " << t.rows.back().difference << "; ";
        r.require(t.nonincreasing(), "nonincreasing");
        r.require(std::abs(t.rows.back().n - expected_n) <= 1e-12 * expected_n, "final n = mean range + 8 sd");
        r.require(t.rows.back().difference <= 1e-6, "final difference <= 1e-6");
    }
    return r;
}

// 10. Norm equivalence across the derivative-equipped bank.
Result norm_equivalence() {
    Result r;
    double c = 1.0;
    for (const WeightSpec& w : {WeightSpec::polynomial(1), WeightSpec::exponential(0.25), WeightSpec::exponential(0.5)}) {
        for (int n : {1, 2, 3}) {
            for (int theta : {1, 2, 3}) {
                for (const Field& f : equivalence_bank(n, w)) {
                    const EquivalenceReport rep = norm_equivalence_check({f, w, n}, theta, {5.0, 10.0, 20.0}, 64);
                    c = std::max({c, rep.ratio_hi, 1.0 / rep.ratio_lo});
                }
            }
        }
    }
    r.detail << "common interval [1/c, c] with c = " << c;
    r.require(c <= 50.0, "c <= 50");
    return r;
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        std::function<Result()> run;
    };
    const std::vector<Entry> entries{
        {1, "closed-form propagator and covariance", closed_form_flow},
        {2, "Gaussian engine", gaussian_engine},
        {3, "evolution-operator identities", operator_identities},
        {4, "derivative kernels", derivative_kernels},
        {5, "smoothing rates", smoothing_rates},
        {6, "mild solution", mild_solution},
        {7, "Schauder ratio", schauder},
        {8, "exponential-weight counterexample", counterexample},
        {9, "compactness truncation", compactness},
        {10, "norm equivalence", norm_equivalence},
    };
    int failed = 0;
    for (const auto& e : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = e.run();
        } catch (const std::exception& ex) {
            r.pass = false;
            r.detail << "exception: " << ex.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %2d %s: %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", e.id, e.name, r.detail.str().c_str(),
                    secs);
        std::fflush(stdout);
        if (!r.pass) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(entries.size()) - failed, entries.size());
    return failed == 0 ? 0 : 1;
}
