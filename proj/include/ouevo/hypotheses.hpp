#pragma once

#include "ouevo/coeffs.hpp"
#include "ouevo/flow.hpp"
#include "ouevo/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ouevo {

/// Where and how densely the standing hypotheses are sampled.
struct SamplePlan {
    int time_points = 256;
    int directions = 64;
    int flow_pairs = 32;             ///< (s,t) pairs used for the contraction check
    std::vector<double> times;       ///< explicit sample times; overrides time_points when non-empty
    double symmetry_tol = 1e-12;
};

struct HypothesisCheck {
    std::string name;
    bool applicable = true;
    bool passed = true;
    double measured = 0.0;  ///< worst sampled value
    double bound = 0.0;     ///< value it was compared against
    double t_witness = 0.0;
    double s_witness = 0.0;
    Vec x_witness;
    std::string detail;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;
    double A_inf = 0.0;  ///< declared, or measured maximum × 1.05
    double Q_inf = 0.0;
    double C_ell = 0.0;  ///< declared, or measured minimum / 1.05

    [[nodiscard]] bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    [[nodiscard]] const HypothesisCheck& get(const std::string& name) const {
        for (const auto& c : checks) {
            if (c.name == name) return c;
        }
        throw PreconditionError("no hypothesis check named " + name);
    }
};

namespace detail {

inline std::vector<double> plan_times(const CoefficientModel& model, const SamplePlan& plan) {
    if (!plan.times.empty()) {
        for (double t : plan.times) model.check_time(t);
        return plan.times;
    }
    if (plan.time_points < 1) throw PreconditionError("sample plan needs at least one time point");
    const TimeDomain& d = model.time_domain();
    std::vector<double> ts;
    for (int i = 0; i < plan.time_points; ++i) {
        const double frac = plan.time_points == 1 ? 0.5 : static_cast<double>(i) / (plan.time_points - 1);
        ts.push_back(d.t_min + frac * (d.t_max - d.t_min));
    }
    return ts;
}

}  // namespace detail

/// Samples the boundedness, ellipticity and (for exponential weights)
/// contraction and negative-definiteness hypotheses.
///
/// Checks, by name:
///  - "A_bounded":      |a_ij(t)| ≤ A_inf
///  - "Q_bounded":      |q_ij(t)| ≤ Q_inf
///  - "ellipticity":    ⟨Q(t)x,x⟩ ≥ C_ell on unit directions
///  - "contraction":    ‖U(t,s)‖ ≤ 1 with strict exponential decay (exponential weights)
///  - "negative_definite_A": max eig of (A+Aᵀ)/2 < 0 (exponential weights)
inline HypothesisReport validate_hypotheses(const CoefficientModel& model, const WeightSpec& weight,
                                            const SamplePlan& plan = {}) {
    weight.validate();
    const int n = model.dimension();
    const std::vector<double> times = detail::plan_times(model, plan);
    const std::vector<Vec> dirs = unit_directions(n, static_cast<std::size_t>(std::max(plan.directions, 1)));
    const DeclaredBounds& declared = model.declared_bounds();

    double a_max = 0.0, q_max = 0.0, a_t = times.front(), q_t = times.front();
    double ell_min = std::numeric_limits<double>::infinity(), ell_t = times.front();
    Vec ell_x = dirs.front();
    double sym_max = -std::numeric_limits<double>::infinity(), sym_t = times.front();

    for (double t : times) {
        const Mat a = model.A(t);
        const Mat q = model.Q(t);
        const double asym = max_abs(q - q.transpose());
        if (asym >= plan.symmetry_tol * std::max(1.0, max_abs(q))) {
            throw NonSymmetricQ("|Q - Q^T| = " + std::to_string(asym) + " at t = " + std::to_string(t));
        }
        if (max_abs(a) > a_max) {
            a_max = max_abs(a);
            a_t = t;
        }
        if (max_abs(q) > q_max) {
            q_max = max_abs(q);
            q_t = t;
        }
        auto probe = [&](const Vec& x) {
            const double v = x.dot(q * x);
            if (v < ell_min) {
                ell_min = v;
                ell_t = t;
                ell_x = x;
            }
        };
        for (const auto& x : dirs) probe(x);
        const SymEigen e = sym_eigen(q);
        probe(e.vectors.col(0));
        const double lead = sym_eigen(a).values.maxCoeff();
        if (lead > sym_max) {
            sym_max = lead;
            sym_t = t;
        }
    }

    HypothesisReport rep;
    rep.A_inf = declared.A_inf.value_or(1.05 * a_max);
    rep.Q_inf = declared.Q_inf.value_or(1.05 * q_max);
    rep.C_ell = declared.C_ell.value_or(ell_min / 1.05);

    HypothesisCheck ha;
    ha.name = "A_bounded";
    ha.measured = a_max;
    ha.bound = rep.A_inf;
    ha.passed = std::isfinite(a_max) && a_max <= rep.A_inf;
    ha.t_witness = a_t;
    rep.checks.push_back(ha);

    HypothesisCheck hq;
    hq.name = "Q_bounded";
    hq.measured = q_max;
    hq.bound = rep.Q_inf;
    hq.passed = std::isfinite(q_max) && q_max <= rep.Q_inf;
    hq.t_witness = q_t;
    rep.checks.push_back(hq);

    HypothesisCheck he;
    he.name = "ellipticity";
    he.measured = ell_min;
    he.bound = declared.C_ell.value_or(0.0);
    he.passed = declared.C_ell ? ell_min >= *declared.C_ell && *declared.C_ell > 0.0
                               : ell_min > 1e-12 * std::max(1.0, q_max);
    he.t_witness = ell_t;
    he.x_witness = ell_x;
    rep.checks.push_back(he);

    HypothesisCheck hc;
    hc.name = "contraction";
    HypothesisCheck hn;
    hn.name = "negative_definite_A";
    if (weight.is_exponential()) {
        const int pairs = std::max(plan.flow_pairs, 1);
        const TimeDomain& dom = model.time_domain();
        double worst_norm = 0.0;
        double worst_rate = std::numeric_limits<double>::infinity();
        for (int i = 0; i < pairs; ++i) {
            const double frac = (i + 0.5) / pairs;
            const double d = 1e-2 * std::pow(100.0, frac) * std::min(1.0, 0.25 * (dom.t_max - dom.t_min));
            const double s = dom.t_min + (dom.t_max - dom.t_min - d) * std::fmod(0.618033988749895 * (i + 1), 1.0);
            const FlowState f = flow(model, s, s + d);
            const double u = spectral_norm(f.U);
            worst_rate = std::min(worst_rate, -std::log(u) / d);
            if (u > worst_norm) {
                worst_norm = u;
                hc.s_witness = s;
                hc.t_witness = s + d;
            }
        }
        hc.measured = worst_norm;
        hc.bound = 1.0;
        hc.passed = worst_norm <= 1.0 + 1e-9 && worst_rate > 1e-9;
        std::ostringstream os;
        os << "max ||U(t,s)|| = " << worst_norm << ", min decay rate = " << worst_rate;
        hc.detail = os.str();

        hn.measured = sym_max;
        hn.bound = 0.0;
        hn.passed = sym_max < 0.0;
        hn.t_witness = sym_t;
    } else {
        hc.applicable = hn.applicable = false;
        hc.detail = hn.detail = "not required for polynomial weights";
    }
    rep.checks.push_back(hc);
    rep.checks.push_back(hn);
    return rep;
}

}  // namespace ouevo
