#pragma once

#include "ouevo/bank.hpp"
#include "ouevo/cauchy.hpp"
#include "ouevo/coeffs.hpp"
#include "ouevo/estimates.hpp"
#include "ouevo/evolution.hpp"
#include "ouevo/flow.hpp"
#include "ouevo/gaussmeasure.hpp"
#include "ouevo/hypotheses.hpp"
#include "ouevo/io.hpp"
#include "ouevo/weights.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ouevo::cli {

using nlohmann::json;

/// Everything needed to reproduce a run. `model` is the resolved model
/// description, so file-based models are stored inline.
struct RunConfig {
    std::string command;
    json model;
    std::string weight;
    std::string quad;
    double tol = 0.0;  ///< 0 picks the command default
    std::uint64_t seed = 1;
    json params = json::object();

    [[nodiscard]] json to_json() const {
        return json{{"command", command}, {"model", model}, {"weight", weight}, {"quad", quad},
                    {"tol", tol},         {"seed", seed},   {"params", params}};
    }

    static RunConfig from_json(const json& j) {
        if (!j.is_object()) throw ConfigError("config: expected an object");
        auto need = [&](const char* key) -> const json& {
            if (!j.contains(key)) throw ConfigError(std::string("config.") + key + ": missing");
            return j[key];
        };
        RunConfig c;
        try {
            c.command = need("command").get<std::string>();
            c.model = need("model");
            c.weight = need("weight").get<std::string>();
            c.quad = need("quad").get<std::string>();
            c.tol = j.value("tol", 0.0);
            c.seed = j.value("seed", std::uint64_t{1});
            c.params = j.value("params", json::object());
        } catch (const json::type_error& e) {
            throw ConfigError(std::string("config: wrong field type: ") + e.what());
        }
        return c;
    }
};

/// Result of one experiment: verdict is "pass", "fail" or "inconclusive".
struct Outcome {
    std::string verdict = "pass";
    json details = json::object();
    CsvTable table{{}};
};

namespace detail {

inline std::string default_model(const std::string& command) {
    if (command == "rates") return "ou-slow";
    if (command == "counterexample") return "expanding";
    return "ou1";
}

inline std::string default_weight(const std::string& command) {
    return command == "counterexample" ? "exp:0.25" : "poly:1";
}

inline std::string default_quad(const std::string& command) {
    if (command == "envelopes") return "gh:20";
    if (command == "counterexample") return "gh:60";
    return "gh:40";
}

/// Built-in name, inline JSON object, or path to a JSON file.
inline json resolve_model(const std::string& spec, int dim) {
    const auto& names = builtin_model_names();
    if (std::find(names.begin(), names.end(), spec) != names.end()) {
        return builtin_model(spec, dim).description();
    }
    json j = load_model(spec).description();
    if (dim > 0 && j.value("dimension", dim) != dim) {
        throw ConfigError("dim: --dim " + std::to_string(dim) + " conflicts with the model's dimension");
    }
    return j;
}

template <class T>
T param(const json& p, const char* key) {
    if (!p.contains(key)) throw ConfigError(std::string("params.") + key + ": missing");
    try {
        return p[key].get<T>();
    } catch (const json::type_error&) {
        throw ConfigError(std::string("params.") + key + ": wrong type");
    }
}

inline std::vector<std::string> numbered(const std::string& stem, int n) {
    std::vector<std::string> v;
    for (int i = 0; i < n; ++i) v.push_back(stem + std::to_string(i + 1));
    return v;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline Vec parse_point(const std::string& text, int dim) {
    std::vector<double> xs;
    std::stringstream in(text);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            std::size_t used = 0;
            xs.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::logic_error&) {
            throw ConfigError("x: cannot parse '" + text + "'");
        }
    }
    if (static_cast<int>(xs.size()) != dim) {
        throw ConfigError("x: '" + text + "' has " + std::to_string(xs.size()) + " coordinates, model has " +
                          std::to_string(dim));
    }
    return Eigen::Map<const Vec>(xs.data(), dim);
}

inline Field field_from_json(const json& j, int dim, const std::string& field) {
    if (j.is_string()) return bank_field(j.get<std::string>(), dim);
    if (j.is_number()) {
        const double c = j.get<double>();
        return Field::from_jet([dim, c](const Vec&, int o) { return Derivs::constant(dim, o, c); }, "constant");
    }
    if (!j.is_object() || !j.contains("type")) throw ConfigError(field + ": expected a name, a number or {\"type\":...}");
    const std::string type = j["type"].get<std::string>();
    if (type == "cos") {
        const double amp = j.value("amp", 1.0), freq = j.value("freq", 1.0), offset = j.value("offset", 0.0);
        return Field::from_jet(
            [amp, freq, offset](const Vec& x, int o) {
                return offset + amp * cos(freq * Derivs::coordinate(x, 0, o));
            },
            "cos");
    }
    throw ConfigError(field + ".type: unknown field type '" + type + "'");
}

/// Time-dependent source: anything field_from_json accepts (constant in time), or
/// {"type":"sin","amp","freq","rate"} = amp·sin(freq·x₁)·cos(rate·r).
inline SourceFn source_from_json(const json& j, int dim) {
    if (j.is_string() && j.get<std::string>() == "zero") return {};
    if (j.is_object() && j.value("type", std::string()) == "sin") {
        const double amp = j.value("amp", 1.0), freq = j.value("freq", 1.0), rate = j.value("rate", 0.0);
        return [amp, freq, rate](double r) {
            const double c = amp * std::cos(rate * r);
            return Field::from_jet([c, freq](const Vec& x, int o) { return c * sin(freq * Derivs::coordinate(x, 0, o)); },
                                   "sin");
        };
    }
    const Field f = field_from_json(j, dim, "problem.f");
    return [f](double) { return f; };
}

/// Spatial grid: "points":[[..],..] or "lo","hi","count" on every axis.
inline std::vector<Vec> grid_from_json(const json& g, int dim) {
    std::vector<Vec> pts;
    if (g.contains("points")) {
        for (const auto& p : g["points"]) {
            const auto xs = p.get<std::vector<double>>();
            if (static_cast<int>(xs.size()) != dim) throw ConfigError("problem.grid.points: wrong dimension");
            pts.push_back(Eigen::Map<const Vec>(xs.data(), dim));
        }
        if (pts.empty()) throw ConfigError("problem.grid.points: empty");
        return pts;
    }
    const double lo = g.value("lo", -2.0), hi = g.value("hi", 2.0);
    const int count = g.value("count", 9);
    if (count < 2 || !(lo < hi)) throw ConfigError("problem.grid: need count >= 2 and lo < hi");
    std::size_t total = 1;
    for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(count);
    for (std::size_t k = 0; k < total; ++k) {
        Vec x(dim);
        std::size_t rest = k;
        for (int i = 0; i < dim; ++i) {
            x(i) = lo + (hi - lo) * static_cast<double>(rest % count) / (count - 1);
            rest /= count;
        }
        pts.push_back(x);
    }
    return pts;
}

inline json load_json_argument(const std::string& text, const std::string& field) {
    try {
        if (!text.empty() && text.front() == '{') return json::parse(text);
        std::ifstream in(text);
        if (!in) throw ConfigError(field + ": cannot read '" + text + "'");
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(field + ": malformed JSON: " + e.what());
    }
}

inline CauchyProblem problem_from_json(const json& j, const ModelPtr& model, const WeightSpec& weight) {
    if (!j.is_object()) throw ConfigError("problem: expected an object");
    const int n = model->dimension();
    CauchyProblem p;
    p.model = model;
    p.weight = weight;
    try {
        p.a = j.value("a", 0.0);
        p.T = j.value("T", 1.0);
        p.theta = j.value("theta", 0.5);
        p.phi = field_from_json(j.value("phi", json("cos")), n, "problem.phi");
        p.source = source_from_json(j.value("f", json("zero")), n);
    } catch (const json::type_error& e) {
        throw ConfigError(std::string("problem: wrong field type: ") + e.what());
    }
    if (!(p.a < p.T)) throw ConfigError("problem.T: must exceed problem.a");
    return p;
}

}  // namespace detail

// --- experiments ----------------------------------------------------------------------

class Runner {
public:
    explicit Runner(const RunConfig& cfg)
        : cfg_(cfg),
          model_(std::make_shared<const CoefficientModel>(model_from_json(cfg.model))),
          weight_(WeightSpec::parse(cfg.weight)),
          quad_(QuadScheme::parse(cfg.quad)) {
        weight_.validate();
        if (quad_.is_monte_carlo()) quad_.seed = cfg.seed;
    }

    Outcome run() const {
        const std::string& c = cfg_.command;
        if (c == "flow") return flow_cmd();
        if (c == "apply") return apply_cmd();
        if (c == "norm") return norm_cmd();
        if (c == "solve") return solve_cmd();
        if (c == "rates") return rates_cmd();
        if (c == "envelopes") return envelopes_cmd();
        if (c == "counterexample") return counterexample_cmd();
        if (c == "compactness") return compactness_cmd();
        if (c == "validate") return validate_cmd();
        throw ConfigError("command: unknown subcommand '" + c + "'");
    }

private:
    [[nodiscard]] int dim() const { return model_->dimension(); }
    [[nodiscard]] double tol_or(double fallback) const { return cfg_.tol > 0.0 ? cfg_.tol : fallback; }
    [[nodiscard]] const json& p() const { return cfg_.params; }

    Outcome flow_cmd() const {
        const int n = dim();
        const double s = detail::param<double>(p(), "s");
        const auto ts = detail::param<std::vector<double>>(p(), "t");
        Outcome o;
        std::vector<std::string> cols{"s", "t", "delta", "U_norm", "g_norm"};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) cols.push_back("U" + std::to_string(i + 1) + std::to_string(j + 1));
        cols = detail::concat(cols, detail::numbered("g", n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) cols.push_back("Q" + std::to_string(i + 1) + std::to_string(j + 1));
        cols.insert(cols.end(), {"lambda_min", "lambda_max", "steps"});
        o.table = CsvTable(cols);
        double worst_u = 0.0;
        for (double t : ts) {
            const FlowState fs = flow(*model_, s, t);
            std::vector<double> row{s, t, t - s, spectral_norm(fs.U), fs.g.norm()};
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) row.push_back(fs.U(i, j));
            for (int i = 0; i < n; ++i) row.push_back(fs.g(i));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) row.push_back(fs.Qc(i, j));
            row.insert(row.end(), {fs.lambda_min, fs.lambda_max, static_cast<double>(fs.steps)});
            o.table.add(row);
            worst_u = std::max(worst_u, spectral_norm(fs.U));
        }
        o.details = {{"pairs", ts.size()}, {"max_U_norm", worst_u}};
        return o;
    }

    [[nodiscard]] std::vector<Vec> points_param() const {
        std::vector<Vec> pts;
        for (const auto& x : detail::param<std::vector<std::string>>(p(), "x")) pts.push_back(detail::parse_point(x, dim()));
        return pts;
    }

    Outcome apply_cmd() const {
        const int n = dim();
        const Field f = detail::field_from_json(p().at("f"), n, "f");
        const double s = detail::param<double>(p(), "s"), t = detail::param<double>(p(), "t");
        const int order = detail::param<int>(p(), "deriv");
        if (order < 0 || order > 3) throw ConfigError("deriv: must lie in [0, 3]");
        const EvolutionOperator op(model_, weight_, quad_);
        std::vector<std::string> cols = detail::numbered("x", n);
        cols.insert(cols.end(), {"value", "std_error"});
        std::vector<std::string> comps;
        for (int k = 1; k <= order; ++k)
            for (const auto& beta : multi_indices(n, k)) {
                std::string name = "d";
                for (int i : beta) name += std::to_string(i + 1);
                comps.push_back(name);
            }
        cols = detail::concat(cols, comps);
        Outcome o;
        o.table = CsvTable(cols);
        for (const Vec& x : points_param()) {
            const Estimate e = op.apply_with_error(f, s, t, x);
            std::vector<double> row(x.data(), x.data() + n);
            row.insert(row.end(), {e.value, e.std_error});
            for (int k = 1; k <= order; ++k) {
                const std::vector<double> d = op.derivative(f, k, s, t, x);
                for (const auto& beta : multi_indices(n, k)) {
                    std::size_t flat = 0;
                    for (int i : beta) flat = flat * n + i;
                    row.push_back(d[flat]);
                }
            }
            o.table.add(row);
        }
        o.details = {{"delta", t - s}, {"quad", quad_.to_string()}, {"deriv", order}};
        return o;
    }

    Outcome norm_cmd() const {
        const int n = dim();
        const std::string kind = detail::param<std::string>(p(), "kind");
        const double R = detail::param<double>(p(), "radius");
        const auto points = detail::param<std::size_t>(p(), "points");
        Outcome o;
        if (kind == "equivalence") {
            const double c = tol_or(50.0);
            const auto thetas = detail::param<std::vector<int>>(p(), "thetas");
            o.table = CsvTable({"function", "theta", "ratio_lo", "ratio_hi"});
            double lo = 1.0, hi = 1.0;
            for (int theta : thetas) {
                for (const Field& f : equivalence_bank(n, weight_)) {
                    const EquivalenceReport r = norm_equivalence_check({f, weight_, n}, theta, {5.0, 10.0, 20.0}, points);
                    o.table.add_cells({f.name, std::to_string(theta), format_number(r.ratio_lo), format_number(r.ratio_hi)});
                    lo = std::min(lo, r.ratio_lo);
                    hi = std::max(hi, r.ratio_hi);
                }
            }
            o.verdict = (lo >= 1.0 / c && hi <= c) ? "pass" : "fail";
            o.details = {{"ratio_lo", lo}, {"ratio_hi", hi}, {"c", c}};
            return o;
        }
        const WeightedFunction wf{detail::field_from_json(p().at("f"), n, "f"), weight_, n};
        NormEstimate e;
        if (kind == "sup") {
            e = weighted_sup_norm(wf, R, points);
        } else if (kind == "holder") {
            e = holder_seminorm(wf, detail::param<double>(p(), "alpha"), R);
        } else if (kind == "full") {
            e = full_norm(wf, detail::param<int>(p(), "theta"), detail::param<double>(p(), "alpha"), R, points);
        } else {
            throw ConfigError("kind: expected sup, holder, full or equivalence, got '" + kind + "'");
        }
        o.table = CsvTable(detail::concat({"value", "radius", "points"}, detail::numbered("witness", n)));
        std::vector<double> row{e.value, e.radius, static_cast<double>(e.points)};
        for (int i = 0; i < n; ++i) row.push_back(e.witness.size() == n ? e.witness(i) : 0.0);
        o.table.add(row);
        o.details = {{"value", e.value}};
        return o;
    }

    Outcome solve_cmd() const {
        const int n = dim();
        const json& pj = p().at("problem");
        const CauchyProblem prob = detail::problem_from_json(pj, model_, weight_);
        CauchyGrid grid;
        const json g = pj.value("grid", json::object());
        grid.time_steps = g.value("time_steps", 16);
        grid.points = detail::grid_from_json(g, n);
        const MildSolution ms = solve(prob, grid, quad_);
        const double tol = tol_or(1e-8);
        Outcome o;
        o.table = CsvTable(detail::concat(detail::concat({"s"}, detail::numbered("x", n)), {"u", "residual"}));
        bool finite = true;
        for (std::size_t k = 0; k < ms.times.size(); ++k)
            for (std::size_t i = 0; i < ms.points.size(); ++i) {
                std::vector<double> row{ms.times[k]};
                row.insert(row.end(), ms.points[i].data(), ms.points[i].data() + n);
                row.insert(row.end(), {ms.u[k][i], ms.residual[k][i]});
                finite = finite && std::isfinite(ms.u[k][i]);
                o.table.add(row);
            }
        const double bound = 10.0 * (ms.h_s * ms.h_s + tol);
        o.verdict = finite && ms.max_residual <= bound ? "pass" : "fail";
        const SchauderReport sr = schauder_ratio(prob, ms);
        o.details = {{"max_residual", ms.max_residual}, {"residual_bound", bound},       {"h_s", ms.h_s},
                     {"panels", ms.panels},             {"schauder_ratio", sr.ratio},    {"warnings", ms.warnings}};
        return o;
    }

    Outcome rates_cmd() const {
        const double alpha = detail::param<double>(p(), "alpha"), theta = detail::param<double>(p(), "theta");
        RateOptions ro;
        ro.delta_min = detail::param<double>(p(), "delta_min");
        ro.delta_max = detail::param<double>(p(), "delta_max");
        ro.count = detail::param<int>(p(), "count");
        ro.radius = detail::param<double>(p(), "radius");
        ro.s = detail::param<double>(p(), "s");
        ro.strict = false;
        const json fj = p().value("f", json(nullptr));
        const Field f = fj.is_null() ? rate_test_function(alpha, theta, dim()) : detail::field_from_json(fj, dim(), "f");
        const EvolutionOperator op(model_, weight_, quad_);
        const RateFit fit = smoothing_rate(op, f, alpha, theta, ro);
        const bool tight = std::abs(alpha - theta) < 1e-12 || (alpha == 0.0 && std::abs(theta - 1.0) < 1e-12);
        const double tol = tol_or(tight ? 0.05 : 0.1);
        Outcome o;
        o.table = CsvTable({"delta", "norm"});
        for (std::size_t i = 0; i < fit.deltas.size(); ++i) o.table.add({fit.deltas[i], fit.norms[i]});
        if (!fit.conclusive()) {
            o.verdict = "inconclusive";
        } else {
            o.verdict = std::abs(fit.slope - fit.expected()) <= tol ? "pass" : "fail";
        }
        o.details = {{"alpha", alpha},      {"theta", theta}, {"slope", fit.slope},
                     {"expected", fit.expected()}, {"tolerance", tol}, {"r2", fit.r2},
                     {"function", f.name}};
        return o;
    }

    Outcome envelopes_cmd() const {
        if (weight_.is_exponential()) throw ConfigError("weight: envelopes need a polynomial weight");
        const auto pairs = default_decay_pairs(*model_, detail::param<double>(p(), "delta_min"),
                                               detail::param<double>(p(), "delta_max"), detail::param<int>(p(), "pairs"));
        EnvelopeOptions eo;
        eo.tol = tol_or(1e-8);
        const EnvelopeReport rep = envelope_check(model_, weight_, pairs, quad_, eo);
        Outcome o;
        o.table = CsvTable({"s", "t", "delta", "g_norm", "g_bound", "lambda_max", "lambda_bound", "moment", "moment_bound",
                            "operator_norm", "operator_bound", "ok"});
        for (const auto& r : rep.rows) {
            o.table.add({r.s, r.t, r.delta, r.g_norm, r.g_bound, r.lambda_max, r.lambda_bound, r.moment, r.moment_bound,
                         r.operator_norm, r.operator_bound, r.ok ? 1.0 : 0.0});
        }
        o.verdict = rep.violations == 0 ? "pass" : "fail";
        o.details = {{"M", rep.constants.M},   {"omega", rep.constants.omega}, {"c_theory", rep.envelopes.c_theory()},
                     {"c_fit", rep.c_fit},     {"violations", rep.violations}};
        return o;
    }

    Outcome counterexample_cmd() const {
        if (!weight_.is_exponential()) throw ConfigError("weight: the counterexample needs an exponential weight");
        const double s = detail::param<double>(p(), "s"), t = detail::param<double>(p(), "t");
        const auto radii = detail::param<std::vector<double>>(p(), "radii");
        if (radii.size() < 2) throw ConfigError("radii: need at least two radii");
        const WeightSpec control = WeightSpec::parse(detail::param<std::string>(p(), "control"));
        if (control.is_exponential()) throw ConfigError("control: expected a polynomial weight");
        const CounterexampleTable ex = exponential_counterexample(model_, weight_, s, t, radii, quad_);
        const CounterexampleTable ctl = exponential_counterexample(model_, control, s, t, radii, quad_);
        Outcome o;
        o.table = CsvTable({"r", "log_ratio", "control_log_ratio"});
        double cmin = 1e300, cmax = -1e300;
        for (std::size_t i = 0; i < radii.size(); ++i) {
            o.table.add({radii[i], ex.rows[i].log_ratio, ctl.rows[i].log_ratio});
            cmin = std::min(cmin, ctl.rows[i].log_ratio);
            cmax = std::max(cmax, ctl.rows[i].log_ratio);
        }
        const double growth = ex.log_growth();
        const double control_spread = cmax - cmin;
        const bool ok = ex.strictly_increasing() && growth > std::log(1e3) && control_spread < std::log(10.0);
        o.verdict = ok ? "pass" : "fail";
        o.details = {{"strictly_increasing", ex.strictly_increasing()},
                     {"log_last_over_first", growth},
                     {"control_log_max_over_min", control_spread},
                     {"expansion", ex.expansion}};
        return o;
    }

    Outcome compactness_cmd() const {
        const double s = detail::param<double>(p(), "s"), r = detail::param<double>(p(), "r"), t = detail::param<double>(p(), "t");
        CompactnessOptions co;
        co.levels = detail::param<int>(p(), "levels");
        co.grid_radius = detail::param<double>(p(), "grid_radius");
        const EvolutionOperator op(model_, weight_, quad_);
        const CompactnessTable tab = compactness_decay(op, s, r, t, {}, unit_ball_bank(dim(), weight_), co);
        Outcome o;
        o.table = CsvTable({"n", "difference", "tail_mass", "equicontinuity"});
        for (const auto& row : tab.rows) o.table.add({row.n, row.difference, row.tail_mass, row.equicontinuity});
        const double tol = tol_or(1e-6);
        const double last = tab.rows.back().difference;
        o.verdict = tab.nonincreasing() && last <= tol ? "pass" : "fail";
        o.details = {{"n_final", tab.n_final}, {"final_difference", last}, {"tolerance", tol},
                     {"nonincreasing", tab.nonincreasing()}};
        return o;
    }

    Outcome validate_cmd() const {
        SamplePlan plan;
        plan.time_points = detail::param<int>(p(), "time_points");
        plan.directions = detail::param<int>(p(), "directions");
        const HypothesisReport rep = validate_hypotheses(*model_, weight_, plan);
        Outcome o;
        o.table = CsvTable({"name", "applicable", "passed", "measured", "bound", "s_witness", "t_witness"});
        for (const auto& c : rep.checks) {
            o.table.add_cells({c.name, c.applicable ? "1" : "0", c.passed ? "1" : "0", format_number(c.measured),
                               format_number(c.bound), format_number(c.s_witness), format_number(c.t_witness)});
        }
        o.verdict = rep.all_passed() ? "pass" : "fail";
        json failed = json::array();
        for (const auto& c : rep.checks) {
            if (!c.passed) failed.push_back(c.name);
        }
        o.details = {{"failed", failed}, {"A_inf", rep.A_inf}, {"Q_inf", rep.Q_inf}, {"C_ell", rep.C_ell}};
        return o;
    }

    RunConfig cfg_;
    ModelPtr model_;
    WeightSpec weight_;
    QuadScheme quad_;
};

/// Runs a resolved configuration and emits artifacts. Without an output
/// directory the CSV goes to `out`; the verdict line is always printed.
inline int execute(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
    const json cj = cfg.to_json();
    const std::string hash = config_hash(cj);
    const Outcome o = Runner(cfg).run();
    json verdict{{"command", cfg.command}, {"verdict", o.verdict}, {"details", o.details}, {"config_hash", hash}};
    if (out_dir.empty()) {
        out << o.table.render(hash);
    } else {
        const std::filesystem::path dir(out_dir);
        write_atomic(dir / (cfg.command + ".csv"), o.table.render(hash));
        json stored = cj;
        stored["config_hash"] = hash;
        write_atomic(dir / "run_config.json", stored.dump(2) + "\n");
        write_atomic(dir / "verdict.json", verdict.dump(2) + "\n");
    }
    out << verdict.dump() << "\n";
    return o.verdict == "pass" ? 0 : 1;
}

/// Parses `args` (without the program name) and runs one subcommand.
/// Exit codes: 0 pass, 1 failed or inconclusive verdict, 2 config error, 3 numerical failure.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Nonautonomous Ornstein-Uhlenbeck evolution toolkit", "ou-evolve"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string model, weight, quad, out_dir;
    double tol = 0.0;
    std::uint64_t seed = 1;
    int dim = 0;
    app.add_option("--model", model, "built-in name, inline JSON or JSON file");
    app.add_option("--dim", dim, "dimension for built-in models")->check(CLI::Range(0, kMaxDim));
    app.add_option("--weight", weight, "poly:M or exp:GAMMA");
    app.add_option("--quad", quad, "gh:ORDER or mc:N[:SEED]");
    app.add_option("--tol", tol, "verdict tolerance (command specific)");
    app.add_option("--seed", seed, "seed for Monte Carlo schemes");
    app.add_option("--out", out_dir, "output directory");

    json params = json::object();

    auto* flow_c = app.add_subcommand("flow", "propagator, shift and covariance");
    double f_s = 0.0;
    std::vector<double> f_t{1.0};
    flow_c->add_option("--s", f_s);
    flow_c->add_option("--t", f_t)->expected(1, 1 << 20);

    auto* apply_c = app.add_subcommand("apply", "P_{s,t}f at points");
    std::string a_f = "cos";
    double a_s = 0.0, a_t = 1.0;
    std::vector<std::string> a_x;
    bool a_d = false;
    int a_order = 0;
    apply_c->add_option("--f", a_f, "test function name");
    apply_c->add_option("--s", a_s);
    apply_c->add_option("--t", a_t);
    apply_c->add_option("--x", a_x, "point as comma-separated coordinates (repeatable)");
    apply_c->add_option("--deriv", a_order, "derivative order 0-3 to print")->check(CLI::Range(0, 3));
    apply_c->add_flag("--derivs", a_d, "same as --deriv 1");

    auto* norm_c = app.add_subcommand("norm", "weighted norms and norm equivalence");
    std::string n_f = "bump", n_kind = "sup";
    double n_R = 10.0, n_alpha = 0.5;
    int n_theta = 1;
    std::size_t n_points = 128;
    std::vector<int> n_thetas{1, 2, 3};
    norm_c->add_option("--f", n_f);
    norm_c->add_option("--kind", n_kind, "sup | holder | full | equivalence");
    norm_c->add_option("--radius", n_R);
    norm_c->add_option("--alpha", n_alpha);
    norm_c->add_option("--theta", n_theta);
    norm_c->add_option("--points", n_points);
    norm_c->add_option("--thetas", n_thetas, "orders for --kind equivalence");

    auto* solve_c = app.add_subcommand("solve", "mild solution of the backward Cauchy problem");
    std::string s_problem;
    solve_c->add_option("--problem", s_problem, "problem JSON (inline or file)")->required();

    auto* rates_c = app.add_subcommand("rates", "smoothing-rate fit");
    double r_alpha = 0.0, r_theta = 1.0, r_dmin = 1e-3, r_dmax = 1.0, r_R = 2.0, r_s = 0.0;
    int r_count = 10;
    std::string r_f;
    rates_c->add_option("--alpha", r_alpha);
    rates_c->add_option("--theta", r_theta);
    rates_c->add_option("--delta-min", r_dmin);
    rates_c->add_option("--delta-max", r_dmax);
    rates_c->add_option("--count", r_count);
    rates_c->add_option("--radius", r_R);
    rates_c->add_option("--s", r_s);
    rates_c->add_option("--f", r_f, "test function (default depends on alpha, theta)");

    auto* env_c = app.add_subcommand("envelopes", "growth envelopes and operator bound");
    double e_dmin = 1e-2, e_dmax = 2.0;
    int e_pairs = 16;
    env_c->add_option("--delta-min", e_dmin);
    env_c->add_option("--delta-max", e_dmax);
    env_c->add_option("--pairs", e_pairs);

    auto* cx_c = app.add_subcommand("counterexample", "exponential-weight blow-up table");
    double c_s = 0.0, c_t = 1.0;
    std::vector<double> c_radii;
    std::string c_control = "poly:1";
    cx_c->add_option("--s", c_s);
    cx_c->add_option("--t", c_t);
    cx_c->add_option("--radii", c_radii);
    cx_c->add_option("--control", c_control, "polynomial weight for the control table");

    auto* cmp_c = app.add_subcommand("compactness", "truncation S_n decay");
    double k_s = 0.0, k_r = 0.5, k_t = 1.0, k_R = 2.0;
    int k_levels = 6;
    cmp_c->add_option("--s", k_s);
    cmp_c->add_option("--r", k_r);
    cmp_c->add_option("--t", k_t);
    cmp_c->add_option("--levels", k_levels);
    cmp_c->add_option("--grid-radius", k_R);

    auto* val_c = app.add_subcommand("validate", "sample the standing hypotheses");
    int v_times = 256, v_dirs = 64;
    val_c->add_option("--time-points", v_times);
    val_c->add_option("--directions", v_dirs);

    auto* rep_c = app.add_subcommand("replay", "rerun a stored run_config.json");
    std::string rp_path;
    rep_c->add_option("config", rp_path, "run_config.json or a directory containing it")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "ConfigError: " << e.what() << "\n";
        return 2;
    }

    try {
        RunConfig cfg;
        if (rep_c->parsed()) {
            std::filesystem::path path(rp_path);
            if (std::filesystem::is_directory(path)) path /= "run_config.json";
            cfg = RunConfig::from_json(detail::load_json_argument(path.string(), "config"));
        } else {
            const CLI::App* sub = app.get_subcommands().front();
            cfg.command = sub->get_name();
            const std::string& c = cfg.command;
            cfg.model = detail::resolve_model(model.empty() ? detail::default_model(c) : model, dim);
            cfg.weight = WeightSpec::parse(weight.empty() ? detail::default_weight(c) : weight).to_string();
            QuadScheme q = QuadScheme::parse(quad.empty() ? detail::default_quad(c) : quad);
            if (q.is_monte_carlo() && app.count("--seed")) q.seed = seed;
            cfg.quad = q.to_string();
            cfg.seed = q.is_monte_carlo() ? q.seed : seed;
            cfg.tol = tol;
            const int n = model_from_json(cfg.model).dimension();
            if (c == "flow") {
                params = {{"s", f_s}, {"t", f_t}};
            } else if (c == "apply") {
                if (a_x.empty()) {
                    for (int k = -4; k <= 4; ++k) {
                        std::string x = format_number(0.5 * k);
                        for (int i = 1; i < std::max(n, 1); ++i) x += ",0";
                        a_x.push_back(x);
                    }
                }
                params = {{"f", a_f}, {"s", a_s}, {"t", a_t}, {"x", a_x}, {"deriv", a_d ? std::max(a_order, 1) : a_order}};
            } else if (c == "norm") {
                params = {{"f", n_f},         {"kind", n_kind},     {"radius", n_R},    {"alpha", n_alpha},
                          {"theta", n_theta}, {"points", n_points}, {"thetas", n_thetas}};
            } else if (c == "solve") {
                params = {{"problem", detail::load_json_argument(s_problem, "problem")}};
            } else if (c == "rates") {
                params = {{"alpha", r_alpha}, {"theta", r_theta}, {"delta_min", r_dmin}, {"delta_max", r_dmax},
                          {"count", r_count}, {"radius", r_R},    {"s", r_s},
                          {"f", r_f.empty() ? json(nullptr) : json(r_f)}};
            } else if (c == "envelopes") {
                params = {{"delta_min", e_dmin}, {"delta_max", e_dmax}, {"pairs", e_pairs}};
            } else if (c == "counterexample") {
                if (c_radii.empty()) {
                    for (int k = 0; k <= 10; ++k) c_radii.push_back(std::pow(2.0, k));
                }
                params = {{"s", c_s}, {"t", c_t}, {"radii", c_radii}, {"control", c_control}};
            } else if (c == "compactness") {
                params = {{"s", k_s}, {"r", k_r}, {"t", k_t}, {"levels", k_levels}, {"grid_radius", k_R}};
            } else if (c == "validate") {
                params = {{"time_points", v_times}, {"directions", v_dirs}};
            }
            cfg.params = params;
        }
        return execute(cfg, out_dir, out);
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "ConfigError: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace ouevo::cli
