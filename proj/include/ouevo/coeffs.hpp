#pragma once

#include "ouevo/errors.hpp"
#include "ouevo/linalg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ouevo {

struct TimeDomain {
    double t_min = -10.0;
    double t_max = 10.0;

    [[nodiscard]] bool contains(double t) const noexcept {
        const double slack = 1e-12 * (1.0 + std::abs(t_min) + std::abs(t_max));
        return t >= t_min - slack && t <= t_max + slack;
    }
};

/// Optional user-declared constants for the standing hypotheses.
struct DeclaredBounds {
    std::optional<double> A_inf;  ///< entrywise bound on A
    std::optional<double> Q_inf;  ///< entrywise bound on Q
    std::optional<double> C_ell;  ///< ellipticity constant
};

/// Time-dependent coefficients (A, Q, h) of the operator
/// ½Tr[Q(t)D²φ] + ⟨A(t)x + h(t), Dφ⟩ on a closed time interval.
///
/// The callables must be pure; the model is immutable after construction and
/// may be shared between threads.
class CoefficientModel {
public:
    using MatrixFn = std::function<Mat(double)>;
    using VectorFn = std::function<Vec(double)>;

    CoefficientModel(int dim, MatrixFn a, MatrixFn q, VectorFn h, TimeDomain domain = {},
                     DeclaredBounds bounds = {}, std::string name = "custom",
                     nlohmann::json description = nullptr)
        : dim_(dim), a_(std::move(a)), q_(std::move(q)), h_(std::move(h)), domain_(domain),
          bounds_(bounds), name_(std::move(name)), description_(std::move(description)) {
        if (dim_ < 1 || dim_ > kMaxDim) {
            throw PreconditionError("model dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
        }
        if (!(domain_.t_min < domain_.t_max)) throw PreconditionError("empty time domain");
        if (description_.is_null()) description_ = nlohmann::json{{"type", "custom"}, {"name", name_}};
    }

    [[nodiscard]] int dimension() const noexcept { return dim_; }
    [[nodiscard]] const TimeDomain& time_domain() const noexcept { return domain_; }
    [[nodiscard]] const DeclaredBounds& declared_bounds() const noexcept { return bounds_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] const nlohmann::json& description() const noexcept { return description_; }

    void check_time(double t) const {
        if (!domain_.contains(t)) {
            throw DomainError("time " + std::to_string(t) + " outside [" + std::to_string(domain_.t_min) +
                              ", " + std::to_string(domain_.t_max) + "]");
        }
    }

    [[nodiscard]] Mat A(double t) const {
        check_time(t);
        return a_(t);
    }
    [[nodiscard]] Mat Q(double t) const {
        check_time(t);
        return q_(t);
    }
    [[nodiscard]] Vec h(double t) const {
        check_time(t);
        return h_(t);
    }

    /// Unchecked access used inside the integrator, whose stage times are
    /// already known to lie in the domain.
    [[nodiscard]] Mat A_unchecked(double t) const { return a_(t); }
    [[nodiscard]] Mat Q_unchecked(double t) const { return q_(t); }
    [[nodiscard]] Vec h_unchecked(double t) const { return h_(t); }

private:
    int dim_;
    MatrixFn a_;
    MatrixFn q_;
    VectorFn h_;
    TimeDomain domain_;
    DeclaredBounds bounds_;
    std::string name_;
    nlohmann::json description_;
};

using ModelPtr = std::shared_ptr<const CoefficientModel>;

// --- weights -------------------------------------------------------------------

/// p(x) = 1 + |x|^{2m}  or  p(x) = exp((1 + |x|²)^γ).
struct WeightSpec {
    enum class Family { Polynomial, Exponential };

    Family family = Family::Polynomial;
    int m = 1;
    double gamma = 0.5;

    static WeightSpec polynomial(int m) {
        WeightSpec w{Family::Polynomial, m, 0.5};
        w.validate();
        return w;
    }
    static WeightSpec exponential(double gamma) {
        WeightSpec w{Family::Exponential, 1, gamma};
        w.validate();
        return w;
    }

    void validate() const {
        if (family == Family::Polynomial && m < 1) {
            throw PreconditionError("polynomial weight needs m >= 1");
        }
        if (family == Family::Exponential && !(gamma > 0.0 && gamma <= 0.5)) {
            throw PreconditionError("exponential weight needs 0 < gamma <= 1/2");
        }
    }

    [[nodiscard]] bool is_exponential() const noexcept { return family == Family::Exponential; }

    /// Parses "poly:M" or "exp:GAMMA".
    static WeightSpec parse(const std::string& text) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) throw ConfigError("weight: expected 'poly:m' or 'exp:gamma', got '" + text + "'");
        const std::string kind = text.substr(0, colon);
        const std::string arg = text.substr(colon + 1);
        try {
            std::size_t used = 0;
            if (kind == "poly") {
                const int m = std::stoi(arg, &used);
                if (used != arg.size()) throw std::invalid_argument(arg);
                if (m < 1) throw ConfigError("weight: polynomial exponent must be >= 1");
                return polynomial(m);
            }
            if (kind == "exp") {
                const double g = std::stod(arg, &used);
                if (used != arg.size()) throw std::invalid_argument(arg);
                if (!(g > 0.0 && g <= 0.5)) throw ConfigError("weight: exponential gamma must lie in (0, 1/2]");
                return exponential(g);
            }
        } catch (const std::logic_error&) {
            throw ConfigError("weight: cannot parse '" + text + "'");
        }
        throw ConfigError("weight: unknown family '" + kind + "'");
    }

    [[nodiscard]] std::string to_string() const {
        if (family == Family::Polynomial) return "poly:" + std::to_string(m);
        std::ostringstream os;
        os << "exp:" << gamma;
        return os.str();
    }
};

// --- built-in models -----------------------------------------------------------

namespace detail {

inline CoefficientModel constant_model(int n, const Mat& a, const Mat& q, const Vec& h, TimeDomain dom,
                                       std::string name, nlohmann::json desc) {
    return CoefficientModel(
        n, [a](double) { return a; }, [q](double) { return q; }, [h](double) { return h; }, dom, {},
        std::move(name), std::move(desc));
}

}  // namespace detail

/// Names accepted by builtin_model().
inline const std::vector<std::string>& builtin_model_names() {
    static const std::vector<std::string> names{"heat", "ou1", "ou-slow", "rotation", "periodic", "periodic_diag",
                                                "expanding"};
    return names;
}

/// Built-in models:
///  - heat:      A = 0,     Q = 2I, h = 0
///  - ou1:       A = -I,    Q = 2I, h = 0
///  - ou-slow:   A = -0.1I, Q = 0.2I, h = 0 (weakly contracting, low noise)
///  - rotation:  A = [[0,1],[-1,0]], Q = I, h = 0 (N = 2 only)
///  - periodic:  A(t) = -diag(2 + sin(t + φ_i)), Q(t) = diag(2 + cos(t + φ_i)),
///               h(t)_i = 0.2 cos(t + φ_i), φ_i = iπ/3 ("periodic_diag" is an alias)
///  - expanding: A = +I,    Q = I,  h = 0
inline CoefficientModel builtin_model(const std::string& name, int dim = 0, TimeDomain dom = {}) {
    const nlohmann::json desc{{"type", "builtin"}, {"name", name}, {"dimension", dim},
                              {"time_domain", {dom.t_min, dom.t_max}}};
    auto need_dim = [&](int fallback) { return dim > 0 ? dim : fallback; };
    if (name == "heat") {
        const int n = need_dim(1);
        return detail::constant_model(n, Mat::Zero(n, n), 2.0 * identity(n), zeros(n), dom, name, desc);
    }
    if (name == "ou1") {
        const int n = need_dim(1);
        return detail::constant_model(n, -identity(n), 2.0 * identity(n), zeros(n), dom, name, desc);
    }
    if (name == "ou-slow") {
        const int n = need_dim(1);
        return detail::constant_model(n, -0.1 * identity(n), 0.2 * identity(n), zeros(n), dom, name, desc);
    }
    if (name == "expanding") {
        const int n = need_dim(1);
        return detail::constant_model(n, identity(n), identity(n), zeros(n), dom, name, desc);
    }
    if (name == "rotation") {
        if (dim != 0 && dim != 2) throw ConfigError("model.dimension: rotation is two-dimensional");
        Mat a(2, 2);
        a << 0.0, 1.0, -1.0, 0.0;
        return detail::constant_model(2, a, identity(2), zeros(2), dom, name, desc);
    }
    if (name == "periodic" || name == "periodic_diag") {
        const int n = need_dim(1);
        auto phase = [](int i) { return i * std::numbers::pi / 3.0; };
        return CoefficientModel(
            n,
            [n, phase](double t) {
                Mat a = Mat::Zero(n, n);
                for (int i = 0; i < n; ++i) a(i, i) = -(2.0 + std::sin(t + phase(i)));
                return a;
            },
            [n, phase](double t) {
                Mat q = Mat::Zero(n, n);
                for (int i = 0; i < n; ++i) q(i, i) = 2.0 + std::cos(t + phase(i));
                return q;
            },
            [n, phase](double t) {
                Vec h(n);
                for (int i = 0; i < n; ++i) h(i) = 0.2 * std::cos(t + phase(i));
                return h;
            },
            dom, {}, name, desc);
    }
    throw ConfigError("model: unknown built-in name '" + name + "'");
}

// --- JSON loading ----------------------------------------------------------------

namespace detail {

inline Mat json_matrix(const nlohmann::json& j, int n, const std::string& field) {
    if (!j.is_array() || static_cast<int>(j.size()) != n) {
        throw ConfigError(field + ": expected " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
    }
    Mat m(n, n);
    for (int i = 0; i < n; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || static_cast<int>(row.size()) != n) {
            throw ConfigError(field + "[" + std::to_string(i) + "]: expected row of length " + std::to_string(n));
        }
        for (int k = 0; k < n; ++k) {
            if (!row[k].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "][" + std::to_string(k) + "]: not a number");
            m(i, k) = row[k].get<double>();
        }
    }
    return m;
}

inline Vec json_vector(const nlohmann::json& j, int n, const std::string& field) {
    if (!j.is_array() || static_cast<int>(j.size()) != n) {
        throw ConfigError(field + ": expected vector of length " + std::to_string(n));
    }
    Vec v(n);
    for (int i = 0; i < n; ++i) {
        if (!j[i].is_number()) throw ConfigError(field + "[" + std::to_string(i) + "]: not a number");
        v(i) = j[i].get<double>();
    }
    return v;
}

inline TimeDomain json_domain(const nlohmann::json& j, const std::string& field, TimeDomain fallback) {
    if (!j.contains("time_domain")) return fallback;
    const auto& d = j["time_domain"];
    if (!d.is_array() || d.size() != 2 || !d[0].is_number() || !d[1].is_number()) {
        throw ConfigError(field + ".time_domain: expected [t_min, t_max]");
    }
    TimeDomain dom{d[0].get<double>(), d[1].get<double>()};
    if (!(dom.t_min < dom.t_max)) throw ConfigError(field + ".time_domain: t_min must be < t_max");
    return dom;
}

inline DeclaredBounds json_bounds(const nlohmann::json& j, const std::string& field) {
    DeclaredBounds b;
    if (!j.contains("bounds")) return b;
    const auto& bj = j["bounds"];
    if (!bj.is_object()) throw ConfigError(field + ".bounds: expected object");
    auto read = [&](const char* key, std::optional<double>& out) {
        if (!bj.contains(key)) return;
        if (!bj[key].is_number()) throw ConfigError(field + ".bounds." + key + ": not a number");
        out = bj[key].get<double>();
    };
    read("A_inf", b.A_inf);
    read("Q_inf", b.Q_inf);
    read("C_ell", b.C_ell);
    return b;
}

/// Index of the interval [times[i], times[i+1]] containing t and the linear weight.
inline std::pair<std::size_t, double> locate(const std::vector<double>& times, double t) {
    if (t <= times.front()) return {0, 0.0};
    if (t >= times.back()) return {times.size() - 2, 1.0};
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin()) - 1;
    return {i, (t - times[i]) / (times[i + 1] - times[i])};
}

}  // namespace detail

/// Builds a model from its JSON description. Accepted shapes:
///   "heat"                                         (built-in name)
///   {"type":"builtin","name":"rotation"}
///   {"type":"constant","dimension":N,"A":[[..]],"Q":[[..]],"h":[..]}
///   {"type":"tabulated","dimension":N,"times":[..],"A":[M..],"Q":[M..],"h":[v..]}
/// Optional keys: "time_domain":[a,b], "bounds":{"A_inf","Q_inf","C_ell"}.
inline CoefficientModel model_from_json(const nlohmann::json& j, const std::string& field = "model") {
    if (j.is_string()) return builtin_model(j.get<std::string>());
    if (!j.is_object()) throw ConfigError(field + ": expected a built-in name or an object");
    if (!j.contains("type") || !j["type"].is_string()) throw ConfigError(field + ".type: missing or not a string");
    const std::string type = j["type"].get<std::string>();
    const TimeDomain dom = detail::json_domain(j, field, TimeDomain{});
    const DeclaredBounds bounds = detail::json_bounds(j, field);

    if (type == "builtin") {
        if (!j.contains("name") || !j["name"].is_string()) throw ConfigError(field + ".name: missing or not a string");
        int dim = 0;
        if (j.contains("dimension")) {
            if (!j["dimension"].is_number_integer()) throw ConfigError(field + ".dimension: expected integer");
            dim = j["dimension"].get<int>();
        }
        const CoefficientModel base = builtin_model(j["name"].get<std::string>(), dim, dom);
        return CoefficientModel(base.dimension(), [base](double t) { return base.A_unchecked(t); },
                                [base](double t) { return base.Q_unchecked(t); },
                                [base](double t) { return base.h_unchecked(t); }, dom, bounds, base.name(), j);
    }

    if (!j.contains("dimension") || !j["dimension"].is_number_integer()) {
        throw ConfigError(field + ".dimension: missing or not an integer");
    }
    const int n = j["dimension"].get<int>();
    if (n < 1 || n > kMaxDim) throw ConfigError(field + ".dimension: out of range");

    if (type == "constant") {
        if (!j.contains("A")) throw ConfigError(field + ".A: missing");
        if (!j.contains("Q")) throw ConfigError(field + ".Q: missing");
        const Mat a = detail::json_matrix(j["A"], n, field + ".A");
        const Mat q = detail::json_matrix(j["Q"], n, field + ".Q");
        const Vec h = j.contains("h") ? detail::json_vector(j["h"], n, field + ".h") : zeros(n);
        return CoefficientModel(
            n, [a](double) { return a; }, [q](double) { return q; }, [h](double) { return h; }, dom, bounds,
            j.value("name", std::string("constant")), j);
    }

    if (type == "tabulated") {
        if (!j.contains("times") || !j["times"].is_array() || j["times"].size() < 2) {
            throw ConfigError(field + ".times: expected at least two time points");
        }
        std::vector<double> times;
        for (std::size_t i = 0; i < j["times"].size(); ++i) {
            if (!j["times"][i].is_number()) throw ConfigError(field + ".times[" + std::to_string(i) + "]: not a number");
            times.push_back(j["times"][i].get<double>());
            if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError(field + ".times: must be strictly increasing");
        }
        const std::size_t k = times.size();
        auto mats = [&](const char* key) {
            const std::string f = field + "." + key;
            if (!j.contains(key) || !j[key].is_array() || j[key].size() != k) {
                throw ConfigError(f + ": expected one matrix per time point");
            }
            std::vector<Mat> out;
            for (std::size_t i = 0; i < k; ++i) out.push_back(detail::json_matrix(j[key][i], n, f + "[" + std::to_string(i) + "]"));
            return out;
        };
        const std::vector<Mat> as = mats("A");
        const std::vector<Mat> qs = mats("Q");
        std::vector<Vec> hs;
        if (j.contains("h")) {
            if (!j["h"].is_array() || j["h"].size() != k) throw ConfigError(field + ".h: expected one vector per time point");
            for (std::size_t i = 0; i < k; ++i) hs.push_back(detail::json_vector(j["h"][i], n, field + ".h[" + std::to_string(i) + "]"));
        } else {
            hs.assign(k, zeros(n));
        }
        const TimeDomain tab_dom = j.contains("time_domain") ? dom : TimeDomain{times.front(), times.back()};
        auto interp_mat = [times](const std::vector<Mat>& v) {
            return [times, v](double t) {
                const auto [i, w] = detail::locate(times, t);
                return Mat((1.0 - w) * v[i] + w * v[i + 1]);
            };
        };
        return CoefficientModel(
            n, interp_mat(as), interp_mat(qs),
            [times, hs](double t) {
                const auto [i, w] = detail::locate(times, t);
                return Vec((1.0 - w) * hs[i] + w * hs[i + 1]);
            },
            tab_dom, bounds, j.value("name", std::string("tabulated")), j);
    }
    throw ConfigError(field + ".type: unknown model type '" + type + "'");
}

/// Resolves a CLI/config model argument: built-in name, inline JSON, or a file path.
inline CoefficientModel load_model(const std::string& spec) {
    for (const auto& n : builtin_model_names()) {
        if (spec == n) return builtin_model(spec);
    }
    nlohmann::json j;
    if (!spec.empty() && spec.front() == '{') {
        try {
            j = nlohmann::json::parse(spec);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("model: malformed JSON: ") + e.what());
        }
    } else {
        std::ifstream in(spec);
        if (!in) throw ConfigError("model: '" + spec + "' is neither a built-in name nor a readable file");
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("model: malformed JSON in '" + spec + "': " + e.what());
        }
    }
    return model_from_json(j);
}

}  // namespace ouevo
