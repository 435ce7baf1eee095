#include "ouevo/bank.hpp"
#include "ouevo/weights.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace ouevo;

namespace {
Vec v2(double a, double b) {
    Vec x(2);
    x << a, b;
    return x;
}
bool contains(const std::vector<Vec>& pts, const Vec& x) {
    return std::any_of(pts.begin(), pts.end(), [&](const Vec& y) { return (y - x).norm() == 0.0; });
}
}  // namespace

TEST(Weights, Values) {
    const Vec x = v2(1.0, 1.0);
    EXPECT_DOUBLE_EQ(weight_value(WeightSpec::polynomial(1), x), 3.0);
    EXPECT_DOUBLE_EQ(weight_value(WeightSpec::polynomial(2), x), 5.0);
    EXPECT_NEAR(weight_value(WeightSpec::exponential(0.5), x), std::exp(std::sqrt(3.0)), 1e-13);
    EXPECT_NEAR(log_weight(WeightSpec::exponential(0.25), x), std::pow(3.0, 0.25), 1e-14);
    EXPECT_GE(weight_value(WeightSpec::polynomial(3), zeros(2)), 1.0);
}

TEST(Weights, JetsMatchFiniteDifferences) {
    const Vec x = v2(0.7, -1.3);
    for (const WeightSpec& w : {WeightSpec::polynomial(1), WeightSpec::polynomial(3), WeightSpec::exponential(0.25)}) {
        const Derivs exact = weight_jet(w, x, 3);
        const Derivs fd = finite_difference_derivs([&](const Vec& y) { return weight_value(w, y); }, x, 3);
        const double scale = std::max(1.0, exact.value);
        EXPECT_NEAR((exact.grad - fd.grad).norm() / scale, 0.0, 1e-7) << w.to_string();
        EXPECT_NEAR((exact.hess - fd.hess).norm() / scale, 0.0, 1e-5) << w.to_string();
        const Derivs one = exact * inverse_weight_jet(w, x, 3);
        EXPECT_NEAR(one.value, 1.0, 1e-14);
        EXPECT_NEAR(one.grad.norm(), 0.0, 1e-12);
        EXPECT_NEAR(one.hess.norm(), 0.0, 1e-11);
        EXPECT_NEAR(one.third.max_abs(), 0.0, 1e-10);
    }
}

TEST(Weights, PolynomialJetIsSmoothAtOrigin) {
    const Derivs d = weight_jet(WeightSpec::polynomial(1), zeros(2), 3);
    EXPECT_EQ(d.value, 1.0);
    EXPECT_NEAR((d.hess - 2.0 * identity(2)).norm(), 0.0, 1e-14);
    EXPECT_TRUE(std::isfinite(d.third.max_abs()));
}

TEST(NormPoints, NestedInCountAndRadius) {
    const auto small = norm_points(2, 4.0, 8), more = norm_points(2, 4.0, 16), wider = norm_points(2, 8.0, 8);
    for (const auto& x : small) {
        EXPECT_TRUE(contains(more, x));
        EXPECT_TRUE(contains(wider, x));
        EXPECT_LE(x.norm(), 4.0 + 1e-12);
    }
    EXPECT_TRUE(contains(small, zeros(2)));
    EXPECT_THROW(norm_points(2, 0.0, 4), PreconditionError);
}

TEST(Norms, SupOfWeightIsOne) {
    const WeightSpec w = WeightSpec::polynomial(2);
    const WeightedFunction wf{Field::plain([w](const Vec& x) { return weight_value(w, x); }, "p"), w, 2};
    EXPECT_NEAR(weighted_sup_norm(wf, 10.0, 32).value, 1.0, 1e-14);
}

TEST(Norms, SupFindsTheMaximumOfABump) {
    const WeightSpec w = WeightSpec::polynomial(1);
    const WeightedFunction wf{Field::plain([](const Vec& x) { return 3.0 * std::exp(-x.squaredNorm()); }, "b"), w, 1};
    const NormEstimate e = weighted_sup_norm(wf, 5.0, 64);
    EXPECT_DOUBLE_EQ(e.value, 3.0);
    EXPECT_EQ(e.witness(0), 0.0);
}

TEST(Norms, HolderSeminormOfSquareRoot) {
    const WeightSpec w = WeightSpec::polynomial(1);
    const WeightedFunction wf{
        Field::plain([w](const Vec& x) { return weight_value(w, x) * std::sqrt(std::abs(x(0))); }, "sqrt"), w, 1};
    const NormEstimate e = holder_seminorm(wf, 0.5, 2.0, 4000);
    EXPECT_LE(e.value, 1.0 + 1e-12);
    EXPECT_GE(e.value, 0.999);
    EXPECT_THROW(holder_seminorm(wf, 1.0, 2.0), PreconditionError);
}

TEST(Norms, FullNormOfLinearFunction) {
    const WeightSpec w = WeightSpec::polynomial(1);
    const WeightedFunction wf{bank_field("linear", 1), w, 1};
    const NormEstimate e = full_norm(wf, 1, 0.0, 10.0, 64);
    // sup |x|/(1+x²) = 1/2 at |x| = 1, sup 1/(1+x²) = 1.
    EXPECT_NEAR(e.value, 1.5, 1e-3);
    EXPECT_LE(e.value, 1.5 + 1e-12);
}

TEST(Norms, NonFiniteValuesAreReported) {
    const WeightedFunction wf{Field::plain([](const Vec& x) { return x(0) > 1.0 ? NAN : 0.0; }, "nan"),
                              WeightSpec::polynomial(1), 1};
    EXPECT_THROW(weighted_sup_norm(wf, 4.0, 8), EvaluationFailure);
}

TEST(Norms, MultiIndices) {
    EXPECT_EQ(multi_indices(2, 3).size(), 4u);
    EXPECT_EQ(multi_indices(3, 2).size(), 6u);
    EXPECT_EQ(multi_indices(3, 0).size(), 1u);
}

TEST(Equivalence, BankRatiosBounded) {
    for (int theta : {1, 2, 3}) {
        for (const Field& f : equivalence_bank(2, WeightSpec::polynomial(1))) {
            const EquivalenceReport r = norm_equivalence_check({f, WeightSpec::polynomial(1), 2}, theta, {5.0, 10.0}, 32);
            EXPECT_GT(r.ratio_lo, 1.0 / 50.0) << f.name;
            EXPECT_LT(r.ratio_hi, 50.0) << f.name;
        }
    }
}

TEST(Equivalence, NeedsDerivatives) {
    const WeightedFunction wf{Field::plain([](const Vec&) { return 1.0; }, "plain"), WeightSpec::polynomial(1), 1};
    EXPECT_THROW(norm_equivalence_check(wf, 1), MissingDerivatives);
    EXPECT_NO_THROW(norm_equivalence_check(wf, 0));
}

TEST(Bank, JetsAgreeWithFiniteDifferences) {
    const Vec x = v2(0.4, -0.9);
    for (const auto& name : bank_names()) {
        if (name == "step" || name == "kink") continue;
        const Field f = bank_field(name, 2);
        const Derivs exact = f.derivs(x, 2);
        const Derivs fd = finite_difference_derivs(f.value, x, 2);
        EXPECT_NEAR(exact.value, f(x), 1e-15) << name;
        EXPECT_NEAR((exact.grad - fd.grad).norm(), 0.0, 1e-7) << name;
        EXPECT_NEAR((exact.hess - fd.hess).norm(), 0.0, 1e-5) << name;
    }
    EXPECT_THROW(bank_field("nope", 1), ConfigError);
}
