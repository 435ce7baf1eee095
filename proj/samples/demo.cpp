// Heat-cosine Cauchy problem and a smoothing-rate fit on ou-slow.
#include "ouevo/ouevo.hpp"

#include <cmath>
#include <cstdio>

using namespace ouevo;

int main() {
    CauchyProblem p;
    p.model = std::make_shared<const CoefficientModel>(builtin_model("heat"));
    p.weight = WeightSpec::polynomial(1);
    p.T = 1.0;
    p.phi = bank_field("cos", 1);

    CauchyGrid grid;
    grid.time_steps = 8;
    for (int i = -2; i <= 2; ++i) grid.points.push_back(Vec::Constant(1, 0.5 * i));

    const MildSolution ms = solve(p, grid, QuadScheme::gauss_hermite(30));
    std::printf("s      x      u          exact\n");
    for (std::size_t k = 0; k < ms.times.size(); k += 4)
        for (std::size_t i = 0; i < ms.points.size(); ++i) {
            const double x = ms.points[i](0);
            std::printf("%.3f  %+.2f  %.8f  %.8f\n", ms.times[k], x, ms.u[k][i], std::exp(ms.times[k] - 1.0) * std::cos(x));
        }
    std::printf("max residual %.3e (h_s^2 = %.3e)\n", ms.max_residual, ms.consistency_scale);

    const EvolutionOperator op(std::make_shared<const CoefficientModel>(builtin_model("ou-slow")),
                               WeightSpec::polynomial(1), QuadScheme::gauss_hermite(40));
    RateOptions ro;
    ro.count = 6;
    const RateFit fit = smoothing_rate(op, rate_test_function(0.0, 1.0, 1), 0.0, 1.0, ro);
    std::printf("rate (alpha=0, theta=1): slope %.3f, expected %.3f, r2 %.4f\n", fit.slope, fit.expected(), fit.r2);
    return 0;
}
