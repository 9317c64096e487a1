#include <cmath>
#include <functional>
#include <numbers>

#include <gtest/gtest.h>

#include "critshe/gausscalc.hpp"
#include "oracles.hpp"

using namespace critshe;
using namespace critshe::gausscalc;

namespace {

// Trapezoid over [-L, L]^2; spectrally accurate for the smooth Gaussian
// integrands used here.
double grid2(const std::function<double(double, double)>& g, double L = 8.0, double h = 0.04) {
    const long n = long(std::lround(2.0 * L / h));
    double s = 0.0;
    for (long i = 0; i <= n; ++i)
        for (long j = 0; j <= n; ++j) s += g(-L + h * i, -L + h * j);
    return s * h * h;
}

double rho(double t, double dx, double dy) { return oracle::normal_pdf(dx, t) * oracle::normal_pdf(dy, t); }

const IsotropicMixture kF{{1.0, {0.3, -0.2}, 0.5}, {0.5, {-0.4, 0.1}, 0.3}};
const IsotropicMixture kG{{0.7, {0.0, 0.4}, 0.4}};

double f_at(double x, double y) { return eval(kF, {x, y}); }

} // namespace

TEST(Heat2d, NormalisedAndSymmetric) {
    EXPECT_NEAR(heat2d(1.0, {0.0, 0.0}), 1.0 / (2.0 * std::numbers::pi), 1e-15);
    EXPECT_EQ(heat2d(0.5, {0.3, 0.4}), heat2d(0.5, {-0.4, 0.3}));
    EXPECT_NEAR(grid2([](double x, double y) { return heat2d(0.7, {x, y}); }), 1.0, 1e-12);
    EXPECT_THROW(heat2d(0.0, {0.0, 0.0}), DomainError);
}

TEST(Heat2d, SemigroupProperty) {
    const double x = 0.4, y = -0.9;
    const double conv = grid2([&](double a, double b) { return heat2d(0.3, {x - a, y - b}) * heat2d(0.5, {a, b}); });
    EXPECT_NEAR(conv, heat2d(0.8, {x, y}), 1e-12);
}

TEST(State, EvaluationMatchesFactors) {
    const GaussianMixtureState s = tensor_product({kF, kG});
    EXPECT_EQ(s.k, 2);
    EXPECT_EQ(s.components.size(), 2u);
    EXPECT_NEAR(s({{0.1, 0.2}, {-0.3, 0.5}}), eval(kF, {0.1, 0.2}) * eval(kG, {-0.3, 0.5}), 1e-15);
    EXPECT_NEAR(s.total_mass(), 1.5 * 0.7, 1e-15);
    EXPECT_NO_THROW(s.validate());
    EXPECT_THROW(s({{0.0, 0.0}}), DomainError);
}

TEST(State, InvalidMixturesRejected) {
    EXPECT_THROW(tensor_power({}, 2), DomainError);
    EXPECT_THROW(tensor_power({{1.0, {0.0, 0.0}, 0.0}}, 2), DomainError);
    EXPECT_THROW(tensor_power(kF, kMaxSlots + 1), DomainError);
}

TEST(ApplyOut, MatchesGridIntegral) {
    const GaussianMixtureState s = apply_out(tensor_power(kF, 1), {1, 2}, 0.6);
    for (const std::vector<Point>& x : {std::vector<Point>{{0.1, 0.2}, {-0.3, 0.5}}, {{1.0, -0.4}, {0.2, 0.2}}}) {
        const double ref = grid2([&](double a, double b) {
            return rho(0.6, x[0][0] - a, x[0][1] - b) * rho(0.6, x[1][0] - a, x[1][1] - b) * f_at(a, b);
        });
        EXPECT_NEAR(s(x) / ref, 1.0, 1e-10);
    }
}

TEST(ApplyOut, SlotPlacement) {
    // Expanding the (1,3) pair of a two-slot state keeps slot 2 in the middle.
    const GaussianMixtureState s = apply_out(tensor_product({kF, kG}), {1, 3}, 0.2);
    const std::vector<Point> x{{0.1, 0.0}, {0.3, 0.1}, {-0.2, 0.4}};
    const double ref = grid2([&](double a, double b) {
        return rho(0.2, x[0][0] - a, x[0][1] - b) * rho(0.2, x[2][0] - a, x[2][1] - b) * f_at(a, b);
    });
    const double g_part = grid2([&](double a, double b) { return rho(0.2, x[1][0] - a, x[1][1] - b) * eval(kG, {a, b}); });
    EXPECT_NEAR(s(x) / (ref * g_part), 1.0, 1e-10);
}

TEST(ApplyIn, MatchesGridIntegral) {
    const GaussianMixtureState s = apply_in(tensor_product({kF, kG}), {1, 2}, 0.3);
    for (const Point x : {Point{0.1, 0.2}, Point{-0.8, 0.5}}) {
        const double a = grid2([&](double u, double v) { return rho(0.3, x[0] - u, x[1] - v) * f_at(u, v); });
        const double b = grid2([&](double u, double v) { return rho(0.3, x[0] - u, x[1] - v) * eval(kG, {u, v}); });
        EXPECT_NEAR(s({x}) / (a * b), 1.0, 1e-10);
    }
}

TEST(ApplyMed, MatchesGridIntegral) {
    const GaussianMixtureState s = apply_med(tensor_power(kF, 1), {1, 2}, {1, 2}, 0.45);
    const Point x{0.2, -0.1};
    const double ref = grid2([&](double a, double b) {
        const double r = rho(0.45, x[0] - a, x[1] - b);
        return r * r * f_at(a, b);
    });
    EXPECT_NEAR(s({x}) / ref, 1.0, 1e-10);
}

TEST(ApplyMed, RelabelSymmetry) {
    // Expanding (1,2) and restricting (1,3) has the same kernel as expanding
    // (1,3) and restricting (1,2), once the slots are matched.
    const GaussianMixtureState s = tensor_product({kF, kG});
    const GaussianMixtureState a = apply_med(s, {1, 2}, {1, 3}, 0.35);
    const GaussianMixtureState b = apply_med(s, {1, 3}, {1, 2}, 0.35);
    for (const std::vector<Point>& x : {std::vector<Point>{{0.1, 0.2}, {-0.3, 0.5}}, {{0.7, -0.4}, {0.0, 0.3}}})
        EXPECT_NEAR(a(x) / b(x), 1.0, 1e-12);
}

TEST(Operators, MassBookkeeping) {
    const GaussianMixtureState s = tensor_power(kF, 2);
    EXPECT_NEAR(apply_out(s, {2, 3}, 0.4).total_mass(), s.total_mass(), 1e-15);
    EXPECT_NEAR(apply_heat(s, HeatKernelSpec::uniform(2, 3.0)).total_mass(), s.total_mass(), 1e-15);
    const GaussianMixtureState j = apply_J(s, 0.8, {0.3});
    EXPECT_NEAR(j.total_mass() / s.total_mass(), 4.0 * std::numbers::pi * specfun::jfn(0.8, {0.3}), 1e-12);
}

TEST(Operators, InAfterOutIsSqueezedHeat) {
    const GaussianMixtureState s = tensor_power(kF, 1);
    const double t0 = 0.7, t1 = 0.4, T = t0 + t1;
    const GaussianMixtureState lhs = apply_in(apply_out(s, {1, 2}, t0), {1, 2}, t1);
    GaussianMixtureState rhs = apply_J_heat(s, T);
    for (auto& c : rhs.components) c.weight /= 16.0 * std::numbers::pi * std::numbers::pi * T;
    for (const Point x : {Point{0.0, 0.0}, Point{0.5, -1.2}}) EXPECT_NEAR(lhs({x}) / rhs({x}), 1.0, 1e-12);
    EXPECT_NEAR(lhs.total_mass(), 1.5 / (4.0 * std::numbers::pi * T), 1e-14);
}

TEST(Operators, HeatIsAdditive) {
    const GaussianMixtureState s = tensor_product({kF, kG});
    const auto a = apply_heat(apply_heat(s, HeatKernelSpec::uniform(2, 0.25)), HeatKernelSpec::uniform(2, 0.5));
    const auto b = apply_heat(s, HeatKernelSpec::uniform(2, 0.75));
    const std::vector<Point> x{{0.3, 0.1}, {-0.2, 0.0}};
    EXPECT_NEAR(a(x), b(x), 1e-15);
}

TEST(Operators, JHeatAtZeroTime) {
    const GaussianMixtureState s = tensor_product({kF, kG});
    const GaussianMixtureState j = apply_J_heat(s, 0.0);
    const std::vector<Point> x{{0.3, 0.1}, {-0.2, 0.0}};
    EXPECT_NEAR(j(x), 4.0 * std::numbers::pi * s(x), 1e-13);
    EXPECT_THROW(apply_J(s, 0.0, {0.0}), DomainError);
}

TEST(Operators, InvalidPairs) {
    const GaussianMixtureState s = tensor_power(kF, 2);
    EXPECT_THROW(apply_out(s, {2, 4}, 0.1), DomainError);
    EXPECT_THROW(apply_in(s, {2, 1}, 0.1), DomainError);
    EXPECT_THROW(apply_out(s, {1, 2}, 0.0), DomainError);
    EXPECT_THROW(apply_heat(s, HeatKernelSpec::uniform(3, 0.1)), DomainError);
}

TEST(InnerProduct, GaussianOverlap) {
    const auto a = tensor_power({{1.0, {0.0, 0.0}, 0.3}}, 1);
    const auto b = tensor_power({{2.0, {0.5, 0.0}, 0.2}}, 1);
    EXPECT_NEAR(inner_product(a, b), 2.0 * std::exp(-0.25 / 1.0) / (2.0 * std::numbers::pi * 0.5), 1e-15);
    EXPECT_THROW(inner_product(a, tensor_power(kF, 2)), DomainError);
}

TEST(InnerProduct, MatchesGridForTransformedState) {
    const GaussianMixtureState s = apply_in(tensor_product({kF, kG}), {1, 2}, 0.3);
    const GaussianMixtureState g = tensor_power(kG, 1);
    const double ref = grid2([&](double u, double v) { return s({{u, v}}) * eval(kG, {u, v}); });
    EXPECT_NEAR(inner_product(s, g) / ref, 1.0, 1e-10);
}

TEST(InnerProduct, PositiveOnPositiveData) {
    const GaussianMixtureState f = tensor_power(kF, 3);
    GaussianMixtureState s = apply_in(tensor_power(kG, 3), {1, 3}, 0.2);
    s = apply_J(s, 0.1, {-2.0});
    s = apply_med(s, {2, 3}, {1, 2}, 0.5);
    s = apply_J(s, 0.4, {-2.0});
    s = apply_out(s, {1, 2}, 0.3);
    ASSERT_EQ(s.k, 3);
    EXPECT_GT(inner_product(f, s), 0.0);
}

TEST(BesselIdentity, SmallResidual) {
    for (double tau : {0.1, 0.5, 2.0})
        for (double ra : {0.2, 1.0})
            for (double rb : {0.3, 1.7}) {
                const double r = bessel_identity_rhs(tau, ra, rb);
                EXPECT_LT(bessel_identity_residual(tau, ra, rb), 1e-8 * r) << tau << " " << ra << " " << rb;
            }
    EXPECT_THROW(bessel_identity_residual(0.5, 0.0, 1.0), DomainError);
}

TEST(SecondMomentKernel, BesselAndDirectFormsAgree) {
    const auto a = second_moment_kernel(0.8, {0.1, 0.0}, {0.4, 0.2}, {0.0, 0.1}, {-0.3, 0.5}, {0.0}, true);
    const auto b = second_moment_kernel(0.8, {0.1, 0.0}, {0.4, 0.2}, {0.0, 0.1}, {-0.3, 0.5}, {0.0}, false);
    EXPECT_NEAR(a.value / b.value, 1.0, 1e-8);
    EXPECT_THROW(second_moment_kernel(0.8, {0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}, {0.0}), DomainError);
}

TEST(SecondMomentClosedForm, FreePartIsHeatFlow) {
    const IsotropicMixture f{{1.0, {0.1, 0.0}, 0.3}, {0.5, {-0.4, 0.2}, 0.3}};
    const IsotropicMixture z{{1.0, {0.0, 0.0}, 0.2}, {0.7, {0.5, 0.1}, 0.2}};
    const SecondMoment cf = second_moment_closed_form(1.0, f, z, {0.0});
    const double free = inner_product(tensor_power(f, 2), apply_heat(tensor_power(z, 2), HeatKernelSpec::uniform(2, 1.0)));
    EXPECT_NEAR(cf.free / free, 1.0, 1e-13);
    EXPECT_GT(cf.interaction.value, 0.0);
}

TEST(SecondMomentClosedForm, InteractionDecaysLikeInverseCoupling) {
    // int_0^t j(s, b) ds = int nu(y) dy up to log t + b, and nu(y) ~ 1/y^2,
    // so the interaction falls like 1/|b| as b -> -infinity.
    const IsotropicMixture f{{1.0, {0.0, 0.0}, 0.5}};
    auto scaled = [&](double b) {
        const SecondMoment cf = second_moment_closed_form(1.0, f, f, {b});
        return -b * cf.interaction.value / cf.free;
    };
    const double a = scaled(-60.0), b = scaled(-120.0), c = scaled(-240.0);
    EXPECT_NEAR(b / a, 1.0, 5e-3);
    EXPECT_NEAR(c / b, 1.0, 5e-3);
    EXPECT_LT(std::abs(c - b), std::abs(b - a));
}

TEST(SecondMomentClosedForm, MixedVariancesRejected) {
    const IsotropicMixture mixed{{1.0, {0.0, 0.0}, 0.5}, {1.0, {0.0, 0.0}, 0.4}};
    EXPECT_THROW(second_moment_closed_form(1.0, mixed, kG, {0.0}), DomainError);
    EXPECT_THROW(second_moment_closed_form(0.0, kG, kG, {0.0}), DomainError);
}
