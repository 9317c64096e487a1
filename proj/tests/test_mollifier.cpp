#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "critshe/mollifier.hpp"
#include "critshe/quadrature.hpp"
#include "oracles.hpp"

using namespace critshe;
using namespace critshe::mollifier;

namespace {

// Midpoint sums of the bump shape on a 2048^2 grid over [-1,1]^2
// (oracle::bump_mass_and_phi0); the 4096^2 grid agrees to 2e-16.
constexpr double kBumpShapeMass = 0.4665123931783301;
constexpr double kPhiAtZero = 0.5418154448231046;

// oracle::beta_phi_mc with 10^8 samples, seed 20261016.
constexpr double kBetaPhiMc = -0.2501039663;
constexpr double kBetaPhiMcError = 6.28e-5;

const PairProfile& bump_profile() {
    static const PairProfile p = pair_profile(Mollifier::bump());
    return p;
}

} // namespace

TEST(Mollifier, UnitMass) {
    for (double lambda : {1.0, 0.5, 3.0}) {
        const Mollifier m = Mollifier::bump().scaled(lambda);
        auto f = [&](double r) { return 2.0 * std::numbers::pi * r * m(r); };
        EXPECT_NEAR(quad::gk(f, 0.0, m.support_radius(), 1e-14).value, 1.0, 1e-10);
    }
}

TEST(Mollifier, NormalizationMatchesGridOracle) {
    const auto [mass, phi0] = oracle::bump_mass_and_phi0(2048);
    EXPECT_NEAR(mass, kBumpShapeMass, 1e-15);
    EXPECT_NEAR(phi0, kPhiAtZero, 1e-15);
    EXPECT_NEAR(Mollifier::bump().normalization() * kBumpShapeMass, 1.0, 1e-12);
}

TEST(Mollifier, SupportAndSymmetry) {
    const Mollifier m = Mollifier::bump();
    EXPECT_EQ(m.support_radius(), 1.0);
    EXPECT_EQ(m(1.0), 0.0);
    EXPECT_EQ(m(1.5), 0.0);
    EXPECT_GT(m(0.99), 0.0);
    EXPECT_EQ(m.scaled(4.0).support_radius(), 0.25);
    EXPECT_EQ(m.scaled(4.0)(0.3), 0.0);
    EXPECT_NEAR(m.scaled(2.0)(0.1), 4.0 * m(0.2), 1e-14);
}

TEST(Mollifier, InvalidInputs) {
    EXPECT_THROW(Mollifier::bump().scaled(0.0), DomainError);
    EXPECT_THROW(Mollifier("flat", [](double) { return 0.0; }, 1.0), DomainError);
    EXPECT_THROW(Mollifier("bad", [](double) { return 1.0; }, -1.0), DomainError);
    EXPECT_THROW(by_name("gaussian"), DomainError);
    EXPECT_EQ(by_name("bump").name(), "bump");
}

TEST(PairProfile, MassSupportAndCentre) {
    const PairProfile& p = bump_profile();
    EXPECT_NEAR(p.mass(), 1.0, 1e-8);
    EXPECT_EQ(p.support_radius(), 2.0);
    EXPECT_EQ(p(2.0), 0.0);
    EXPECT_EQ(p(2.5), 0.0);
    EXPECT_NEAR(p(0.0), kPhiAtZero, 1e-10);
}

TEST(PairProfile, InterpolantMatchesDirectConvolution) {
    const PairProfile& p = bump_profile();
    const Mollifier m = Mollifier::bump();
    for (double r : {0.013, 0.41, 1.0007, 1.77}) EXPECT_NEAR(p(r), pair_value(m, r), 1e-7) << r;
}

TEST(PairProfile, CoarseGridRejected) {
    EXPECT_THROW(pair_profile(Mollifier::bump(), {1.0 / 8.0}), ParameterError);
}

TEST(PairProfile, ScalingPreservesMass) {
    const PairProfile p = pair_profile(Mollifier::bump().scaled(2.0));
    EXPECT_NEAR(p.mass(), 1.0, 1e-8);
    EXPECT_NEAR(p.support_radius(), 1.0, 1e-15);
    EXPECT_NEAR(p(0.0), 4.0 * kPhiAtZero, 1e-9);
}

TEST(BetaPhi, AgreesWithMonteCarloOracle) {
    const auto [mean, se] = oracle::beta_phi_mc(1000000, 20261016);
    EXPECT_NEAR(beta_phi(bump_profile()), mean, 3.0 * se);
    EXPECT_NEAR(beta_phi(bump_profile()), kBetaPhiMc, 3.0 * kBetaPhiMcError);
}

TEST(BetaPhi, ResolutionErrorSmall) {
    const double coarse = beta_phi(pair_profile(Mollifier::bump(), {1.0 / 32.0}));
    EXPECT_NEAR(coarse, beta_phi(bump_profile()), 1e-8);
}

TEST(BetaPhi, ScalingShiftsByLogLambda) {
    const double base = beta_phi(bump_profile());
    for (double lambda : {0.5, 2.0, 4.0})
        EXPECT_NEAR(beta_phi(pair_profile(Mollifier::bump().scaled(lambda))), base - std::log(lambda), 1e-6)
            << lambda;
}

TEST(BetaPhi, NegativeForNarrowMollifier) {
    EXPECT_LT(beta_phi(pair_profile(Mollifier::bump().scaled(10.0))), 0.0);
}

TEST(BetaEps, ClosedFormExamples) {
    const double eps = std::exp(-10.0);
    EXPECT_NEAR(beta_eps({5.0, eps}), 0.3 * std::numbers::pi, 1e-14);
    EXPECT_NEAR(beta_eps({0.0, eps}), 0.2 * std::numbers::pi, 1e-14);
}

TEST(BetaEps, RejectsBadSchedule) {
    EXPECT_THROW(beta_eps({0.0, 1.0}), DomainError);
    EXPECT_THROW(beta_eps({0.0, 0.0}), DomainError);
    EXPECT_THROW(beta_eps({std::nan(""), 0.1}), DomainError);
}

TEST(BetaStarMap, ClosedForm) {
    EXPECT_NEAR(beta_star(0.0, 0.0).value, 2.0 * (std::numbers::ln2 - kEulerGamma), 1e-15);
    EXPECT_NEAR(beta_star(1.0, -0.25).value, 2.0 * (1.25 + std::numbers::ln2 - kEulerGamma), 1e-15);
}

TEST(BetaStarMap, DyadicShiftIsExact) {
    for (double c : {0.5, -0.25, 3.0}) EXPECT_EQ(beta_star(1.0 + c, -0.25 + c).value, beta_star(1.0, -0.25).value);
}

TEST(DeltaEps, ScaledProfile) {
    const PairProfile& p = bump_profile();
    EXPECT_NEAR(delta_eps(p, 0.1, 0.05), 100.0 * p(0.5), 1e-12);
    EXPECT_EQ(delta_eps(p, 0.1, 0.25), 0.0);
}
