#pragma once

// Limiting correlation functions <f, (P_t + D_t) z^{(x)n}> assembled from
// diagram contributions, the centred third moment, and the n = 2 semigroup
// check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "critshe/diagrams.hpp"
#include "critshe/error.hpp"
#include "critshe/gausscalc.hpp"
#include "critshe/parallel.hpp"
#include "critshe/simplexint.hpp"
#include "critshe/specfun.hpp"

namespace critshe::momentengine {

using diagrams::DiagramIndex;
using gausscalc::GaussianMixtureState;
using gausscalc::IsotropicMixture;
using simplexint::IntegrationPlan;
using simplexint::TimeVector;
using specfun::BetaStar;

struct MomentRequest {
    int n = 2;
    double t = 1.0;
    BetaStar beta_star{0.0};
    std::vector<IsotropicMixture> f; // one factor per particle
    IsotropicMixture z_ic;
    int m_max = 6;
    IntegrationPlan plan{simplexint::Mode::adaptive};
    unsigned threads = 1;

    void validate() const {
        if (n < 1 || n > gausscalc::kMaxSlots) throw DomainError("MomentRequest: n must lie in [1, 8]");
        if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("MomentRequest: t must be positive");
        if (!std::isfinite(beta_star.value)) throw DomainError("MomentRequest: beta_star must be finite");
        if (int(f.size()) != n) throw DomainError("MomentRequest: need one test-function factor per particle");
        for (const auto& g : f) gausscalc::validate(g);
        gausscalc::validate(z_ic);
        if (m_max < 1) throw DomainError("MomentRequest: m_max must be >= 1");
        plan.validate();
    }
};

inline MomentRequest with_n(MomentRequest req, int n) {
    const IsotropicMixture f1 = req.f.front();
    req.n = n;
    req.f.assign(std::size_t(n), f1);
    return req;
}

struct DiagramContribution {
    DiagramIndex index;
    double value = 0.0;
    double error = 0.0;
    bool accuracy_warning = false;
};

struct PerM {
    int m = 0;
    double value = 0.0;
    double error = 0.0;
    std::size_t diagrams = 0;
};

inline constexpr double kMaxTailRatio = 0.7;

struct MomentResult {
    double free_term = 0.0;
    std::vector<DiagramContribution> contributions;
    std::vector<PerM> per_m;
    double truncation_tail_estimate = 0.0;
    std::optional<double> last_ratio;
    // free term + all contributions; empty when the per-m totals do not decay
    // fast enough to trust the truncation.
    std::optional<double> total;
    double error = 0.0; // integration error of the truncated sum
    bool converged = true;
    bool accuracy_warning = false;

    double truncated_sum() const {
        double s = free_term;
        for (const auto& p : per_m) s += p.value;
        return s;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream seed derived from the diagram's content, so a diagram gets the same
// random numbers whichever request or position it is evaluated in.
inline std::uint64_t diagram_seed(std::uint64_t seed, const DiagramIndex& d) {
    std::uint64_t h = splitmix64(seed ^ (std::uint64_t(d.n) << 56));
    for (auto [i, j] : d.pairs) h = splitmix64(h ^ (std::uint64_t(i) << 8 | std::uint64_t(j)));
    return h;
}

inline GaussianMixtureState initial_state(const MomentRequest& req) { return gausscalc::tensor_power(req.z_ic, req.n); }

inline GaussianMixtureState test_state(const MomentRequest& req) { return gausscalc::tensor_product(req.f); }

// The operator chain of one diagram at fixed durations, without the j
// factors: applied right to left to z^{(x)n}.
inline GaussianMixtureState apply_chain(const DiagramIndex& d, const GaussianMixtureState& z, const TimeVector& tv) {
    const int m = d.m();
    GaussianMixtureState s = gausscalc::apply_in(z, d.pairs[std::size_t(m - 1)], tv.integer_slot(m));
    for (int k = m - 1; k >= 1; --k) {
        s = gausscalc::apply_J_heat(std::move(s), tv.half_slot(k + 1));
        s = gausscalc::apply_med(s, d.pairs[std::size_t(k)], d.pairs[std::size_t(k - 1)], tv.integer_slot(k));
    }
    s = gausscalc::apply_J_heat(std::move(s), tv.half_slot(1));
    return gausscalc::apply_out(s, d.pairs[0], tv.integer_slot(0));
}

inline IntegrationPlan plan_for(const IntegrationPlan& base, int m) {
    IntegrationPlan p = base;
    // Adaptive quadrature covers m <= 1 only; deeper diagrams fall back to QMC.
    if (m >= 2 && p.mode == simplexint::Mode::adaptive) p.mode = simplexint::Mode::quasi_monte_carlo;
    p.threads = 1;
    return p;
}

} // namespace detail

inline double free_term(const MomentRequest& req) {
    req.validate();
    return gausscalc::inner_product(detail::test_state(req),
                                    gausscalc::apply_heat(detail::initial_state(req),
                                                          gausscalc::HeatKernelSpec::uniform(req.n, req.t)));
}

inline DiagramContribution diagram_contribution(const DiagramIndex& d, const MomentRequest& req) {
    req.validate();
    d.validate();
    if (d.n != req.n) throw DomainError("diagram_contribution: diagram particle count differs from request");
    const GaussianMixtureState z = detail::initial_state(req);
    const GaussianMixtureState F = detail::test_state(req);
    simplexint::SimplexIntegrand integrand{
        [&](const TimeVector& tv) {
            try {
                return gausscalc::inner_product(F, detail::apply_chain(d, z, tv));
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (diagram " + d.str() + ", tau = " + tv.str() + ")");
            }
        },
        req.beta_star};
    IntegrationPlan plan = detail::plan_for(req.plan, d.m());
    plan.seed = detail::diagram_seed(req.plan.seed, d);
    const simplexint::IntegrationResult r = simplexint::integrate(d.m(), req.t, integrand, plan);
    return {d, r.value, r.error, r.accuracy_warning};
}

// Evaluates every listed diagram on the worker pool; results come back in
// input order.
inline std::vector<DiagramContribution> evaluate_all(const std::vector<DiagramIndex>& ds, const MomentRequest& req) {
    std::vector<DiagramContribution> out(ds.size());
    parallel_for(ds.size(), req.threads, [&](std::size_t i) { out[i] = diagram_contribution(ds[i], req); });
    return out;
}

namespace detail {

inline MomentResult assemble(const MomentRequest& req, std::vector<DiagramContribution> contributions) {
    MomentResult res;
    res.free_term = free_term(req);
    res.contributions = std::move(contributions);
    for (const auto& c : res.contributions) {
        const int m = c.index.m();
        if (res.per_m.empty() || res.per_m.back().m != m) res.per_m.push_back({m, 0.0, 0.0, 0});
        PerM& p = res.per_m.back();
        p.value += c.value;
        p.error = std::hypot(p.error, c.error);
        ++p.diagrams;
        res.accuracy_warning = res.accuracy_warning || c.accuracy_warning;
    }
    double err2 = 0.0;
    for (const auto& p : res.per_m) err2 += p.error * p.error;
    res.error = std::sqrt(err2);

    // Geometric tail from the last two per-m totals. Dgm(2, m) is empty for
    // m >= 2, so the n = 2 sum is exact after m = 1.
    if (req.n >= 3 && res.per_m.size() >= 2) {
        const double a = res.per_m[res.per_m.size() - 2].value, b = res.per_m.back().value;
        if (a > 0.0 && b >= 0.0) {
            const double r = b / a;
            res.last_ratio = r;
            if (r <= kMaxTailRatio) res.truncation_tail_estimate = b * r / (1.0 - r);
            else res.converged = false;
        } else if (b != 0.0) {
            res.converged = false;
        }
    }
    if (res.converged) res.total = res.truncated_sum();
    return res;
}

} // namespace detail

inline MomentResult correlation(const MomentRequest& req) {
    req.validate();
    std::vector<DiagramIndex> ds;
    if (req.n >= 2) {
        const int m_top = req.n == 2 ? 1 : req.m_max;
        for (int m = 1; m <= m_top; ++m)
            for (const DiagramIndex& d : diagrams::DiagramRange(req.n, m)) ds.push_back(d);
    }
    return detail::assemble(req, evaluate_all(ds, req));
}

struct ThirdMoment {
    double value = 0.0;
    double error = 0.0;
    MomentResult nondegenerate; // free term is not part of the centred moment
};

// Sum over nondegenerate diagrams of Dgm(3, m <= m_max) with f^{(x)3}.
inline ThirdMoment centered_third_moment(const MomentRequest& req_in) {
    if (req_in.n != 3) throw DomainError("centered_third_moment: n must be 3");
    const MomentRequest req = with_n(req_in, 3);
    req.validate();
    std::vector<DiagramIndex> ds;
    for (int m = 1; m <= req.m_max; ++m)
        for (const DiagramIndex& d : diagrams::DiagramRange(3, m))
            if (!diagrams::classify(d).degenerate) ds.push_back(d);
    ThirdMoment out;
    out.nondegenerate = detail::assemble(req, evaluate_all(ds, req));
    for (const auto& p : out.nondegenerate.per_m) out.value += p.value;
    out.error = out.nondegenerate.error;
    return out;
}

// E[X^3] - 3 E[X^2] E[X] + 2 E[X]^3 from full correlations at n = 3, 2, 1,
// all truncated at the same m_max.
inline quad::Estimate third_cumulant_from_moments(const MomentRequest& req_in) {
    const MomentRequest r3 = with_n(req_in, 3), r2 = with_n(req_in, 2), r1 = with_n(req_in, 1);
    const MomentResult m3 = correlation(r3), m2 = correlation(r2);
    const double m1 = free_term(r1);
    const double v3 = m3.truncated_sum(), v2 = m2.truncated_sum();
    const double value = v3 - 3.0 * v2 * m1 + 2.0 * m1 * m1 * m1;
    return {value, std::hypot(m3.error, 3.0 * m1 * m2.error)};
}

// |<f, (P_s + D_s)(P_{t-s} + D_{t-s}) z> - <f, (P_t + D_t) z>| at n = 2.
struct SemigroupCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double error = 0.0; // quadrature error budget of both sides
};

inline SemigroupCheck semigroup_check(const MomentRequest& req_in, double s) {
    const MomentRequest req = with_n(req_in, 2);
    req.validate();
    const double t = req.t;
    if (!(s > 0.0 && s < t)) throw DomainError("semigroup_residual: need 0 < s < t");
    const GaussianMixtureState z = detail::initial_state(req);
    const GaussianMixtureState F = detail::test_state(req);
    const diagrams::Pair p{1, 2};
    IntegrationPlan quadplan{simplexint::Mode::adaptive};
    quadplan.rel_tol = std::min(req.plan.rel_tol, 1e-4);
    // The nested four-dimensional term would be too slow at the outer
    // tolerance. Its requested tolerance is loose, but Gauss-Kronrod on these
    // smooth integrands lands far below it (residuals near 1e-7 relative).
    IntegrationPlan nested_inner = quadplan, nested_outer = quadplan;
    nested_inner.rel_tol = 0.1;
    nested_outer.rel_tol = 0.1;

    auto one = [&](double len, auto&& chain) {
        simplexint::SimplexIntegrand in{[&](const TimeVector& tv) { return gausscalc::inner_product(F, chain(tv)); },
                                        req.beta_star};
        return simplexint::integrate(1, len, in, quadplan);
    };
    auto D_state = [&](const GaussianMixtureState& u, const TimeVector& tv, double pre, double post) {
        GaussianMixtureState st = gausscalc::apply_in(u, p, tv.integer_slot(1) + pre);
        st = gausscalc::apply_J_heat(std::move(st), tv.half_slot(1));
        return gausscalc::apply_out(st, p, tv.integer_slot(0) + post);
    };

    const double free_t = gausscalc::inner_product(F, gausscalc::apply_heat(z, gausscalc::HeatKernelSpec::uniform(2, t)));
    const auto Dt = one(t, [&](const TimeVector& tv) { return D_state(z, tv, 0.0, 0.0); });
    const auto PsD = one(t - s, [&](const TimeVector& tv) { return D_state(z, tv, 0.0, s); });
    const auto DsP = one(s, [&](const TimeVector& tv) { return D_state(z, tv, t - s, 0.0); });

    // D_s D_{t-s}: outer simplex of length s around an inner one of length
    // t - s; the j factors of both are handled by the two integrators.
    simplexint::SimplexIntegrand outer{
        [&](const TimeVector& outer_tv) {
            simplexint::SimplexIntegrand inner{
                [&](const TimeVector& tv) {
                    const GaussianMixtureState mid = D_state(z, tv, 0.0, 0.0);
                    return gausscalc::inner_product(F, D_state(mid, outer_tv, 0.0, 0.0));
                },
                req.beta_star};
            return simplexint::integrate(1, t - s, inner, nested_inner).value;
        },
        req.beta_star};
    const auto DD = simplexint::integrate(1, s, outer, nested_outer);

    SemigroupCheck out;
    out.lhs = free_t + PsD.value + DsP.value + DD.value;
    out.rhs = free_t + Dt.value;
    out.residual = std::abs(out.lhs - out.rhs);
    out.error = Dt.error + PsD.error + DsP.error + DD.error;
    return out;
}

inline double semigroup_residual(const MomentRequest& req, double s) { return semigroup_check(req, s).residual; }

} // namespace critshe::momentengine
