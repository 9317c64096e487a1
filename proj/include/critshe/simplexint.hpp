#pragma once

// Integration over the time simplex
//   Sigma_m(t) = { (tau_0, tau_1/2, tau_1, ..., tau_m) >= 0 : sum = t },
// 2m+1 durations of which the m half-integer ones may carry a factor
// j(tau, beta*). Near tau = 0 that factor behaves like 1/(tau log^2 tau):
// integrable, but with infinite variance under uniform sampling, so the
// sampler draws those coordinates from a matched proposal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "critshe/error.hpp"
#include "critshe/parallel.hpp"
#include "critshe/philox.hpp"
#include "critshe/quadrature.hpp"
#include "critshe/specfun.hpp"

namespace critshe::simplexint {

using specfun::BetaStar;

// tau[2a] holds tau_a for a = 0, 1/2, 1, ...; log_half[k-1] = log tau_{k-1/2}
// (kept separately because tau itself may underflow to zero).
struct TimeVector {
    std::vector<double> tau;
    std::vector<double> log_half;

    int m() const { return int(tau.size() / 2); }
    double integer_slot(int a) const { return tau[std::size_t(2 * a)]; }
    double half_slot(int k) const { return tau[std::size_t(2 * k - 1)]; } // tau_{k-1/2}, k = 1..m
    double sum() const {
        double s = 0.0;
        for (double v : tau) s += v;
        return s;
    }
    std::string str() const {
        std::ostringstream os;
        os.precision(17);
        os << "(";
        for (std::size_t i = 0; i < tau.size(); ++i) os << (i ? ", " : "") << tau[i];
        os << ")";
        return os.str();
    }
};

enum class Mode { adaptive, monte_carlo, quasi_monte_carlo };

inline const char* mode_name(Mode m) {
    switch (m) {
    case Mode::adaptive: return "adaptive-quadrature";
    case Mode::monte_carlo: return "monte-carlo";
    case Mode::quasi_monte_carlo: return "quasi-monte-carlo";
    }
    return "?";
}

inline Mode parse_mode(const std::string& s) {
    if (s == "adaptive-quadrature" || s == "adaptive") return Mode::adaptive;
    if (s == "monte-carlo" || s == "mc") return Mode::monte_carlo;
    if (s == "quasi-monte-carlo" || s == "qmc") return Mode::quasi_monte_carlo;
    throw DomainError("unknown integration mode '" + s + "'");
}

enum class Proposal { automatic, uniform, jfn_adapted };

struct IntegrationPlan {
    Mode mode = Mode::quasi_monte_carlo;
    std::size_t samples = 200000;
    double rel_tol = 1e-2;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t shifts = 16; // independent random shifts in QMC mode
    Proposal proposal = Proposal::automatic;

    void validate() const {
        if (!(rel_tol > 0.0 && rel_tol <= 0.1)) throw ParameterError("IntegrationPlan: rel_tol must lie in (0, 0.1]");
        if (mode != Mode::adaptive && samples < 1000)
            throw ParameterError("IntegrationPlan: at least 1000 samples in Monte Carlo modes");
        if (mode == Mode::quasi_monte_carlo && (shifts < 2 || samples / shifts < 1))
            throw ParameterError("IntegrationPlan: QMC needs at least two random shifts");
    }
};

// body(tau) multiplies prod_k j(tau_{k-1/2}, beta*) when jfn_beta is set;
// the integrator applies that factor itself.
struct SimplexIntegrand {
    std::function<double(const TimeVector&)> body;
    std::optional<BetaStar> jfn_beta;
};

struct IntegrationResult {
    double value = 0.0;
    double error = 0.0;
    bool accuracy_warning = false;
    std::size_t evaluations = 0;
};

// Uniform point on Sigma_m(t) from normalised exponential spacings.
inline TimeVector sample_simplex(int m, double t, PhiloxStream& rng) {
    if (m < 1) throw DomainError("sample_simplex: m must be >= 1");
    if (!(t > 0.0)) throw DomainError("sample_simplex: t must be positive");
    TimeVector tv;
    tv.tau.resize(std::size_t(2 * m + 1));
    double s = 0.0;
    for (double& v : tv.tau) s += (v = rng.exponential());
    for (double& v : tv.tau) v *= t / s;
    tv.tau.back() = std::max(0.0, t - [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < tv.tau.size(); ++i) acc += tv.tau[i];
        return acc;
    }());
    tv.log_half.resize(std::size_t(m));
    for (int k = 1; k <= m; ++k) tv.log_half[std::size_t(k - 1)] = std::log(tv.half_slot(k));
    return tv;
}

namespace detail {

inline double log_factorial(int m) { return std::lgamma(double(m) + 1.0); }

// Maps a point of the unit cube [0,1)^{2m} to the simplex and returns the
// importance weight (target measure / proposal density), with j folded in
// when the integrand asks for it.
//
// Half-integer slots are drawn first by stick-breaking: tau_{k-1/2} = R b_k,
// b_k with density 1/(b (1 - log b)^2) on (0,1), sampled as
// b = exp(1 - 1/U). The leftover length is split uniformly among the m+1
// integer slots. With j(tau) = nu(log tau + beta)/tau the weight of slot k is
// nu(y_k) (1 - log b_k)^2, bounded as b_k -> 0.
inline double map_adapted(int m, double t, const double* u, const std::optional<BetaStar>& jb, TimeVector& tv) {
    tv.tau.assign(std::size_t(2 * m + 1), 0.0);
    tv.log_half.assign(std::size_t(m), 0.0);
    double rest = t, log_rest = std::log(t), log_w = 0.0;
    for (int k = 1; k <= m; ++k) {
        const double U = std::max(u[k - 1], 1e-300);
        const double log_b = 1.0 - 1.0 / U;
        const double one_minus_b = -std::expm1(log_b);
        const double lt = log_rest + log_b;
        tv.log_half[std::size_t(k - 1)] = lt;
        tv.tau[std::size_t(2 * k - 1)] = std::exp(lt);
        const double shape = 2.0 * std::log1p(-log_b);
        log_w += jb ? specfun::log_nu(lt + jb->value) + shape : lt + shape;
        rest *= one_minus_b;
        log_rest += std::log(one_minus_b);
    }
    // Dirichlet(1,...,1) over the integer slots by sequential inversion.
    double left = rest;
    for (int i = 0; i < m; ++i) {
        const double V = std::max(u[m + i], 1e-300);
        const double frac = -std::expm1(std::log(V) / double(m - i));
        const double v = left * frac;
        tv.tau[std::size_t(2 * i)] = v;
        left -= v;
    }
    tv.tau[std::size_t(2 * m)] = std::max(0.0, left);
    log_w += double(m) * log_rest - log_factorial(m);
    return std::exp(log_w);
}

// Uniform proposal: exponential spacings from the cube by inversion.
inline double map_uniform(int m, double t, const double* u, const std::optional<BetaStar>& jb, TimeVector& tv) {
    const int d = 2 * m + 1;
    tv.tau.assign(std::size_t(d), 0.0);
    tv.log_half.assign(std::size_t(m), 0.0);
    double left = t;
    for (int i = 0; i < d - 1; ++i) {
        const double V = std::max(u[i], 1e-300);
        const double v = left * -std::expm1(std::log(V) / double(d - 1 - i));
        tv.tau[std::size_t(i)] = v;
        left -= v;
    }
    tv.tau[std::size_t(d - 1)] = std::max(0.0, left);
    double log_w = double(2 * m) * std::log(t) - log_factorial(2 * m);
    for (int k = 1; k <= m; ++k) {
        const double lt = std::log(tv.half_slot(k));
        tv.log_half[std::size_t(k - 1)] = lt;
        if (jb) log_w += specfun::log_nu(lt + jb->value) - lt;
    }
    return std::exp(log_w);
}

struct Moments {
    double n = 0.0, mean = 0.0, m2 = 0.0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    // Chan et al. pairwise merge; applied in a fixed order by the caller.
    void merge(const Moments& o) {
        if (o.n == 0.0) return;
        const double tot = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / tot;
        m2 += o.m2 + d * d * n * o.n / tot;
        n = tot;
    }
};

// Generalised golden-ratio (R_d) Kronecker sequence direction.
inline std::vector<double> kronecker_alpha(int d) {
    double phi = 2.0;
    for (int it = 0; it < 60; ++it) phi = std::pow(1.0 + phi, 1.0 / (d + 1));
    std::vector<double> a(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) a[std::size_t(j)] = std::fmod(1.0 / std::pow(phi, j + 1), 1.0);
    return a;
}

inline void check_finite(double v, const TimeVector& tv) {
    if (!std::isfinite(v)) throw NumericalError("integrand is not finite at tau = " + tv.str());
}

} // namespace detail

inline IntegrationResult integrate_adaptive(int m, double t, const SimplexIntegrand& f, double tol) {
    IntegrationResult out;
    if (m == 0) {
        TimeVector tv{{t}, {}};
        out.value = f.body(tv);
        detail::check_finite(out.value, tv);
        out.evaluations = 1;
        return out;
    }
    if (m != 1) throw ParameterError("adaptive quadrature is only provided for m <= 1; use a Monte Carlo mode");
    // tau_1/2 = t exp(-(1-w)/w): resolves the log endpoint of j at 0.
    std::size_t evals = 0;
    auto outer = [&](double w) {
        if (w <= 0.0 || w >= 1.0) return 0.0;
        const auto nd = quad::log_endpoint_node(t, w);
        const double rest = std::max(0.0, t - nd.tau);
        if (rest <= 0.0) return 0.0;
        TimeVector tv{{0.0, nd.tau, 0.0}, {nd.log_tau}};
        auto inner = [&](double t0) {
            tv.tau[0] = t0;
            tv.tau[2] = std::max(0.0, rest - t0);
            const double v = f.body(tv);
            detail::check_finite(v, tv);
            ++evals;
            return v;
        };
        const double iv = quad::gk(inner, 0.0, rest, tol * 0.1, 1e-300).value;
        const double jw = f.jfn_beta ? specfun::nu(nd.log_tau + f.jfn_beta->value) : nd.tau;
        return jw * nd.inv_w2 * iv;
    };
    const quad::Estimate e = quad::gk(outer, 0.0, 1.0, tol, 1e-300);
    out.value = e.value;
    out.error = e.error;
    out.evaluations = evals;
    return out;
}

inline IntegrationResult integrate(int m, double t, const SimplexIntegrand& f, const IntegrationPlan& plan) {
    plan.validate();
    if (m < 0) throw DomainError("integrate: m must be >= 0");
    if (!(t > 0.0)) throw DomainError("integrate: t must be positive");
    if (!f.body) throw DomainError("integrate: empty integrand");

    IntegrationResult out;
    if (m == 0 || plan.mode == Mode::adaptive) {
        out = integrate_adaptive(m, t, f, std::max(1e-12, plan.rel_tol * 1e-3));
        out.accuracy_warning = out.error > plan.rel_tol * std::abs(out.value);
        return out;
    }

    const int dim = 2 * m;
    const bool adapted = plan.proposal == Proposal::jfn_adapted ||
                         (plan.proposal == Proposal::automatic && f.jfn_beta.has_value());
    auto eval_point = [&](const double* u, TimeVector& tv) {
        const double w = adapted ? detail::map_adapted(m, t, u, f.jfn_beta, tv)
                                 : detail::map_uniform(m, t, u, f.jfn_beta, tv);
        if (w == 0.0) return 0.0;
        const double v = f.body(tv) * w;
        detail::check_finite(v, tv);
        return v;
    };

    if (plan.mode == Mode::monte_carlo) {
        constexpr std::size_t kBlock = 4096;
        const std::size_t nblocks = (plan.samples + kBlock - 1) / kBlock;
        std::vector<detail::Moments> blocks(nblocks);
        parallel_for(nblocks, plan.threads, [&](std::size_t b) {
            PhiloxStream rng(plan.seed, std::uint32_t(b), std::uint32_t(b >> 32), 0x51u);
            std::vector<double> u(static_cast<std::size_t>(dim));
            TimeVector tv;
            const std::size_t n = std::min(kBlock, plan.samples - b * kBlock);
            for (std::size_t i = 0; i < n; ++i) {
                for (double& x : u) x = rng.uniform();
                blocks[b].add(eval_point(u.data(), tv));
            }
        });
        detail::Moments all;
        for (const auto& b : blocks) all.merge(b);
        out.value = all.mean;
        out.error = all.n > 1 ? std::sqrt(all.m2 / (all.n - 1.0) / all.n) : 0.0;
        out.evaluations = std::size_t(all.n);
    } else {
        // Randomly shifted R_d lattice; the spread across shifts gives the
        // error estimate. Each shift is split into fixed chunks for the pool.
        const std::vector<double> alpha = detail::kronecker_alpha(dim);
        const std::size_t per_shift = plan.samples / plan.shifts;
        constexpr std::size_t kChunk = 4096;
        const std::size_t chunks = (per_shift + kChunk - 1) / kChunk;
        std::vector<double> partial(plan.shifts * chunks, 0.0);
        parallel_for(plan.shifts * chunks, plan.threads, [&](std::size_t task) {
            const std::size_t s = task / chunks, c = task % chunks;
            PhiloxStream rng(plan.seed, std::uint32_t(s), 0u, 0x9Du);
            std::vector<double> shift(static_cast<std::size_t>(dim)), u(static_cast<std::size_t>(dim));
            for (double& x : shift) x = rng.uniform();
            TimeVector tv;
            double acc = 0.0;
            const std::size_t lo = c * kChunk, hi = std::min(per_shift, lo + kChunk);
            for (std::size_t i = lo; i < hi; ++i) {
                for (int j = 0; j < dim; ++j) {
                    double x = shift[std::size_t(j)] + double(i + 1) * alpha[std::size_t(j)];
                    x -= std::floor(x);
                    u[std::size_t(j)] = x;
                }
                acc += eval_point(u.data(), tv);
            }
            partial[task] = acc;
        });
        detail::Moments across;
        for (std::size_t s = 0; s < plan.shifts; ++s) {
            double sum = 0.0;
            for (std::size_t c = 0; c < chunks; ++c) sum += partial[s * chunks + c];
            across.add(sum / double(per_shift));
        }
        out.value = across.mean;
        out.error = std::sqrt(across.m2 / (across.n - 1.0) / across.n);
        out.evaluations = per_shift * plan.shifts;
    }
    out.accuracy_warning = out.error > plan.rel_tol * std::abs(out.value);
    return out;
}

} // namespace critshe::simplexint
