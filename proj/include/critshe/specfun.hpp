#pragma once

// Special functions behind the critical 2D SHE moments: the renormalised
// interaction kernel j(t, beta*), K0, the planar Green's function, and the
// exact identities they satisfy.
//
// Throughout, nu(y) := integral_0^inf e^{alpha*y}/Gamma(alpha) d alpha, so that
// j(t, b) = nu(log t + b) / t. Working with nu keeps every quantity a
// function of one variable and lets callers stay in log space.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/chebyshev.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/rational.hpp>

#include "critshe/error.hpp"
#include "critshe/quadrature.hpp"

namespace critshe::specfun {

inline constexpr double kEulerGamma = 0.5772156649015329;

struct BetaStar {
    double value = 0.0;
};

struct JfnEvalConfig {
    double alpha_cutoff = 1.0e5;
    double rel_tol = 1.0e-12;
    double split_point = 1.0;

    void validate() const {
        require(std::isfinite(alpha_cutoff) && std::isfinite(split_point) && split_point > 0.0 &&
                    alpha_cutoff > split_point,
                "JfnEvalConfig: need alpha_cutoff > split_point > 0");
        require(rel_tol > 0.0 && rel_tol <= 1e-3, "JfnEvalConfig: rel_tol must lie in (0, 1e-3]");
    }
};

// ---------------------------------------------------------------------------
// nu(y) by direct quadrature over alpha.

struct LogNu {
    double log_value;
    double rel_error;
};

namespace detail {

// Solve digamma(a) = y for a >= lo; the log-integrand a*y - lgamma(a) is
// concave so its maximiser is unique.
inline double alpha_peak(double y, double lo) {
    using boost::math::digamma;
    if (digamma(lo) >= y) return lo;
    double a = std::max(lo, std::exp(y) + 0.5);
    for (int it = 0; it < 100; ++it) {
        const double f = digamma(a) - y;
        const double step = f / boost::math::trigamma(a);
        double next = a - step;
        if (next <= lo) next = 0.5 * (a + lo);
        if (std::abs(next - a) <= 1e-15 * a) return next;
        a = next;
    }
    return a;
}

// Point where the concave g drops `drop` nats below g(peak), searched in the
// direction dir (+1 right of the peak, -1 left, stopping at `floor`).
template <class G>
double drop_point(const G& g, double peak, double gpeak, double drop, int dir, double floor) {
    const double target = gpeak - drop;
    double inner = peak;
    double step = std::max(1.0, std::sqrt(peak));
    double outer = peak + dir * step;
    if (dir < 0) {
        if (g(floor) >= target) return floor;
        outer = floor;
    } else {
        while (g(outer) > target) {
            inner = outer;
            step *= 2.0;
            outer = peak + step;
        }
    }
    for (int it = 0; it < 200 && std::abs(outer - inner) > 1e-13 * std::max(1.0, std::abs(outer)); ++it) {
        const double mid = 0.5 * (inner + outer);
        if (g(mid) > target) inner = mid; else outer = mid;
    }
    return outer;
}

} // namespace detail

inline LogNu log_nu_direct(double y, const JfnEvalConfig& cfg = {}) {
    cfg.validate();
    require(!std::isnan(y), "log_nu_direct: NaN argument");
    const double s = cfg.split_point;

    // Panel (0, s): 1/Gamma(a) = a/Gamma(1+a) removes the a -> 0 cancellation.
    double a_hi = s;
    if (y < 0.0) a_hi = std::min(s, 60.0 / -y);
    auto small = [y](double a) { return std::exp(a * y) * a / (1.0 + boost::math::tgamma1pm1(a)); };
    quad::Estimate pa = quad::gk(small, 0.0, a_hi, cfg.rel_tol * 0.1);

    // Panel (s, inf) in log space around the peak of a*y - lgamma(a).
    auto g = [y](double a) { return a * y - std::lgamma(a); };
    const double peak = detail::alpha_peak(y, s);
    const double gpeak = g(peak);
    const double hi = detail::drop_point(g, peak, gpeak, 40.0, +1, s);
    const double lo = peak > s ? detail::drop_point(g, peak, gpeak, 40.0, -1, s) : s;
    if (hi > cfg.alpha_cutoff)
        throw AccuracyError("jfn: alpha-integral extends past alpha_cutoff", gpeak, hi);
    quad::Estimate pb = quad::gk([&](double a) { return std::exp(g(a) - gpeak); }, lo, hi,
                                 cfg.rel_tol * 0.1);

    // Combine as gpeak + log(pb + pa*e^{-gpeak}).
    const double scaled_a = pa.value * std::exp(-gpeak);
    const double scaled_aerr = pa.error * std::exp(-gpeak);
    double sum, err;
    if (std::isfinite(scaled_a)) {
        sum = pb.value + scaled_a;
        err = pb.error + scaled_aerr;
        const LogNu out{gpeak + std::log(sum), err / sum};
        if (!(out.rel_error <= cfg.rel_tol))
            throw AccuracyError("jfn: alpha quadrature did not converge", std::exp(out.log_value),
                                out.rel_error);
        return out;
    }
    // gpeak very negative: the small-alpha panel dominates.
    sum = pa.value + pb.value * std::exp(gpeak);
    err = pa.error + pb.error * std::exp(gpeak);
    const LogNu out{std::log(sum), err / sum};
    if (!(out.rel_error <= cfg.rel_tol))
        throw AccuracyError("jfn: alpha quadrature did not converge", sum, out.rel_error);
    return out;
}

// ---------------------------------------------------------------------------
// Piecewise Chebyshev table for log nu. Built lazily once per process from
// log_nu_direct; on y <= -2 the smooth function y^2*nu(y) is tabulated in
// w = 1/y, which tends to 1 as y -> -inf.

class JfnTable {
public:
    static constexpr double kYMid = -2.0;
    static constexpr double kYMax = 7.0;

    static const JfnTable& instance() {
        static const JfnTable table;
        return table;
    }

    double log_nu(double y) const {
        if (y <= kYMid) {
            const double w = 1.0 / y;
            return std::log(eval(left_, w)) - 2.0 * std::log(-y);
        }
        if (y <= kYMax) return eval(right_, y);
        return log_nu_direct(y).log_value;
    }

    // Largest relative discrepancy seen while building; exposed for tests.
    double build_error() const { return build_error_; }

private:
    struct Segment {
        double a, b;
        std::vector<double> c;
    };

    JfnTable() {
        auto left = [](double w) {
            const double y = 1.0 / w;
            return std::exp(log_nu_direct(y).log_value + 2.0 * std::log(-y));
        };
        auto right = [](double y) { return log_nu_direct(y).log_value; };
        build(left, 1.0 / kYMid, 0.0, left_);
        build(right, kYMid, kYMax, right_);
    }

    static constexpr int kDeg = 24;

    template <class F>
    static Segment fit(const F& f, double a, double b) {
        Segment s{a, b, std::vector<double>(kDeg + 1, 0.0)};
        std::array<double, kDeg + 1> fv{};
        for (int k = 0; k <= kDeg; ++k) {
            const double x = std::cos(std::numbers::pi * (k + 0.5) / (kDeg + 1));
            fv[k] = f(0.5 * (a + b) + 0.5 * (b - a) * x);
        }
        for (int j = 0; j <= kDeg; ++j) {
            double acc = 0.0;
            for (int k = 0; k <= kDeg; ++k)
                acc += fv[k] * std::cos(std::numbers::pi * j * (k + 0.5) / (kDeg + 1));
            s.c[j] = 2.0 * acc / (kDeg + 1);
        }
        return s;
    }

    static double eval_segment(const Segment& s, double x) {
        const double u = (2.0 * x - s.a - s.b) / (s.b - s.a);
        return boost::math::chebyshev_clenshaw_recurrence(s.c.data(), s.c.size(), u);
    }

    template <class F>
    void build(const F& f, double a, double b, std::vector<Segment>& out) {
        Segment s = fit(f, a, b);
        double worst = 0.0;
        for (int k = 0; k < 6; ++k) {
            const double x = a + (b - a) * (0.07 + 0.17 * k);
            const double ref = f(x);
            worst = std::max(worst, std::abs(eval_segment(s, x) - ref) / std::max(1.0, std::abs(ref)));
        }
        if (worst > 2e-14 && (b - a) > 1e-3) {
            build(f, a, 0.5 * (a + b), out);
            build(f, 0.5 * (a + b), b, out);
            return;
        }
        build_error_ = std::max(build_error_, worst);
        out.push_back(std::move(s));
    }

    static double eval(const std::vector<Segment>& segs, double x) {
        auto it = std::upper_bound(segs.begin(), segs.end(), x,
                                   [](double v, const Segment& s) { return v < s.b; });
        if (it == segs.end()) --it;
        return eval_segment(*it, x);
    }

    std::vector<Segment> left_, right_;
    double build_error_ = 0.0;
};

inline double log_nu(double y) { return JfnTable::instance().log_nu(y); }
inline double nu(double y) { return std::exp(log_nu(y)); }

// ---------------------------------------------------------------------------
// j(t, beta*)

inline double jfn(double t, BetaStar b, const JfnEvalConfig& cfg = {}) {
    if (!(t > 0.0)) throw DomainError("jfn: t must be positive");
    const LogNu ln = log_nu_direct(std::log(t) + b.value, cfg);
    return std::exp(ln.log_value - std::log(t));
}

// Table-backed variant for hot loops; agrees with jfn to ~1e-13.
inline double jfn_fast(double t, BetaStar b) {
    if (!(t > 0.0)) throw DomainError("jfn: t must be positive");
    return std::exp(log_nu(std::log(t) + b.value) - std::log(t));
}

// |int_0^inf e^{zt} j(t) dt - 1/(log(-z) - b)|, using the log-endpoint map on
// (0, e^{-b}] and plain adaptive quadrature on the exponentially decaying
// remainder.
inline double jfn_laplace_residual(std::complex<double> z, BetaStar b, const JfnEvalConfig& cfg = {}) {
    cfg.validate();
    if (!(z.real() < -std::exp(b.value)))
        throw DomainError("jfn_laplace_residual: need Re z < -e^{beta*}");
    const double T = std::exp(-b.value);
    const double tol = std::min(cfg.rel_tol, 1e-11);

    auto head = [&](double w, bool imag) {
        if (w <= 0.0) return 0.0;
        const auto nd = quad::log_endpoint_node(T, w);
        const std::complex<double> e = std::exp(z * nd.tau);
        const double val = std::exp(log_nu(nd.log_tau + b.value)) * nd.inv_w2;
        return (imag ? e.imag() : e.real()) * val;
    };
    const double decay = -z.real() - std::exp(b.value);
    const double tail_len = 60.0 / decay;
    auto tail = [&](double t, bool imag) {
        const double lt = std::log(t);
        const double lg = z.real() * t + log_nu(lt + b.value) - lt;
        const double ph = z.imag() * t;
        const double mag = std::exp(lg);
        return imag ? mag * std::sin(ph) : mag * std::cos(ph);
    };
    quad::Estimate hr = quad::gk([&](double w) { return head(w, false); }, 0.0, 1.0, tol);
    quad::Estimate hi = quad::gk([&](double w) { return head(w, true); }, 0.0, 1.0, tol);
    quad::Estimate tr = quad::gk([&](double t) { return tail(t, false); }, T, T + tail_len, tol,
                                 1e-15 * std::abs(hr.value));
    quad::Estimate ti = quad::gk([&](double t) { return tail(t, true); }, T, T + tail_len, tol,
                                 1e-15 * std::abs(hr.value));
    const std::complex<double> lhs(hr.value + tr.value, hi.value + ti.value);
    const std::complex<double> rhs = 1.0 / (std::log(-z) - b.value);
    return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// K0

namespace k0 {

// Ascending series, accurate for |w| < 2.
template <class T>
T ascending(T w) {
    const T q = w * w / 4.0;
    T term = 1.0, i0 = 1.0, tail = 0.0;
    double harmonic = 0.0;
    for (int k = 1; k < 60; ++k) {
        term *= q / double(k * k);
        harmonic += 1.0 / k;
        i0 += term;
        tail += term * harmonic;
        if (std::abs(term) * harmonic < 1e-18 * std::abs(i0)) break;
    }
    return -(std::log(w / 2.0) + kEulerGamma) * i0 + tail;
}

// Trapezoid rule on K0(w) = int_0^inf exp(-w cosh u) du, Re w > 0. The
// integrand is analytic in a strip around the real u axis, so the rule
// converges geometrically in 1/h.
template <class T>
T integral(T w) {
    const double theta = std::abs(std::arg(std::complex<double>(w)));
    const double strip = 0.5 * (0.5 * std::numbers::pi - theta);
    const double h = std::min(0.1, 2.0 * std::numbers::pi * strip / 45.0);
    // stop once |w|cos(theta)(cosh u - 1) exceeds ~45 nats
    const double ew = std::abs(w) * std::cos(theta);
    const double umax = std::acosh(1.0 + 45.0 / ew) + h;
    T sum = 0.5;
    for (double u = h; u <= umax; u += h) sum += std::exp(-w * (std::cosh(u) - 1.0));
    return sum * h * std::exp(-w);
}

// Large-argument asymptotic series with at least `min_terms` terms.
inline double asymptotic(double x, int min_terms = 12) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 40; ++k) {
        const double f = -double((2 * k - 1) * (2 * k - 1)) / (8.0 * k * x);
        if (k >= min_terms && std::abs(term * f) > std::abs(term)) break;
        term *= f;
        sum += term;
        if (k >= min_terms && std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

} // namespace k0

inline double bessel_k0(double x) {
    if (!(x > 0.0)) throw DomainError("bessel_k0: x must be positive");
    if (x < 2.0) return k0::ascending(x);
    if (x < 25.0) return k0::integral(x);
    return k0::asymptotic(x);
}

inline std::complex<double> bessel_k0(std::complex<double> w) {
    if (!(w.real() > 0.0)) throw DomainError("bessel_k0: need Re w > 0");
    if (w.imag() == 0.0) return bessel_k0(w.real());
    if (std::abs(w) < 2.0) return k0::ascending(w);
    return k0::integral(w);
}

// G_z(x) = (1/pi) K0(sqrt(-2z)|x|), principal branches.
inline std::complex<double> green2d(std::complex<double> z, std::array<double, 2> x) {
    const double r = std::hypot(x[0], x[1]);
    if (r == 0.0) throw DomainError("green2d: kernel is singular at x = 0");
    if (z.imag() == 0.0 && z.real() >= 0.0) throw DomainError("green2d: z on the branch cut [0, inf)");
    const std::complex<double> w = std::sqrt(-2.0 * z) * r;
    return bessel_k0(w) / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Gamma-function identity with exact rational polynomials.

using Rational = boost::rational<std::int64_t>;

struct GammaPolynomial {
    int m = -1;
    std::vector<Rational> coeffs; // monomial basis, coeffs[k] multiplies alpha^k

    // p_m(alpha) = alpha (alpha+1) ... (alpha+m); p_{-1} = 1.
    static GammaPolynomial make(int m) {
        if (m < -1) throw DomainError("GammaPolynomial: m must be >= -1");
        GammaPolynomial p{m, {Rational(1)}};
        for (int j = 0; j <= m; ++j) {
            std::vector<Rational> next(p.coeffs.size() + 1, Rational(0));
            for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
                next[k + 1] += p.coeffs[k];
                next[k] += p.coeffs[k] * Rational(j);
            }
            p.coeffs = std::move(next);
        }
        return p;
    }

    double operator()(double alpha) const {
        double acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
            acc = acc * alpha + boost::rational_cast<double>(*it);
        return acc;
    }
};

inline std::vector<Rational> antiderivative(const std::vector<Rational>& c) {
    std::vector<Rational> out(c.size() + 1, Rational(0));
    for (std::size_t k = 0; k < c.size(); ++k) out[k + 1] = c[k] / Rational(std::int64_t(k + 1));
    return out;
}

// Right-hand side of the identity as an exact polynomial in alpha.
inline GammaPolynomial gamma_identity_rhs(int m) {
    if (m < 0) throw DomainError("gamma_identity: m must be >= 0");
    auto binom = [](std::int64_t n, std::int64_t k) {
        std::int64_t r = 1;
        for (std::int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    };
    auto fact = [](std::int64_t n) {
        std::int64_t r = 1;
        for (std::int64_t i = 2; i <= n; ++i) r *= i;
        return r;
    };
    std::vector<Rational> integrand(m + 2, Rational(0));
    for (int k = 0; k <= m; ++k) {
        const Rational c(binom(m + 1, m - k + 1) * fact(m - k));
        const GammaPolynomial p = GammaPolynomial::make(k - 1);
        for (std::size_t i = 0; i < p.coeffs.size(); ++i) integrand[i] += c * p.coeffs[i];
    }
    GammaPolynomial out{m, antiderivative(integrand)};
    while (out.coeffs.size() > 1 && out.coeffs.back() == Rational(0)) out.coeffs.pop_back();
    return out;
}

inline double gamma_identity_check(int m, double alpha) {
    if (m < 0) throw DomainError("gamma_identity_check: m must be >= 0");
    const GammaPolynomial lhs = GammaPolynomial::make(m);
    const GammaPolynomial rhs = gamma_identity_rhs(m);
    return std::abs(lhs(alpha) - rhs(alpha));
}

// ---------------------------------------------------------------------------
// Convolution identity
//   j(t) = int_0^s int_s^t j(t1) (t2 - t1)^{-1} j(t - t2) dt2 dt1.
// With t1 = s e^{-u}, t - t2 = (t-s) e^{-v} the measure j(t1)dt1 becomes
// nu(log s + b - u) du; u = c/(1-c) then puts the 1/(t2-t1) corner at c = 0
// where floating point keeps full relative precision.

inline quad::Estimate conv_identity_rhs(double s, double t, BetaStar b) {
    if (!(s > 0.0 && s < t)) throw DomainError("conv_identity: need 0 < s < t");
    const double l1 = std::log(s) + b.value;
    const double l2 = std::log(t - s) + b.value;
    const double r = t - s;
    auto inner = [&](double u) {
        auto f = [&](double c) {
            if (c >= 1.0) return 0.0;
            const double v = c / (1.0 - c);
            const double den = -s * std::expm1(-u) - r * std::expm1(-v);
            const double jac = 1.0 / ((1.0 - c) * (1.0 - c));
            return nu(l2 - v) * jac / den;
        };
        return quad::tanh_sinh(f, 0.0, 1.0, 1e-12).value;
    };
    auto outer = [&](double c) {
        if (c >= 1.0) return 0.0;
        const double u = c / (1.0 - c);
        const double jac = 1.0 / ((1.0 - c) * (1.0 - c));
        return nu(l1 - u) * jac * inner(u);
    };
    return quad::tanh_sinh(outer, 0.0, 1.0, 1e-10);
}

inline double conv_identity_residual(double s, double t, BetaStar b) {
    if (!(s > 0.0 && s < t)) throw DomainError("conv_identity_residual: need 0 < s < t");
    const quad::Estimate rhs = conv_identity_rhs(s, t, b);
    return std::abs(jfn(t, b) - rhs.value);
}

} // namespace critshe::specfun
