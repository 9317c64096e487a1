#pragma once

// Radial mollifiers, their autocorrelation Phi = phi * phi, the log-energy
// functional beta_phi, the critical coupling schedule and beta*.

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "critshe/error.hpp"
#include "critshe/quadrature.hpp"
#include "critshe/specfun.hpp"

namespace critshe::mollifier {

using specfun::BetaStar;
using specfun::kEulerGamma;

class Mollifier {
public:
    // `shape` is an unnormalised radial profile vanishing for r >= radius.
    Mollifier(std::string name, std::function<double(double)> shape, double radius)
        : name_(std::move(name)), shape_(std::move(shape)), radius_(radius) {
        require(radius > 0.0 && std::isfinite(radius), "Mollifier: support radius must be positive");
        auto f = [&](double r) { return r * shape_(r); };
        quad::Estimate mass = quad::gk(f, 0.0, radius_, 1e-14);
        require(mass.value > 0.0, "Mollifier: profile has no mass");
        norm_ = 1.0 / (2.0 * std::numbers::pi * mass.value);
    }

    // c * exp(-1/(1-|x|^2)) on the unit disc.
    static Mollifier bump() {
        return Mollifier("bump", [](double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0; }, 1.0);
    }

    // x -> lambda^2 phi(lambda x); mass stays one, radius becomes R/lambda.
    Mollifier scaled(double lambda) const {
        require(lambda > 0.0 && std::isfinite(lambda), "Mollifier::scaled: lambda must be positive");
        Mollifier out = *this;
        out.lambda_ *= lambda;
        return out;
    }

    double operator()(double r) const {
        const double s = lambda_ * r;
        return s >= radius_ ? 0.0 : lambda_ * lambda_ * norm_ * shape_(s);
    }

    double support_radius() const { return radius_ / lambda_; }
    double normalization() const { return lambda_ * lambda_ * norm_; }
    double scale() const { return lambda_; }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    std::function<double(double)> shape_;
    double radius_;
    double norm_ = 1.0;
    double lambda_ = 1.0;
};

inline Mollifier by_name(const std::string& name) {
    if (name == "bump") return Mollifier::bump();
    throw DomainError("unknown mollifier '" + name + "'");
}

struct RadialGrid {
    // Grid spacing as a fraction of the mollifier radius R.
    double spacing_over_radius = 1.0 / 64.0;
};

// Phi tabulated on r_i = i*h, i = 0..n-1, with r_{n-1} = 2R. Off-grid values
// come from degree-7 local Lagrange interpolation with the even extension
// across r = 0.
class PairProfile {
public:
    PairProfile(double h, std::vector<double> values) : h_(h), v_(std::move(values)) {}

    double spacing() const { return h_; }
    double support_radius() const { return h_ * double(v_.size() - 1); }
    const std::vector<double>& values() const { return v_; }

    double operator()(double r) const {
        r = std::abs(r);
        if (r >= support_radius()) return 0.0;
        const double x = r / h_;
        const long i = long(std::floor(x));
        double acc = 0.0;
        for (long k = i - 3; k <= i + 4; ++k) {
            double basis = 1.0;
            for (long j = i - 3; j <= i + 4; ++j)
                if (j != k) basis *= (x - double(j)) / double(k - j);
            acc += basis * node(k);
        }
        return acc;
    }

    // 2*pi * int_0^{2R} r Phi(r) dr
    double mass() const {
        auto f = [&](double r) { return 2.0 * std::numbers::pi * r * (*this)(r); };
        return quad::gk_breaks(f, breaks(), 1e-14, 1e-16).value;
    }

    std::vector<double> breaks() const {
        std::vector<double> b(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) b[i] = h_ * double(i);
        return b;
    }

private:
    double node(long k) const {
        k = std::abs(k);
        return k < long(v_.size()) ? v_[std::size_t(k)] : 0.0;
    }

    double h_;
    std::vector<double> v_;
};

// Phi(r) = int phi(|y|) phi(|y + r e_1|) dy in polar coordinates around y.
inline double pair_value(const Mollifier& m, double r) {
    const double R = m.support_radius();
    if (r >= 2.0 * R) return 0.0;
    const double scale = m.normalization() * m.normalization() * R * R;
    auto inner = [&](double rho) {
        if (rho <= 0.0) return 0.0;
        // |y + r e|^2 = rho^2 + r^2 + 2 rho r cos(theta) < R^2 iff cos(theta) < c0
        double lo = 0.0;
        if (r > 0.0) {
            const double c0 = (R * R - rho * rho - r * r) / (2.0 * rho * r);
            if (c0 <= -1.0) return 0.0;
            if (c0 < 1.0) lo = std::acos(c0);
        }
        auto g = [&](double th) {
            return m(std::sqrt(std::max(0.0, rho * rho + r * r + 2.0 * rho * r * std::cos(th))));
        };
        const double ang = r > 0.0 ? 2.0 * quad::gk(g, lo, std::numbers::pi, 1e-13, 1e-17 * scale).value
                                   : 2.0 * std::numbers::pi * m(rho);
        return rho * m(rho) * ang;
    };
    return quad::gk(inner, std::max(0.0, r - R), R, 1e-13, 1e-17 * scale).value;
}

inline PairProfile pair_profile(const Mollifier& m, RadialGrid grid = {}) {
    const double R = m.support_radius();
    if (!(grid.spacing_over_radius > 0.0) || grid.spacing_over_radius > 1.0 / 16.0)
        throw ParameterError("pair_profile: grid coarser than R/16");
    const std::size_t n = std::size_t(std::ceil(2.0 / grid.spacing_over_radius)) + 1;
    const double h = 2.0 * R / double(n - 1);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = pair_value(m, h * double(i));
    v.back() = 0.0;
    PairProfile p(h, std::move(v));
    const double mass = p.mass();
    if (std::abs(mass - 1.0) > 1e-8)
        throw AccuracyError("pair_profile: tabulated Phi does not integrate to one", mass, std::abs(mass - 1.0));
    return p;
}

// beta_phi = int int Phi(x) log|x - x'| Phi(x') dx dx'. For radial Phi the
// angular average of log|x - x'| is log max(|x|, |x'|), which leaves
//   beta_phi = 2 int_0^{2R} m(r) M(r) log r dr,
// m(r) = 2 pi r Phi(r), M(r) = int_0^r m. M is accumulated exactly per cell
// (the interpolant is polynomial there); the log endpoint is left to the
// adaptive bisection, which grades the mesh towards r = 0.
inline quad::Estimate beta_phi_estimate(const PairProfile& p) {
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const std::vector<double> br = p.breaks();
    auto m = [&](double r) { return 2.0 * std::numbers::pi * r * p(r); };
    std::vector<double> cum(br.size(), 0.0);
    for (std::size_t i = 0; i + 1 < br.size(); ++i) cum[i + 1] = cum[i] + Gauss::integrate(m, br[i], br[i + 1]);
    auto M = [&](double r) {
        const std::size_t i = std::min(br.size() - 2, std::size_t(r / p.spacing()));
        return cum[i] + Gauss::integrate(m, br[i], r);
    };
    auto f = [&](double r) { return r > 0.0 ? 2.0 * m(r) * M(r) * std::log(r) : 0.0; };
    const quad::Estimate e = quad::gk_breaks(f, br, 1e-13, 1e-15);
    if (!e.within(1e-10, 1e-13)) throw AccuracyError("beta_phi: quadrature did not converge", e.value, e.error);
    return e;
}

inline double beta_phi(const PairProfile& p) { return beta_phi_estimate(p).value; }

struct CouplingSchedule {
    double beta_zero = 0.0;
    double epsilon = 0.1;

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("CouplingSchedule: epsilon must lie in (0,1)");
        if (!std::isfinite(beta_zero)) throw DomainError("CouplingSchedule: beta_zero must be finite");
    }
};

// beta_eps = 2 pi/|log eps| + 2 pi beta0/|log eps|^2
inline double beta_eps(const CouplingSchedule& s) {
    s.validate();
    const double L = std::abs(std::log(s.epsilon));
    return 2.0 * std::numbers::pi / L + 2.0 * std::numbers::pi * s.beta_zero / (L * L);
}

// beta* = 2 (log 2 + beta0 - beta_phi - gamma_EM). Grouping the difference
// first keeps the shift invariance (beta0 + c, beta_phi + c) exact whenever
// the difference itself is exact.
inline BetaStar beta_star(double beta_zero, double beta_phi_value) {
    return {2.0 * ((beta_zero - beta_phi_value) + (std::numbers::ln2 - kEulerGamma))};
}

// delta_eps(x) = eps^{-2} Phi(|x|/eps)
inline double delta_eps(const PairProfile& p, double eps, double r) { return p(r / eps) / (eps * eps); }

} // namespace critshe::mollifier
