#pragma once

// Closed-form Gaussian calculus for the operators in the moment expansion.
//
// A state on k planar slots is a weighted sum of Gaussians whose x- and
// y-coordinates are independent with the same k x k covariance. All kernels
// used here are isotropic, so this factorisation survives every map: the
// covariance is updated once and applied to both axes.

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "critshe/diagrams.hpp"
#include "critshe/error.hpp"
#include "critshe/quadrature.hpp"
#include "critshe/specfun.hpp"

namespace critshe::gausscalc {

using diagrams::Pair;
using specfun::BetaStar;
using Point = std::array<double, 2>;

inline constexpr int kMaxSlots = 8;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxSlots, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSlots, kMaxSlots>;

struct Component {
    double weight = 1.0;
    Vec mean_x, mean_y;
    Mat cov;
};

struct GaussianMixtureState {
    int k = 0;
    std::vector<Component> components;

    double total_mass() const {
        double s = 0.0;
        for (const auto& c : components) s += c.weight;
        return s;
    }

    void validate() const {
        if (k < 1 || k > kMaxSlots) throw DomainError("GaussianMixtureState: slot count out of range");
        for (const auto& c : components) {
            if (c.mean_x.size() != k || c.mean_y.size() != k || c.cov.rows() != k || c.cov.cols() != k)
                throw DomainError("GaussianMixtureState: component shape mismatch");
            if (!(c.cov - c.cov.transpose()).isZero(1e-12 * (1.0 + c.cov.norm())))
                throw DomainError("GaussianMixtureState: covariance not symmetric");
        }
    }

    // Pointwise value at (x_1..x_k), x_i in R^2.
    double operator()(const std::vector<Point>& x) const {
        if (int(x.size()) != k) throw DomainError("GaussianMixtureState: wrong number of points");
        Vec px(k), py(k);
        for (int i = 0; i < k; ++i) {
            px[i] = x[i][0];
            py[i] = x[i][1];
        }
        double s = 0.0;
        for (const auto& c : components) {
            Eigen::LLT<Mat> llt(c.cov);
            if (llt.info() != Eigen::Success) throw NumericalError("state evaluation: covariance not positive definite");
            const Vec dx = px - c.mean_x, dy = py - c.mean_y;
            const double q = dx.dot(llt.solve(dx)) + dy.dot(llt.solve(dy));
            double logdet = 0.0;
            for (int i = 0; i < k; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
            s += c.weight * std::exp(-0.5 * q - logdet - k * std::log(2.0 * std::numbers::pi));
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Isotropic 2D mixtures: the admissible test functions and initial data.

struct IsotropicGaussian {
    double weight = 1.0;
    Point mean{0.0, 0.0};
    double variance = 1.0;
};

using IsotropicMixture = std::vector<IsotropicGaussian>;

inline void validate(const IsotropicMixture& f) {
    if (f.empty()) throw DomainError("Gaussian mixture: no components");
    for (const auto& g : f)
        if (!(g.variance > 0.0) || !std::isfinite(g.weight) || !std::isfinite(g.mean[0]) || !std::isfinite(g.mean[1]))
            throw DomainError("Gaussian mixture: variances must be positive and entries finite");
}

inline double eval(const IsotropicMixture& f, Point x) {
    double s = 0.0;
    for (const auto& g : f) {
        const double dx = x[0] - g.mean[0], dy = x[1] - g.mean[1];
        s += g.weight * std::exp(-(dx * dx + dy * dy) / (2.0 * g.variance)) / (2.0 * std::numbers::pi * g.variance);
    }
    return s;
}

// f_1 (x) ... (x) f_k as a k-slot state.
inline GaussianMixtureState tensor_product(const std::vector<IsotropicMixture>& factors) {
    const int k = int(factors.size());
    if (k < 1 || k > kMaxSlots) throw DomainError("tensor_product: slot count out of range");
    for (const auto& f : factors) validate(f);
    GaussianMixtureState s{k, {}};
    std::vector<std::size_t> idx(std::size_t(k), 0);
    while (true) {
        Component c{1.0, Vec::Zero(k), Vec::Zero(k), Mat::Zero(k, k)};
        for (int i = 0; i < k; ++i) {
            const auto& g = factors[std::size_t(i)][idx[std::size_t(i)]];
            c.weight *= g.weight;
            c.mean_x[i] = g.mean[0];
            c.mean_y[i] = g.mean[1];
            c.cov(i, i) = g.variance;
        }
        s.components.push_back(std::move(c));
        int pos = k - 1;
        while (pos >= 0 && ++idx[std::size_t(pos)] == factors[std::size_t(pos)].size()) idx[std::size_t(pos--)] = 0;
        if (pos < 0) break;
    }
    return s;
}

inline GaussianMixtureState tensor_power(const IsotropicMixture& f, int n) {
    return tensor_product(std::vector<IsotropicMixture>(std::size_t(n), f));
}

// ---------------------------------------------------------------------------
// Kernels

// rho(t, x) = (2 pi t)^{-1} exp(-|x|^2 / 2t)
inline double heat2d(double t, Point x) {
    if (!(t > 0.0)) throw DomainError("heat2d: t must be positive");
    return std::exp(-(x[0] * x[0] + x[1] * x[1]) / (2.0 * t)) / (2.0 * std::numbers::pi * t);
}

struct HeatKernelSpec {
    Vec variances;

    static HeatKernelSpec uniform(int k, double t) { return {Vec::Constant(k, t)}; }
    // t/2 on the squeezed first slot, t elsewhere.
    static HeatKernelSpec squeezed(int k, double t) {
        HeatKernelSpec h{Vec::Constant(k, t)};
        h.variances[0] = 0.5 * t;
        return h;
    }
};

namespace detail {

inline void check_pair(Pair p, int k) {
    if (!(1 <= p.first && p.first < p.second && p.second <= k))
        throw DomainError("pair (" + std::to_string(p.first) + "," + std::to_string(p.second) +
                          ") out of range for " + std::to_string(k) + " slots");
}

// Symmetrise; if the matrix stopped being positive semidefinite through
// rounding, clamp its spectrum.
inline void sanitize(Mat& c) {
    c = 0.5 * (c + c.transpose()).eval();
    const double dmax = c.diagonal().maxCoeff();
    Eigen::LDLT<Mat> ldlt(c);
    const auto d = ldlt.vectorD();
    if (ldlt.info() == Eigen::Success && d.minCoeff() > 1e-12 * dmax) return;
    Eigen::SelfAdjointEigenSolver<Mat> es(c);
    Vec ev = es.eigenvalues().cwiseMax(0.0);
    c = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    c = 0.5 * (c + c.transpose()).eval();
}

// S*_{ij}: k-1 slots -> k slots, merged slot 1 copied to positions i and j,
// the rest filling the remaining positions in order. Covariance is singular
// until a heat step follows.
inline GaussianMixtureState expand(const GaussianMixtureState& s, Pair p) {
    const int k = s.k + 1;
    check_pair(p, k);
    int src[kMaxSlots];
    int next = 1;
    for (int r = 0; r < k; ++r) src[r] = (r == p.first - 1 || r == p.second - 1) ? 0 : next++;
    GaussianMixtureState out{k, {}};
    out.components.reserve(s.components.size());
    for (const auto& c : s.components) {
        Component o{c.weight, Vec(k), Vec(k), Mat(k, k)};
        for (int r = 0; r < k; ++r) {
            o.mean_x[r] = c.mean_x[src[r]];
            o.mean_y[r] = c.mean_y[src[r]];
            for (int q = 0; q < k; ++q) o.cov(r, q) = c.cov(src[r], src[q]);
        }
        out.components.push_back(std::move(o));
    }
    return out;
}

// S_{ij}: restrict to x_i = x_j. Conditioning on d = x_i - x_j = 0 gives the
// weight factor N(0; a.mu, s) per axis and the conditional Gaussian; the
// merged variable goes first, the others keep their order.
inline GaussianMixtureState restrict_pair(const GaussianMixtureState& s, Pair p) {
    check_pair(p, s.k);
    const int i = p.first - 1, j = p.second - 1, k = s.k;
    int keep[kMaxSlots];
    keep[0] = i;
    for (int r = 0, n = 1; r < k; ++r)
        if (r != i && r != j) keep[n++] = r;
    GaussianMixtureState out{k - 1, {}};
    out.components.reserve(s.components.size());
    for (const auto& c : s.components) {
        const Vec ca = c.cov.col(i) - c.cov.col(j);
        const double var = ca[i] - ca[j];
        if (!(var > 0.0)) throw NumericalError("restriction along a degenerate direction");
        const double dx = c.mean_x[i] - c.mean_x[j], dy = c.mean_y[i] - c.mean_y[j];
        const double w = c.weight * std::exp(-(dx * dx + dy * dy) / (2.0 * var)) / (2.0 * std::numbers::pi * var);
        Component o{w, Vec(k - 1), Vec(k - 1), Mat(k - 1, k - 1)};
        for (int r = 0; r < k - 1; ++r) {
            const int a = keep[r];
            o.mean_x[r] = c.mean_x[a] - ca[a] * dx / var;
            o.mean_y[r] = c.mean_y[a] - ca[a] * dy / var;
            for (int q = 0; q < k - 1; ++q) o.cov(r, q) = c.cov(a, keep[q]) - ca[a] * ca[keep[q]] / var;
        }
        if (k - 1 > 1) sanitize(o.cov);
        out.components.push_back(std::move(o));
    }
    return out;
}

} // namespace detail

inline GaussianMixtureState apply_heat(GaussianMixtureState s, const HeatKernelSpec& h) {
    if (h.variances.size() != s.k) throw DomainError("apply_heat: variance vector has wrong length");
    if (!(h.variances.minCoeff() >= 0.0)) throw DomainError("apply_heat: variances must be nonnegative");
    for (auto& c : s.components) c.cov.diagonal() += h.variances;
    return s;
}

// P_t S*_{ij}
inline GaussianMixtureState apply_out(const GaussianMixtureState& s, Pair p, double t) {
    if (!(t > 0.0)) throw DomainError("apply_out: t must be positive");
    GaussianMixtureState e = detail::expand(s, p);
    return apply_heat(std::move(e), HeatKernelSpec::uniform(e.k, t));
}

// S_{ij} P_t
inline GaussianMixtureState apply_in(const GaussianMixtureState& s, Pair p, double t) {
    if (!(t > 0.0)) throw DomainError("apply_in: t must be positive");
    return detail::restrict_pair(apply_heat(s, HeatKernelSpec::uniform(s.k, t)), p);
}

// S_{ij} P_t S*_{kl}; pair_in = (k,l) is the expansion, pair_out = (i,j)
// the restriction.
inline GaussianMixtureState apply_med(const GaussianMixtureState& s, Pair pair_in, Pair pair_out, double t) {
    if (!(t > 0.0)) throw DomainError("apply_med: t must be positive");
    GaussianMixtureState e = detail::expand(s, pair_in);
    return detail::restrict_pair(apply_heat(std::move(e), HeatKernelSpec::uniform(e.k, t)), pair_out);
}

// 4 pi P^J_t without the j(t) factor; the integrator supplies j so that it
// can treat the endpoint singularity.
inline GaussianMixtureState apply_J_heat(GaussianMixtureState s, double t) {
    if (!(t >= 0.0)) throw DomainError("apply_J: t must be nonnegative");
    s = apply_heat(std::move(s), HeatKernelSpec::squeezed(s.k, t));
    for (auto& c : s.components) c.weight *= 4.0 * std::numbers::pi;
    return s;
}

inline GaussianMixtureState apply_J(const GaussianMixtureState& s, double t, BetaStar b) {
    if (!(t > 0.0)) throw DomainError("apply_J: t must be positive");
    GaussianMixtureState out = apply_J_heat(s, t);
    const double jv = specfun::jfn(t, b);
    for (auto& c : out.components) c.weight *= jv;
    return out;
}

// <f, g> = int f g over R^{2k}
inline double inner_product(const GaussianMixtureState& f, const GaussianMixtureState& g) {
    if (f.k != g.k) throw DomainError("inner_product: slot counts differ");
    const int k = f.k;
    double s = 0.0;
    for (const auto& a : f.components) {
        for (const auto& b : g.components) {
            const Mat sum = a.cov + b.cov;
            Eigen::LLT<Mat> llt(sum);
            if (llt.info() != Eigen::Success) throw NumericalError("inner_product: covariance sum is singular");
            double logdet = 0.0;
            for (int i = 0; i < k; ++i) {
                const double d = llt.matrixL()(i, i);
                if (!(d > 1e-150)) throw NumericalError("inner_product: covariance sum is singular");
                logdet += 2.0 * std::log(d);
            }
            const Vec dx = a.mean_x - b.mean_x, dy = a.mean_y - b.mean_y;
            const double q = dx.dot(llt.solve(dx)) + dy.dot(llt.solve(dy));
            s += a.weight * b.weight * std::exp(-0.5 * q - logdet - k * std::log(2.0 * std::numbers::pi));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Closed forms at n = 2, in centre-of-mass / relative coordinates
// x_c = (x1 + x2)/2, x_d = x1 - x2.

namespace detail {

// 2D isotropic Gaussian density with variance v, evaluated at offset m.
inline double n2(double m2, double v) { return std::exp(-m2 / (2.0 * v)) / (2.0 * std::numbers::pi * v); }

inline double sq(Point p) { return p[0] * p[0] + p[1] * p[1]; }

} // namespace detail

// int_0^tau rho(2(tau - s), a) rho(2s, b) ds by quadrature, |a| = ra, |b| = rb
inline double bessel_identity_lhs(double tau, double ra, double rb) {
    auto f = [&](double s) {
        if (s <= 0.0 || s >= tau) return 0.0;
        return detail::n2(ra * ra, 2.0 * (tau - s)) * detail::n2(rb * rb, 2.0 * s);
    };
    return quad::gk(f, 0.0, tau, 1e-13, 1e-18).value;
}

// (8 pi^2 tau)^{-1} exp(-(ra^2 + rb^2)/4 tau) K0(ra rb / 2 tau)
inline double bessel_identity_rhs(double tau, double ra, double rb) {
    return std::exp(-(ra * ra + rb * rb) / (4.0 * tau)) * specfun::bessel_k0(ra * rb / (2.0 * tau)) /
           (8.0 * std::numbers::pi * std::numbers::pi * tau);
}

inline double bessel_identity_residual(double tau, double ra, double rb) {
    if (!(tau > 0.0 && ra > 0.0 && rb > 0.0)) throw DomainError("bessel identity: arguments must be positive");
    return std::abs(bessel_identity_lhs(tau, ra, rb) - bessel_identity_rhs(tau, ra, rb));
}

// Pointwise second-moment kernel
//   rho(t/2, xc - xc') [rho(2t, xd - xd') + int_{Sigma_1(t)} rho(2 tau0, xd) 4 pi j(tau_half) rho(2 tau1, xd') d tau].
// With use_bessel the inner tau0 integral collapses to the K0 form, which
// needs xd, xd' != 0.
inline quad::Estimate second_moment_kernel(double t, Point xc, Point xd, Point xc2, Point xd2, BetaStar b,
                                           bool use_bessel = true) {
    if (!(t > 0.0)) throw DomainError("second_moment_closed_form: t must be positive");
    const double com = detail::n2(detail::sq({xc[0] - xc2[0], xc[1] - xc2[1]}), 0.5 * t);
    const double free = detail::n2(detail::sq({xd[0] - xd2[0], xd[1] - xd2[1]}), 2.0 * t);
    const double ra2 = detail::sq(xd), rb2 = detail::sq(xd2);
    if (use_bessel && (ra2 == 0.0 || rb2 == 0.0))
        throw DomainError("second_moment_closed_form: Bessel form needs nonzero relative coordinates");
    auto body = [&](double rest) -> double {
        if (rest <= 0.0) return 0.0;
        if (use_bessel) return bessel_identity_rhs(rest, std::sqrt(ra2), std::sqrt(rb2));
        auto f = [&](double t0) {
            const double t1 = rest - t0;
            if (t0 <= 0.0 || t1 <= 0.0) return 0.0;
            return detail::n2(ra2, 2.0 * t0) * detail::n2(rb2, 2.0 * t1);
        };
        return quad::gk(f, 0.0, rest, 1e-12, 1e-300).value;
    };
    auto outer = [&](double w) {
        if (w <= 0.0 || w >= 1.0) return 0.0;
        const auto nd = quad::log_endpoint_node(t, w);
        return 4.0 * std::numbers::pi * specfun::nu(nd.log_tau + b.value) * nd.inv_w2 * body(t - nd.tau);
    };
    const quad::Estimate inter = quad::gk(outer, 0.0, 1.0, 1e-11, 1e-300);
    return {com * (free + inter.value), com * inter.error};
}

struct SecondMoment {
    double free = 0.0;
    quad::Estimate interaction;
    double total() const { return free + interaction.value; }
};

namespace detail {

inline double common_variance(const IsotropicMixture& f, const char* what) {
    validate(f);
    const double v = f.front().variance;
    for (const auto& g : f)
        if (g.variance != v)
            throw DomainError(std::string(what) + ": closed form needs one shared variance per mixture");
    return v;
}

} // namespace detail

// <f (x) f, (P_t + D_t)(z (x) z)> from the closed form; every spatial
// integral is a Gaussian overlap, the simplex integral is done numerically.
inline SecondMoment second_moment_closed_form(double t, const IsotropicMixture& f, const IsotropicMixture& z,
                                              BetaStar b, double rel_tol = 1e-11) {
    if (!(t > 0.0)) throw DomainError("second_moment_closed_form: t must be positive");
    const double vf = detail::common_variance(f, "second_moment_closed_form");
    const double vz = detail::common_variance(z, "second_moment_closed_form");

    struct PairTerm {
        double w;
        Point c, d;
    };
    auto pairs = [](const IsotropicMixture& g) {
        std::vector<PairTerm> out;
        for (const auto& a : g)
            for (const auto& bb : g)
                out.push_back({a.weight * bb.weight,
                               {0.5 * (a.mean[0] + bb.mean[0]), 0.5 * (a.mean[1] + bb.mean[1])},
                               {a.mean[0] - bb.mean[0], a.mean[1] - bb.mean[1]}});
        return out;
    };
    const auto pf = pairs(f), pz = pairs(z);

    SecondMoment out;
    for (const auto& a : pf)
        for (const auto& c : pz) {
            const double com = detail::n2(detail::sq({a.c[0] - c.c[0], a.c[1] - c.c[1]}), 0.5 * (vf + vz + t));
            out.free += a.w * c.w * com *
                        detail::n2(detail::sq({a.d[0] - c.d[0], a.d[1] - c.d[1]}), 2.0 * (vf + vz + t));
        }

    auto body = [&](double t0, double t1) {
        double s = 0.0;
        for (const auto& a : pf) {
            const double left = detail::n2(detail::sq(a.d), 2.0 * vf + 2.0 * t0);
            for (const auto& c : pz) {
                const double com = detail::n2(detail::sq({a.c[0] - c.c[0], a.c[1] - c.c[1]}), 0.5 * (vf + vz + t));
                s += a.w * c.w * com * left * detail::n2(detail::sq(c.d), 2.0 * vz + 2.0 * t1);
            }
        }
        return s;
    };
    auto outer = [&](double w) {
        if (w <= 0.0 || w >= 1.0) return 0.0;
        const auto nd = quad::log_endpoint_node(t, w);
        const double rest = t - nd.tau;
        if (rest <= 0.0) return 0.0;
        auto inner = [&](double t0) { return body(t0, std::max(0.0, rest - t0)); };
        const double iv = quad::gk(inner, 0.0, rest, rel_tol * 0.1, 1e-300).value;
        return 4.0 * std::numbers::pi * specfun::nu(nd.log_tau + b.value) * nd.inv_w2 * iv;
    };
    out.interaction = quad::gk(outer, 0.0, 1.0, rel_tol, 1e-300);
    return out;
}

} // namespace critshe::gausscalc
