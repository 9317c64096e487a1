#pragma once

// Brute-force reference computations used by the tests. They share no code
// with the library on purpose: plain loops, dense grids, long double sums,
// std::mt19937_64.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

// Trapezoid rule on [0, A] with n panels.
inline long double trapezoid(const std::function<long double(long double)>& g, long double A, long n) {
    const long double h = A / n;
    long double s = 0.5L * (g(0.0L) + g(A));
    for (long i = 1; i < n; ++i) s += g(h * i);
    return s * h;
}

// Richardson-extrapolated trapezoid, panels n and 2n.
inline long double richardson(const std::function<long double(long double)>& g, long double A, long n) {
    const long double a = trapezoid(g, A, n), b = trapezoid(g, A, 2 * n);
    return (4.0L * b - a) / 3.0L;
}

// j(t, b) = int_0^inf t^{a-1} e^{b a} / Gamma(a) da, integrand written via
// 1/Gamma(a) = a / Gamma(a+1) so that it is smooth at a = 0.
inline long double jfn(double t, double b, long n = 1000000, long double A = 60.0L) {
    auto g = [&](long double a) -> long double {
        if (a == 0.0L) return 0.0L;
        return std::exp((a - 1.0L) * std::log((long double)t) + b * a - std::lgamma(a + 1.0L)) * a;
    };
    return richardson(g, A, n);
}

// int_0^t (t - s) j(s, b) ds = int_0^inf e^{b a} t^{a+1} / Gamma(a+2) da
inline long double jfn_ramp_integral(double t, double b, long n = 1000000, long double A = 60.0L) {
    auto g = [&](long double a) -> long double {
        return std::exp(b * a + (a + 1.0L) * std::log((long double)t) - std::lgamma(a + 2.0L));
    };
    return richardson(g, A, n);
}

// K0 from its ascending series in long double.
inline long double k0_series(long double x) {
    const long double q = x * x / 4.0L;
    long double term = 1.0L, i0 = 1.0L, tail = 0.0L, h = 0.0L;
    for (int k = 1; k < 200; ++k) {
        term *= q / ((long double)k * k);
        h += 1.0L / k;
        i0 += term;
        tail += term * h;
    }
    const long double gamma_em = 0.577215664901532860606512090082402431L;
    return -(std::log(x / 2.0L) + gamma_em) * i0 + tail;
}

// Unnormalised bump exp(-1/(1-r^2)) on the unit disc.
inline double bump_shape(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

// Mass of the bump shape and Phi(0) = int phi^2, both by midpoint sums on an
// n x n grid over [-1, 1]^2.
inline std::pair<double, double> bump_mass_and_phi0(long n = 2048) {
    const double h = 2.0 / n;
    long double m = 0.0L, m2 = 0.0L;
    for (long i = 0; i < n; ++i) {
        const double x = -1.0 + (i + 0.5) * h;
        for (long j = 0; j < n; ++j) {
            const double y = -1.0 + (j + 0.5) * h;
            const double v = bump_shape(x * x + y * y);
            m += v;
            m2 += (long double)v * v;
        }
    }
    m *= h * h;
    m2 *= h * h;
    return {double(m), double(m2 / (m * m))};
}

// Sample from the normalised bump by rejection from the unit disc.
inline std::pair<double, double> sample_bump(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), acc(0.0, std::exp(-1.0));
    for (;;) {
        const double x = u(rng), y = u(rng);
        const double r2 = x * x + y * y;
        if (r2 >= 1.0) continue;
        if (acc(rng) < bump_shape(r2)) return {x, y};
    }
}

// beta_phi = E log|X - X'| with X, X' ~ Phi independent; X = Y1 - Y2 with
// Y ~ phi. Returns (mean, standard error).
inline std::pair<double, double> beta_phi_mc(long samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    long double s = 0.0L, s2 = 0.0L;
    for (long i = 0; i < samples; ++i) {
        const auto a = sample_bump(rng), b = sample_bump(rng), c = sample_bump(rng), d = sample_bump(rng);
        const double dx = a.first - b.first - c.first + d.first;
        const double dy = a.second - b.second - c.second + d.second;
        const double v = 0.5 * std::log(dx * dx + dy * dy);
        s += v;
        s2 += (long double)v * v;
    }
    const long double mean = s / samples;
    const long double var = (s2 / samples - mean * mean) * samples / (samples - 1.0L);
    return {double(mean), double(std::sqrt(var / samples))};
}

// 1D Gaussian density.
inline double normal_pdf(double x, double var) {
    return std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Sequences of pairs of {1..n}, consecutive entries distinct, by filtering
// all p^m sequences.
inline std::vector<std::vector<std::pair<int, int>>> diagrams(int n, int m) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) pairs.push_back({i, j});
    const std::size_t p = pairs.size();
    std::size_t total = 1;
    for (int k = 0; k < m; ++k) total *= p;
    std::vector<std::vector<std::pair<int, int>>> out;
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<std::pair<int, int>> seq;
        std::size_t c = code;
        for (int k = 0; k < m; ++k) {
            seq.push_back(pairs[c % p]);
            c /= p;
        }
        bool ok = true;
        for (int k = 1; k < m; ++k) ok = ok && seq[std::size_t(k)] != seq[std::size_t(k) - 1];
        if (ok) out.push_back(seq);
    }
    return out;
}

} // namespace oracle
