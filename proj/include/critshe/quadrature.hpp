#pragma once

// Quadrature plumbing. The Kronrod/Gauss node tables and the tanh-sinh
// integrator come from Boost.Math; the global adaptive driver is local
// because Boost's recursive variant reports unscaled subinterval errors.

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "critshe/error.hpp"

namespace critshe::quad {

struct Estimate {
    double value = 0.0;
    double error = 0.0;

    bool within(double rel_tol, double abs_tol = 0.0) const {
        return error <= std::max(abs_tol, rel_tol * std::abs(value));
    }
};

namespace detail {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
using Gauss = boost::math::quadrature::gauss<double, 10>;

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk21(F& f, double a, double b) {
    const auto& x = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fc = f(c);
    double k = fc * wk[0];
    double g = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double s = f(c + h * x[i]) + f(c - h * x[i]);
        k += s * wk[i];
        if (i % 2 == 1) g += s * wg[i / 2];
    }
    const double err = std::max(std::abs(k - g), 2.0 * std::numeric_limits<double>::epsilon() * std::abs(k));
    return {a, b, k * h, err * std::abs(h)};
}

} // namespace detail

// Globally adaptive 10/21-point Gauss-Kronrod. Bisects the panel with the
// largest error until the summed error meets max(abs_tol, rel_tol*|I|) or
// the panel budget runs out; the caller inspects the returned error.
template <class F>
Estimate gk(F&& f, double a, double b, double rel_tol = 1e-12, double abs_tol = 0.0,
            std::size_t max_panels = 4000) {
    if (a == b) return {0.0, 0.0};
    std::priority_queue<detail::Panel> heap;
    detail::Panel p = detail::gk21(f, a, b);
    double total = p.value, err = p.error;
    heap.push(p);
    std::size_t panels = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total)) && panels < max_panels) {
        detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > std::min(worst.a, worst.b) && mid < std::max(worst.a, worst.b))) {
            heap.push(worst);
            break;
        }
        detail::Panel l = detail::gk21(f, worst.a, mid);
        detail::Panel r = detail::gk21(f, mid, worst.b);
        total += l.value + r.value - worst.value;
        err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        ++panels;
    }
    // Recompute from the panels to shed accumulated update rounding.
    total = 0.0;
    err = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    return {total, err};
}

// Same driver over consecutive breakpoints, tolerance shared globally.
template <class F>
Estimate gk_breaks(F&& f, const std::vector<double>& breaks, double rel_tol = 1e-12,
                   double abs_tol = 0.0, std::size_t max_panels = 8000) {
    Estimate out;
    if (breaks.size() < 2) return out;
    std::priority_queue<detail::Panel> heap;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i] == breaks[i + 1]) continue;
        detail::Panel p = detail::gk21(f, breaks[i], breaks[i + 1]);
        out.value += p.value;
        out.error += p.error;
        heap.push(p);
    }
    std::size_t panels = heap.size();
    while (!heap.empty() && out.error > std::max(abs_tol, rel_tol * std::abs(out.value)) &&
           panels < max_panels) {
        detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        detail::Panel l = detail::gk21(f, worst.a, mid);
        detail::Panel r = detail::gk21(f, mid, worst.b);
        out.value += l.value + r.value - worst.value;
        out.error += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        ++panels;
    }
    out = {};
    while (!heap.empty()) {
        out.value += heap.top().value;
        out.error += heap.top().error;
        heap.pop();
    }
    return out;
}

// tanh-sinh on [a,b]; handles integrable endpoint singularities. The
// integrator caches abscissas, so each thread keeps its own instance.
template <class F>
Estimate tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-10) {
    thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
    double err = 0.0, l1 = 0.0;
    std::size_t levels = 0;
    double v = integrator.integrate(f, a, b, rel_tol, &err, &l1, &levels);
    (void)l1;
    return {v, err};
}

// Map w in (0,1) onto tau in (0,T]: tau = T*exp(-(1-w)/w). The log of the
// node is kept so nothing depends on tau not underflowing.
// dtau = tau * dw / w^2.
struct LogEndpointNode {
    double tau;
    double log_tau;
    double inv_w2;
};

inline LogEndpointNode log_endpoint_node(double T, double w) {
    const double s = (1.0 - w) / w;
    const double lt = std::log(T) - s;
    return {std::exp(lt), lt, 1.0 / (w * w)};
}

} // namespace critshe::quad
