#pragma once

// Direct simulation of the mollified SHE
//   dZ = (1/2) Lap Z dt + sqrt(beta_eps) Z dW_eps      (Ito)
// on an N x N periodic grid, and deterministic oracles for its second moment.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "critshe/error.hpp"
#include "critshe/gausscalc.hpp"
#include "critshe/mollifier.hpp"
#include "critshe/parallel.hpp"
#include "critshe/philox.hpp"

namespace critshe::shesim {

using gausscalc::IsotropicMixture;
using Complex = std::complex<double>;

struct SimParams {
    double epsilon = 0.25;
    double beta_zero = 0.0;
    double domain = 4.0; // torus side L
    int grid = 64;       // N
    double dt = 0.0;     // 0 selects the largest stable step (L/N)^2/4
    std::string mollifier = "bump";

    double dx() const { return domain / grid; }
    double max_dt() const { return dx() * dx() / 4.0; }
    double step() const { return dt > 0.0 ? dt : max_dt(); }
    double beta_eps() const { return mollifier::beta_eps({beta_zero, epsilon}); }

    void validate() const {
        if (grid < 4 || (grid & (grid - 1)) != 0) throw ParameterError("simulate: grid must be a power of two");
        if (!(domain > 0.0) || !std::isfinite(domain)) throw ParameterError("simulate: domain must be positive");
        mollifier::CouplingSchedule{beta_zero, epsilon}.validate();
        if (beta_eps() < 0.0)
            throw ParameterError("simulate: beta_eps is negative, the multiplicative noise needs beta_eps >= 0");
        if (epsilon * grid / domain < 4.0 - 1e-12)
            throw ParameterError("simulate: mollifier under-resolved, need epsilon*N/L >= 4 (got " +
                                 std::to_string(epsilon * grid / domain) + ")");
        if (dt < 0.0 || dt > max_dt() * (1.0 + 1e-12))
            throw ParameterError("simulate: dt exceeds the stability bound (L/N)^2/4 = " + std::to_string(max_dt()));
    }
};

struct FieldState {
    int n = 0;
    double side = 0.0;
    double time = 0.0;
    std::vector<double> values; // row-major, values[i*n + j] at (i dx, j dx)

    double dx() const { return side / n; }
    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v) || std::abs(v) > 1e300) return false;
        return true;
    }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex mu;
    return mu;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double[], FftwFree>;
using CplxBuf = std::unique_ptr<fftw_complex[], FftwFree>;

inline RealBuf real_buf(std::size_t n) { return RealBuf(static_cast<double*>(fftw_malloc(sizeof(double) * n))); }
inline CplxBuf cplx_buf(std::size_t n) {
    return CplxBuf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
}

// Owns a pair of 2D plans. Plans are created under a global lock (the FFTW
// planner is not reentrant) and executed through the new-array interface,
// which is thread-safe for buffers allocated with fftw_malloc.
class R2CPlans {
public:
    explicit R2CPlans(int n) : n_(n) {
        RealBuf r = real_buf(std::size_t(n) * n);
        CplxBuf c = cplx_buf(std::size_t(n) * (n / 2 + 1));
        std::lock_guard<std::mutex> lk(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_r2c_2d(n, n, r.get(), c.get(), FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_2d(n, n, c.get(), r.get(), FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw NumericalError("FFTW planning failed");
    }
    ~R2CPlans() {
        std::lock_guard<std::mutex> lk(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    R2CPlans(const R2CPlans&) = delete;
    R2CPlans& operator=(const R2CPlans&) = delete;

    void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(fwd_, in, out); }
    // Destroys `in`.
    void backward(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(bwd_, in, out); }
    int n() const { return n_; }

private:
    int n_;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

class C2CPlans {
public:
    explicit C2CPlans(int n) : n_(n) {
        CplxBuf a = cplx_buf(std::size_t(n) * n), b = cplx_buf(std::size_t(n) * n);
        std::lock_guard<std::mutex> lk(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_2d(n, n, a.get(), b.get(), FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(n, n, a.get(), b.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw NumericalError("FFTW planning failed");
    }
    ~C2CPlans() {
        std::lock_guard<std::mutex> lk(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    C2CPlans(const C2CPlans&) = delete;
    C2CPlans& operator=(const C2CPlans&) = delete;

    void forward(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(fwd_, in, out); }
    void backward(fftw_complex* in, fftw_complex* out) const { fftw_execute_dft(bwd_, in, out); }

private:
    int n_;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

// Signed wavenumber of DFT index j on a grid of n points with side L.
inline double wavenumber(int j, int n, double side) {
    const int s = j <= n / 2 ? j : j - n;
    return 2.0 * std::numbers::pi * s / side;
}

// Mixture evaluated on the torus, summing the nearest periodic images.
inline double eval_periodic(const IsotropicMixture& f, double x, double y, double side) {
    double s = 0.0;
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) s += gausscalc::eval(f, {x + a * side, y + b * side});
    return s;
}

inline std::vector<double> sample_periodic(const IsotropicMixture& f, int n, double side) {
    std::vector<double> v(std::size_t(n) * n);
    const double h = side / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v[std::size_t(i) * n + j] = eval_periodic(f, i * h, j * h, side);
    return v;
}

// phi_eps sampled at grid offsets (wrapped), rescaled to unit discrete mass.
inline std::vector<double> mollifier_on_grid(const mollifier::Mollifier& phi, double eps, int n, double side) {
    const mollifier::Mollifier pe = phi.scaled(1.0 / eps);
    std::vector<double> v(std::size_t(n) * n);
    const double h = side / n;
    double mass = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x = (i <= n / 2 ? i : i - n) * h, y = (j <= n / 2 ? j : j - n) * h;
            mass += (v[std::size_t(i) * n + j] = pe(std::hypot(x, y))) * h * h;
        }
    if (!(mass > 0.0)) throw ParameterError("mollifier has no mass on the grid");
    for (double& x : v) x /= mass;
    return v;
}

} // namespace detail

// Scratch buffers for one worker.
struct Workspace {
    detail::RealBuf real, noise;
    detail::CplxBuf spec;

    explicit Workspace(int n)
        : real(detail::real_buf(std::size_t(n) * n)), noise(detail::real_buf(std::size_t(n) * n)),
          spec(detail::cplx_buf(std::size_t(n) * (n / 2 + 1))) {}
};

class Simulator {
public:
    explicit Simulator(SimParams p) : p_(std::move(p)), plans_((p_.validate(), p_.grid)) {
        const int n = p_.grid;
        beta_ = p_.beta_eps();
        const std::vector<double> phi = detail::mollifier_on_grid(mollifier::by_name(p_.mollifier), p_.epsilon, n,
                                                                  p_.domain);
        // Spectrum of phi, divided by n^2 for the unnormalised inverse; the
        // cell increments already carry the dx^2 of the white-noise measure.
        Workspace ws(n);
        std::copy(phi.begin(), phi.end(), ws.real.get());
        plans_.forward(ws.real.get(), ws.spec.get());
        const std::size_t nc = std::size_t(n) * (n / 2 + 1);
        phi_hat_.resize(nc);
        const double scale = 1.0 / (double(n) * n);
        for (std::size_t i = 0; i < nc; ++i) phi_hat_[i] = Complex(ws.spec[i][0], ws.spec[i][1]) * scale;
        ksq_.resize(nc);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= n / 2; ++j) {
                const double kx = detail::wavenumber(i, n, p_.domain), ky = detail::wavenumber(j, n, p_.domain);
                ksq_[std::size_t(i) * (n / 2 + 1) + j] = kx * kx + ky * ky;
            }
        // Discrete noise variance sum_y phi(y)^2 dx^2 (per unit time).
        double v = 0.0;
        for (double x : phi) v += x * x;
        noise_var_ = v * p_.dx() * p_.dx();
    }

    const SimParams& params() const { return p_; }
    double beta() const { return beta_; }
    double noise_variance_per_time() const { return noise_var_; }

    FieldState initial(const IsotropicMixture& z) const {
        gausscalc::validate(z);
        return {p_.grid, p_.domain, 0.0, detail::sample_periodic(z, p_.grid, p_.domain)};
    }

    // Mollified noise increment dW_eps on the grid for (replica, step).
    void noise(double dt, std::uint64_t seed, std::uint64_t replica, std::uint64_t step, Workspace& ws) const {
        const int n = p_.grid;
        const double sd = std::sqrt(dt) * p_.dx();
        for (int i = 0; i < n; ++i) {
            PhiloxStream rng(seed, std::uint32_t(replica), std::uint32_t(step), std::uint32_t(i) | (std::uint32_t(replica >> 32) << 20));
            double* row = ws.noise.get() + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) row[j] = sd * rng.normal();
        }
        plans_.forward(ws.noise.get(), ws.spec.get());
        const std::size_t nc = phi_hat_.size();
        for (std::size_t k = 0; k < nc; ++k) {
            const Complex c = Complex(ws.spec[k][0], ws.spec[k][1]) * phi_hat_[k];
            ws.spec[k][0] = c.real();
            ws.spec[k][1] = c.imag();
        }
        plans_.backward(ws.spec.get(), ws.noise.get());
    }

    // One Ito-Euler step followed by the exact heat propagator.
    void step(FieldState& s, double dt, std::uint64_t seed, std::uint64_t replica, std::uint64_t step_index,
              Workspace& ws) const {
        if (!(dt > 0.0) || dt > p_.max_dt() * (1.0 + 1e-12))
            throw ParameterError("step: dt violates the stability bound (L/N)^2/4");
        const int n = p_.grid;
        const std::size_t nn = std::size_t(n) * n;
        double* z = ws.real.get();
        if (beta_ != 0.0) {
            noise(dt, seed, replica, step_index, ws);
            const double sb = std::sqrt(beta_);
            for (std::size_t i = 0; i < nn; ++i) z[i] = s.values[i] * (1.0 + sb * ws.noise[i]);
        } else {
            std::copy(s.values.begin(), s.values.end(), z);
        }
        plans_.forward(z, ws.spec.get());
        const double inv = 1.0 / double(nn);
        for (std::size_t k = 0; k < ksq_.size(); ++k) {
            const double m = std::exp(-0.5 * ksq_[k] * dt) * inv;
            ws.spec[k][0] *= m;
            ws.spec[k][1] *= m;
        }
        plans_.backward(ws.spec.get(), z);
        std::copy(z, z + nn, s.values.begin());
        s.time += dt;
        if (!s.finite()) throw BlowupError("simulation blew up", long(step_index));
    }

    // <f, Z> = sum_x f(x) Z(x) dx^2 with f periodised.
    double pairing(const FieldState& s, const std::vector<double>& f_grid) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < f_grid.size(); ++i) acc += f_grid[i] * s.values[i];
        return acc * s.dx() * s.dx();
    }

private:
    SimParams p_;
    detail::R2CPlans plans_;
    double beta_ = 0.0;
    double noise_var_ = 0.0;
    std::vector<Complex> phi_hat_;
    std::vector<double> ksq_;
};

struct MomentEstimate {
    double time = 0.0;
    double value = 0.0;
    double standard_error = 0.0;
};

// Leave-one-out jackknife for the mean; returns (mean, standard error).
inline std::pair<double, double> jackknife_mean(const std::vector<double>& x) {
    const double n = double(x.size());
    if (x.size() < 2) throw DomainError("jackknife: need at least two samples");
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : x) {
        const double loo = (sum - v) / (n - 1.0);
        ss += (loo - mean) * (loo - mean);
    }
    return {mean, std::sqrt((n - 1.0) / n * ss)};
}

struct SimulationRequest {
    int n = 2;                        // moment order
    std::vector<double> times{1.0};   // increasing, >= 0
    std::vector<IsotropicMixture> f;  // one factor per particle (or one, reused)
    IsotropicMixture z_ic;
    SimParams params;
    std::size_t replicas = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    void validate() const {
        if (n < 1) throw DomainError("estimate_moment: n must be >= 1");
        if (replicas < 100) throw ParameterError("estimate_moment: at least 100 replicas required");
        if (times.empty()) throw DomainError("estimate_moment: no output times");
        for (std::size_t i = 0; i < times.size(); ++i)
            if (!(times[i] >= 0.0) || (i && times[i] <= times[i - 1]))
                throw DomainError("estimate_moment: times must be nonnegative and increasing");
        if (f.size() != 1 && int(f.size()) != n) throw DomainError("estimate_moment: need 1 or n test functions");
        for (const auto& g : f) gausscalc::validate(g);
        gausscalc::validate(z_ic);
        params.validate();
    }
};

// Monte Carlo estimate of E[prod_i <f_i, Z_t>] at each requested time.
// Replica r uses random streams keyed by (seed, r, step, row), so the result
// does not depend on the number of workers.
inline std::vector<MomentEstimate> estimate_moment(const SimulationRequest& req) {
    req.validate();
    const Simulator sim(req.params);
    const int N = req.params.grid;
    std::vector<std::vector<double>> fg;
    for (const auto& g : req.f) fg.push_back(detail::sample_periodic(g, N, req.params.domain));
    const double hmax = req.params.step();

    // Step schedule: each output interval is split into equal steps <= hmax.
    std::vector<std::pair<std::size_t, double>> segments;
    double prev = 0.0;
    for (double t : req.times) {
        const double len = t - prev;
        const std::size_t k = len > 0.0 ? std::size_t(std::ceil(len / hmax - 1e-9)) : 0;
        segments.emplace_back(k, k ? len / double(k) : 0.0);
        prev = t;
    }

    const FieldState z0 = sim.initial(req.z_ic);
    std::vector<std::vector<double>> obs(req.times.size(), std::vector<double>(req.replicas));
    parallel_for(req.replicas, req.threads, [&](std::size_t r) {
        Workspace ws(N);
        FieldState s = z0;
        std::uint64_t step_index = 0;
        for (std::size_t k = 0; k < segments.size(); ++k) {
            for (std::size_t i = 0; i < segments[k].first; ++i) sim.step(s, segments[k].second, req.seed, r, step_index++, ws);
            double prod = 1.0;
            for (int p = 0; p < req.n; ++p) prod *= sim.pairing(s, fg[fg.size() == 1 ? 0 : std::size_t(p)]);
            obs[k][r] = prod;
        }
    });
    std::vector<MomentEstimate> out;
    for (std::size_t k = 0; k < req.times.size(); ++k) {
        const auto [m, se] = jackknife_mean(obs[k]);
        out.push_back({req.times[k], m, se});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Second-moment oracles: u solves
//   du/dt = (1/2)(Lap_1 + Lap_2) u + beta_eps delta_eps(x_1 - x_2) u,
// the two-particle delta Bose gas with the regularised potential.

enum class OracleMethod { torus, radial };

inline OracleMethod parse_oracle_method(const std::string& s) {
    if (s == "torus") return OracleMethod::torus;
    if (s == "radial") return OracleMethod::radial;
    throw DomainError("unknown oracle method '" + s + "'");
}

struct OracleRequest {
    double t = 1.0;
    IsotropicMixture f, z_ic;
    double epsilon = 0.1;
    double beta_eps = 0.0;
    std::string mollifier = "bump";
    OracleMethod method = OracleMethod::radial;
    // torus: M x M grid of side L, Lie splitting with step dt (0 = (L/M)^2/4),
    // the exact second moment of the simulator's scheme when M = N.
    int grid = 64;
    double domain = 4.0;
    double dt = 0.0;
    // radial: cells per mollifier radius near the origin; refinement doubles it.
    int radial_resolution = 32;
};

namespace detail {

// Second moment of the simulator's own scheme on the torus. Translation
// invariance conserves K = k1 + k2, so each K evolves separately on the
// relative variable: potential step in relative space, heat step with
// multiplier exp(-(|k1|^2 + |K - k1|^2) dt/2).
inline double oracle_torus(const OracleRequest& q) {
    const int M = q.grid;
    if (M < 4 || (M & (M - 1)) != 0) throw ParameterError("oracle: grid must be a power of two");
    const double L = q.domain, h = L / M;
    if (q.epsilon * M / L < 4.0 - 1e-12) throw ParameterError("oracle: delta_eps under-resolved, need epsilon*M/L >= 4");
    const double hmax = h * h / 4.0;
    const double dt_req = q.dt > 0.0 ? q.dt : hmax;
    const std::size_t steps = q.t > 0.0 ? std::size_t(std::ceil(q.t / dt_req - 1e-9)) : 0;
    const double dt = steps ? q.t / double(steps) : 0.0;
    const std::size_t MM = std::size_t(M) * M;

    C2CPlans plans(M);
    CplxBuf a = cplx_buf(MM), b = cplx_buf(MM);
    auto dft = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < MM; ++i) {
            a[i][0] = v[i];
            a[i][1] = 0.0;
        }
        plans.forward(a.get(), b.get());
        std::vector<Complex> out(MM);
        for (std::size_t i = 0; i < MM; ++i) out[i] = Complex(b[i][0], b[i][1]) * (h * h);
        return out;
    };
    const std::vector<Complex> zh = dft(sample_periodic(q.z_ic, M, L));
    const std::vector<Complex> fh = dft(sample_periodic(q.f, M, L));

    // Covariance of the discrete noise: circular autocorrelation of phi.
    const std::vector<double> phi = mollifier_on_grid(mollifier::by_name(q.mollifier), q.epsilon, M, L);
    const std::vector<Complex> ph = dft(phi);
    for (std::size_t i = 0; i < MM; ++i) {
        a[i][0] = std::norm(ph[i]);
        a[i][1] = 0.0;
    }
    plans.backward(a.get(), b.get());
    std::vector<double> pot(MM);
    for (std::size_t i = 0; i < MM; ++i) pot[i] = 1.0 + q.beta_eps * dt * b[i][0] / (L * L);

    std::vector<double> ksq(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) ksq[std::size_t(i)] = std::pow(wavenumber(i, M, L), 2);
    auto wrap = [M](int i) { return std::size_t(((i % M) + M) % M); };
    auto idx = [&](int i, int j) { return wrap(i) * std::size_t(M) + wrap(j); };

    // Active centre-of-mass modes: the weight of K is bounded by its initial
    // overlap times the centre-of-mass heat decay exp(-|K|^2 t/4); modes
    // below 1e-16 of the largest are dropped. K and -K contribute complex
    // conjugates, so only one of each pair is evolved.
    double peak = 0.0;
    std::vector<double> wK(MM, 0.0);
    for (int Ki = 0; Ki < M; ++Ki)
        for (int Kj = 0; Kj < M; ++Kj) {
            double w = 0.0;
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j) {
                    const double zz = std::abs(zh[idx(i, j)] * zh[idx(Ki - i, Kj - j)]);
                    const double ff = std::abs(fh[idx(i, j)] * fh[idx(Ki - i, Kj - j)]);
                    w = std::max(w, std::sqrt(zz * ff));
                }
            w *= std::exp(-0.25 * q.t * (ksq[wrap(Ki)] + ksq[wrap(Kj)]));
            wK[idx(Ki, Kj)] = w;
            peak = std::max(peak, w);
        }

    double total = 0.0;
    for (int Ki = 0; Ki < M; ++Ki)
        for (int Kj = 0; Kj < M; ++Kj) {
            const std::size_t self = idx(Ki, Kj), mirror = idx(-Ki, -Kj);
            if (mirror < self || wK[self] < 1e-16 * peak) continue;
            const double mult = mirror == self ? 1.0 : 2.0;
            std::vector<Complex> v(MM);
            std::vector<double> heat(MM);
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j) {
                    v[idx(i, j)] = zh[idx(i, j)] * zh[idx(Ki - i, Kj - j)];
                    heat[idx(i, j)] = std::exp(-0.5 * dt *
                                               (ksq[wrap(i)] + ksq[wrap(j)] + ksq[wrap(Ki - i)] + ksq[wrap(Kj - j)]));
                }
            for (std::size_t s = 0; s < steps; ++s) {
                if (q.beta_eps != 0.0) {
                    for (std::size_t i = 0; i < MM; ++i) {
                        a[i][0] = v[i].real();
                        a[i][1] = v[i].imag();
                    }
                    plans.backward(a.get(), b.get());
                    for (std::size_t i = 0; i < MM; ++i) {
                        a[i][0] = b[i][0] * pot[i] / double(MM);
                        a[i][1] = b[i][1] * pot[i] / double(MM);
                    }
                    plans.forward(a.get(), b.get());
                    for (std::size_t i = 0; i < MM; ++i) v[i] = Complex(b[i][0], b[i][1]);
                }
                for (std::size_t i = 0; i < MM; ++i) v[i] *= heat[i];
            }
            Complex acc = 0.0;
            for (int i = 0; i < M; ++i)
                for (int j = 0; j < M; ++j)
                    acc += v[idx(i, j)] * std::conj(fh[idx(i, j)]) * std::conj(fh[idx(Ki - i, Kj - j)]);
            total += mult * acc.real();
        }
    return total / std::pow(L, 4);
}

// Free-space oracle for single centred Gaussians. Relative coordinate
// x_d = x_1 - x_2 evolves by du/dt = Lap u + beta delta_eps u; for radial
// data this is a 1D problem, discretised by finite volumes on a graded
// radial mesh and integrated exactly in time through the eigen-
// decomposition of the symmetrised operator. The centre of mass is a pure
// heat factor.
inline double oracle_radial(const OracleRequest& q) {
    if (q.f.size() != 1 || q.z_ic.size() != 1)
        throw DomainError("radial oracle: f and z_ic must each be a single Gaussian");
    if (q.radial_resolution < 8) throw ParameterError("radial oracle: delta_eps under-resolved (resolution < 8)");
    const auto& gf = q.f.front();
    const auto& gz = q.z_ic.front();
    const double vf = gf.variance, vz = gz.variance, t = q.t, eps = q.epsilon;
    const double dm2 = std::pow(gf.mean[0] - gz.mean[0], 2) + std::pow(gf.mean[1] - gz.mean[1], 2);
    const double com = gf.weight * gf.weight * gz.weight * gz.weight *
                       std::exp(-dm2 / (vf + vz + t)) / (std::numbers::pi * (vf + vz + t));

    // Mesh: uniform cells eps/res on [0, 2 eps] (support of delta_eps), then
    // growing by a fixed ratio up to a radius where all data are negligible.
    const double h0 = eps / q.radial_resolution;
    const double rmax = 2.0 * eps + 10.0 * std::sqrt(2.0 * (std::max(vf, vz) + t));
    const double growth = 1.0 + 2.0 / q.radial_resolution;
    std::vector<double> faces{0.0};
    while (faces.back() < 2.0 * eps - 1e-12 * eps) faces.push_back(faces.back() + h0);
    double hc = h0;
    while (faces.back() < rmax) {
        hc *= growth;
        faces.push_back(faces.back() + std::min(hc, 0.05 * rmax));
    }
    const int K = int(faces.size()) - 1;
    Eigen::VectorXd c(K), V(K), pot(K), u0(K), g(K);
    const mollifier::PairProfile prof = mollifier::pair_profile(mollifier::by_name(q.mollifier));
    for (int i = 0; i < K; ++i) {
        const double a = faces[std::size_t(i)], b = faces[std::size_t(i) + 1];
        c[i] = 0.5 * (a + b);
        V[i] = std::numbers::pi * (b * b - a * a);
        pot[i] = mollifier::delta_eps(prof, eps, c[i]);
        u0[i] = std::exp(-c[i] * c[i] / (4.0 * vz)) / (4.0 * std::numbers::pi * vz);
        g[i] = std::exp(-c[i] * c[i] / (4.0 * vf)) / (4.0 * std::numbers::pi * vf);
    }
    pot /= pot.dot(V); // unit discrete mass, as on the simulator grid
    // -div grad with zero flux at rmax; A = V^{-1/2}(-K + beta V pot)V^{-1/2}.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K, K);
    for (int i = 0; i + 1 < K; ++i) {
        const double w = 2.0 * std::numbers::pi * faces[std::size_t(i) + 1] / (c[i + 1] - c[i]);
        A(i, i) -= w;
        A(i + 1, i + 1) -= w;
        A(i, i + 1) += w;
        A(i + 1, i) += w;
    }
    const Eigen::VectorXd s = V.cwiseSqrt();
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) A(i, j) /= s[i] * s[j];
    A.diagonal() += q.beta_eps * pot;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success) throw NumericalError("radial oracle: eigendecomposition failed");
    const Eigen::VectorXd w0 = s.cwiseProduct(u0), gw = s.cwiseProduct(g);
    const Eigen::VectorXd lam = es.eigenvalues();
    const Eigen::VectorXd p0 = es.eigenvectors().transpose() * w0, pg = es.eigenvectors().transpose() * gw;
    double rel = 0.0;
    for (int k = 0; k < K; ++k) rel += pg[k] * std::exp(lam[k] * t) * p0[k];
    return com * rel;
}

} // namespace detail

inline double two_particle_oracle(const OracleRequest& q) {
    if (!(q.t >= 0.0)) throw DomainError("oracle: t must be nonnegative");
    gausscalc::validate(q.f);
    gausscalc::validate(q.z_ic);
    mollifier::CouplingSchedule{0.0, q.epsilon}.validate();
    return q.method == OracleMethod::torus ? detail::oracle_torus(q) : detail::oracle_radial(q);
}

} // namespace critshe::shesim
