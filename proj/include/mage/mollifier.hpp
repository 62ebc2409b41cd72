#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mage/calculus.hpp"
#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/metric.hpp"

namespace mage {

// Demailly's smoothing kernel rho(t) = eta (1-t)^{-2} exp(1/(t-1)) on [0,1],
// zero beyond, with eta normalizing the induced radial density on C^n to unit
// total mass.  On the flat torus the regularization rho_t(u) is an exact
// periodic convolution, evaluated by direct support-truncated summation so
// that positivity and monotonicity of the weights hold exactly.
struct MollifierKernel {
    int n = 1;
    double eta = 0.0;
    int quad_resolution = 0;
    std::vector<double> radial_profile;  // rho at the quadrature nodes of [0,1]
    std::vector<double> t_grid;          // admissible smoothing scales

    // Unnormalized radial shape (1-s)^{-2} exp(1/(s-1)); eta-free.
    static double shape(double s) {
        if (s >= 1.0 - 1e-6) return 0.0;  // value there is below 1e-400000
        const double om = 1.0 - s;
        return std::exp(-1.0 / om) / (om * om);
    }
    double profile(double s) const { return eta * shape(s); }
};

namespace detail {

// integral of shape(r^2) over C^n in radial form; substitution s = r^2 gives
//   n=1: pi * int_0^1 shape(s) ds,   n=2: pi^2 * int_0^1 s shape(s) ds.
inline double kernel_mass_integral(int n, int intervals, std::vector<double>* table = nullptr) {
    static const double pi = 3.14159265358979323846;
    const double h = 1.0 / intervals;
    if (table) table->assign(static_cast<std::size_t>(intervals) + 1, 0.0);
    auto integrand = [&](double s) {
        const double g = MollifierKernel::shape(s);
        return (n == 1) ? pi * g : pi * pi * s * g;
    };
    // composite Simpson; the integrand is smooth and flat at s = 1
    double sum = integrand(0.0) + integrand(1.0);
    for (int k = 1; k < intervals; ++k) {
        const double s = k * h;
        sum += integrand(s) * ((k % 2 == 1) ? 4.0 : 2.0);
        if (table) (*table)[static_cast<std::size_t>(k)] = MollifierKernel::shape(s);
    }
    if (table) {
        (*table)[0] = MollifierKernel::shape(0.0);
        (*table)[static_cast<std::size_t>(intervals)] = 0.0;
    }
    return sum * h / 3.0;
}

}  // namespace detail

// Normalization constant eta with int_{C^n} rho(|z|^2) dV = 1; stable to
// 1e-8 under doubling of the quadrature resolution.
inline double kernel_eta(int n, int quad_resolution = 4096) {
    if (n != 1 && n != 2) fail(errc::dimension_unsupported, "kernel defined for n in {1,2}");
    if (quad_resolution < 16 || quad_resolution % 2 != 0)
        fail(errc::quadrature_not_converged, "quad_resolution must be even and >= 16");
    const double coarse = detail::kernel_mass_integral(n, quad_resolution / 2);
    const double fine = detail::kernel_mass_integral(n, quad_resolution);
    const double eta_fine = 1.0 / fine;
    if (std::fabs(1.0 / coarse - eta_fine) > 1e-8 * eta_fine)
        fail(errc::quadrature_not_converged,
             "eta quadrature not converged at resolution " + std::to_string(quad_resolution));
    return eta_fine;
}

inline MollifierKernel make_kernel(int n, const GridSpec& grid, int quad_resolution = 4096,
                                   int rungs = 17, double t_min = 0.0, double t_max = 0.25) {
    MollifierKernel k;
    k.n = n;
    k.quad_resolution = quad_resolution;
    k.eta = kernel_eta(n, quad_resolution);
    detail::kernel_mass_integral(n, quad_resolution, &k.radial_profile);
    for (double& v : k.radial_profile) v *= k.eta;
    k.t_grid = geometric_ladder(std::max(t_min, grid.spacing()), t_max, rungs);
    return k;
}

namespace detail {

struct ConvWeights {
    std::vector<std::array<int, 4>> offsets;
    std::vector<double> weights;  // normalized to unit sum
};

inline ConvWeights convolution_weights(const GridSpec& g, double t, const MollifierKernel& kernel) {
    const double h = g.spacing();
    ConvWeights cw;
    const int reach = std::min(g.resolution() / 2 - 1,
                               static_cast<int>(std::ceil(t / h)));
    const int dim = g.real_dim();
    std::array<int, 4> o{0, 0, 0, 0};
    double total = 0.0;
    std::function<void(int)> rec = [&](int axis) {
        if (axis == dim) {
            double d2 = 0.0;
            for (int a = 0; a < dim; ++a)
                d2 += double(o[static_cast<std::size_t>(a)]) * o[static_cast<std::size_t>(a)];
            const double s = d2 * h * h / (t * t);
            if (s >= 1.0) return;
            const double w = kernel.profile(s);
            if (w <= 0.0 && d2 > 0.0) return;
            cw.offsets.push_back(o);
            cw.weights.push_back(w);
            total += w;
            return;
        }
        for (int v = -reach; v <= reach; ++v) {
            o[static_cast<std::size_t>(axis)] = v;
            rec(axis + 1);
        }
        o[static_cast<std::size_t>(axis)] = 0;
    };
    rec(0);
    // Discrete normalization: the Riemann sum of the kernel is renormalized to
    // unit mass so constants are preserved exactly at every admissible scale.
    for (double& w : cw.weights) w /= total;
    return cw;
}

inline void accumulate_offset(const ScalarField& u, const std::array<int, 4>& o, double w,
                              ScalarField& out) {
    const GridSpec& g = u.grid();
    const int r = g.resolution();
    auto wrap_table = [&](int axis) {
        std::vector<int> t(static_cast<std::size_t>(r));
        for (int j = 0; j < r; ++j)
            t[static_cast<std::size_t>(j)] = ((j + o[static_cast<std::size_t>(axis)]) % r + r) % r;
        return t;
    };
    const double* v = u.data();
    double* dst = out.data();
    if (g.real_dim() == 2) {
        const auto w0 = wrap_table(0), w1 = wrap_table(1);
        for (int j0 = 0; j0 < r; ++j0) {
            const std::size_t base = static_cast<std::size_t>(j0) * r;
            const std::size_t nbase = static_cast<std::size_t>(w0[static_cast<std::size_t>(j0)]) * r;
            for (int j1 = 0; j1 < r; ++j1)
                dst[base + static_cast<std::size_t>(j1)] +=
                    w * v[nbase + static_cast<std::size_t>(w1[static_cast<std::size_t>(j1)])];
        }
    } else {
        const auto w0 = wrap_table(0), w1 = wrap_table(1), w2 = wrap_table(2), w3 = wrap_table(3);
        const std::size_t R = static_cast<std::size_t>(r);
        for (int j0 = 0; j0 < r; ++j0)
            for (int j1 = 0; j1 < r; ++j1)
                for (int j2 = 0; j2 < r; ++j2) {
                    const std::size_t base =
                        ((static_cast<std::size_t>(j0) * R + static_cast<std::size_t>(j1)) * R +
                         static_cast<std::size_t>(j2)) *
                        R;
                    const std::size_t nb =
                        ((static_cast<std::size_t>(w0[static_cast<std::size_t>(j0)]) * R +
                          static_cast<std::size_t>(w1[static_cast<std::size_t>(j1)])) *
                             R +
                         static_cast<std::size_t>(w2[static_cast<std::size_t>(j2)])) *
                        R;
                    for (int j3 = 0; j3 < r; ++j3)
                        dst[base + static_cast<std::size_t>(j3)] +=
                            w * v[nb + static_cast<std::size_t>(w3[static_cast<std::size_t>(j3)])];
                }
    }
}

}  // namespace detail

// rho_t(u): Demailly regularization at scale t (exact periodic convolution on
// the flat torus, exph_z(zeta) = z + zeta).
inline ScalarField mollify(const ScalarField& u, double t, const MollifierKernel& kernel) {
    const GridSpec& g = u.grid();
    const double h = g.spacing();
    if (!(t >= h - 1e-12) || t > 0.25 + 1e-12)
        fail(errc::scale_out_of_range,
             "smoothing scale " + std::to_string(t) + " outside [spacing, 1/4]");
    const auto cw = detail::convolution_weights(g, t, kernel);
    ScalarField out(g, 0.0);
    for (std::size_t k = 0; k < cw.offsets.size(); ++k)
        detail::accumulate_offset(u, cw.offsets[k], cw.weights[k], out);
    return out;
}

// Smallest K >= 0 (to 1e-4 granularity) such that t -> rho_t(u) + K t^2 is
// non-decreasing across consecutive rungs of the kernel's scale ladder, with
// 1e-10 slack.  Computed per function; the direct max-ratio over rungs and
// grid points realizes the bisection limit exactly.
inline double monotone_constant(const ScalarField& u, const MollifierKernel& kernel,
                                const MetricField& metric, double eps_psh = default_eps_psh) {
    require_omega_psh(omega_plus_ddc(u, metric), eps_psh);
    double k_needed = 0.0;
    ScalarField prev = mollify(u, kernel.t_grid.front(), kernel);
    for (std::size_t r = 1; r < kernel.t_grid.size(); ++r) {
        const double t1 = kernel.t_grid[r - 1], t2 = kernel.t_grid[r];
        ScalarField next = mollify(u, t2, kernel);
        const double denom = t2 * t2 - t1 * t1;
        for (std::size_t i = 0; i < u.size(); ++i)
            k_needed = std::max(k_needed, (prev[i] - next[i] - 1e-10) / denom);
        prev = std::move(next);
    }
    if (k_needed <= 0.0) return 0.0;
    return std::ceil(k_needed * 1e4) / 1e4;
}

struct KLParams {
    double delta = 0.0;
    double c = 0.0;
    double K = 0.0;
    double alpha = 0.0;  // informational: c is tied to delta^alpha in the sweeps

    void validate(double spacing) const {
        if (!(delta >= spacing - 1e-12) || delta > 0.25 + 1e-12)
            fail(errc::scale_out_of_range, "delta outside [spacing, 1/4]");
        if (!(c > 0.0)) fail(errc::scale_out_of_range, "KL penalty c must be positive");
        if (K < 0.0) fail(errc::scale_out_of_range, "monotonization constant must be >= 0");
    }
};

// Kiselman-Legendre transform
//   U_{delta,c} = inf_{t in (0,delta]} rho_t(u) + K(t^2-delta^2) + K(t-delta)
//                 - c log(t/delta),
// with the infimum taken over a geometric scale ladder (>= 16 rungs, t =
// delta included so the penalty vanishes on that rung).
inline ScalarField kiselman_legendre(const ScalarField& u, const KLParams& params,
                                     const MollifierKernel& kernel) {
    const GridSpec& g = u.grid();
    params.validate(g.spacing());
    const auto ladder = geometric_ladder(g.spacing(), params.delta, 16);
    ScalarField best(g, std::numeric_limits<double>::infinity());
    for (double t : ladder) {
        const ScalarField rt = mollify(u, t, kernel);
        const double penalty = params.K * (t * t - params.delta * params.delta) +
                               params.K * (t - params.delta) -
                               params.c * std::log(t / params.delta);
        for (std::size_t i = 0; i < u.size(); ++i)
            best[i] = std::min(best[i], rt[i] + penalty);
    }
    return best;
}

struct GkzReport {
    double c_prime = 0.0;            // smallest C' with tau(delta) <= C' delta^alpha
    double trend_slope = 0.0;        // fitted slope of log(tau/delta^alpha) vs log delta
    std::vector<double> deltas;
    std::vector<double> tau;
    bool pass = false;
};

// Lemma-style modulus propagation check: the hypothesis sup(rho_t u - u) <=
// C0 t^alpha is verified on the kernel ladder, then the conclusion tau(delta)
// <= C' delta^alpha is measured; PASS when tau/delta^alpha shows no growth
// trend toward small delta (fitted slope >= -0.05).
inline GkzReport gkz_modulus_test(const ScalarField& u, double alpha, double C0,
                                  const MollifierKernel& kernel,
                                  const std::vector<double>& delta_ladder) {
    if (!(alpha > 0.0) || alpha >= 1.0)
        fail(errc::scale_out_of_range, "alpha must lie in (0,1)");
    for (double t : kernel.t_grid) {
        const ScalarField rt = mollify(u, t, kernel);
        double sup = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) sup = std::max(sup, rt[i] - u[i]);
        if (sup > C0 * std::pow(t, alpha) + 1e-12)
            fail(errc::hypothesis_violated,
                 "sup(rho_t u - u) = " + std::to_string(sup) + " exceeds C0 t^alpha at t = " +
                     std::to_string(t));
    }
    GkzReport rep;
    rep.deltas = delta_ladder;
    rep.tau = modulus_ladder(u, delta_ladder);
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < rep.deltas.size(); ++i) {
        rep.c_prime = std::max(rep.c_prime, rep.tau[i] / std::pow(rep.deltas[i], alpha));
        if (rep.tau[i] > 0.0)
            samples.emplace_back(rep.deltas[i], rep.tau[i] / std::pow(rep.deltas[i], alpha));
    }
    if (samples.size() >= 3) {
        rep.trend_slope = fit_exponent(samples).slope;
        rep.pass = std::isfinite(rep.c_prime) && rep.trend_slope >= -0.05;
    } else {
        rep.trend_slope = 0.0;
        rep.pass = true;  // constant-like u: tau vanishes, nothing to propagate
    }
    return rep;
}

// Empirical Kiselman-Legendre curvature constant: smallest A making
// omega + dd^c U_{delta, c} >= -(A c + 2 K delta) omega hold (in the absolute
// eigenvalue sense, against the grid max metric eigenvalue) over the sampled
// (delta, alpha) pairs with c = delta^alpha.
inline double estimate_kl_curvature(const ScalarField& u, const MetricField& metric,
                                    const MollifierKernel& kernel, double K,
                                    const std::vector<double>& deltas,
                                    const std::vector<double>& alphas) {
    double a_emp = 0.0;
    const double scale = metric.max_eigenvalue();
    for (double delta : deltas) {
        for (double alpha : alphas) {
            KLParams params;
            params.delta = delta;
            params.alpha = alpha;
            params.c = std::pow(delta, alpha);
            params.K = K;
            const ScalarField U = kiselman_legendre(u, params, kernel);
            const auto a = omega_plus_ddc(U, metric);
            const double defect = cone_check(a).min_eigenvalue;
            const double need = (-defect / scale - 2.0 * K * delta) / params.c;
            a_emp = std::max(a_emp, need);
        }
    }
    return a_emp;
}

}  // namespace mage
