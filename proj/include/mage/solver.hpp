#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mage/calculus.hpp"
#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/metric.hpp"
#include "mage/spectral.hpp"

namespace mage {

struct SolverConfig {
    double tol_residual = 1e-10;  // sup norm of the (two-zone) residual
    int max_newton_iters = 50;
    double damping = 1.0;          // initial line-search factor
    int continuation_steps = 1;    // homotopy from f == mean to target f
    double psh_floor = default_eps_psh;
    int max_linear_iters = 400;
    double linear_rtol = 1e-10;
    bool warn_band_limit = true;

    static constexpr double f_floor = 1e-12;  // log/plain residual switch

    void validate() const {
        if (!(tol_residual > 0.0)) fail(errc::config_invalid, "tol_residual must be positive");
        if (max_newton_iters < 1) fail(errc::config_invalid, "max_newton_iters must be >= 1");
        if (!(damping > 0.0) || damping > 1.0)
            fail(errc::config_invalid, "damping must lie in (0, 1]");
        if (continuation_steps < 1) fail(errc::config_invalid, "continuation_steps must be >= 1");
    }
};

struct SolveResult {
    ScalarField u;
    double c = 1.0;  // MA constant; 1 in exponential form by convention
    double residual_sup = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  // residual sup per Newton iterate
    std::vector<std::string> warnings;
};

namespace detail {

// The solver treats all three equations through one residual:
//   log det(G + dd^c u) - log det G  =  a*u + gamma + s   pointwise,
// with (a, gamma, s) = (1, 0, log f) for the exponential form,
// (0, unknown, log f) for the normalized form (c = e^gamma), and
// (lambda, 0, -lambda f) for the envelope penalization stages.
// Where the target density e^{a u + gamma + s} falls below f_floor the
// residual switches to the plain form det-ratio minus target (log f is -inf
// on zeros of f; the plain residual is the meaningful one there).
struct LogMAProblem {
    const MetricField* metric = nullptr;
    double a = 1.0;
    std::vector<double> s;      // may contain -inf
    std::vector<double> u_ref;  // exponent is a*(u - u_ref) + gamma + s
    bool solve_constant = false;
};

struct SolverState {
    ScalarField u;
    double gamma = 0.0;
    HermitianField A;          // G + dd^c u
    std::vector<double> density;
    std::vector<double> target;
    std::vector<char> log_zone;
    std::vector<double> residual;
    double residual_sup = std::numeric_limits<double>::infinity();
    double residual_l2 = std::numeric_limits<double>::infinity();
    double min_eig = 0.0;
    bool valid = false;
};

inline SolverState evaluate_state(const LogMAProblem& prob, ScalarField u, double gamma,
                                  double psh_floor) {
    const MetricField& metric = *prob.metric;
    SolverState st;
    st.u = std::move(u);
    st.gamma = gamma;
    st.A = omega_plus_ddc(st.u, metric);
    const std::size_t N = st.u.size();
    st.density.resize(N);
    st.target.resize(N);
    st.log_zone.resize(N);
    st.residual.resize(N);
    st.min_eig = cone_check(st.A).min_eigenvalue;
    if (st.min_eig < -psh_floor) return st;  // outside the psh cone: reject
    const auto& det_g = metric.det_omega();
    double sup = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        st.density[i] = st.A.det(i) / det_g[i];
        const double rel = prob.u_ref.empty() ? st.u[i] : st.u[i] - prob.u_ref[i];
        const double expo = prob.a * rel + gamma + prob.s[i];
        st.target[i] = (expo < -746.0) ? 0.0 : std::exp(std::min(expo, 700.0));
        // Each point is measured in whichever of the log/plain forms is the
        // better conditioned: the log form is meaningless below the round-off
        // floor A^{-1} * (spectral noise) near degeneracy, the plain form is
        // meaningless for very large densities.  Near zeros of the target the
        // plain form always wins, recovering the f_floor switch.
        double r = st.density[i] - st.target[i];
        st.log_zone[i] = 0;
        if (st.target[i] >= SolverConfig::f_floor && st.density[i] > 0.0) {
            const double log_r = std::log(st.density[i]) - std::min(expo, 700.0);
            if (std::fabs(log_r) <= std::fabs(r)) {
                r = log_r;
                st.log_zone[i] = 1;
            }
        }
        if (!std::isfinite(r)) return st;
        st.residual[i] = r;
        sup = std::max(sup, std::fabs(r));
    }
    st.residual_sup = sup;
    double l2 = 0.0;
    for (double r : st.residual) l2 += r * r;
    st.residual_l2 = std::sqrt(l2);
    st.valid = true;
    return st;
}

// tr(adj(A) H) pointwise; for n=1 this is just H11.
inline double tr_adj(const HermitianField& a, const HessianField& h, std::size_t i) {
    if (a.n() == 1) return h.a11(i);
    return a.a22(i) * h.a11(i) + a.a11(i) * h.a22(i) -
           2.0 * (std::conj(a.a21(i)) * h.a21(i)).real();
}

// Linearized operator at a state: log zone rows give tr(A^{-1} H[w]) - a w -
// dgamma, plain zone rows give tr(adj A H[w])/det G - target (a w + dgamma).
// With the normalized form the system is augmented by the unknown gamma and
// the mean constraint on w.
class Jacobian {
public:
    Jacobian(const LogMAProblem& prob, const SolverState& st)
        : prob_(prob), st_(st), grid_(st.u.grid()) {}

    std::size_t dim() const { return grid_.size() + (prob_.solve_constant ? 1 : 0); }

    void apply(const std::vector<double>& x, std::vector<double>& out) const {
        const std::size_t N = grid_.size();
        ScalarField w(grid_);
        for (std::size_t i = 0; i < N; ++i) w[i] = x[i];
        const double dgamma = prob_.solve_constant ? x[N] : 0.0;
        const HessianField hw = ddc(w);
        const auto& det_g = prob_.metric->det_omega();
        out.assign(dim(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const double tadj = tr_adj(st_.A, hw, i);
            if (st_.log_zone[i]) {
                out[i] = tadj / st_.A.det(i) - prob_.a * w[i] - dgamma;
            } else {
                out[i] = tadj / det_g[i] - st_.target[i] * (prob_.a * w[i] + dgamma);
            }
        }
        if (prob_.solve_constant) {
            double m = 0.0;
            for (std::size_t i = 0; i < N; ++i) m += w[i];
            out[N] = m / static_cast<double>(N);
        }
    }

    // Spectral preconditioner: constant-coefficient operator built from the
    // grid means of (clamped) A^{-1} and of the zero-order coefficient,
    // inverted mode by mode; exact for the flat constant-coefficient case.
    void build_preconditioner() {
        const std::size_t N = grid_.size();
        const int n = grid_.complex_dim();
        const double scale = prob_.metric->max_eigenvalue();
        const double clamp = 1e-3 * scale;
        double m11 = 0.0, m22 = 0.0;
        complexd m21(0.0, 0.0);
        double zshift = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double a11 = st_.A.a11(i), a22 = st_.A.a22(i);
            complexd a21 = st_.A.a21(i);
            const double lift = std::max(0.0, clamp - st_.A.min_eigenvalue(i));
            a11 += lift;
            a22 += lift;
            if (n == 1) {
                m11 += 1.0 / a11;
            } else {
                const double det = a11 * a22 - std::norm(a21);
                m11 += a22 / det;
                m22 += a11 / det;
                m21 += -a21 / det;
            }
            zshift += st_.log_zone[i] ? prob_.a : st_.target[i] * prob_.a;
        }
        const double inv_n = 1.0 / static_cast<double>(N);
        m11 *= inv_n;
        m22 *= inv_n;
        m21 *= inv_n;
        zshift *= inv_n;
        if (!prob_.solve_constant) zshift = std::max(zshift, 1e-8);
        static const double pi = 3.14159265358979323846;
        symbol_.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            const auto bins = grid_.unpack(i);
            const complexd xi0 = complex_frequency(bins, 0, grid_.resolution());
            double q = m11 * std::norm(xi0);
            if (n == 2) {
                const complexd xi1 = complex_frequency(bins, 1, grid_.resolution());
                q += m22 * std::norm(xi1) + 2.0 * (m21 * xi0 * std::conj(xi1)).real();
            }
            // Nyquist-killed modes are annihilated by the Hessian; with no
            // zero-order term the operator is singular there, so the
            // preconditioner projects them out (symbol 0 marks the kernel).
            symbol_[i] = (q == 0.0 && i != 0 && zshift == 0.0)
                             ? 0.0
                             : -2.0 * pi * pi * q - zshift;
        }
    }

    void precondition(const std::vector<double>& r, std::vector<double>& z) const {
        const std::size_t N = grid_.size();
        std::vector<complexd> buf(N);
        for (std::size_t i = 0; i < N; ++i) buf[i] = complexd(r[i], 0.0);
        std::vector<complexd> hat(N);
        fft::Plans::instance().forward(grid_, buf.data(), hat.data());
        z.assign(dim(), 0.0);
        if (prob_.solve_constant) {
            // mode 0 pairs with the constant unknown: the flat system there is
            // -dgamma = r_0,  mean(w) = r_aug.
            const double r0_mean = hat[0].real() / static_cast<double>(N);
            z[N] = -r0_mean;
            hat[0] = complexd(r[N] * static_cast<double>(N), 0.0);
            for (std::size_t i = 1; i < N; ++i)
                hat[i] = (symbol_[i] == 0.0) ? complexd(0.0, 0.0) : hat[i] / symbol_[i];
        } else {
            for (std::size_t i = 0; i < N; ++i)
                hat[i] = (symbol_[i] == 0.0) ? complexd(0.0, 0.0) : hat[i] / symbol_[i];
        }
        fft::Plans::instance().inverse(grid_, hat.data(), buf.data());
        for (std::size_t i = 0; i < N; ++i) z[i] = buf[i].real();
    }

private:
    const LogMAProblem& prob_;
    const SolverState& st_;
    GridSpec grid_;
    std::vector<double> symbol_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Right-preconditioned BiCGStab.  The linearized MA operator is not
// self-adjoint for variable coefficients (non-divergence form), so plain CG
// is not reliable here; BiCGStab with the same spectral preconditioner is.
inline bool bicgstab(const Jacobian& jac, const std::vector<double>& rhs, std::vector<double>& x,
                     double rtol, int maxit) {
    const std::size_t dim = rhs.size();
    x.assign(dim, 0.0);
    std::vector<double> r = rhs;
    std::vector<double> rhat = r;
    std::vector<double> p(dim, 0.0), v(dim, 0.0), s(dim), t(dim), phat(dim), shat(dim);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    const double bnorm = std::sqrt(dot(rhs, rhs));
    if (bnorm == 0.0) return true;
    const double tol = rtol * bnorm;
    double best = bnorm;
    std::vector<double> x_best(dim, 0.0);
    int stagnant = 0;
    for (int it = 0; it < maxit; ++it) {
        const double rho_new = dot(rhat, r);
        if (std::fabs(rho_new) < 1e-300) break;
        if (it == 0) {
            p = r;
        } else {
            const double beta = (rho_new / rho) * (alpha / omega);
            for (std::size_t i = 0; i < dim; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        rho = rho_new;
        jac.precondition(p, phat);
        jac.apply(phat, v);
        const double rv = dot(rhat, v);
        if (std::fabs(rv) < 1e-300) break;
        alpha = rho / rv;
        for (std::size_t i = 0; i < dim; ++i) s[i] = r[i] - alpha * v[i];
        if (std::sqrt(dot(s, s)) <= tol) {
            for (std::size_t i = 0; i < dim; ++i) x[i] += alpha * phat[i];
            return true;
        }
        jac.precondition(s, shat);
        jac.apply(shat, t);
        const double tt = dot(t, t);
        if (tt < 1e-300) break;
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        const double rnorm = std::sqrt(dot(r, r));
        if (rnorm <= tol) return true;
        if (!(rnorm < 0.999 * best)) {
            if (++stagnant >= 25) break;  // unreachable residual components (Nyquist kernel)
        } else {
            stagnant = 0;
        }
        if (rnorm < best) {
            best = rnorm;
            x_best = x;
        }
        if (std::fabs(omega) < 1e-300) break;
    }
    if (std::sqrt(dot(r, r)) > best) x = x_best;  // divergence guard: keep the best iterate
    return best <= 1e-6 * bnorm;  // a partial solve is still a usable direction
}

inline SolveResult newton_solve(const LogMAProblem& prob, ScalarField init, double gamma_init,
                                const SolverConfig& cfg) {
    SolveResult out;
    SolverState st = evaluate_state(prob, std::move(init), gamma_init, cfg.psh_floor);
    if (!st.valid)
        fail(errc::not_omega_psh, "initial iterate is outside the omega-psh cone");
    out.history.push_back(st.residual_sup);
    const std::size_t N = st.u.size();

    for (int iter = 0; iter < cfg.max_newton_iters; ++iter) {
        if (st.residual_sup <= cfg.tol_residual) {
            out.converged = true;
            break;
        }
        Jacobian jac(prob, st);
        jac.build_preconditioner();
        std::vector<double> rhs(jac.dim());
        for (std::size_t i = 0; i < N; ++i) rhs[i] = -st.residual[i];
        if (prob.solve_constant) rhs[N] = -st.u.mean();
        std::vector<double> step;
        bicgstab(jac, rhs, step, cfg.linear_rtol, cfg.max_linear_iters);

        double alpha = cfg.damping;
        bool accepted = false;
        for (int ls = 0; ls < 45 && !accepted; ++ls) {
            ScalarField u_try = st.u;
            for (std::size_t i = 0; i < N; ++i) u_try[i] += alpha * step[i];
            const double g_try =
                st.gamma + (prob.solve_constant ? alpha * step[N] : 0.0);
            if (prob.solve_constant) u_try += -u_try.mean();
            SolverState st_try = evaluate_state(prob, std::move(u_try), g_try, cfg.psh_floor);
            // sup-norm descent, or (for stiff layered stages where the sup
            // point backtracks everything) l2 descent with a sup safeguard
            const bool sup_ok =
                st_try.residual_sup <= st.residual_sup * (1.0 - 1e-4 * alpha);
            const bool l2_ok =
                st_try.residual_l2 <= st.residual_l2 * (1.0 - 1e-4 * alpha) &&
                st_try.residual_sup <= 3.0 * st.residual_sup;
            if (st_try.valid && (sup_ok || l2_ok)) {
                st = std::move(st_try);
                accepted = true;
            } else {
                alpha *= 0.5;
            }
        }
        out.iterations = iter + 1;
        out.history.push_back(st.residual_sup);
        if (!accepted) break;  // stalled: return best iterate
    }
    if (st.residual_sup <= cfg.tol_residual) out.converged = true;
    out.u = std::move(st.u);
    out.c = std::exp(st.gamma);
    out.residual_sup = st.residual_sup;
    return out;
}

inline std::vector<double> log_density(const ScalarField& f) {
    std::vector<double> s(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        s[i] = f[i] > 0.0 ? std::log(f[i]) : -std::numeric_limits<double>::infinity();
    return s;
}

inline void validate_density(const ScalarField& f, const MetricField& metric) {
    if (f.grid() != metric.grid()) fail(errc::grid_mismatch, "density and metric grids differ");
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i] < -1e-12)
            fail(errc::density_invalid,
                 "density is negative (" + std::to_string(f[i]) + ") at flat index " +
                     std::to_string(i));
    if (!(integral(f, metric) > 0.0))
        fail(errc::density_invalid, "density has non-positive total mass");
}

inline ScalarField clip_nonnegative(const ScalarField& f) {
    ScalarField out = f;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], 0.0);
    return out;
}

}  // namespace detail

// Solves (omega + dd^c u)^n = e^u f omega^n.  The sign convention is fixed by
// the equation itself: constant f = e^w forces u = -w.
inline SolveResult solve_exponential(const ScalarField& f, const MetricField& metric,
                                     const SolverConfig& cfg = {},
                                     const std::optional<ScalarField>& initial = std::nullopt) {
    cfg.validate();
    detail::validate_density(f, metric);
    SolveResult result;
    if (cfg.warn_band_limit) {
        const double tail = spectral_tail_fraction(f, f.grid().resolution() / 4);
        if (tail > 1e-10)
            result.warnings.push_back("density has spectral tail fraction " +
                                      std::to_string(tail) + " beyond R/4");
    }
    const ScalarField fpos = detail::clip_nonnegative(f);
    const double vol = integral(ScalarField(f.grid(), 1.0), metric);
    const double fmean = integral(fpos, metric) / vol;

    ScalarField u = initial ? *initial : ScalarField(f.grid(), -std::log(fmean));
    std::vector<double> history;
    std::vector<std::string> warnings = std::move(result.warnings);
    const int M = cfg.continuation_steps;
    SolveResult stage_result;
    for (int m = 1; m <= M; ++m) {
        const double t = static_cast<double>(m) / M;
        ScalarField fm(f.grid());
        for (std::size_t i = 0; i < fm.size(); ++i)
            fm[i] = (1.0 - t) * fmean + t * fpos[i];
        detail::LogMAProblem prob;
        prob.metric = &metric;
        prob.a = 1.0;
        prob.s = detail::log_density(fm);
        prob.solve_constant = false;
        stage_result = detail::newton_solve(prob, std::move(u), 0.0, cfg);
        u = stage_result.u;
        history.insert(history.end(), stage_result.history.begin(), stage_result.history.end());
        if (!stage_result.converged && m < M)
            warnings.push_back("continuation stage " + std::to_string(m) + " did not converge");
    }
    stage_result.u = std::move(u);
    stage_result.history = std::move(history);
    stage_result.warnings = std::move(warnings);
    stage_result.c = 1.0;
    return stage_result;
}

// Solves (omega + dd^c u)^n = c f omega^n with sup u = 0 and c > 0.  The
// Newton system is augmented by the unknown log c closed by the mean
// constraint; iterates are kept mean-free and the final potential is shifted
// to sup u = 0 (a free constant for this form).
inline SolveResult solve_normalized(const ScalarField& f, const MetricField& metric,
                                    const SolverConfig& cfg = {}) {
    cfg.validate();
    detail::validate_density(f, metric);
    SolveResult result;
    if (cfg.warn_band_limit) {
        const double tail = spectral_tail_fraction(f, f.grid().resolution() / 4);
        if (tail > 1e-10)
            result.warnings.push_back("density has spectral tail fraction " +
                                      std::to_string(tail) + " beyond R/4");
    }
    const ScalarField fpos = detail::clip_nonnegative(f);
    const double vol = integral(ScalarField(f.grid(), 1.0), metric);
    const double fmean = integral(fpos, metric) / vol;

    ScalarField u(f.grid(), 0.0);
    double gamma = -std::log(fmean);
    std::vector<double> history;
    std::vector<std::string> warnings = std::move(result.warnings);
    const int M = cfg.continuation_steps;
    SolveResult stage_result;
    for (int m = 1; m <= M; ++m) {
        const double t = static_cast<double>(m) / M;
        ScalarField fm(f.grid());
        for (std::size_t i = 0; i < fm.size(); ++i)
            fm[i] = (1.0 - t) * fmean + t * fpos[i];
        detail::LogMAProblem prob;
        prob.metric = &metric;
        prob.a = 0.0;
        prob.s = detail::log_density(fm);
        prob.solve_constant = true;
        stage_result = detail::newton_solve(prob, std::move(u), gamma, cfg);
        u = stage_result.u;
        gamma = std::log(stage_result.c);
        history.insert(history.end(), stage_result.history.begin(), stage_result.history.end());
        if (!stage_result.converged && m < M)
            warnings.push_back("continuation stage " + std::to_string(m) + " did not converge");
    }
    u += -u.max();  // sup u = 0; the equation is invariant under this shift
    stage_result.u = std::move(u);
    stage_result.history = std::move(history);
    stage_result.warnings = std::move(warnings);
    return stage_result;
}

// One penalization stage (omega + dd^c u)^n = e^{lambda (u - f)} omega^n,
// used by the envelope module.
inline SolveResult solve_penalized(const ScalarField& obstacle, double lambda,
                                   const MetricField& metric, const SolverConfig& cfg,
                                   const ScalarField& initial) {
    cfg.validate();
    detail::LogMAProblem prob;
    prob.metric = &metric;
    prob.a = lambda;
    prob.s.assign(obstacle.size(), 0.0);
    prob.u_ref.assign(obstacle.data(), obstacle.data() + obstacle.size());
    prob.solve_constant = false;
    return detail::newton_solve(prob, initial, 0.0, cfg);
}

}  // namespace mage
