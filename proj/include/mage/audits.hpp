#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mage/calculus.hpp"
#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/metric.hpp"
#include "mage/solver.hpp"

namespace mage {

// --- subsolution/supersolution principle -------------------------------------

struct SubSuperAudit {
    bool hypothesis_holds = false;   // omega_u^n >= e^{lambda(u-v)} omega_v^n - tol
    bool conclusion_holds = false;   // u <= v + tol
    std::size_t worst_hypothesis_point = 0;
    std::size_t worst_conclusion_point = 0;
    double hypothesis_margin = 0.0;  // most negative slack of the hypothesis
    double conclusion_margin = 0.0;  // max of u - v
    bool pass = false;               // hypothesis implies conclusion
};

inline SubSuperAudit check_sub_supersolution(const ScalarField& u, const ScalarField& v,
                                             double lambda, const MetricField& metric,
                                             double tol = 1e-8,
                                             double eps_psh = default_eps_psh) {
    if (!(lambda > 0.0)) fail(errc::config_invalid, "lambda must be positive");
    const ScalarField du = ma_density(u, metric, eps_psh);
    const ScalarField dv = ma_density(v, metric, eps_psh);
    SubSuperAudit audit;
    double worst_hyp = std::numeric_limits<double>::infinity();
    double worst_con = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double slack = du[i] - std::exp(lambda * (u[i] - v[i])) * dv[i];
        if (slack < worst_hyp) {
            worst_hyp = slack;
            audit.worst_hypothesis_point = i;
        }
        const double gap = u[i] - v[i];
        if (gap > worst_con) {
            worst_con = gap;
            audit.worst_conclusion_point = i;
        }
    }
    audit.hypothesis_margin = worst_hyp;
    audit.conclusion_margin = worst_con;
    audit.hypothesis_holds = worst_hyp >= -tol;
    audit.conclusion_holds = worst_con <= tol;
    audit.pass = !audit.hypothesis_holds || audit.conclusion_holds;
    return audit;
}

// The perturbation phi = (1-eps) u + eps rho - K eps + n log(1-eps) from the
// stability proof, with K = sup(-u), rho the normalized potential of
// h = |f-g| / ||f-g||_p + 1 and eps = e^{(sup u - ln c_h)/n} ||f-g||_p^{1/n}.
struct PerturbationConstruction {
    ScalarField phi;
    double eps = 0.0;
    double K = 0.0;
    double c_h = 0.0;
    bool rho_converged = false;
};

inline PerturbationConstruction build_perturbation_subsolution(
    const ScalarField& f, const ScalarField& g, const ScalarField& u, double p,
    const MetricField& metric, const SolverConfig& cfg = {}) {
    const double diff_norm = lp_norm(f - g, p, metric);
    if (!(diff_norm > 0.0)) fail(errc::density_invalid, "perturbation needs ||f-g||_p > 0");
    ScalarField h(f.grid());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::fabs(f[i] - g[i]) / diff_norm + 1.0;
    const SolveResult rho = solve_normalized(h, metric, cfg);
    const int n = f.grid().complex_dim();
    PerturbationConstruction out;
    out.c_h = rho.c;
    out.rho_converged = rho.converged;
    out.K = -u.min();
    out.eps = std::exp((u.max() - std::log(rho.c)) / n) * std::pow(diff_norm, 1.0 / n);
    if (out.eps >= 1.0)
        fail(errc::density_invalid,
             "perturbation eps = " + std::to_string(out.eps) + " is not below 1");
    ScalarField phi(f.grid());
    const double shift = -out.K * out.eps + n * std::log(1.0 - out.eps);
    for (std::size_t i = 0; i < phi.size(); ++i)
        phi[i] = (1.0 - out.eps) * u[i] + out.eps * rho.u[i] + shift;
    out.phi = std::move(phi);
    return out;
}

// --- comparison principles ----------------------------------------------------

struct ComparisonRow {
    double eps = 0.0;       // 0 for the Kahler form of the audit
    double s = 0.0;         // sublevel shift
    double lhs = 0.0;       // mass of omega_{(1-eps)v}^n (or omega_v^n) on the set
    double rhs = 0.0;       // mass of omega_u^n on the set
    std::size_t set_size = 0;
    bool vacuous = false;
    double c_required = 0.0;  // smallest C with lhs <= (1 + C s / eps^n) rhs
};

struct ComparisonAudit {
    std::vector<ComparisonRow> rows;
    double empirical_C = 0.0;
    bool kahler_form = true;  // B == 0 route
    bool pass = false;
};

// For B = 0 audits the Kahler comparison int_{u<v+s} omega_v^n <=
// int_{u<v+s} omega_u^n over the shifts in s_list.  For B > 0 audits the
// modified comparison on the sets {u < (1-eps)v + m_eps + s} with
// s = frac * eps^3/(16B) for each eps in eps_list and fraction in s_list,
// recording the smallest constant C making the (1 + C s/eps^n) factor work.
inline ComparisonAudit comparison_audits(const ScalarField& u, const ScalarField& v,
                                         const MetricField& metric,
                                         const CurvatureConstants& constants,
                                         const std::vector<double>& eps_list,
                                         const std::vector<double>& s_list,
                                         double eps_psh = default_eps_psh) {
    const ScalarField du = ma_density(u, metric, eps_psh);
    const double h2n = std::pow(u.grid().spacing(), u.grid().real_dim());
    const auto& det_g = metric.det_omega();
    ComparisonAudit audit;
    audit.kahler_form = constants.B <= 1e-10;
    const int n = u.grid().complex_dim();

    auto masked_mass = [&](const ScalarField& density, const std::vector<char>& mask) {
        double m = 0.0;
        for (std::size_t i = 0; i < density.size(); ++i)
            if (mask[i]) m += density[i] * det_g[i];
        return m * h2n;
    };

    if (audit.kahler_form) {
        const ScalarField dv = ma_density(v, metric, eps_psh);
        bool ok = true;
        for (double s : s_list) {
            ComparisonRow row;
            row.s = s;
            std::vector<char> mask(u.size());
            std::size_t count = 0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                mask[i] = u[i] < v[i] + s;
                count += mask[i];
            }
            row.set_size = count;
            row.vacuous = count == 0;
            if (!row.vacuous) {
                row.lhs = masked_mass(dv, mask);
                row.rhs = masked_mass(du, mask);
                if (row.lhs > row.rhs + 1e-10 * (1.0 + row.rhs)) ok = false;
            }
            audit.rows.push_back(row);
        }
        audit.pass = ok;
        return audit;
    }

    bool ok = true;
    for (double eps : eps_list) {
        if (!(eps > 0.0) || eps >= 1.0) fail(errc::config_invalid, "eps must lie in (0,1)");
        ScalarField v_eps(v.grid());
        for (std::size_t i = 0; i < v.size(); ++i) v_eps[i] = (1.0 - eps) * v[i];
        const ScalarField dve = ma_density(v_eps, metric, eps_psh);
        double m_eps = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < u.size(); ++i) m_eps = std::min(m_eps, u[i] - v_eps[i]);
        const double s_cap = eps * eps * eps / (16.0 * constants.B);
        for (double frac : s_list) {
            if (!(frac > 0.0) || frac >= 1.0)
                fail(errc::config_invalid, "s fractions must lie in (0,1)");
            ComparisonRow row;
            row.eps = eps;
            row.s = frac * s_cap;
            std::vector<char> mask(u.size());
            std::size_t count = 0;
            for (std::size_t i = 0; i < u.size(); ++i) {
                mask[i] = u[i] < v_eps[i] + m_eps + row.s;
                count += mask[i];
            }
            row.set_size = count;
            row.vacuous = count == 0;
            if (!row.vacuous) {
                row.lhs = masked_mass(dve, mask);
                row.rhs = masked_mass(du, mask);
                if (row.rhs <= 0.0) {
                    if (row.lhs > 1e-14) ok = false;
                } else if (row.lhs > row.rhs) {
                    row.c_required = (row.lhs / row.rhs - 1.0) * std::pow(eps, n) / row.s;
                }
                audit.empirical_C = std::max(audit.empirical_C, row.c_required);
            }
            audit.rows.push_back(row);
        }
    }
    audit.pass = ok && std::isfinite(audit.empirical_C);
    return audit;
}

// --- mass bounds ----------------------------------------------------------------

struct MassAuditRow {
    double mass = 0.0;       // int (c f) omega^n of the admissible density
    double lp = 0.0;         // ||c f||_p
    double l1n = 0.0;        // ||c f||_{1/n}
    double laplacian = 0.0;  // int omega_u ^ omega^{n-1}
};

// Records the admissible-density mass and Laplacian mass of one normalized
// solve; corpus-level floors live with the callers that aggregate the rows.
inline MassAuditRow mass_lower_bound_audit(const ScalarField& f, const SolveResult& solved,
                                           double p, const MetricField& metric,
                                           double eps_psh = default_eps_psh) {
    MassAuditRow row;
    ScalarField cf(f.grid());
    for (std::size_t i = 0; i < f.size(); ++i) cf[i] = solved.c * f[i];
    row.mass = integral(cf, metric);
    row.lp = lp_norm(cf, p, metric);
    row.l1n = lp_norm(cf, 1.0 / f.grid().complex_dim(), metric);
    row.laplacian = laplacian_mass(solved.u, metric, eps_psh);
    return row;
}

}  // namespace mage
