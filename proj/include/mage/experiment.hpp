#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mage/audits.hpp"
#include "mage/calculus.hpp"
#include "mage/envelope.hpp"
#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/metric.hpp"
#include "mage/mollifier.hpp"
#include "mage/rng.hpp"
#include "mage/solver.hpp"

namespace mage {

using json = nlohmann::ordered_json;

inline constexpr const char* artifact_version = "mage 0.1.0";

// --- configuration -------------------------------------------------------------

struct DensityFamily {
    std::string name = "smooth";  // constant|smooth|spike|plateau_zero|degenerate|suite
    double floor = 0.6;           // smooth: strictly positive floor (the c_0 of the sweeps)
    double amplitude = 0.8;       // smooth: oscillation on top of the floor
    int max_freq = 2;
    double sigma = 0.125;            // spike width
    double norm_target = 2.0;        // ||f||_p target for spike/plateau/degenerate
    double cutoff = 0.2;             // plateau/degenerate zero-set parameter
    int order = 4;                   // degenerate vanishing order
    std::vector<double> sigmas;      // hoelder suite: spike width ladder
};

struct PerturbationSpec {
    std::vector<std::string> types = {"additive", "multiplicative"};
    int max_freq = 2;
    bool zero_mean = false;
    bool bias_negative_mass = false;  // orient the bump mass against f
    bool near_zero_set = false;       // localize near the density's zero set
};

struct ExperimentConfig {
    std::string experiment;
    int n = 1;
    int R = 64;
    MetricDescriptor metric;
    DensityFamily density_family;
    PerturbationSpec perturbation;
    double p = 2.0;
    std::vector<double> perturbation_levels = {0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    SolverConfig solver;
    std::string output_dir = "out";
    // hoelder / envelope extras
    std::vector<double> alphas = {0.3, 0.5, 0.7};
    double synth_scale = 0.05;
    std::vector<double> lambda_schedule;
    int audit_instances = 20;
    int subsuper_pairs = 10;
    bool deterministic = true;
    int threads = 1;

    void validate() const {
        static const std::vector<std::string> known = {
            "stability", "cf_stability", "hoelder", "envelope_hoelder", "audit_suite"};
        if (std::find(known.begin(), known.end(), experiment) == known.end())
            fail(errc::config_invalid, "experiment: unknown experiment '" + experiment + "'");
        if (!(p > 1.0)) fail(errc::config_invalid, "p: must be > 1");
        const bool needs_fit = experiment == "stability" || experiment == "cf_stability";
        if (needs_fit) {
            if (perturbation_levels.size() < 4)
                fail(errc::config_invalid,
                     "perturbation_levels: exponent fits need at least 4 levels");
            for (std::size_t i = 1; i < perturbation_levels.size(); ++i)
                if (!(perturbation_levels[i] < perturbation_levels[i - 1]))
                    fail(errc::config_invalid,
                         "perturbation_levels: must be strictly decreasing");
            for (double lv : perturbation_levels)
                if (!(lv > 0.0)) fail(errc::config_invalid, "perturbation_levels: must be positive");
        }
        if (seeds.empty()) fail(errc::config_invalid, "seeds: at least one seed required");
        solver.validate();
    }
};

// --- JSON parsing ---------------------------------------------------------------

namespace detail {

inline const json* find_field(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <class T>
T require_field(const json& j, const std::string& key, const std::string& scope) {
    const json* f = find_field(j, key);
    if (!f) fail(errc::config_invalid, scope + key + ": missing required field");
    try {
        return f->get<T>();
    } catch (const std::exception&) {
        fail(errc::config_invalid, scope + key + ": wrong type");
    }
}

template <class T>
T optional_field(const json& j, const std::string& key, T fallback, const std::string& scope) {
    const json* f = find_field(j, key);
    if (!f) return fallback;
    try {
        return f->get<T>();
    } catch (const std::exception&) {
        fail(errc::config_invalid, scope + key + ": wrong type");
    }
}

inline MetricDescriptor parse_metric(const json& j) {
    MetricDescriptor d;
    const std::string family = optional_field<std::string>(j, "family", "flat_kahler", "metric.");
    if (family == "flat_kahler") {
        d.family = MetricFamily::flat_kahler;
    } else if (family == "conformal_hermitian") {
        d.family = MetricFamily::conformal_hermitian;
    } else {
        fail(errc::config_invalid, "metric.family: unknown family '" + family + "'");
    }
    d.psi_constant = optional_field<double>(j, "psi_constant", 0.0, "metric.");
    if (const json* terms = find_field(j, "psi_coefficients")) {
        for (const auto& t : *terms) {
            TrigTerm term;
            term.amplitude = require_field<double>(t, "amplitude", "metric.psi_coefficients.");
            const auto freq =
                require_field<std::vector<int>>(t, "freq", "metric.psi_coefficients.");
            for (std::size_t a = 0; a < freq.size() && a < 4; ++a) term.freq[a] = freq[a];
            term.phase = optional_field<double>(t, "phase", 0.0, "metric.psi_coefficients.");
            d.psi_terms.push_back(term);
        }
    }
    return d;
}

inline DensityFamily parse_density(const json& j) {
    DensityFamily f;
    f.name = optional_field<std::string>(j, "name", f.name, "density_family.");
    f.floor = optional_field<double>(j, "floor", f.floor, "density_family.");
    f.amplitude = optional_field<double>(j, "amplitude", f.amplitude, "density_family.");
    f.max_freq = optional_field<int>(j, "max_freq", f.max_freq, "density_family.");
    f.sigma = optional_field<double>(j, "sigma", f.sigma, "density_family.");
    f.norm_target = optional_field<double>(j, "norm_target", f.norm_target, "density_family.");
    f.cutoff = optional_field<double>(j, "cutoff", f.cutoff, "density_family.");
    f.order = optional_field<int>(j, "order", f.order, "density_family.");
    f.sigmas = optional_field<std::vector<double>>(j, "sigmas", f.sigmas, "density_family.");
    return f;
}

inline PerturbationSpec parse_perturbation(const json& j) {
    PerturbationSpec pt;
    pt.types = optional_field<std::vector<std::string>>(j, "types", pt.types, "perturbation.");
    pt.max_freq = optional_field<int>(j, "max_freq", pt.max_freq, "perturbation.");
    pt.zero_mean = optional_field<bool>(j, "zero_mean", pt.zero_mean, "perturbation.");
    pt.bias_negative_mass =
        optional_field<bool>(j, "bias_negative_mass", pt.bias_negative_mass, "perturbation.");
    pt.near_zero_set =
        optional_field<bool>(j, "near_zero_set", pt.near_zero_set, "perturbation.");
    return pt;
}

inline SolverConfig parse_solver(const json& j) {
    SolverConfig s;
    s.tol_residual = optional_field<double>(j, "tol_residual", s.tol_residual, "solver.");
    s.max_newton_iters = optional_field<int>(j, "max_newton_iters", s.max_newton_iters, "solver.");
    s.damping = optional_field<double>(j, "damping", s.damping, "solver.");
    s.continuation_steps =
        optional_field<int>(j, "continuation_steps", s.continuation_steps, "solver.");
    s.psh_floor = optional_field<double>(j, "psh_floor", s.psh_floor, "solver.");
    return s;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    cfg.experiment = detail::require_field<std::string>(j, "experiment", "");
    const json* grid = detail::find_field(j, "grid");
    if (!grid) fail(errc::config_invalid, "grid: missing required field");
    cfg.n = detail::require_field<int>(*grid, "n", "grid.");
    cfg.R = detail::require_field<int>(*grid, "R", "grid.");
    if (const json* m = detail::find_field(j, "metric")) cfg.metric = detail::parse_metric(*m);
    if (const json* d = detail::find_field(j, "density_family"))
        cfg.density_family = detail::parse_density(*d);
    if (const json* pt = detail::find_field(j, "perturbation"))
        cfg.perturbation = detail::parse_perturbation(*pt);
    if (cfg.experiment != "envelope_hoelder" && cfg.experiment != "audit_suite")
        cfg.p = detail::require_field<double>(j, "p", "");
    else
        cfg.p = detail::optional_field<double>(j, "p", cfg.p, "");
    cfg.perturbation_levels = detail::optional_field<std::vector<double>>(
        j, "perturbation_levels", cfg.perturbation_levels, "");
    cfg.seeds = detail::optional_field<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds, "");
    if (const json* s = detail::find_field(j, "solver")) cfg.solver = detail::parse_solver(*s);
    cfg.output_dir = detail::optional_field<std::string>(j, "output_dir", cfg.output_dir, "");
    cfg.alphas = detail::optional_field<std::vector<double>>(j, "alphas", cfg.alphas, "");
    cfg.synth_scale = detail::optional_field<double>(j, "synth_scale", cfg.synth_scale, "");
    cfg.lambda_schedule = detail::optional_field<std::vector<double>>(
        j, "lambda_schedule", cfg.lambda_schedule, "");
    cfg.audit_instances =
        detail::optional_field<int>(j, "audit_instances", cfg.audit_instances, "");
    cfg.subsuper_pairs =
        detail::optional_field<int>(j, "subsuper_pairs", cfg.subsuper_pairs, "");
    cfg.deterministic = detail::optional_field<bool>(j, "deterministic", cfg.deterministic, "");
    cfg.threads = detail::optional_field<int>(j, "threads", cfg.threads, "");
    cfg.validate();
    return cfg;
}

// --- density and perturbation generators -----------------------------------------

namespace detail {

inline ScalarField positive_trig(const GridSpec& grid, std::uint64_t seed, int max_freq,
                                 double floor, double amplitude) {
    Rng rng(seed * 0x9e3779b97f4a7c15ull + 17);
    static const double two_pi = 6.28318530717958647692;
    std::vector<TrigTerm> terms;
    for (int t = 0; t < 4; ++t) {
        TrigTerm term;
        term.amplitude = rng.uniform(0.3, 1.0);
        bool nonzero = false;
        for (int a = 0; a < grid.real_dim(); ++a) {
            term.freq[static_cast<std::size_t>(a)] = rng.uniform_int(-max_freq, max_freq);
            nonzero = nonzero || term.freq[static_cast<std::size_t>(a)] != 0;
        }
        if (!nonzero) term.freq[0] = 1 + t % max_freq;
        term.phase = rng.uniform(0.0, two_pi);
        terms.push_back(term);
    }
    ScalarField w = evaluate_trig(grid, terms);
    const double lo = w.min(), hi = w.max();
    ScalarField f(grid);
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = floor + amplitude * (w[i] - lo) / std::max(hi - lo, 1e-12);
    return f;
}

inline ScalarField torus_bump(const GridSpec& grid, const std::array<double, 4>& center,
                              double sigma) {
    static const double two_pi = 6.28318530717958647692;
    const double kappa = 1.0 / (2.0 * (two_pi / 2.0) * (two_pi / 2.0) * sigma * sigma);
    return make_field(grid, [&](const std::array<double, 4>& x) {
        double s = 0.0;
        for (int a = 0; a < grid.real_dim(); ++a)
            s += std::cos(two_pi * (x[static_cast<std::size_t>(a)] -
                                    center[static_cast<std::size_t>(a)])) -
                 1.0;
        return std::exp(kappa * s);
    });
}

}  // namespace detail

inline ScalarField make_density(const DensityFamily& family, const GridSpec& grid,
                                const MetricField& metric, double p, std::uint64_t seed,
                                double sigma_override = 0.0) {
    static const double two_pi = 6.28318530717958647692;
    Rng rng(seed * 0x2545f4914f6cdd1dull + 99);
    if (family.name == "constant") return ScalarField(grid, 1.0);
    if (family.name == "smooth")
        return detail::positive_trig(grid, seed, family.max_freq, family.floor, family.amplitude);
    if (family.name == "spike") {
        const double sigma = sigma_override > 0.0 ? sigma_override : family.sigma;
        std::array<double, 4> center{};
        for (int a = 0; a < grid.real_dim(); ++a)
            center[static_cast<std::size_t>(a)] = rng.uniform();
        ScalarField f = detail::torus_bump(grid, center, sigma);
        const double norm = lp_norm(f, p, metric);
        f *= family.norm_target / norm;
        return f;
    }
    if (family.name == "plateau_zero") {
        // C-infinity density vanishing identically on the band cos(2 pi x_1) <= cutoff
        ScalarField f = make_field(grid, [&](const std::array<double, 4>& x) {
            const double t = std::cos(two_pi * x[0]) - family.cutoff;
            return t > 0.0 ? std::exp(-0.5 / t) : 0.0;
        });
        f *= family.norm_target / lp_norm(f, p, metric);
        return f;
    }
    if (family.name == "degenerate") {
        // vanishing to finite order along the hypersurface cos(2 pi x_1) = cutoff
        ScalarField f = make_field(grid, [&](const std::array<double, 4>& x) {
            const double t = std::cos(two_pi * x[0]) - family.cutoff;
            return t > 0.0 ? std::pow(t, family.order) : 0.0;
        });
        f *= family.norm_target / lp_norm(f, p, metric);
        return f;
    }
    fail(errc::config_invalid, "density_family.name: unknown family '" + family.name + "'");
}

// Smooth perturbation bump with sup norm 1; optionally mean-adjusted,
// mass-oriented against f, or localized near the zero set of f.
inline ScalarField make_perturbation(const PerturbationSpec& spec, const ScalarField& f,
                                     const MetricField& metric, std::uint64_t seed) {
    const GridSpec& grid = f.grid();
    static const double two_pi = 6.28318530717958647692;
    Rng rng(seed * 0x9e3779b97f4a7c15ull + 0xda3e39cb94b95bdbull);
    ScalarField b(grid);
    if (spec.near_zero_set) {
        // nonnegative bump centered where f is smallest
        std::size_t argmin = 0;
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f[i] < f[argmin]) argmin = i;
        std::array<double, 4> center{};
        const auto mi = grid.unpack(argmin);
        for (int a = 0; a < grid.real_dim(); ++a)
            center[static_cast<std::size_t>(a)] = grid.coordinate(mi, a) + 0.05 * rng.uniform();
        b = detail::torus_bump(grid, center, 0.15);
    } else {
        std::vector<TrigTerm> terms;
        for (int t = 0; t < 3; ++t) {
            TrigTerm term;
            term.amplitude = rng.uniform(0.4, 1.0);
            bool nonzero = false;
            for (int a = 0; a < grid.real_dim(); ++a) {
                term.freq[static_cast<std::size_t>(a)] =
                    rng.uniform_int(-spec.max_freq, spec.max_freq);
                nonzero = nonzero || term.freq[static_cast<std::size_t>(a)] != 0;
            }
            if (!nonzero) term.freq[0] = 1;
            term.phase = rng.uniform(0.0, two_pi);
            terms.push_back(term);
        }
        b = evaluate_trig(grid, terms);
    }
    if (spec.zero_mean) b += -b.mean();
    b *= 1.0 / std::max(b.sup_abs(), 1e-12);
    if (spec.bias_negative_mass) {
        ScalarField fb(grid);
        for (std::size_t i = 0; i < f.size(); ++i) fb[i] = f[i] * b[i];
        if (integral(fb, metric) > 0.0) b *= -1.0;
    }
    return b;
}

// --- reports ---------------------------------------------------------------------

struct ReportRow {
    std::string experiment;
    std::uint64_t seed = 0;
    double level = 0.0;
    double lp_diff = 0.0;
    double sup_diff = 0.0;
    double c_diff = 0.0;
    double fit_slope = 0.0;
    std::string verdict;  // pass|fail|control|excluded
    bool converged = true;
    double g_lower = 0.0;  // ||g||_{1/n}, the degradation-study hook
};

struct NamedFit {
    std::string name;
    ExponentFit fit;
    std::size_t samples = 0;
};

struct Verdict {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation;  // ">=", "<=", "== within factor 2", ...
    bool pass = false;
};

struct ExperimentReport {
    std::string experiment;
    std::vector<ReportRow> rows;
    std::vector<NamedFit> fits;
    std::vector<Verdict> verdicts;
    json provenance;

    bool all_pass() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return true;
    }
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline json config_echo(const ExperimentConfig& cfg) {
    json j;
    j["artifact"] = artifact_version;
    j["experiment"] = cfg.experiment;
    j["grid"] = {{"n", cfg.n}, {"R", cfg.R}};
    j["metric"] = {{"family", cfg.metric.family == MetricFamily::flat_kahler
                                  ? "flat_kahler"
                                  : "conformal_hermitian"}};
    json terms = json::array();
    for (const auto& t : cfg.metric.psi_terms) {
        terms.push_back({{"amplitude", t.amplitude},
                         {"freq", {t.freq[0], t.freq[1], t.freq[2], t.freq[3]}},
                         {"phase", t.phase}});
    }
    j["metric"]["psi_coefficients"] = terms;
    j["metric"]["psi_constant"] = cfg.metric.psi_constant;
    j["density_family"] = {{"name", cfg.density_family.name},
                           {"floor", cfg.density_family.floor},
                           {"amplitude", cfg.density_family.amplitude},
                           {"max_freq", cfg.density_family.max_freq},
                           {"sigma", cfg.density_family.sigma},
                           {"norm_target", cfg.density_family.norm_target},
                           {"cutoff", cfg.density_family.cutoff},
                           {"order", cfg.density_family.order},
                           {"sigmas", cfg.density_family.sigmas}};
    j["perturbation"] = {{"types", cfg.perturbation.types},
                         {"max_freq", cfg.perturbation.max_freq},
                         {"zero_mean", cfg.perturbation.zero_mean},
                         {"bias_negative_mass", cfg.perturbation.bias_negative_mass},
                         {"near_zero_set", cfg.perturbation.near_zero_set}};
    j["p"] = cfg.p;
    j["perturbation_levels"] = cfg.perturbation_levels;
    j["seeds"] = cfg.seeds;
    j["solver"] = {{"tol_residual", cfg.solver.tol_residual},
                   {"max_newton_iters", cfg.solver.max_newton_iters},
                   {"damping", cfg.solver.damping},
                   {"continuation_steps", cfg.solver.continuation_steps},
                   {"psh_floor", cfg.solver.psh_floor}};
    j["alphas"] = cfg.alphas;
    j["synth_scale"] = cfg.synth_scale;
    j["lambda_schedule"] = cfg.lambda_schedule;
    j["audit_instances"] = cfg.audit_instances;
    j["subsuper_pairs"] = cfg.subsuper_pairs;
    j["deterministic"] = cfg.deterministic;
    j["threads"] = cfg.threads;
    return j;
}

// two-stage existence check: fit the constant on the large-level half, then
// validate out-of-sample on the small-level half within a factor of 2
inline void bound_and_slope_verdicts(ExperimentReport& report, const std::string& group,
                                     const std::vector<std::pair<double, double>>& samples,
                                     double exponent, double slope_threshold) {
    if (samples.size() < 4) {
        report.verdicts.push_back({group + ".BOUND", 0.0, 0.0, "insufficient rows", false});
        report.verdicts.push_back({group + ".SLOPE", 0.0, slope_threshold, ">=", false});
        return;
    }
    const std::size_t half = samples.size() / 2;
    double c_fit = 0.0;
    for (std::size_t i = 0; i < half; ++i)
        c_fit = std::max(c_fit, samples[i].second / std::pow(samples[i].first, exponent));
    bool bound_ok = std::isfinite(c_fit);
    double worst_ratio = 0.0;
    for (std::size_t i = half; i < samples.size(); ++i) {
        const double bound = 2.0 * c_fit * std::pow(samples[i].first, exponent);
        worst_ratio = std::max(
            worst_ratio, samples[i].second / std::max(c_fit * std::pow(samples[i].first, exponent),
                                                      1e-300));
        if (samples[i].second > bound) bound_ok = false;
    }
    report.verdicts.push_back(
        {group + ".BOUND", worst_ratio, 2.0, "out-of-sample C ratio <=", bound_ok});
    const auto fit = fit_exponent(samples);
    report.fits.push_back({group, fit, samples.size()});
    report.verdicts.push_back(
        {group + ".SLOPE", fit.slope, slope_threshold, ">=", fit.slope >= slope_threshold});
    for (auto& row : report.rows)
        if (row.experiment == group) row.fit_slope = fit.slope;
}

}  // namespace detail

// --- sweeps ----------------------------------------------------------------------

// Thm 1.1 / Thm 1.3 probe: perturb the density at each level, solve both
// equation forms, and check that ||u - v||_sup tracks ||f - g||_p^{1/n}.
inline ExperimentReport stability_sweep(const ExperimentConfig& cfg) {
    const GridSpec grid = make_grid(cfg.n, cfg.R);
    const MetricField metric = make_metric(grid, cfg.metric);
    ExperimentReport report;
    report.experiment = cfg.experiment;
    report.provenance = detail::config_echo(cfg);

    struct RowBucket {
        std::vector<ReportRow> rows;
    };
    std::vector<RowBucket> buckets(cfg.seeds.size());

    std::size_t failures = 0, attempts = 0;
    auto run_seed = [&](std::size_t si) {
        const std::uint64_t seed = cfg.seeds[si];
        auto& rows = buckets[si].rows;
        const ScalarField f = make_density(cfg.density_family, grid, metric, cfg.p, seed);
        const bool positive = f.min() > 0.0;
        const auto base_exp = solve_exponential(f, metric, cfg.solver);
        SolveResult base_norm;
        if (positive) base_norm = solve_normalized(f, metric, cfg.solver);

        {  // level-zero control rows (identical inputs)
            ReportRow row;
            row.seed = seed;
            row.level = 0.0;
            row.experiment = cfg.experiment + "_exp_control";
            row.verdict = "control";
            row.converged = base_exp.converged;
            rows.push_back(row);
        }
        const ScalarField bump = make_perturbation(cfg.perturbation, f, metric, seed);
        for (double level : cfg.perturbation_levels) {
            for (const std::string& type : cfg.perturbation.types) {
                ScalarField g(grid);
                if (type == "additive") {
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] = std::max(f[i] + level * bump[i], 0.0);
                } else if (type == "multiplicative") {
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] = f[i] * (1.0 + level * bump[i]);
                } else {
                    fail(errc::config_invalid, "perturbation.types: unknown type '" + type + "'");
                }
                const double lp_diff = lp_norm(f - g, cfg.p, metric);
                const double g_lower = lp_norm(g, 1.0 / cfg.n, metric);

                const auto pert_exp = solve_exponential(g, metric, cfg.solver);
                ReportRow row;
                row.experiment = cfg.experiment + "_exp_" + type;
                row.seed = seed;
                row.level = level;
                row.lp_diff = lp_diff;
                row.sup_diff = sup_distance(base_exp.u, pert_exp.u);
                row.g_lower = g_lower;
                row.converged = base_exp.converged && pert_exp.converged;
                row.verdict = row.converged ? "" : "excluded";
                rows.push_back(row);

                if (positive && g.min() > 0.0) {
                    const auto pert_norm = solve_normalized(g, metric, cfg.solver);
                    ReportRow nrow;
                    nrow.experiment = cfg.experiment + "_norm_" + type;
                    nrow.seed = seed;
                    nrow.level = level;
                    nrow.lp_diff = lp_diff;
                    nrow.sup_diff = sup_distance(base_norm.u, pert_norm.u);
                    nrow.c_diff = std::fabs(base_norm.c - pert_norm.c);
                    nrow.g_lower = g_lower;
                    nrow.converged = base_norm.converged && pert_norm.converged;
                    nrow.verdict = nrow.converged ? "" : "excluded";
                    rows.push_back(nrow);
                }
            }
        }
    };

    const int workers = cfg.deterministic ? 1 : std::max(1, cfg.threads);
    if (workers <= 1) {
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) run_seed(si);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mtx;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t si;
                    {
                        std::lock_guard<std::mutex> lock(mtx);
                        if (next >= cfg.seeds.size()) return;
                        si = next++;
                    }
                    run_seed(si);
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& bucket : buckets)
        for (auto& row : bucket.rows) {
            attempts += row.verdict != "control";
            failures += row.verdict == "excluded";
            report.rows.push_back(std::move(row));
        }
    if (attempts > 0 && failures * 2 > attempts)
        fail(errc::sweep_failed, "more than half of the sweep rows failed to converge");

    // group rows (form x perturbation type), largest levels first
    std::vector<std::string> groups;
    for (const char* form : {"exp", "norm"})
        for (const auto& type : cfg.perturbation.types)
            groups.push_back(cfg.experiment + "_" + std::string(form) + "_" + type);
    const double slope_threshold = 1.0 / cfg.n - 0.1;
    for (const auto& group : groups) {
        std::vector<std::pair<double, double>> samples;
        for (const auto& row : report.rows)
            if (row.experiment == group && row.verdict.empty() && row.lp_diff > 0.0 &&
                row.sup_diff > 0.0)
                samples.emplace_back(row.lp_diff, row.sup_diff);
        if (samples.empty()) continue;
        std::sort(samples.begin(), samples.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        detail::bound_and_slope_verdicts(report, group, samples, 1.0 / cfg.n, slope_threshold);
    }
    for (auto& row : report.rows)
        if (row.verdict.empty()) row.verdict = report.all_pass() ? "pass" : "fail";
    return report;
}

// Cor 1.2 probe: |c_f - c_g| against ||f - g||_p^{1/n} for the normalized
// equation.  On the flat Kahler control the constant is a mass ratio and the
// fitted slope must reach 1; in the Hermitian regime the 1/n bound is probed.
inline ExperimentReport cf_stability_sweep(const ExperimentConfig& cfg) {
    const GridSpec grid = make_grid(cfg.n, cfg.R);
    const MetricField metric = make_metric(grid, cfg.metric);
    ExperimentReport report;
    report.experiment = cfg.experiment;
    report.provenance = detail::config_echo(cfg);

    std::size_t failures = 0, attempts = 0;
    for (std::uint64_t seed : cfg.seeds) {
        const ScalarField f = make_density(cfg.density_family, grid, metric, cfg.p, seed);
        const auto base = solve_normalized(f, metric, cfg.solver);
        {
            ReportRow row;
            row.experiment = cfg.experiment + "_control";
            row.seed = seed;
            row.verdict = "control";
            row.converged = base.converged;
            report.rows.push_back(row);
        }
        const ScalarField bump = make_perturbation(cfg.perturbation, f, metric, seed);
        for (double level : cfg.perturbation_levels) {
            for (const std::string& type : cfg.perturbation.types) {
                ScalarField g(grid);
                if (type == "additive") {
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] = std::max(f[i] + level * bump[i], 0.0);
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] = f[i] * (1.0 + level * bump[i]);
                }
                const auto pert = solve_normalized(g, metric, cfg.solver);
                ReportRow row;
                row.experiment = cfg.experiment + "_" + type;
                row.seed = seed;
                row.level = level;
                row.lp_diff = lp_norm(f - g, cfg.p, metric);
                row.sup_diff = sup_distance(base.u, pert.u);
                row.c_diff = std::fabs(base.c - pert.c);
                row.g_lower = lp_norm(g, 1.0 / cfg.n, metric);
                row.converged = base.converged && pert.converged;
                row.verdict = row.converged ? "" : "excluded";
                ++attempts;
                failures += !row.converged;
                report.rows.push_back(row);
            }
        }
    }
    if (attempts > 0 && failures * 2 > attempts)
        fail(errc::sweep_failed, "more than half of the sweep rows failed to converge");

    const bool flat = cfg.metric.family == MetricFamily::flat_kahler;
    const double slope_threshold = flat ? 1.0 : 1.0 / cfg.n - 0.1;
    for (const auto& type : cfg.perturbation.types) {
        const std::string group = cfg.experiment + "_" + type;
        std::vector<std::pair<double, double>> samples;
        for (const auto& row : report.rows)
            if (row.experiment == group && row.verdict.empty() && row.lp_diff > 0.0 &&
                row.c_diff > 0.0)
                samples.emplace_back(row.lp_diff, row.c_diff);
        if (samples.empty()) continue;
        std::sort(samples.begin(), samples.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        detail::bound_and_slope_verdicts(report, group, samples, 1.0 / cfg.n, slope_threshold);
    }
    for (auto& row : report.rows)
        if (row.verdict.empty()) row.verdict = report.all_pass() ? "pass" : "fail";
    return report;
}

// Thm 4.1 probe: solve the normalized equation for each density-family
// member and check the measured solution modulus exponent against
// p_n = 2/(nq+1).
inline ExperimentReport hoelder_sweep(const ExperimentConfig& cfg) {
    const GridSpec grid = make_grid(cfg.n, cfg.R);
    const MetricField metric = make_metric(grid, cfg.metric);
    ExperimentReport report;
    report.experiment = cfg.experiment;
    report.provenance = detail::config_echo(cfg);
    const double q = cfg.p / (cfg.p - 1.0);
    const double p_n = 2.0 / (cfg.n * q + 1.0);
    const double threshold = p_n - 0.05;
    report.provenance["p_n_target"] = p_n;

    struct Member {
        std::string label;
        DensityFamily family;
        double sigma = 0.0;
    };
    std::vector<Member> members;
    if (cfg.density_family.name == "suite") {
        DensityFamily smooth = cfg.density_family;
        smooth.name = "smooth";
        members.push_back({"smooth", smooth, 0.0});
        DensityFamily spike = cfg.density_family;
        spike.name = "spike";
        const std::vector<double> sigmas =
            cfg.density_family.sigmas.empty() ? std::vector<double>{cfg.density_family.sigma}
                                              : cfg.density_family.sigmas;
        for (double s : sigmas)
            members.push_back({"spike_" + detail::fmt(s), spike, s});
        DensityFamily plateau = cfg.density_family;
        plateau.name = "plateau_zero";
        members.push_back({"plateau", plateau, 0.0});
    } else {
        members.push_back({cfg.density_family.name, cfg.density_family, 0.0});
    }

    const auto ladder = geometric_ladder(4.0 / cfg.R, 0.25, 8);
    bool all_rows_pass = true;
    for (std::size_t mi = 0; mi < members.size(); ++mi) {
        for (std::uint64_t seed : cfg.seeds) {
            const ScalarField f =
                make_density(members[mi].family, grid, metric, cfg.p, seed, members[mi].sigma);
            const auto solved = solve_normalized(f, metric, cfg.solver);
            ReportRow row;
            row.experiment = cfg.experiment + "_" + members[mi].label;
            row.seed = seed;
            row.level = members[mi].sigma > 0.0 ? members[mi].sigma : double(mi);
            row.lp_diff = lp_norm(f, cfg.p, metric);
            row.g_lower = lp_norm(f, 1.0 / cfg.n, metric);
            row.c_diff = p_n;
            row.converged = solved.converged;
            if (!solved.converged) {
                row.verdict = "excluded";
                all_rows_pass = false;
            } else {
                const auto tau = modulus_ladder(solved.u, ladder);
                std::vector<std::pair<double, double>> samples;
                for (std::size_t i = 0; i < ladder.size(); ++i)
                    if (tau[i] > 0.0) samples.emplace_back(ladder[i], tau[i]);
                row.fit_slope = samples.size() >= 3 ? fit_exponent(samples).slope : 1.0;
                row.sup_diff = tau.back();
                const bool pass = row.fit_slope >= threshold;
                row.verdict = pass ? "pass" : "fail";
                all_rows_pass = all_rows_pass && pass;
                report.verdicts.push_back({cfg.experiment + "." + members[mi].label + ".seed" +
                                               std::to_string(seed) + ".alpha",
                                           row.fit_slope, threshold, ">=", pass});
            }
            report.rows.push_back(row);
        }
    }
    report.verdicts.push_back(
        {cfg.experiment + ".all_members", all_rows_pass ? 1.0 : 0.0, 1.0, "==", all_rows_pass});
    return report;
}

// Envelope Hoelder probe: synthesized C^{0,alpha} obstacles; the measured
// envelope exponent must stay within 0.05 of the nominal alpha.
inline ExperimentReport envelope_hoelder_sweep(const ExperimentConfig& cfg) {
    const GridSpec grid = make_grid(cfg.n, cfg.R);
    const MetricField metric = make_metric(grid, cfg.metric);
    ExperimentReport report;
    report.experiment = cfg.experiment;
    report.provenance = detail::config_echo(cfg);
    const auto schedule =
        cfg.lambda_schedule.empty() ? default_lambda_schedule() : cfg.lambda_schedule;
    bool all_pass = true;
    for (double alpha : cfg.alphas) {
        for (std::uint64_t seed : cfg.seeds) {
            ScalarField f = hoelder_synthesizer(alpha, seed, grid);
            f *= cfg.synth_scale;
            const auto rep = envelope_hoelder_report(f, metric, {}, schedule, cfg.solver);
            ReportRow row;
            row.experiment = cfg.experiment;
            row.seed = seed;
            row.level = alpha;
            row.lp_diff = rep.alpha_f;
            row.sup_diff = rep.ratio_sup;
            row.c_diff = rep.env.defect;
            row.fit_slope = rep.alpha_p;
            const bool pass = rep.alpha_p >= alpha - 0.05;
            row.verdict = pass ? "pass" : "fail";
            all_pass = all_pass && pass;
            report.rows.push_back(row);
            report.verdicts.push_back({cfg.experiment + ".alpha" + detail::fmt(alpha) + ".seed" +
                                           std::to_string(seed),
                                       rep.alpha_p, alpha - 0.05, ">=", pass});
        }
    }
    report.verdicts.push_back(
        {cfg.experiment + ".all", all_pass ? 1.0 : 0.0, 1.0, "==", all_pass});
    return report;
}

// Corpus-level frozen floors for the mass audits (recorded from the standard
// corpus; see the audit suite).
inline constexpr double corpus_mass_floor = 0.25;
inline constexpr double corpus_laplacian_lo = 0.5;
inline constexpr double corpus_laplacian_hi = 4.5;

// Runs the section-2 principles across a generated corpus: the Kahler
// comparison inequality, the sub/supersolution implication with the
// stability-proof perturbation, the modified comparison principle on the
// conformal metric, the admissible-mass floor, and the GKZ modulus test on
// envelope fixtures.
inline ExperimentReport audit_suite(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.experiment = cfg.experiment;
    report.provenance = detail::config_echo(cfg);

    // --- Kahler comparison corpus (flat metric, Eq. (2) audit)
    {
        const GridSpec grid = make_grid(cfg.n, cfg.R);
        const MetricField metric = make_metric(grid, MetricDescriptor{});
        const CurvatureConstants constants{};
        std::size_t violations = 0;
        for (int i = 0; i < cfg.audit_instances; ++i) {
            const std::uint64_t seed = cfg.seeds[0] + 17 * static_cast<std::uint64_t>(i);
            DensityFamily fam;
            fam.name = "smooth";
            const ScalarField f = make_density(fam, grid, metric, cfg.p, seed);
            const ScalarField g2 = make_density(fam, grid, metric, cfg.p, seed + 5000);
            const auto u = solve_normalized(f, metric, cfg.solver);
            const auto v = solve_normalized(g2, metric, cfg.solver);
            ReportRow row;
            row.experiment = cfg.experiment + "_comparison";
            row.seed = seed;
            row.level = i;
            row.converged = u.converged && v.converged;
            if (!row.converged) {
                row.verdict = "excluded";
            } else {
                const auto audit = comparison_audits(u.u, v.u, metric, constants, {},
                                                     {-0.02, 0.0, 0.01, 0.05, 0.2});
                row.verdict = audit.pass ? "pass" : "fail";
                violations += !audit.pass;
            }
            report.rows.push_back(row);
        }
        report.verdicts.push_back({"audit.kahler_comparison_violations",
                                   static_cast<double>(violations), 0.0, "<=", violations == 0});
    }

    // --- sub/supersolution implication on constructed perturbation pairs
    {
        const GridSpec grid = make_grid(cfg.n, cfg.R);
        const MetricField metric = make_metric(grid, MetricDescriptor{});
        std::size_t violations = 0;
        for (int i = 0; i < cfg.subsuper_pairs; ++i) {
            const std::uint64_t seed = cfg.seeds[0] + 31 * static_cast<std::uint64_t>(i) + 7;
            DensityFamily fam;
            fam.name = "smooth";
            const ScalarField f = make_density(fam, grid, metric, cfg.p, seed);
            PerturbationSpec pspec;
            pspec.types = {"multiplicative"};
            const ScalarField bump = make_perturbation(pspec, f, metric, seed);
            ScalarField g2 = f;
            for (std::size_t k = 0; k < f.size(); ++k) g2[k] = f[k] * (1.0 + 0.05 * bump[k]);
            const auto u = solve_exponential(f, metric, cfg.solver);
            const auto v = solve_exponential(g2, metric, cfg.solver);
            ReportRow row;
            row.experiment = cfg.experiment + "_subsuper";
            row.seed = seed;
            row.level = i;
            row.converged = u.converged && v.converged;
            if (!row.converged) {
                row.verdict = "excluded";
            } else {
                const auto pc = build_perturbation_subsolution(f, g2, u.u, cfg.p, metric,
                                                               cfg.solver);
                const auto audit = check_sub_supersolution(pc.phi, v.u, 1.0, metric);
                const bool ok = audit.pass && audit.conclusion_holds;
                row.verdict = ok ? "pass" : "fail";
                row.sup_diff = audit.conclusion_margin;
                row.lp_diff = pc.eps;
                violations += !ok;
            }
            report.rows.push_back(row);
        }
        report.verdicts.push_back({"audit.subsupersolution_violations",
                                   static_cast<double>(violations), 0.0, "<=", violations == 0});
    }

    // --- modified comparison principle on the conformal Hermitian metric
    {
        const GridSpec grid = make_grid(2, 16);
        MetricDescriptor md;
        md.family = MetricFamily::conformal_hermitian;
        md.psi_terms = {TrigTerm{0.1, {1, 0, 0, 0}, 0.0}};
        const MetricField metric = make_metric(grid, md);
        const auto constants = curvature_constants(metric);
        double c_min = std::numeric_limits<double>::infinity(), c_max = 0.0;
        bool all_ok = true;
        for (int i = 0; i < 3; ++i) {
            const std::uint64_t seed = cfg.seeds[0] + 101 * static_cast<std::uint64_t>(i);
            DensityFamily fam;
            fam.name = "smooth";
            const ScalarField f = make_density(fam, grid, metric, cfg.p, seed);
            const ScalarField g2 = make_density(fam, grid, metric, cfg.p, seed + 5000);
            const auto u = solve_normalized(f, metric, cfg.solver);
            const auto v = solve_normalized(g2, metric, cfg.solver);
            ReportRow row;
            row.experiment = cfg.experiment + "_modified_comparison";
            row.seed = seed;
            row.level = i;
            row.converged = u.converged && v.converged;
            if (!row.converged) {
                row.verdict = "excluded";
                all_ok = false;
            } else {
                const auto audit = comparison_audits(u.u, v.u, metric, constants,
                                                     {0.1, 0.2, 0.4}, {0.5});
                row.verdict = audit.pass ? "pass" : "fail";
                row.c_diff = audit.empirical_C;
                c_min = std::min(c_min, audit.empirical_C);
                c_max = std::max(c_max, audit.empirical_C);
                all_ok = all_ok && audit.pass;
            }
            report.rows.push_back(row);
        }
        const bool stable = std::isfinite(c_max) && (c_max <= 10.0 * std::max(c_min, 0.1));
        report.verdicts.push_back(
            {"audit.modified_comparison_C_finite", c_max, 0.0, "finite", all_ok});
        report.verdicts.push_back(
            {"audit.modified_comparison_C_stable", c_max, 10.0 * std::max(c_min, 0.1), "<=",
             stable});
    }

    // --- admissible-density mass floor and Laplacian mass band
    {
        const GridSpec grid = make_grid(cfg.n, cfg.R);
        MetricDescriptor md;
        md.family = MetricFamily::conformal_hermitian;
        md.psi_terms = {TrigTerm{0.1, {1, 0, 0, 0}, 0.0}};
        if (cfg.n == 1) md.psi_terms[0].freq = {1, 0, 0, 0};
        const MetricField metric = make_metric(grid, md);
        double min_mass = std::numeric_limits<double>::infinity();
        double lap_lo = std::numeric_limits<double>::infinity(), lap_hi = 0.0;
        bool all_conv = true;
        for (int i = 0; i < 6; ++i) {
            const std::uint64_t seed = cfg.seeds[0] + 997 * static_cast<std::uint64_t>(i);
            DensityFamily fam;
            fam.name = (i % 3 == 2) ? "plateau_zero" : "smooth";
            const ScalarField f = make_density(fam, grid, metric, cfg.p, seed);
            SolverConfig scfg = cfg.solver;
            if (fam.name == "plateau_zero") scfg.continuation_steps = std::max(scfg.continuation_steps, 4);
            const auto solved = solve_normalized(f, metric, scfg);
            ReportRow row;
            row.experiment = cfg.experiment + "_mass";
            row.seed = seed;
            row.level = i;
            row.converged = solved.converged;
            if (!solved.converged) {
                row.verdict = "excluded";
                all_conv = false;
            } else {
                const auto mass = mass_lower_bound_audit(f, solved, cfg.p, metric);
                row.lp_diff = mass.lp;
                row.sup_diff = mass.mass;
                row.c_diff = mass.laplacian;
                row.g_lower = mass.l1n;
                min_mass = std::min(min_mass, mass.mass);
                lap_lo = std::min(lap_lo, mass.laplacian);
                lap_hi = std::max(lap_hi, mass.laplacian);
                row.verdict = "pass";
            }
            report.rows.push_back(row);
        }
        report.verdicts.push_back({"audit.mass_floor", min_mass, corpus_mass_floor, ">=",
                                   all_conv && min_mass >= corpus_mass_floor});
        report.verdicts.push_back({"audit.laplacian_band_low", lap_lo, corpus_laplacian_lo, ">=",
                                   lap_lo >= corpus_laplacian_lo});
        report.verdicts.push_back({"audit.laplacian_band_high", lap_hi, corpus_laplacian_hi, "<=",
                                   lap_hi <= corpus_laplacian_hi});
    }

    // --- GKZ modulus propagation on envelope fixtures
    {
        const GridSpec grid = make_grid(1, std::max(cfg.R, 128));
        const MetricField metric = make_metric(grid, MetricDescriptor{});
        const MollifierKernel kernel = make_kernel(1, grid, 4096, 10, 0.0, 0.125);
        bool all_ok = true;
        for (double alpha : {0.4, 0.6}) {
            ScalarField f = hoelder_synthesizer(alpha, cfg.seeds[0], grid);
            f *= cfg.synth_scale;
            const auto env = envelope(f, metric,
                                      cfg.lambda_schedule.empty() ? default_lambda_schedule()
                                                                  : cfg.lambda_schedule,
                                      cfg.solver);
            double c0 = 0.0;
            for (double t : kernel.t_grid) {
                const ScalarField rt = mollify(env.P, t, kernel);
                double sup = 0.0;
                for (std::size_t i = 0; i < rt.size(); ++i) sup = std::max(sup, rt[i] - env.P[i]);
                c0 = std::max(c0, sup / std::pow(t, alpha));
            }
            const auto ladder = geometric_ladder(4.0 / grid.resolution(), 0.25, 8);
            const auto rep = gkz_modulus_test(env.P, alpha, c0 * 1.0001, kernel, ladder);
            ReportRow row;
            row.experiment = cfg.experiment + "_gkz";
            row.seed = cfg.seeds[0];
            row.level = alpha;
            row.c_diff = rep.c_prime;
            row.fit_slope = rep.trend_slope;
            row.verdict = rep.pass ? "pass" : "fail";
            all_ok = all_ok && rep.pass;
            report.rows.push_back(row);
        }
        report.verdicts.push_back(
            {"audit.gkz_envelope_fixtures", all_ok ? 1.0 : 0.0, 1.0, "==", all_ok});
    }
    return report;
}

// --- emission ----------------------------------------------------------------------

inline void emit_report(const ExperimentReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        fail(errc::output_dir_unwritable, "cannot create output directory " + out_dir);

    {
        json j;
        j["artifact"] = artifact_version;
        j["experiment"] = report.experiment;
        j["provenance"] = report.provenance;
        json rows = json::array();
        for (const auto& r : report.rows) {
            rows.push_back({{"experiment", r.experiment},
                            {"seed", r.seed},
                            {"level", r.level},
                            {"lp_diff", r.lp_diff},
                            {"sup_diff", r.sup_diff},
                            {"c_diff", r.c_diff},
                            {"fit_slope", r.fit_slope},
                            {"verdict", r.verdict},
                            {"converged", r.converged},
                            {"g_lower_1n", r.g_lower}});
        }
        j["rows"] = rows;
        json fits = json::array();
        for (const auto& f : report.fits)
            fits.push_back({{"name", f.name},
                            {"slope", f.fit.slope},
                            {"intercept", f.fit.intercept},
                            {"r_squared", f.fit.r_squared},
                            {"samples", f.samples}});
        j["fits"] = fits;
        json verdicts = json::array();
        for (const auto& v : report.verdicts)
            verdicts.push_back({{"name", v.name},
                                {"value", v.value},
                                {"threshold", v.threshold},
                                {"relation", v.relation},
                                {"pass", v.pass}});
        j["verdicts"] = verdicts;
        j["all_pass"] = report.all_pass();
        std::ofstream os(out_dir + "/report.json");
        if (!os) fail(errc::output_dir_unwritable, "cannot write report.json in " + out_dir);
        os << j.dump(2) << "\n";
    }
    {
        std::ofstream os(out_dir + "/rows.csv");
        if (!os) fail(errc::output_dir_unwritable, "cannot write rows.csv in " + out_dir);
        os << "experiment,seed,level,lp_diff,sup_diff,c_diff,fit_slope,verdict\n";
        for (const auto& r : report.rows) {
            os << r.experiment << ',' << r.seed << ',' << detail::fmt(r.level) << ','
               << detail::fmt(r.lp_diff) << ',' << detail::fmt(r.sup_diff) << ','
               << detail::fmt(r.c_diff) << ',' << detail::fmt(r.fit_slope) << ',' << r.verdict
               << "\n";
        }
    }
    {
        std::ofstream os(out_dir + "/plot.gp");
        if (!os) fail(errc::output_dir_unwritable, "cannot write plot.gp in " + out_dir);
        os << "# gnuplot script: log-log charts from rows.csv\n"
              "set datafile separator ','\n"
              "set logscale xy\n"
              "set key outside\n"
              "set xlabel 'lp_diff'\n"
              "set ylabel 'sup_diff / c_diff'\n"
              "set term pngcairo size 900,600\n"
              "set output 'sweep.png'\n"
              "plot 'rows.csv' every ::1 using 4:5 with points title 'sup diff', \\\n"
              "     'rows.csv' every ::1 using 4:6 with points title 'c diff'\n";
    }
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment == "stability") return stability_sweep(cfg);
    if (cfg.experiment == "cf_stability") return cf_stability_sweep(cfg);
    if (cfg.experiment == "hoelder") return hoelder_sweep(cfg);
    if (cfg.experiment == "envelope_hoelder") return envelope_hoelder_sweep(cfg);
    if (cfg.experiment == "audit_suite") return audit_suite(cfg);
    fail(errc::config_invalid, "experiment: unknown experiment '" + cfg.experiment + "'");
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(errc::config_invalid, "config file not readable: " + path);
    json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        fail(errc::config_invalid, std::string("config does not parse: ") + e.what());
    }
    ExperimentConfig cfg = parse_experiment_config(j);
    if (const char* env_seed = std::getenv("MAGE_SEED")) {
        cfg.seeds = {static_cast<std::uint64_t>(std::strtoull(env_seed, nullptr, 10))};
    }
    return cfg;
}

// CLI entry: runs the config, writes the report; exit code 0 iff all
// verdicts pass.
inline int run(const std::string& config_path, const std::string& out_dir,
               bool deterministic = true, int threads = 1) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    cfg.deterministic = deterministic || cfg.deterministic;
    if (threads > 1) {
        cfg.threads = threads;
        cfg.deterministic = deterministic;
    }
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    const ExperimentReport report = run_experiment(cfg);
    emit_report(report, cfg.output_dir);
    return report.all_pass() ? 0 : 1;
}

}  // namespace mage
