// mage: numerical laboratory for complex Monge-Ampere equations on flat
// complex tori.
//
// Subcommands:
//   solve             one exponential- or normalized-form solve
//   envelope          psh envelope of an obstacle
//   stability         ||u - v|| vs ||f - g||_p^{1/n} sweep
//   cf-stability      |c_f - c_g| vs ||f - g||_p^{1/n} sweep
//   hoelder           solution modulus exponents vs the p_n target
//   envelope-hoelder  envelope modulus exponents vs nominal alpha
//   audit             comparison / sub-supersolution / mass / GKZ audits
//
// All subcommands take --config <json> and --out <dir>; sweeps write
// report.json, rows.csv and plot.gp into the output directory and exit 0
// iff every verdict passes.  MAGE_SEED overrides the config seed list.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mage/mage.hpp"

namespace {

using mage::json;

int run_solve(const std::string& config_path, const std::string& out_dir) {
    std::ifstream is(config_path);
    if (!is) mage::fail(mage::errc::config_invalid, "config file not readable: " + config_path);
    json j;
    is >> j;
    const json* grid_j = mage::detail::find_field(j, "grid");
    if (!grid_j) mage::fail(mage::errc::config_invalid, "grid: missing required field");
    const int n = mage::detail::require_field<int>(*grid_j, "n", "grid.");
    const int r = mage::detail::require_field<int>(*grid_j, "R", "grid.");
    const mage::GridSpec grid = mage::make_grid(n, r);
    mage::MetricDescriptor md;
    if (const json* m = mage::detail::find_field(j, "metric")) md = mage::detail::parse_metric(*m);
    const mage::MetricField metric = mage::make_metric(grid, md);
    mage::DensityFamily family;
    if (const json* d = mage::detail::find_field(j, "density"))
        family = mage::detail::parse_density(*d);
    const double p = mage::detail::optional_field<double>(j, "p", 2.0, "");
    std::uint64_t seed = mage::detail::optional_field<std::uint64_t>(j, "seed", 1, "");
    if (const char* env_seed = std::getenv("MAGE_SEED"))
        seed = std::strtoull(env_seed, nullptr, 10);
    mage::SolverConfig solver;
    if (const json* s = mage::detail::find_field(j, "solver"))
        solver = mage::detail::parse_solver(*s);
    const std::string form =
        mage::detail::optional_field<std::string>(j, "form", "exponential", "");

    const mage::ScalarField f = mage::make_density(family, grid, metric, p, seed);
    mage::SolveResult result;
    if (form == "exponential") {
        result = mage::solve_exponential(f, metric, solver);
    } else if (form == "normalized") {
        result = mage::solve_normalized(f, metric, solver);
    } else {
        mage::fail(mage::errc::config_invalid, "form: must be exponential or normalized");
    }

    std::filesystem::create_directories(out_dir);
    mage::write_field(result.u, out_dir + "/u.field");
    mage::write_field(f, out_dir + "/f.field");
    json side;
    side["artifact"] = mage::artifact_version;
    side["form"] = form;
    side["c"] = result.c;
    side["residual_sup"] = result.residual_sup;
    side["iterations"] = result.iterations;
    side["converged"] = result.converged;
    side["history"] = result.history;
    side["warnings"] = result.warnings;
    std::ofstream os(out_dir + "/solve.json");
    if (!os) mage::fail(mage::errc::output_dir_unwritable, "cannot write " + out_dir);
    os << side.dump(2) << "\n";
    std::printf("%s solve: converged=%d residual=%.3e c=%.12g -> %s\n", form.c_str(),
                result.converged, result.residual_sup, result.c, out_dir.c_str());
    return result.converged ? 0 : 1;
}

int run_envelope(const std::string& config_path, const std::string& out_dir) {
    std::ifstream is(config_path);
    if (!is) mage::fail(mage::errc::config_invalid, "config file not readable: " + config_path);
    json j;
    is >> j;
    const json* grid_j = mage::detail::find_field(j, "grid");
    if (!grid_j) mage::fail(mage::errc::config_invalid, "grid: missing required field");
    const int n = mage::detail::require_field<int>(*grid_j, "n", "grid.");
    const int r = mage::detail::require_field<int>(*grid_j, "R", "grid.");
    const mage::GridSpec grid = mage::make_grid(n, r);
    mage::MetricDescriptor md;
    if (const json* m = mage::detail::find_field(j, "metric")) md = mage::detail::parse_metric(*m);
    const mage::MetricField metric = mage::make_metric(grid, md);
    mage::SolverConfig solver;
    if (const json* s = mage::detail::find_field(j, "solver"))
        solver = mage::detail::parse_solver(*s);
    auto schedule = mage::detail::optional_field<std::vector<double>>(
        j, "lambda_schedule", mage::default_lambda_schedule(), "");

    const json* obs = mage::detail::find_field(j, "obstacle");
    if (!obs) mage::fail(mage::errc::config_invalid, "obstacle: missing required field");
    const std::string type =
        mage::detail::optional_field<std::string>(*obs, "type", "synthesizer", "obstacle.");
    std::uint64_t seed = mage::detail::optional_field<std::uint64_t>(*obs, "seed", 1, "obstacle.");
    if (const char* env_seed = std::getenv("MAGE_SEED"))
        seed = std::strtoull(env_seed, nullptr, 10);
    mage::ScalarField f(grid);
    if (type == "synthesizer") {
        const double alpha =
            mage::detail::require_field<double>(*obs, "alpha", "obstacle.");
        f = mage::hoelder_synthesizer(alpha, seed, grid);
        f *= mage::detail::optional_field<double>(*obs, "scale", 1.0, "obstacle.");
    } else if (type == "double_well") {
        const double amp =
            mage::detail::optional_field<double>(*obs, "amplitude", 0.2, "obstacle.");
        f = mage::make_field(grid, [&](const std::array<double, 4>& x) {
            const double two_pi = 6.28318530717958647692;
            return amp * (std::cos(two_pi * x[0]) +
                          0.6 * std::cos(two_pi * x[std::size_t(grid.real_dim() > 1)] + 0.9));
        });
    } else {
        mage::fail(mage::errc::config_invalid, "obstacle.type: unknown type '" + type + "'");
    }

    const auto rep = mage::envelope_hoelder_report(f, metric, {}, schedule, solver);
    std::filesystem::create_directories(out_dir);
    mage::write_field(rep.env.P, out_dir + "/P.field");
    mage::write_field(f, out_dir + "/obstacle.field");
    json side;
    side["artifact"] = mage::artifact_version;
    side["lambda_final"] = rep.env.lambda_final;
    side["defect"] = rep.env.defect;
    side["offcontact_ma_sup"] = rep.env.offcontact_ma_sup;
    side["overshoot_removed"] = rep.env.overshoot;
    side["alpha_obstacle"] = rep.alpha_f;
    side["alpha_envelope"] = rep.alpha_p;
    side["complete"] = rep.env.complete;
    std::ofstream os(out_dir + "/envelope.json");
    if (!os) mage::fail(mage::errc::output_dir_unwritable, "cannot write " + out_dir);
    os << side.dump(2) << "\n";
    std::printf("envelope: lambda_final=%.0f defect=%.3e offcontact=%.3e -> %s\n",
                rep.env.lambda_final, rep.env.defect, rep.env.offcontact_ma_sup, out_dir.c_str());
    return rep.env.complete ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mage: Monge-Ampere equations on flat complex tori"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    bool deterministic = false;
    int threads = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_flag("--deterministic", deterministic, "force sequential row execution");
        cmd->add_option("--threads", threads, "worker threads for sweep rows");
        return cmd;
    };

    auto* solve_cmd = add_common(app.add_subcommand("solve", "solve one equation"));
    auto* env_cmd = add_common(app.add_subcommand("envelope", "psh envelope of an obstacle"));
    auto* st_cmd = add_common(app.add_subcommand("stability", "stability sweep"));
    auto* cf_cmd = add_common(app.add_subcommand("cf-stability", "MA constant stability sweep"));
    auto* ho_cmd = add_common(app.add_subcommand("hoelder", "solution Hoelder sweep"));
    auto* eh_cmd = add_common(app.add_subcommand("envelope-hoelder", "envelope Hoelder sweep"));
    auto* au_cmd = add_common(app.add_subcommand("audit", "comparison and mass audits"));

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve_cmd->parsed()) return run_solve(config_path, out_dir);
        if (env_cmd->parsed()) return run_envelope(config_path, out_dir);
        std::string expected;
        if (st_cmd->parsed()) expected = "stability";
        if (cf_cmd->parsed()) expected = "cf_stability";
        if (ho_cmd->parsed()) expected = "hoelder";
        if (eh_cmd->parsed()) expected = "envelope_hoelder";
        if (au_cmd->parsed()) expected = "audit_suite";
        mage::ExperimentConfig cfg = mage::load_experiment_config(config_path);
        if (cfg.experiment != expected)
            mage::fail(mage::errc::config_invalid,
                       "experiment: config says '" + cfg.experiment + "' but subcommand wants '" +
                           expected + "'");
        cfg.deterministic = deterministic || threads <= 1;
        cfg.threads = threads;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        const mage::ExperimentReport report = mage::run_experiment(cfg);
        mage::emit_report(report, cfg.output_dir);
        for (const auto& v : report.verdicts)
            std::printf("[%s] %s: value=%.6g threshold=%.6g (%s)\n", v.pass ? "PASS" : "FAIL",
                        v.name.c_str(), v.value, v.threshold, v.relation.c_str());
        std::printf("%s: %s -> %s\n", cfg.experiment.c_str(),
                    report.all_pass() ? "ALL PASS" : "FAILURES", cfg.output_dir.c_str());
        return report.all_pass() ? 0 : 1;
    } catch (const mage::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
