#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mage/experiment.hpp"

using namespace mage;
namespace fs = std::filesystem;

namespace {

json minimal_stability_config() {
    json j;
    j["experiment"] = "stability";
    j["grid"] = {{"n", 1}, {"R", 16}};
    j["p"] = 2.0;
    j["perturbation_levels"] = {0.2, 0.1, 0.05, 0.025};
    j["seeds"] = {1};
    j["density_family"] = {{"name", "smooth"}, {"floor", 0.6}, {"amplitude", 0.8}};
    j["perturbation"] = {{"types", {"additive"}}};
    return j;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    json j = minimal_stability_config();
    j.erase("p");
    bool caught = false;
    try {
        parse_experiment_config(j);
    } catch (const Error& e) {
        caught = std::string(e.code()) == errc::config_invalid &&
                 std::string(e.what()).find("p") != std::string::npos;
    }
    CHECK(caught);

    json j2 = minimal_stability_config();
    j2["perturbation_levels"] = {0.1, 0.2, 0.3, 0.4};  // not decreasing
    bool caught2 = false;
    try {
        parse_experiment_config(j2);
    } catch (const Error& e) {
        caught2 = std::string(e.what()).find("perturbation_levels") != std::string::npos;
    }
    CHECK(caught2);

    json j3 = minimal_stability_config();
    j3["perturbation_levels"] = {0.2, 0.1, 0.05};  // too few for fits
    bool caught3 = false;
    try {
        parse_experiment_config(j3);
    } catch (const Error& e) {
        caught3 = std::string(e.code()) == errc::config_invalid;
    }
    CHECK(caught3);
}

TEST_CASE("density families have the advertised structure") {
    const GridSpec g = make_grid(1, 32);
    const MetricField m = MetricField::flat(g);

    DensityFamily smooth;
    smooth.name = "smooth";
    smooth.floor = 0.5;
    smooth.amplitude = 1.0;
    const ScalarField fs = make_density(smooth, g, m, 2.0, 7);
    CHECK(fs.min() >= 0.5 - 1e-12);
    CHECK(fs.max() <= 1.5 + 1e-12);

    DensityFamily spike;
    spike.name = "spike";
    spike.sigma = 0.1;
    spike.norm_target = 2.0;
    const ScalarField fp = make_density(spike, g, m, 2.0, 7);
    CHECK(lp_norm(fp, 2.0, m) == Catch::Approx(2.0).epsilon(1e-10));
    CHECK(fp.min() >= 0.0);

    DensityFamily plateau;
    plateau.name = "plateau_zero";
    const ScalarField fz = make_density(plateau, g, m, 2.0, 7);
    CHECK(fz.min() == 0.0);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < fz.size(); ++i) zeros += fz[i] == 0.0;
    CHECK(zeros > fz.size() / 8);  // vanishes on a band, not just a point
    CHECK(integral(fz, m) > 0.0);
}

TEST_CASE("stability sweep produces rows, fits and verdicts") {
    ExperimentConfig cfg = parse_experiment_config(minimal_stability_config());
    const ExperimentReport report = stability_sweep(cfg);
    // 1 control + levels x {exp,norm} rows for the single additive type
    CHECK(report.rows.size() == 1 + cfg.perturbation_levels.size() * 2);
    CHECK(report.fits.size() == 2);
    bool found_bound = false, found_slope = false;
    for (const auto& v : report.verdicts) {
        found_bound = found_bound || v.name.find("BOUND") != std::string::npos;
        found_slope = found_slope || v.name.find("SLOPE") != std::string::npos;
    }
    CHECK(found_bound);
    CHECK(found_slope);
    // smooth n=1 sweeps sit in the linear-response regime
    for (const auto& f : report.fits) CHECK(f.fit.slope >= 0.9);
}

TEST_CASE("report files are emitted and byte-identical across reruns") {
    ExperimentConfig cfg = parse_experiment_config(minimal_stability_config());
    const fs::path dir1 = fs::temp_directory_path() / "mage_test_run1";
    const fs::path dir2 = fs::temp_directory_path() / "mage_test_run2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    emit_report(stability_sweep(cfg), dir1.string());
    emit_report(stability_sweep(cfg), dir2.string());
    for (const char* name : {"report.json", "rows.csv", "plot.gp"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(dir1 / name));
        CHECK(slurp((dir1 / name).string()) == slurp((dir2 / name).string()));
    }
    // csv header is the documented schema
    std::ifstream is(dir1 / "rows.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "experiment,seed,level,lp_diff,sup_diff,c_diff,fit_slope,verdict");
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("verdict thresholds are embedded in the report") {
    ExperimentConfig cfg = parse_experiment_config(minimal_stability_config());
    const ExperimentReport report = stability_sweep(cfg);
    const fs::path dir = fs::temp_directory_path() / "mage_test_run3";
    fs::remove_all(dir);
    emit_report(report, dir.string());
    json j;
    std::ifstream is(dir / "report.json");
    is >> j;
    REQUIRE(j.contains("verdicts"));
    for (const auto& v : j["verdicts"]) {
        CHECK(v.contains("threshold"));
        CHECK(v.contains("relation"));
    }
    CHECK(j["provenance"]["p"] == 2.0);
    fs::remove_all(dir);
}

TEST_CASE("flat cf control realizes the mass-ratio slope") {
    json j = minimal_stability_config();
    j["experiment"] = "cf_stability";
    j["perturbation"] = {{"types", {"multiplicative"}}, {"bias_negative_mass", true}};
    j["grid"] = {{"n", 1}, {"R", 16}};
    ExperimentConfig cfg = parse_experiment_config(j);
    const ExperimentReport report = cf_stability_sweep(cfg);
    bool slope_found = false;
    for (const auto& v : report.verdicts) {
        if (v.name.find("SLOPE") != std::string::npos) {
            slope_found = true;
            CHECK(v.threshold == 1.0);  // flat control demands slope >= 1
            CHECK(v.pass);
        }
    }
    CHECK(slope_found);
    CHECK(report.all_pass());
}

TEST_CASE("MAGE_SEED environment override wins over the config") {
    json j = minimal_stability_config();
    const fs::path cfg_path = fs::temp_directory_path() / "mage_seed_cfg.json";
    std::ofstream(cfg_path) << j.dump();
    setenv("MAGE_SEED", "42", 1);
    const ExperimentConfig cfg = load_experiment_config(cfg_path.string());
    unsetenv("MAGE_SEED");
    REQUIRE(cfg.seeds.size() == 1);
    CHECK(cfg.seeds[0] == 42);
    fs::remove(cfg_path);
}
