#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <sstream>

#include "helpers.hpp"
#include "mage/field.hpp"
#include "mage/grid.hpp"
#include "mage/metric.hpp"

using namespace mage;

namespace {
bool throws_code(const std::function<void()>& fn, const char* code) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}
}  // namespace

TEST_CASE("make_grid basics") {
    CHECK(make_grid(1, 64).size() == 4096);
    CHECK(make_grid(2, 16).size() == 65536);
    CHECK(make_grid(1, 64).spacing() == Catch::Approx(1.0 / 64));
    CHECK(throws_code([] { make_grid(3, 16); }, errc::dimension_unsupported));
    CHECK(throws_code([] { make_grid(1, 15); }, errc::resolution_invalid));
    CHECK(throws_code([] { make_grid(1, 6); }, errc::resolution_invalid));
    CHECK(throws_code([] { make_grid(2, 256, 1 << 20); }, errc::resolution_invalid));
}

TEST_CASE("grid coordinates and packing") {
    const GridSpec g = make_grid(2, 16);
    for (std::size_t flat : {std::size_t(0), std::size_t(12345), g.size() - 1}) {
        CHECK(g.pack(g.unpack(flat)) == flat);
    }
    const auto j = g.unpack(1);
    CHECK(g.coordinate(j, 3) == Catch::Approx(1.0 / 16));
}

TEST_CASE("field arithmetic requires identical grids") {
    const GridSpec a = make_grid(1, 16), b = make_grid(1, 32);
    ScalarField fa(a, 1.0), fb(b, 1.0);
    CHECK(throws_code([&] { fa += fb; }, errc::grid_mismatch));
}

TEST_CASE("field binary format round-trips with the documented header") {
    const GridSpec g = make_grid(1, 16);
    const ScalarField f = make_field(g, [](const std::array<double, 4>& x) {
        return std::sin(test_helpers::two_pi * x[0]) + 0.5 * x[1];
    });
    std::stringstream ss;
    write_field(f, ss);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 16 + g.size() * 8);
    CHECK(std::memcmp(bytes.data(), "MAGE", 4) == 0);
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);   // version
    CHECK(static_cast<unsigned char>(bytes[8]) == 1);   // n
    CHECK(static_cast<unsigned char>(bytes[12]) == 16); // R
    const ScalarField back = read_field(ss);
    CHECK(sup_distance(f, back) == 0.0);
}

TEST_CASE("flat metric is the identity with unit determinant") {
    const GridSpec g = make_grid(1, 16);
    const MetricField m = MetricField::flat(g);
    for (std::size_t i = 0; i < g.size(); i += 7) {
        CHECK(m.entries().a11(i) == 1.0);
        CHECK(m.det_omega()[i] == 1.0);
    }
}

TEST_CASE("conformal metric has det e^{2 psi} for n = 2") {
    const GridSpec g = make_grid(2, 16);
    MetricDescriptor d;
    d.family = MetricFamily::conformal_hermitian;
    d.psi_terms = {TrigTerm{0.1, {1, 0, 0, 0}, 0.0}};
    const MetricField m = make_metric(g, d);
    // independent pointwise check: det(e^psi I_2) = e^{2 psi}
    for (std::size_t i = 0; i < g.size(); i += 97) {
        const auto j = g.unpack(i);
        const double psi = 0.1 * std::cos(test_helpers::two_pi * g.coordinate(j, 0));
        CHECK(m.det_omega()[i] == Catch::Approx(std::exp(2.0 * psi)).epsilon(1e-12));
    }
}

TEST_CASE("constant conformal factors stay valid however small") {
    const GridSpec g = make_grid(2, 16);
    MetricDescriptor d;
    d.family = MetricFamily::conformal_hermitian;
    d.psi_constant = -20.0;
    const MetricField m = make_metric(g, d);
    CHECK(m.det_omega()[0] == Catch::Approx(std::exp(-40.0)).epsilon(1e-10));
}

TEST_CASE("conditioning below the relative floor is rejected") {
    const GridSpec g = make_grid(2, 16);
    MetricDescriptor d;
    d.family = MetricFamily::conformal_hermitian;
    d.psi_terms = {TrigTerm{8.0, {1, 0, 0, 0}, 0.0}};  // oscillation 16 > log(1e6)
    CHECK(throws_code([&] { make_metric(g, d); }, errc::metric_not_positive));
}

TEST_CASE("curvature constant vanishes in the Kahler regime") {
    const GridSpec g1 = make_grid(1, 32);
    CHECK(curvature_constants(MetricField::flat(g1)).B == 0.0);

    const GridSpec g2 = make_grid(2, 16);
    CHECK(curvature_constants(MetricField::flat(g2)).B <= 1e-10);
}

TEST_CASE("curvature constant of the conformal family matches the closed form") {
    // For psi = a cos(2 pi x_1) on n = 2 the only nonvanishing term of
    // dd^c omega is (1/2) (e^psi)'' along x_1, giving
    //   B = max_x |(e^psi)''| / e^{2 psi}
    //     = max_t 4 pi^2 |a| |a sin^2 t - cos t| e^{-a cos t}.
    const GridSpec g = make_grid(2, 16);
    auto closed_form = [](double a) {
        double best = 0.0;
        for (int k = 0; k < 200000; ++k) {
            const double t = test_helpers::two_pi * k / 200000.0;
            const double v = 4.0 * test_helpers::two_pi * test_helpers::two_pi / 4.0 * std::fabs(a) *
                             std::fabs(a * std::sin(t) * std::sin(t) - std::cos(t)) *
                             std::exp(-a * std::cos(t));
            best = std::max(best, v);
        }
        return best;
    };
    MetricDescriptor d;
    d.family = MetricFamily::conformal_hermitian;
    d.psi_terms = {TrigTerm{0.1, {1, 0, 0, 0}, 0.0}};
    const double b1 = curvature_constants(make_metric(g, d)).B;
    CHECK(b1 == Catch::Approx(closed_form(0.1)).epsilon(2e-4));

    d.psi_terms[0].amplitude = 0.2;
    const double b2 = curvature_constants(make_metric(g, d)).B;
    CHECK(b2 == Catch::Approx(closed_form(0.2)).epsilon(2e-4));
    CHECK(b2 > b1);  // monotone in the amplitude for this family
}

TEST_CASE("curvature constant is deterministic and refinement-stable") {
    MetricDescriptor d;
    d.family = MetricFamily::conformal_hermitian;
    d.psi_terms = {TrigTerm{0.1, {1, 0, 0, 0}, 0.3}, TrigTerm{0.05, {0, 1, 1, 0}, 1.1}};
    const GridSpec g = make_grid(2, 16);
    const double b1 = curvature_constants(make_metric(g, d)).B;
    const double b2 = curvature_constants(make_metric(g, d)).B;
    CHECK(std::memcmp(&b1, &b2, sizeof(double)) == 0);  // bit-identical

    const GridSpec g_fine = make_grid(2, 32);
    const double b_fine = curvature_constants(make_metric(g_fine, d)).B;
    CHECK(std::fabs(b_fine - b1) <= 0.05 * std::fabs(b_fine));
}
