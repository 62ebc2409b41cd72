#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "mage/spectral.hpp"

using namespace mage;
using test_helpers::two_pi;

TEST_CASE("ddc of a constant vanishes") {
    const GridSpec g = make_grid(1, 16);
    const auto h = ddc(ScalarField(g, 3.25));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::fabs(h.a11(i)) <= 1e-14);
}

TEST_CASE("ddc of cos(2 pi x_1) carries the dd^c = 2i d dbar factor") {
    // d^2/dz dzbar = (1/4) Laplacian, so the 1x1 matrix slot is
    // 2 * (1/4) * (-4 pi^2) cos = -2 pi^2 cos(2 pi x_1).
    const GridSpec g = make_grid(1, 64);
    const ScalarField u =
        make_field(g, [](const std::array<double, 4>& x) { return std::cos(two_pi * x[0]); });
    const auto h = ddc(u);
    for (std::size_t i = 0; i < g.size(); i += 11) {
        const auto j = g.unpack(i);
        const double expected =
            -2.0 * (two_pi / 2.0) * (two_pi / 2.0) * std::cos(two_pi * g.coordinate(j, 0));
        CHECK(h.a11(i) == Catch::Approx(expected).margin(1e-10));
    }
}

TEST_CASE("convention factor cross-checked against finite differences") {
    // Low frequencies so the O(h^2) cross stencil resolves the entries to a
    // few percent; that pins down the factor-2 convention and all signs.
    const GridSpec g = make_grid(2, 64);
    const auto poly = test_helpers::random_trig(g, 7, 1, 4, 0.2);
    const ScalarField u = poly.sample(g);
    const auto h = ddc(u);
    for (std::size_t i = 0; i < g.size(); i += 1040013) {
        // assemble H_{21} = (1/2)[(u_{x2 x1} + u_{y2 y1}) + i(u_{x2 y1} - u_{y2 x1})]
        const double re =
            test_helpers::fd_second_partial(u, i, 2, 0) + test_helpers::fd_second_partial(u, i, 3, 1);
        const double im =
            test_helpers::fd_second_partial(u, i, 2, 1) - test_helpers::fd_second_partial(u, i, 3, 0);
        const complexd fd = 0.5 * complexd(re, im);
        const double scale = 1.0 + std::abs(fd);
        CHECK(std::abs(h.a21(i) - fd) <= 0.01 * scale);
        const double fd_diag = 0.5 * (test_helpers::fd_second_partial(u, i, 0, 0) +
                                      test_helpers::fd_second_partial(u, i, 1, 1));
        CHECK(std::fabs(h.a11(i) - fd_diag) <= 0.01 * (1.0 + std::fabs(fd_diag)));
    }
}

TEST_CASE("spectral Hessian is exact on band-limited fields") {
    const GridSpec g = make_grid(2, 16);
    const auto poly = test_helpers::random_trig(g, 11, 2, 5, 0.4);  // max freq 2 <= R/4
    const ScalarField u = poly.sample(g);
    const auto h = ddc(u);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto j = g.unpack(i);
        std::array<double, 4> x{};
        for (int a = 0; a < 4; ++a) x[static_cast<std::size_t>(a)] = g.coordinate(j, a);
        worst = std::max(worst, std::fabs(h.a11(i) - poly.hessian_entry(x, 0, 0).real()));
        worst = std::max(worst, std::fabs(h.a22(i) - poly.hessian_entry(x, 1, 1).real()));
        worst = std::max(worst, std::abs(h.a21(i) - poly.hessian_entry(x, 1, 0)));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("ddc is linear") {
    const GridSpec g = make_grid(1, 32);
    const ScalarField u = test_helpers::random_trig(g, 3, 2, 4, 0.02).sample(g);
    const ScalarField v = test_helpers::random_trig(g, 4, 2, 4, 0.02).sample(g);
    ScalarField w = u;
    w *= 2.5;
    ScalarField v3 = v;
    v3 *= -1.25;
    w += v3;
    const auto hu = ddc(u), hv = ddc(v), hw = ddc(w);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max(worst, std::fabs(hw.a11(i) - (2.5 * hu.a11(i) - 1.25 * hv.a11(i))));
    CHECK(worst <= 1e-12);
}

TEST_CASE("Hermitian symmetry holds between independently computed entries") {
    const GridSpec g = make_grid(2, 16);
    const ScalarField u = test_helpers::random_trig(g, 5, 2, 5, 0.5).sample(g);
    const auto hat = fft_forward(g, to_complex(u));
    const auto h21 = dz_dzbar(g, hat, 1, 0);
    const auto h12 = dz_dzbar(g, hat, 0, 1);
    const auto h11 = dz_dzbar(g, hat, 0, 0);
    double worst = 0.0, diag_imag = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        worst = std::max(worst, std::abs(h12[i] - std::conj(h21[i])));
        diag_imag = std::max(diag_imag, std::fabs(h11[i].imag()));
    }
    CHECK(worst <= 1e-12);
    CHECK(diag_imag <= 1e-12);
}

TEST_CASE("Hessian trace integrates to zero against the flat volume") {
    const GridSpec g = make_grid(2, 16);
    const ScalarField u = test_helpers::random_trig(g, 9, 3, 6, 1.0).sample(g);
    const auto h = ddc(u);
    double mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) mean += h.trace(i);
    mean /= static_cast<double>(g.size());
    CHECK(std::fabs(mean) <= 1e-10);
}

TEST_CASE("spectral tail detector distinguishes resolved from unresolved fields") {
    const GridSpec g = make_grid(1, 32);
    const ScalarField smooth = test_helpers::random_trig(g, 2, 2, 3, 1.0).sample(g);
    CHECK(spectral_tail_fraction(smooth, 8) <= 1e-12);
    const ScalarField rough =
        make_field(g, [](const std::array<double, 4>& x) { return std::cos(two_pi * 12 * x[0]); });
    CHECK(spectral_tail_fraction(rough, 8) >= 0.9);
}
