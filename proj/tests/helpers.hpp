#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mage/calculus.hpp"
#include "mage/field.hpp"
#include "mage/metric.hpp"
#include "mage/rng.hpp"
#include "mage/spectral.hpp"

namespace test_helpers {

inline constexpr double two_pi = 6.28318530717958647692;

// Trig polynomial with hand-computable derivatives, used as the independent
// oracle for the spectral calculus.
struct TrigPoly {
    std::vector<mage::TrigTerm> terms;

    double value(const std::array<double, 4>& x) const {
        double v = 0.0;
        for (const auto& t : terms) {
            double arg = t.phase;
            for (int a = 0; a < 4; ++a) arg += two_pi * t.freq[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
            v += t.amplitude * std::cos(arg);
        }
        return v;
    }

    double second_partial(const std::array<double, 4>& x, int a, int b) const {
        double v = 0.0;
        for (const auto& t : terms) {
            double arg = t.phase;
            for (int q = 0; q < 4; ++q) arg += two_pi * t.freq[static_cast<std::size_t>(q)] * x[static_cast<std::size_t>(q)];
            v += -t.amplitude * two_pi * two_pi * t.freq[static_cast<std::size_t>(a)] *
                 t.freq[static_cast<std::size_t>(b)] * std::cos(arg);
        }
        return v;
    }

    // Complex Hessian entry 2 d^2/dz_j dzbar_k with the dd^c = 2i d dbar
    // convention, assembled from real second partials.
    std::complex<double> hessian_entry(const std::array<double, 4>& x, int j, int k) const {
        const int xj = 2 * j, yj = 2 * j + 1, xk = 2 * k, yk = 2 * k + 1;
        const double re = second_partial(x, xj, xk) + second_partial(x, yj, yk);
        const double im = second_partial(x, xj, yk) - second_partial(x, yj, xk);
        return 0.5 * std::complex<double>(re, im);
    }

    mage::ScalarField sample(const mage::GridSpec& grid) const {
        return mage::make_field(grid, [&](const std::array<double, 4>& x) { return value(x); });
    }
};

inline TrigPoly random_trig(const mage::GridSpec& grid, std::uint64_t seed, int max_freq,
                            int n_terms, double amplitude) {
    mage::Rng rng(seed);
    TrigPoly p;
    for (int t = 0; t < n_terms; ++t) {
        mage::TrigTerm term;
        term.amplitude = amplitude * rng.uniform(0.3, 1.0);
        bool nonzero = false;
        for (int a = 0; a < grid.real_dim(); ++a) {
            term.freq[static_cast<std::size_t>(a)] = rng.uniform_int(-max_freq, max_freq);
            nonzero = nonzero || term.freq[static_cast<std::size_t>(a)] != 0;
        }
        if (!nonzero) term.freq[0] = 1;
        term.phase = rng.uniform(0.0, two_pi);
        p.terms.push_back(term);
    }
    return p;
}

// Random band-limited field scaled until omega + dd^c u has min eigenvalue
// >= margin (so it is strictly psh for the given metric).
inline mage::ScalarField random_psh_field(const mage::GridSpec& grid,
                                          const mage::MetricField& metric, std::uint64_t seed,
                                          double margin = 0.2, int max_freq = 2,
                                          int n_terms = 4) {
    TrigPoly p = random_trig(grid, seed, max_freq, n_terms, 0.05);
    mage::ScalarField u = p.sample(grid);
    for (int tries = 0; tries < 60; ++tries) {
        const auto a = mage::omega_plus_ddc(u, metric);
        if (mage::cone_check(a).min_eigenvalue >= margin) return u;
        u *= 0.7;
    }
    return mage::ScalarField(grid, 0.0);
}

// Five-point central finite-difference second partial on the periodic grid,
// independent of the spectral path.
inline double fd_second_partial(const mage::ScalarField& u, std::size_t flat, int a, int b) {
    const mage::GridSpec& g = u.grid();
    const double h = g.spacing();
    auto shifted = [&](int da, int db) {
        auto j = g.unpack(flat);
        j[static_cast<std::size_t>(a)] += da;
        j[static_cast<std::size_t>(b)] += db;
        return u[g.pack(j)];
    };
    if (a == b) {
        return (-shifted(2, 0) + 16.0 * shifted(1, 0) - 30.0 * shifted(0, 0) +
                16.0 * shifted(-1, 0) - shifted(-2, 0)) /
               (12.0 * h * h);
    }
    return (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4.0 * h * h);
}

}  // namespace test_helpers
