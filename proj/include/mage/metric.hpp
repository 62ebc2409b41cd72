#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/grid.hpp"
#include "mage/spectral.hpp"

namespace mage {

enum class MetricFamily { flat_kahler, conformal_hermitian };

// One term a * cos(2 pi k.x + phase) of a trigonometric polynomial on the
// torus; k is an integer frequency vector over the 2n real axes.
struct TrigTerm {
    double amplitude = 0.0;
    std::array<int, 4> freq{0, 0, 0, 0};
    double phase = 0.0;
};

inline ScalarField evaluate_trig(const GridSpec& grid, const std::vector<TrigTerm>& terms,
                                 double constant = 0.0) {
    static const double two_pi = 6.28318530717958647692;
    return make_field(grid, [&](const std::array<double, 4>& x) {
        double v = constant;
        for (const auto& t : terms) {
            double arg = t.phase;
            for (int a = 0; a < 4; ++a) arg += two_pi * t.freq[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
            v += t.amplitude * std::cos(arg);
        }
        return v;
    });
}

// Hermitian metric omega on the torus, stored as the pointwise matrix of
// coefficients in omega = i sum G_{jk} dz_j ^ dzbar_k.  The flat form is the
// identity matrix; conformal metrics are e^psi times flat.  Volume
// conventions used throughout: the quadrature weight of omega^n is det G
// (flat total volume 1), while wedge densities such as omega_u ^ omega^{n-1}
// keep their multinomial factor (flat n=2: omega^2 has density 2 det G).
class MetricField {
public:
    MetricField() = default;

    const GridSpec& grid() const noexcept { return grid_; }
    MetricFamily family() const noexcept { return family_; }
    const HermitianField& entries() const noexcept { return entries_; }
    const ScalarField& det_omega() const noexcept { return det_omega_; }
    const std::optional<ScalarField>& conformal_exponent() const noexcept { return psi_; }
    double max_eigenvalue() const noexcept { return max_eig_; }
    double min_eigenvalue() const noexcept { return min_eig_; }

    static constexpr double default_eps_metric = 1e-6;

    static MetricField flat(const GridSpec& grid) {
        MetricField m;
        m.grid_ = grid;
        m.family_ = MetricFamily::flat_kahler;
        m.entries_ = HermitianField(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            m.entries_.a11(i) = 1.0;
            if (grid.complex_dim() == 2) m.entries_.a22(i) = 1.0;
        }
        m.finalize(default_eps_metric);
        return m;
    }

    static MetricField conformal(const GridSpec& grid, const ScalarField& psi,
                                 double eps_metric = default_eps_metric) {
        if (psi.grid() != grid) fail(errc::grid_mismatch, "psi lives on a different grid");
        MetricField m;
        m.grid_ = grid;
        m.family_ = MetricFamily::conformal_hermitian;
        m.psi_ = psi;
        m.entries_ = HermitianField(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double w = std::exp(psi[i]);
            m.entries_.a11(i) = w;
            if (grid.complex_dim() == 2) m.entries_.a22(i) = w;
        }
        m.finalize(eps_metric);
        return m;
    }

private:
    void finalize(double eps_metric) {
        min_eig_ = std::numeric_limits<double>::infinity();
        max_eig_ = 0.0;
        std::vector<double> det(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            min_eig_ = std::min(min_eig_, entries_.min_eigenvalue(i));
            max_eig_ = std::max(max_eig_, entries_.max_eigenvalue(i));
            det[i] = entries_.det(i);
        }
        // The positivity floor is relative to the metric's own scale so that
        // uniformly small conformal factors stay valid while genuinely
        // ill-conditioned metrics are rejected.
        if (!(min_eig_ > eps_metric * max_eig_))
            fail(errc::metric_not_positive,
                 "metric eigenvalue " + std::to_string(min_eig_) + " below floor " +
                     std::to_string(eps_metric * max_eig_));
        det_omega_ = ScalarField(grid_, std::move(det));
    }

    GridSpec grid_;
    MetricFamily family_ = MetricFamily::flat_kahler;
    HermitianField entries_;
    ScalarField det_omega_;
    std::optional<ScalarField> psi_;
    double min_eig_ = 0.0, max_eig_ = 0.0;
};

struct MetricDescriptor {
    MetricFamily family = MetricFamily::flat_kahler;
    std::vector<TrigTerm> psi_terms;  // conformal only
    double psi_constant = 0.0;
    double eps_metric = MetricField::default_eps_metric;
};

inline MetricField make_metric(const GridSpec& grid, const MetricDescriptor& d) {
    if (d.family == MetricFamily::flat_kahler) return MetricField::flat(grid);
    return MetricField::conformal(grid, evaluate_trig(grid, d.psi_terms, d.psi_constant),
                                  d.eps_metric);
}

// Curvature data of the metric.  B bounds 2n dd^c omega against omega^2
// pointwise (for n=2 the companion bound on 4n^2 d omega ^ d^c omega against
// omega^3 is vacuous: (3,3)-forms vanish in dimension 2).  K and A are the
// regularization constants; their slots are filled lazily by the
// regularization module.
struct CurvatureConstants {
    double B = 0.0;
    std::optional<double> K;
    std::optional<double> A;
};

// Top-degree density of dd^c omega against the reference volume
// (i dz_1 dzbar_1)^(i dz_2 dzbar_2), n = 2 only.
inline ScalarField ddc_omega_density(const MetricField& metric) {
    const GridSpec& g = metric.grid();
    if (g.complex_dim() != 2)
        fail(errc::dimension_unsupported, "dd^c omega density is defined for n = 2");
    const auto& e = metric.entries();
    std::vector<complexd> g11(g.size()), g22(g.size()), g21(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g11[i] = complexd(e.a11(i), 0.0);
        g22[i] = complexd(e.a22(i), 0.0);
        g21[i] = e.a21(i);
    }
    const auto h11 = fft_forward(g, g11);
    const auto h22 = fft_forward(g, g22);
    const auto h21 = fft_forward(g, g21);
    std::vector<complexd> g12(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) g12[i] = std::conj(g21[i]);
    const auto h12 = fft_forward(g, g12);

    const auto t1 = dz_dzbar(g, h22, 0, 0);  // d^2 G_22 / dz_1 dzbar_1
    const auto t2 = dz_dzbar(g, h11, 1, 1);  // d^2 G_11 / dz_2 dzbar_2
    const auto t3 = dz_dzbar(g, h21, 0, 1);  // d^2 G_21 / dz_1 dzbar_2
    const auto t4 = dz_dzbar(g, h12, 1, 0);  // d^2 G_12 / dz_2 dzbar_1

    ScalarField out(g);
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = 2.0 * (t1[i] + t2[i] - t3[i] - t4[i]).real();
    return out;
}

inline CurvatureConstants curvature_constants(const MetricField& metric) {
    CurvatureConstants c;
    if (metric.grid().complex_dim() == 1) {
        c.B = 0.0;  // (2,2)-forms vanish in complex dimension 1
        return c;
    }
    const auto density = ddc_omega_density(metric);
    const auto& det = metric.det_omega();
    const double two_n = 2.0 * metric.grid().complex_dim();
    double b = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        // |2n dd^c omega| <= B omega^2 pointwise; omega^2 has density 2 det G.
        b = std::max(b, two_n * std::fabs(density[i]) / (2.0 * det[i]));
    }
    c.B = b;
    return c;
}

}  // namespace mage
