#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/grid.hpp"
#include "mage/metric.hpp"
#include "mage/spectral.hpp"

namespace mage {

inline constexpr double default_eps_psh = 1e-8;

inline HermitianField omega_plus_ddc(const ScalarField& u, const MetricField& metric) {
    if (u.grid() != metric.grid()) fail(errc::grid_mismatch, "field and metric grids differ");
    HessianField h = ddc(u);
    h += metric.entries();
    return h;
}

struct ConeCheck {
    double min_eigenvalue;
    std::size_t worst_point;
};

inline ConeCheck cone_check(const HermitianField& a) {
    ConeCheck c{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = a.min_eigenvalue(i);
        if (e < c.min_eigenvalue) {
            c.min_eigenvalue = e;
            c.worst_point = i;
        }
    }
    return c;
}

inline void require_omega_psh(const HermitianField& a, double eps_psh = default_eps_psh) {
    const auto c = cone_check(a);
    if (c.min_eigenvalue < -eps_psh)
        fail(errc::not_omega_psh, "omega + dd^c u has eigenvalue " +
                                      std::to_string(c.min_eigenvalue) + " at flat index " +
                                      std::to_string(c.worst_point));
}

// Pointwise density of omega_u^n against omega^n: det(G + dd^c u) / det G.
inline ScalarField ma_density(const ScalarField& u, const MetricField& metric,
                              double eps_psh = default_eps_psh) {
    const auto a = omega_plus_ddc(u, metric);
    require_omega_psh(a, eps_psh);
    ScalarField out(u.grid());
    const auto& det = metric.det_omega();
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a.det(i) / det[i];
    return out;
}

// Quadrature of f against omega^n (equal-weight periodic trapezoid; the
// weight is det G with the convention that the flat torus has unit volume).
inline double integral(const ScalarField& f, const MetricField& metric) {
    if (f.grid() != metric.grid()) fail(errc::grid_mismatch, "field and metric grids differ");
    const auto& det = metric.det_omega();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * det[i];
    const double h = f.grid().spacing();
    return s * std::pow(h, f.grid().real_dim());
}

// L^p norm w.r.t. omega^n.  p in (0,1) (notably p = 1/n) is computed by the
// same formula and used only as the control quantity it is in the estimates.
inline double lp_norm(const ScalarField& f, double p, const MetricField& metric) {
    if (!(p > 0.0)) fail(errc::nonpositive_sample, "lp_norm requires p > 0");
    ScalarField absp(f.grid());
    for (std::size_t i = 0; i < f.size(); ++i) absp[i] = std::pow(std::fabs(f[i]), p);
    return std::pow(integral(absp, metric), 1.0 / p);
}

// Quadrature of the mixed form omega_u ^ omega^{n-1} (raw wedge density, so
// the flat n=2 value for u = 0 is integral of omega^2 = 2).
inline double laplacian_mass(const ScalarField& u, const MetricField& metric,
                             double eps_psh = default_eps_psh) {
    const auto a = omega_plus_ddc(u, metric);
    require_omega_psh(a, eps_psh);
    const auto& g = metric.entries();
    double s = 0.0;
    if (metric.grid().complex_dim() == 1) {
        for (std::size_t i = 0; i < a.size(); ++i) s += a.a11(i);
    } else {
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a.a11(i) * g.a22(i) + a.a22(i) * g.a11(i) -
                 2.0 * (a.a21(i) * std::conj(g.a21(i))).real();
    }
    const double h = metric.grid().spacing();
    return s * std::pow(h, metric.grid().real_dim());
}

// --- modulus of continuity ---------------------------------------------------

namespace detail {

struct Offset {
    std::array<int, 4> o;
    double distance;
};

// Half-space list (one of each antipodal pair) of nonzero integer offsets
// within torus distance delta_max.
inline std::vector<Offset> offsets_within(const GridSpec& g, double delta_max) {
    const int r = g.resolution();
    const double h = g.spacing();
    const int reach = std::min(r / 2, static_cast<int>(std::floor(delta_max / h)) + 1);
    std::vector<Offset> out;
    const int dim = g.real_dim();
    std::array<int, 4> o{0, 0, 0, 0};
    std::function<void(int)> rec = [&](int axis) {
        if (axis == dim) {
            bool zero = true, leading_negative = false;
            for (int a = 0; a < dim; ++a) {
                if (o[static_cast<std::size_t>(a)] != 0) {
                    leading_negative = o[static_cast<std::size_t>(a)] < 0;
                    zero = false;
                    break;
                }
            }
            if (zero || leading_negative) return;
            double d2 = 0.0;
            for (int a = 0; a < dim; ++a) {
                const int w = std::min(std::abs(o[static_cast<std::size_t>(a)]),
                                       r - std::abs(o[static_cast<std::size_t>(a)]));
                d2 += double(w) * w;
            }
            const double dist = std::sqrt(d2) * h;
            if (dist <= delta_max + 1e-12) out.push_back(Offset{o, dist});
            return;
        }
        for (int v = -reach; v <= reach; ++v) {
            o[static_cast<std::size_t>(axis)] = v;
            rec(axis + 1);
        }
        o[static_cast<std::size_t>(axis)] = 0;
    };
    rec(0);
    std::sort(out.begin(), out.end(), [](const Offset& a, const Offset& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.o < b.o;
    });
    return out;
}

inline double max_abs_offset_diff(const ScalarField& u, const std::array<int, 4>& o) {
    const GridSpec& g = u.grid();
    const int r = g.resolution();
    auto wrap_table = [&](int axis) {
        std::vector<int> w(static_cast<std::size_t>(r));
        for (int j = 0; j < r; ++j)
            w[static_cast<std::size_t>(j)] = ((j + o[static_cast<std::size_t>(axis)]) % r + r) % r;
        return w;
    };
    const double* v = u.data();
    double m = 0.0;
    if (g.real_dim() == 2) {
        const auto w0 = wrap_table(0), w1 = wrap_table(1);
        for (int j0 = 0; j0 < r; ++j0) {
            const std::size_t base = static_cast<std::size_t>(j0) * r;
            const std::size_t nbase = static_cast<std::size_t>(w0[static_cast<std::size_t>(j0)]) * r;
            for (int j1 = 0; j1 < r; ++j1) {
                const double d = v[nbase + static_cast<std::size_t>(w1[static_cast<std::size_t>(j1)])] -
                                 v[base + static_cast<std::size_t>(j1)];
                m = std::max(m, std::fabs(d));
            }
        }
    } else {
        const auto w0 = wrap_table(0), w1 = wrap_table(1), w2 = wrap_table(2), w3 = wrap_table(3);
        const std::size_t R = static_cast<std::size_t>(r);
        for (int j0 = 0; j0 < r; ++j0)
            for (int j1 = 0; j1 < r; ++j1)
                for (int j2 = 0; j2 < r; ++j2) {
                    const std::size_t base = ((static_cast<std::size_t>(j0) * R +
                                               static_cast<std::size_t>(j1)) *
                                                  R +
                                              static_cast<std::size_t>(j2)) *
                                             R;
                    const std::size_t nb = ((static_cast<std::size_t>(w0[static_cast<std::size_t>(j0)]) * R +
                                             static_cast<std::size_t>(w1[static_cast<std::size_t>(j1)])) *
                                                R +
                                            static_cast<std::size_t>(w2[static_cast<std::size_t>(j2)])) *
                                           R;
                    for (int j3 = 0; j3 < r; ++j3) {
                        const double d = v[nb + static_cast<std::size_t>(w3[static_cast<std::size_t>(j3)])] -
                                         v[base + static_cast<std::size_t>(j3)];
                        m = std::max(m, std::fabs(d));
                    }
                }
    }
    return m;
}

}  // namespace detail

// tau(delta) = sup |u(x) - u(y)| over grid pairs with torus distance <= delta,
// evaluated for a whole ladder of deltas in one pass over offsets.
inline std::vector<double> modulus_ladder(const ScalarField& u, const std::vector<double>& deltas) {
    const GridSpec& g = u.grid();
    const double h = g.spacing();
    double dmax = 0.0;
    for (double d : deltas) {
        if (!(d > 0.0) || d > 0.5 + 1e-12)
            fail(errc::scale_out_of_range, "delta must lie in (0, 1/2]");
        if (d < h - 1e-12)
            fail(errc::delta_below_resolution,
                 "delta " + std::to_string(d) + " below grid spacing " + std::to_string(h));
        dmax = std::max(dmax, d);
    }
    const auto offsets = detail::offsets_within(g, dmax);
    std::vector<double> prefix(offsets.size());
    double running = 0.0;
    for (std::size_t k = 0; k < offsets.size(); ++k) {
        running = std::max(running, detail::max_abs_offset_diff(u, offsets[k].o));
        prefix[k] = running;
    }
    std::vector<double> out(deltas.size(), 0.0);
    for (std::size_t q = 0; q < deltas.size(); ++q) {
        // last offset with distance <= delta
        std::size_t lo = 0, hi = offsets.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (offsets[mid].distance <= deltas[q] + 1e-12)
                lo = mid + 1;
            else
                hi = mid;
        }
        out[q] = (lo == 0) ? 0.0 : prefix[lo - 1];
    }
    return out;
}

inline double modulus_of_continuity(const ScalarField& u, double delta) {
    return modulus_ladder(u, {delta})[0];
}

// Geometric delta ladder within [lo, hi], at least min_rungs entries,
// endpoints included.
inline std::vector<double> geometric_ladder(double lo, double hi, int min_rungs) {
    std::vector<double> out;
    if (!(lo > 0.0) || !(hi > lo)) fail(errc::scale_out_of_range, "bad ladder bounds");
    const int rungs = std::max(min_rungs, 2);
    for (int k = 0; k < rungs; ++k)
        out.push_back(lo * std::pow(hi / lo, double(k) / (rungs - 1)));
    out.back() = hi;
    return out;
}

// --- power-law fitting --------------------------------------------------------

struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares on (log x, log y).
inline ExponentFit fit_exponent(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 3)
        fail(errc::insufficient_samples, "exponent fit needs at least 3 samples, got " +
                                             std::to_string(samples.size()));
    std::vector<double> lx, ly;
    for (const auto& [x, y] : samples) {
        if (!(x > 0.0) || !(y > 0.0))
            fail(errc::nonpositive_sample, "exponent fit requires strictly positive samples");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        syy += (ly[i] - my) * (ly[i] - my);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) fail(errc::nonpositive_sample, "exponent fit requires distinct x values");
    ExponentFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

}  // namespace mage
