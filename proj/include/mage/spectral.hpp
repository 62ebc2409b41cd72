#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "mage/errors.hpp"
#include "mage/field.hpp"
#include "mage/grid.hpp"

namespace mage {

using complexd = std::complex<double>;

namespace fft {

// Shared cache of FFTW plans, one pair per grid signature.  Plans are created
// with FFTW_ESTIMATE (deterministic algorithm choice) and FFTW_UNALIGNED so
// the new-array execute interface accepts arbitrary buffers.  Plan creation is
// serialized; execution through fftw_execute_dft is thread-safe.
class Plans {
public:
    static Plans& instance() {
        static Plans p;
        return p;
    }

    void forward(const GridSpec& g, const complexd* in, complexd* out) { run(g, in, out, FFTW_FORWARD); }

    // Inverse transform normalized by 1/N.
    void inverse(const GridSpec& g, const complexd* in, complexd* out) {
        run(g, in, out, FFTW_BACKWARD);
        const double scale = 1.0 / static_cast<double>(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) out[i] *= scale;
    }

private:
    struct Key {
        int n, r, sign;
        bool operator<(const Key& o) const {
            if (n != o.n) return n < o.n;
            if (r != o.r) return r < o.r;
            return sign < o.sign;
        }
    };

    void run(const GridSpec& g, const complexd* in, complexd* out, int sign) {
        fftw_plan plan = nullptr;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            Key key{g.complex_dim(), g.resolution(), sign};
            auto it = plans_.find(key);
            if (it == plans_.end()) {
                std::vector<complexd> scratch(g.size());
                std::vector<int> dims(static_cast<std::size_t>(g.real_dim()), g.resolution());
                plan = fftw_plan_dft(g.real_dim(), dims.data(),
                                     reinterpret_cast<fftw_complex*>(scratch.data()),
                                     reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
                plans_.emplace(key, plan);
            } else {
                plan = it->second;
            }
        }
        // out-of-place execute is fine for plans created in-place with
        // FFTW_UNALIGNED, but keep it simple: copy then transform in place.
        if (out != in)
            std::copy(in, in + g.size(), out);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(out),
                         reinterpret_cast<fftw_complex*>(out));
    }

    std::mutex mutex_;
    std::map<Key, fftw_plan> plans_;
};

}  // namespace fft

// Integer frequency of FFT bin m on an axis of length R, in [-R/2, R/2).
// The Nyquist bin carries no usable sign information for odd-order factors,
// so it is dropped (set to 0) in all derivative multipliers here.
inline int frequency_of_bin(int m, int r) noexcept {
    if (m == r / 2) return 0;
    return (m <= r / 2) ? m : m - r;
}

// Complex frequency xi_j = k_{x_j} - i k_{y_j} of mode kappa for complex
// coordinate j; the spectral symbol of d^2/dz_j dzbar_k on e^{2 pi i kappa.x}
// is -pi^2 xi_j conj(xi_k).
inline complexd complex_frequency(const std::array<int, 4>& bins, int j, int r) noexcept {
    const int kx = frequency_of_bin(bins[static_cast<std::size_t>(2 * j)], r);
    const int ky = frequency_of_bin(bins[static_cast<std::size_t>(2 * j + 1)], r);
    return complexd(kx, -ky);
}

// Pointwise Hermitian n x n matrix field.  Packed storage: n real diagonals
// and, for n = 2, the single lower off-diagonal entry (row 2, column 1);
// the (1,2) entry is its conjugate.
class HermitianField {
public:
    HermitianField() = default;
    explicit HermitianField(const GridSpec& grid)
        : grid_(grid),
          d1_(grid.size(), 0.0),
          d2_(grid.complex_dim() == 2 ? grid.size() : 0, 0.0),
          off_(grid.complex_dim() == 2 ? grid.size() : 0, complexd(0.0, 0.0)) {}

    const GridSpec& grid() const noexcept { return grid_; }
    int n() const noexcept { return grid_.complex_dim(); }
    std::size_t size() const noexcept { return grid_.size(); }

    double& a11(std::size_t i) noexcept { return d1_[i]; }
    double a11(std::size_t i) const noexcept { return d1_[i]; }
    double& a22(std::size_t i) noexcept { return d2_[i]; }
    double a22(std::size_t i) const noexcept { return (n() == 2) ? d2_[i] : 0.0; }
    complexd& a21(std::size_t i) noexcept { return off_[i]; }
    complexd a21(std::size_t i) const noexcept { return (n() == 2) ? off_[i] : complexd(0, 0); }

    double det(std::size_t i) const noexcept {
        if (n() == 1) return d1_[i];
        return d1_[i] * d2_[i] - std::norm(off_[i]);
    }
    double trace(std::size_t i) const noexcept { return n() == 1 ? d1_[i] : d1_[i] + d2_[i]; }
    double min_eigenvalue(std::size_t i) const noexcept {
        if (n() == 1) return d1_[i];
        const double half_tr = 0.5 * (d1_[i] + d2_[i]);
        const double half_gap = 0.5 * (d1_[i] - d2_[i]);
        return half_tr - std::sqrt(half_gap * half_gap + std::norm(off_[i]));
    }
    double max_eigenvalue(std::size_t i) const noexcept {
        if (n() == 1) return d1_[i];
        const double half_tr = 0.5 * (d1_[i] + d2_[i]);
        const double half_gap = 0.5 * (d1_[i] - d2_[i]);
        return half_tr + std::sqrt(half_gap * half_gap + std::norm(off_[i]));
    }

    HermitianField& operator+=(const HermitianField& o) {
        if (grid_ != o.grid_) fail(errc::grid_mismatch, "hermitian fields on different grids");
        for (std::size_t i = 0; i < d1_.size(); ++i) d1_[i] += o.d1_[i];
        for (std::size_t i = 0; i < d2_.size(); ++i) d2_[i] += o.d2_[i];
        for (std::size_t i = 0; i < off_.size(); ++i) off_[i] += o.off_[i];
        return *this;
    }
    HermitianField& operator*=(double c) {
        for (auto& v : d1_) v *= c;
        for (auto& v : d2_) v *= c;
        for (auto& v : off_) v *= c;
        return *this;
    }
    friend HermitianField operator+(HermitianField a, const HermitianField& b) { return a += b; }

private:
    GridSpec grid_;
    std::vector<double> d1_, d2_;
    std::vector<complexd> off_;
};

// HessianField is the complex Hessian dd^c u assembled with the convention
// dd^c = 2i d dbar, i.e. entry (j,k) = 2 d^2 u / dz_j dzbar_k.
using HessianField = HermitianField;

namespace detail {

// Table of complex frequencies per flat mode index, cached per grid.
inline const std::vector<complexd>& xi_table(const GridSpec& g, int j) {
    struct Cache {
        std::mutex mutex;
        std::map<std::pair<std::pair<int, int>, int>, std::vector<complexd>> tables;
    };
    static Cache cache;
    std::lock_guard<std::mutex> lock(cache.mutex);
    auto key = std::make_pair(std::make_pair(g.complex_dim(), g.resolution()), j);
    auto it = cache.tables.find(key);
    if (it != cache.tables.end()) return it->second;
    std::vector<complexd> table(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        table[i] = complex_frequency(g.unpack(i), j, g.resolution());
    return cache.tables.emplace(key, std::move(table)).first->second;
}

}  // namespace detail

// Spectral d^2/dz_j dzbar_k of a complex field (unknown-order factor of the
// complex Hessian); exact to round-off for band-limited input.
inline std::vector<complexd> dz_dzbar(const GridSpec& g, const std::vector<complexd>& hat,
                                      int j, int k) {
    const auto& xij = detail::xi_table(g, j);
    const auto& xik = detail::xi_table(g, k);
    static const double pi = 3.14159265358979323846;
    std::vector<complexd> tmp(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        tmp[i] = -pi * pi * xij[i] * std::conj(xik[i]) * hat[i];
    std::vector<complexd> out(g.size());
    fft::Plans::instance().inverse(g, tmp.data(), out.data());
    return out;
}

inline std::vector<complexd> fft_forward(const GridSpec& g, const std::vector<complexd>& in) {
    std::vector<complexd> out(g.size());
    fft::Plans::instance().forward(g, in.data(), out.data());
    return out;
}

inline std::vector<complexd> to_complex(const ScalarField& u) {
    std::vector<complexd> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = complexd(u[i], 0.0);
    return out;
}

// dd^c u in coordinates: H_{jk} = 2 d^2u/dz_j dzbar_k.  The mean is removed
// before the transform so constant shifts of u leave the result bit-identical.
inline HessianField ddc(const ScalarField& u) {
    const GridSpec& g = u.grid();
    HessianField h(g);
    const double mean = u.mean();
    std::vector<complexd> buf(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) buf[i] = complexd(u[i] - mean, 0.0);
    const auto hat = fft_forward(g, buf);
    {
        auto h11 = dz_dzbar(g, hat, 0, 0);
        for (std::size_t i = 0; i < g.size(); ++i) h.a11(i) = 2.0 * h11[i].real();
    }
    if (g.complex_dim() == 2) {
        auto h22 = dz_dzbar(g, hat, 1, 1);
        for (std::size_t i = 0; i < g.size(); ++i) h.a22(i) = 2.0 * h22[i].real();
        auto h21 = dz_dzbar(g, hat, 1, 0);
        for (std::size_t i = 0; i < g.size(); ++i) h.a21(i) = 2.0 * h21[i];
    }
    return h;
}

// Fraction of spectral energy above per-axis frequency cutoff (mode 0
// excluded from the reference energy); used for band-limit warnings.
inline double spectral_tail_fraction(const ScalarField& u, int cutoff) {
    const GridSpec& g = u.grid();
    const auto hat = fft_forward(g, to_complex(u));
    double total = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto bins = g.unpack(i);
        bool zero = true, beyond = false;
        for (int a = 0; a < g.real_dim(); ++a) {
            const int k = frequency_of_bin(bins[static_cast<std::size_t>(a)], g.resolution());
            if (k != 0) zero = false;
            if (std::abs(k) > cutoff) beyond = true;
        }
        if (zero) continue;
        const double e = std::norm(hat[i]);
        total += e;
        if (beyond) tail += e;
    }
    return total > 0.0 ? tail / total : 0.0;
}

}  // namespace mage
