#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mage/errors.hpp"

namespace mage {

// Flat complex torus C^n / (Z^n + iZ^n), n in {1,2}, discretized with R
// points per real axis (unit periods).  Real axes are ordered
// (x_1, y_1, ..., x_n, y_n) with z_k = x_k + i y_k; the last axis varies
// fastest in the flat storage order.
class GridSpec {
public:
    GridSpec() = default;

    static constexpr std::size_t default_max_points = std::size_t(1) << 24;

    GridSpec(int n, int resolution, std::size_t max_points = default_max_points) {
        if (n != 1 && n != 2)
            fail(errc::dimension_unsupported,
                 "complex dimension must be 1 or 2, got " + std::to_string(n));
        if (resolution < 8 || resolution % 2 != 0)
            fail(errc::resolution_invalid,
                 "resolution must be even and >= 8, got " + std::to_string(resolution));
        std::size_t total = 1;
        for (int a = 0; a < 2 * n; ++a) {
            total *= static_cast<std::size_t>(resolution);
            if (total > max_points)
                fail(errc::resolution_invalid,
                     "grid of " + std::to_string(resolution) + "^" + std::to_string(2 * n) +
                         " points exceeds the memory budget of " + std::to_string(max_points));
        }
        n_ = n;
        r_ = resolution;
        size_ = total;
    }

    int complex_dim() const noexcept { return n_; }
    int real_dim() const noexcept { return 2 * n_; }
    int resolution() const noexcept { return r_; }
    double spacing() const noexcept { return 1.0 / r_; }
    std::size_t size() const noexcept { return size_; }
    bool valid() const noexcept { return size_ > 0; }

    friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept {
        return a.n_ == b.n_ && a.r_ == b.r_;
    }
    friend bool operator!=(const GridSpec& a, const GridSpec& b) noexcept { return !(a == b); }

    // Multi-index (j_1, ..., j_{2n}) of a flat index; coordinates are j_a / R.
    std::array<int, 4> unpack(std::size_t flat) const noexcept {
        std::array<int, 4> j{0, 0, 0, 0};
        for (int a = real_dim() - 1; a >= 0; --a) {
            j[static_cast<std::size_t>(a)] = static_cast<int>(flat % r_);
            flat /= r_;
        }
        return j;
    }

    std::size_t pack(const std::array<int, 4>& j) const noexcept {
        std::size_t flat = 0;
        for (int a = 0; a < real_dim(); ++a)
            flat = flat * r_ + static_cast<std::size_t>(((j[static_cast<std::size_t>(a)] % r_) + r_) % r_);
        return flat;
    }

    double coordinate(const std::array<int, 4>& j, int axis) const noexcept {
        return j[static_cast<std::size_t>(axis)] * spacing();
    }

    // Stride of axis a in the flat layout.
    std::size_t stride(int axis) const noexcept {
        std::size_t s = 1;
        for (int a = real_dim() - 1; a > axis; --a) s *= static_cast<std::size_t>(r_);
        return s;
    }

private:
    int n_ = 0;
    int r_ = 0;
    std::size_t size_ = 0;
};

inline GridSpec make_grid(int n, int resolution,
                          std::size_t max_points = GridSpec::default_max_points) {
    return GridSpec(n, resolution, max_points);
}

}  // namespace mage
