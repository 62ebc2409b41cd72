#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mage/errors.hpp"
#include "mage/grid.hpp"

namespace mage {

// Real-valued function sampled on a periodic grid.  Value semantics; two
// fields combine arithmetically only when their grids agree.
class ScalarField {
public:
    ScalarField() = default;

    explicit ScalarField(const GridSpec& grid, double fill = 0.0)
        : grid_(grid), values_(grid.size(), fill) {}

    ScalarField(const GridSpec& grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            fail(errc::grid_mismatch, "value count does not match grid size");
        check_finite();
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }

    void check_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) fail(errc::density_invalid, "field contains a non-finite value");
    }

    double max() const {
        double m = -std::numeric_limits<double>::infinity();
        for (double v : values_) m = std::max(m, v);
        return m;
    }
    double min() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : values_) m = std::min(m, v);
        return m;
    }
    double sup_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::fabs(v));
        return m;
    }
    double mean() const {
        double s = 0.0;
        for (double v : values_) s += v;
        return s / static_cast<double>(values_.size());
    }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        require_same_grid(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    ScalarField& operator*=(double c) {
        for (double& v : values_) v *= c;
        return *this;
    }
    ScalarField& operator+=(double c) {
        for (double& v : values_) v += c;
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double c, ScalarField a) { return a *= c; }
    friend ScalarField operator+(ScalarField a, double c) { return a += c; }
    friend ScalarField operator-(ScalarField a, double c) { return a += -c; }

    void require_same_grid(const ScalarField& o) const {
        if (grid_ != o.grid_) fail(errc::grid_mismatch, "fields live on different grids");
    }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

inline double sup_distance(const ScalarField& a, const ScalarField& b) {
    a.require_same_grid(b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

// Builds a field from a pointwise function of the 2n real coordinates.
template <class F>
ScalarField make_field(const GridSpec& grid, F&& f) {
    ScalarField out(grid);
    const int dim = grid.real_dim();
    std::array<double, 4> x{0, 0, 0, 0};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto j = grid.unpack(i);
        for (int a = 0; a < dim; ++a) x[static_cast<std::size_t>(a)] = grid.coordinate(j, a);
        out[i] = f(x);
    }
    return out;
}

// --- flat binary field format -----------------------------------------------
//
// header: magic "MAGE", u32 version (=1), u32 n, u32 R; then R^{2n}
// little-endian IEEE f64 values in row-major order (last axis fastest).

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline bool host_is_little_endian() {
    const std::uint32_t one = 1;
    unsigned char first;
    std::memcpy(&first, &one, 1);
    return first == 1;
}
}  // namespace detail

inline void write_field(const ScalarField& f, std::ostream& os) {
    os.write("MAGE", 4);
    detail::put_u32(os, 1u);
    detail::put_u32(os, static_cast<std::uint32_t>(f.grid().complex_dim()));
    detail::put_u32(os, static_cast<std::uint32_t>(f.grid().resolution()));
    if (detail::host_is_little_endian()) {
        os.write(reinterpret_cast<const char*>(f.data()),
                 static_cast<std::streamsize>(f.size() * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < f.size(); ++i) {
            unsigned char b[8];
            std::uint64_t u;
            double v = f[i];
            std::memcpy(&u, &v, 8);
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((u >> (8 * k)) & 0xff);
            os.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!os) fail(errc::io_error, "failed to write field stream");
}

inline void write_field(const ScalarField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(errc::io_error, "cannot open " + path + " for writing");
    write_field(f, os);
}

inline ScalarField read_field(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MAGE", 4) != 0)
        fail(errc::io_error, "bad magic in field stream");
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1u) fail(errc::io_error, "unsupported field format version");
    const auto n = static_cast<int>(detail::get_u32(is));
    const auto r = static_cast<int>(detail::get_u32(is));
    GridSpec grid(n, r);
    std::vector<double> values(grid.size());
    if (detail::host_is_little_endian()) {
        is.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
    } else {
        for (auto& v : values) {
            unsigned char b[8];
            is.read(reinterpret_cast<char*>(b), 8);
            std::uint64_t u = 0;
            for (int k = 0; k < 8; ++k) u |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            std::memcpy(&v, &u, 8);
        }
    }
    if (!is) fail(errc::io_error, "truncated field stream");
    return ScalarField(grid, std::move(values));
}

inline ScalarField read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(errc::io_error, "cannot open " + path + " for reading");
    return read_field(is);
}

}  // namespace mage
