#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mage {

// All library failures carry a stable machine-readable code alongside the
// human-readable message, so callers (and tests) can dispatch on the code
// without parsing text.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

namespace errc {
inline constexpr const char* dimension_unsupported = "dimension_unsupported";
inline constexpr const char* resolution_invalid = "resolution_invalid";
inline constexpr const char* grid_mismatch = "grid_mismatch";
inline constexpr const char* metric_not_positive = "metric_not_positive";
inline constexpr const char* not_omega_psh = "not_omega_psh";
inline constexpr const char* density_invalid = "density_invalid";
inline constexpr const char* delta_below_resolution = "delta_below_resolution";
inline constexpr const char* insufficient_samples = "insufficient_samples";
inline constexpr const char* nonpositive_sample = "nonpositive_sample";
inline constexpr const char* scale_out_of_range = "scale_out_of_range";
inline constexpr const char* quadrature_not_converged = "quadrature_not_converged";
inline constexpr const char* hypothesis_violated = "hypothesis_violated";
inline constexpr const char* exponent_not_realized = "exponent_not_realized";
inline constexpr const char* schedule_too_short = "schedule_too_short";
inline constexpr const char* config_invalid = "config_invalid";
inline constexpr const char* output_dir_unwritable = "output_dir_unwritable";
inline constexpr const char* sweep_failed = "sweep_failed";
inline constexpr const char* io_error = "io_error";
}  // namespace errc

[[noreturn]] inline void fail(const char* code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace mage
