#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvql {

enum class Errc {
    invalid_argument,
    unphysical_variance,
    missing_mode,
    duplicate_mode,
    numerically_singular,
    numerical_error,
    not_symmetric,
    unphysical_state,
    degenerate_config,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::unphysical_variance: return "unphysical-variance";
    case Errc::missing_mode: return "missing-mode";
    case Errc::duplicate_mode: return "duplicate-mode";
    case Errc::numerically_singular: return "numerically-singular";
    case Errc::numerical_error: return "numerical-error";
    case Errc::not_symmetric: return "not-symmetric";
    case Errc::unphysical_state: return "unphysical-state";
    case Errc::degenerate_config: return "degenerate-config";
    }
    return "unknown";
}

} // namespace cvql
