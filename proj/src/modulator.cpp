#include "cvql/modulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvql/errors.hpp"

namespace cvql {

RhoConvention parse_rho_convention(std::string_view text) {
    if (text == "amplitude10") {
        return RhoConvention::amplitude10;
    }
    if (text == "amplitude20") {
        return RhoConvention::amplitude20;
    }
    throw Error(Errc::invalid_argument, "unknown rho_convention '" + std::string(text) + "'");
}

std::string_view to_string(RhoConvention convention) noexcept {
    return convention == RhoConvention::amplitude10 ? "amplitude10" : "amplitude20";
}

bool ModulatorConfig::outside_linear_regime() const noexcept {
    return std::max(mu1, mu2) > 0.2;
}

void ModulatorConfig::validate() const {
    if (!std::isfinite(mu1) || !std::isfinite(mu2) || !std::isfinite(bias1) ||
        !std::isfinite(bias2)) {
        throw Error(Errc::invalid_argument, "modulator parameters must be finite");
    }
    if (mu1 < 0.0 || mu2 < 0.0) {
        throw Error(Errc::invalid_argument, "modulation depths must be >= 0");
    }
}

ModulatorConfig ModulatorConfig::from_rho(double rho_db, double reference_depth,
                                          RhoConvention convention) {
    const double r = rho_to_ratio(rho_db, convention);
    ModulatorConfig cfg;
    if (r <= 1.0) {
        cfg.mu1 = r * reference_depth;
        cfg.mu2 = reference_depth;
    } else {
        cfg.mu1 = reference_depth;
        cfg.mu2 = reference_depth / r;
    }
    cfg.validate();
    return cfg;
}

FieldCoefficients field_coefficients(const ModulatorConfig& cfg) {
    cfg.validate();
    const double arm2 = std::cyl_bessel_j(1.0, cfg.mu2) * std::cos(cfg.bias2);
    const double arm1 = std::cyl_bessel_j(1.0, cfg.mu1) * std::cos(cfg.bias1);
    FieldCoefficients out;
    out.upper = 0.5 * (arm2 + arm1);
    out.lower = 0.5 * (arm2 - arm1);
    out.carrier = 0.5 * std::complex<double>(std::cyl_bessel_j(0.0, cfg.mu2) * std::sin(cfg.bias2),
                                             std::cyl_bessel_j(0.0, cfg.mu1) * std::sin(cfg.bias1));
    return out;
}

FieldCoefficients small_signal_coefficients(const ModulatorConfig& cfg) {
    cfg.validate();
    return {0.5 * cfg.mean_depth(), 0.5 * cfg.depth_imbalance(), 0.5 * cfg.carrier_bias()};
}

SidebandSpectrum spectrum(const ModulatorConfig& cfg) {
    const auto f = field_coefficients(cfg);
    const double desired = std::norm(f.upper);
    if (!(desired > 0.0)) {
        throw Error(Errc::degenerate_config, "desired sideband has zero amplitude");
    }
    return {1.0, std::norm(f.lower) / desired, std::norm(f.carrier) / desired};
}

double rho_to_ratio(double rho_db, RhoConvention convention) {
    const double divisor = convention == RhoConvention::amplitude10 ? 10.0 : 20.0;
    return std::pow(10.0, rho_db / divisor);
}

double rho_to_k(double rho_db, double k_floor, RhoConvention convention) {
    if (!(k_floor >= 0.0 && k_floor < 1.0)) {
        throw Error(Errc::invalid_argument, "k_floor must lie in [0, 1)");
    }
    // |1 - r| / (1 + r) == |tanh(ln(r) / 2)|, which stays finite for any rho.
    const double divisor = convention == RhoConvention::amplitude10 ? 10.0 : 20.0;
    const double ideal = std::abs(std::tanh(0.5 * rho_db * std::log(10.0) / divisor));
    return std::max(ideal, k_floor);
}

std::optional<double> suppression_db(double k) {
    if (!(k >= 0.0)) {
        throw Error(Errc::invalid_argument, "leakage ratio must be >= 0");
    }
    if (k == 0.0) {
        return std::nullopt;
    }
    return 20.0 * std::log10(1.0 / k);
}

} // namespace cvql
