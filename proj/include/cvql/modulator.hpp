#pragma once

// Small-signal model of an IQ modulator driven for single-sideband output with
// suppressed carrier. Arm j is a Mach-Zehnder biased at null, so its output
// field is sin(mu_j * s_j(t) + delta_j) with s_2 = cos, s_1 = sin.

#include <complex>
#include <optional>
#include <string_view>

namespace cvql {

enum class RhoConvention {
    amplitude10, // r = 10^(rho / 10)
    amplitude20, // r = 10^(rho / 20)
};

RhoConvention parse_rho_convention(std::string_view text);
std::string_view to_string(RhoConvention convention) noexcept;

// Residual leakage at the best achievable suppression (~24 dB).
inline constexpr double default_k_floor = 0.063095734448019325; // 10^(-24/20)

struct ModulatorConfig {
    double mu1 = 0.1; // modulation depth, arm 1 (rad)
    double mu2 = 0.1; // modulation depth, arm 2 (rad)
    double bias1 = 0.0; // DC bias deviation, arm 1 (rad)
    double bias2 = 0.0; // DC bias deviation, arm 2 (rad)

    double mean_depth() const noexcept { return 0.5 * (mu1 + mu2); }
    double depth_imbalance() const noexcept { return 0.5 * (mu2 - mu1); }
    std::complex<double> carrier_bias() const noexcept { return {bias2, bias1}; }

    // Jacobi-Anger truncation degrades above 0.2 rad.
    bool outside_linear_regime() const noexcept;

    // Throws invalid-argument on negative depths or non-finite values.
    void validate() const;

    // Arms driven with peak amplitude ratio V1/V2 given by rho. For rho < 0 arm 1
    // is scaled down and arm 2 held at `reference_depth`; for rho > 0 the reverse.
    static ModulatorConfig from_rho(double rho_db, double reference_depth,
                                    RhoConvention convention = RhoConvention::amplitude10);
};

struct FieldCoefficients {
    std::complex<double> upper;   // omega0 + Omega (desired)
    std::complex<double> lower;   // omega0 - Omega (suppressed)
    std::complex<double> carrier; // omega0
};

// First-harmonic and DC line amplitudes with the Bessel factors kept:
//   upper   = [J1(mu2) cos(d2) + J1(mu1) cos(d1)] / 2   ~ mu/2
//   lower   = [J1(mu2) cos(d2) - J1(mu1) cos(d1)] / 2   ~ delta/2
//   carrier = [J0(mu2) sin(d2) + i J0(mu1) sin(d1)] / 2 ~ Delta/2
FieldCoefficients field_coefficients(const ModulatorConfig& cfg);

// Leading-order expansion of the above: (mu/2, delta/2, Delta/2).
FieldCoefficients small_signal_coefficients(const ModulatorConfig& cfg);

struct SidebandSpectrum {
    double p_desired = 1.0;
    double p_suppressed = 0.0;
    double p_carrier = 0.0;
};

// Line powers normalised to the desired sideband. Throws degenerate-config
// when the desired sideband vanishes.
SidebandSpectrum spectrum(const ModulatorConfig& cfg);

// Amplitude ratio between the RF drives for a scaling factor in dB.
double rho_to_ratio(double rho_db, RhoConvention convention = RhoConvention::amplitude10);

// Leakage ratio k = max(|1 - r| / (1 + r), k_floor).
double rho_to_k(double rho_db, double k_floor = 0.0,
                RhoConvention convention = RhoConvention::amplitude10);

// 20 log10(1/k); empty for k = 0 (infinite suppression).
std::optional<double> suppression_db(double k);

} // namespace cvql
