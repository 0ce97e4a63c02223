#pragma once

// Key-rate analysis of the coherent-state heterodyne protocol with modulation
// leakage. The leaked sideband is modelled as a beamsplitter of transmittance
// 1/(1+k^2) between the signal and a mode handed to the eavesdropper; trusted
// noise sources are purified by EPR pairs held by the legitimate parties.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvql/gaussian.hpp"

namespace cvql {

enum class Direction { direct, reverse };

// How trusted preparation noise (eps_P1, eps_P2) is attached to the signal.
enum class PrepCoupling {
    // Additive Gaussian noise with unit signal gain: two QND couplings of B to
    // vacuum ancillas. This is the strongly-unbalanced-beamsplitter limit.
    exact,
    // Beamsplitter of transmittance trusted_coupling to one arm of an EPR pair
    // with V = 1 + eps / (1 - trusted_coupling); also attenuates the signal.
    beamsplitter,
};

std::string_view to_string(Direction d) noexcept;

struct ProtocolParams {
    double modulation_variance = 5.0;    // V_M, SNU
    double leakage = 0.0;                // k, amplitude ratio of leaked/desired sideband
    double channel_transmittance = 0.5;  // untrusted, (0, 1]
    double channel_noise = 0.0;          // untrusted excess noise at channel output, SNU
    double detection_efficiency = 1.0;   // trusted, (0, 1]
    double detection_noise = 0.0;        // trusted, SNU
    double prep_noise_shared = 0.0;      // trusted, added before the leakage split
    double prep_noise_signal = 0.0;      // trusted, added to the signal only
    double leakage_noise = 0.0;          // trusted, injected into the leakage mode
    double reconciliation_efficiency = 0.96;
    std::uint64_t block_size = 0;        // 0 = asymptotic
    double trusted_coupling = 0.999;     // used by PrepCoupling::beamsplitter only
    PrepCoupling prep_coupling = PrepCoupling::exact;

    // Throws invalid-argument naming the offending field.
    void validate() const;
};

// Labels used by build_scheme.
namespace mode {
inline const std::string alice = "A";
inline const std::string bob = "B";
inline const std::string leak = "L";
inline const std::string leak_purifier = "Lb";
inline const std::string eve_channel = "E1";
inline const std::string eve_purifier = "E2";
inline const std::string detector = "D1";
inline const std::string detector_purifier = "D2";
inline const std::string prep_shared = "P1";
inline const std::string prep_shared_purifier = "P1b";
inline const std::string prep_signal = "P2";
inline const std::string prep_signal_purifier = "P2b";
} // namespace mode

struct Scheme {
    CovMatrix state; // globally pure
    std::vector<std::string> trusted;
    std::vector<std::string> untrusted;
};

Scheme build_scheme(const ProtocolParams& p);

// Leakage-free two-mode matrix [[a 1, c Z], [c Z, b 1]] with
// a = 1+(1+k^2)V_M, b = 1+eta V_M+eps, c = sqrt(eta V_M (2+(1+k^2)V_M)).
Matrix effective_two_mode_matrix(double modulation_variance, double leakage,
                                 double channel_transmittance, double channel_noise);

double mutual_information(const ProtocolParams& p);
double mutual_information(const Scheme& scheme);

struct HolevoBounds {
    double direct = 0.0;
    double reverse = 0.0;
};

HolevoBounds holevo_bounds(const ProtocolParams& p);
HolevoBounds holevo_bounds(const Scheme& scheme);

// 7 sqrt(log2(2/eps)/n) with eps = 1e-10; 0 for n = 0.
double finite_size_penalty(std::uint64_t block_size);

struct KeyRateReport {
    double mutual_information = 0.0;
    double chi_direct = 0.0;
    double chi_reverse = 0.0;
    double rate_direct = 0.0;  // may be negative
    double rate_reverse = 0.0; // may be negative
    double rate_direct_clamped = 0.0;
    double rate_reverse_clamped = 0.0;
    double finite_size_penalty = 0.0;
    std::size_t mode_count = 0;

    double rate(Direction d) const noexcept {
        return d == Direction::direct ? rate_direct : rate_reverse;
    }
    double chi(Direction d) const noexcept {
        return d == Direction::direct ? chi_direct : chi_reverse;
    }
};

KeyRateReport key_rate(const ProtocolParams& p);

// Raw (unclamped) rate for one direction.
double secret_key_rate(const ProtocolParams& p, Direction d);

// --- optimisation and derived quantities -----------------------------------

struct VmOptimum {
    double modulation_variance = 0.0;
    double rate = 0.0;
    bool no_positive_key = false;
    bool at_bracket_edge = false;
    std::vector<double> grid_vm;   // bracketing grid
    std::vector<double> grid_rate;
};

inline constexpr double vm_lower = 0.01;
inline constexpr double vm_upper = 100.0;
inline constexpr int vm_grid_points = 40;

// Golden-section search on log V_M inside [0.01, 100] after a 40-point log
// grid; p.modulation_variance is ignored.
VmOptimum optimize_vm(const ProtocolParams& p, Direction d);

// Number of strict interior local maxima of a sampled curve plus edge maxima.
int count_local_maxima(const std::vector<double>& values);

struct LossSearchOptions {
    double max_db = 60.0;
    double tolerance_db = 0.01;
    bool optimize_vm = false; // re-optimise V_M at each trial loss
};

struct LossLimit {
    double additional_loss_db = 0.0;
    bool no_key_at_zero = false; // R <= 0 without extra loss
    bool saturated = false;      // still secure at max_db
};

// Largest extra attenuation (dB, applied multiplicatively to eta_Ch) that keeps
// the raw key rate positive, by bisection.
LossLimit max_additional_loss(const ProtocolParams& p, Direction d,
                              const LossSearchOptions& options = {});

// R(k = 0) - R(k) on raw rates with everything else fixed.
double leakage_penalty(const ProtocolParams& p, Direction d);

// eta_max(k = 0) - eta_max(k), dB.
double loss_penalty_db(const ProtocolParams& p, Direction d, const LossSearchOptions& options = {});

enum class NoisePoint { prep_shared, prep_signal, leakage, detection };
enum class Viability { helpful, harmful, neutral };

std::string_view to_string(NoisePoint n) noexcept;
std::string_view to_string(Viability v) noexcept;

inline constexpr std::array<double, 6> viability_grid = {0.0, 0.01, 0.05, 0.1, 0.5, 1.0};
inline constexpr double viability_threshold = 1e-6;

struct ViabilityResult {
    Viability verdict = Viability::neutral;
    std::vector<double> noise;   // grid values, first entry is the baseline (0)
    std::vector<double> rate;    // raw rate at each grid value
};

// Scans one trusted-noise injection point with every other parameter fixed.
ViabilityResult trusted_noise_viability(const ProtocolParams& p, NoisePoint point, Direction d);

// Copy of p with the given noise point set to value.
ProtocolParams with_noise(ProtocolParams p, NoisePoint point, double value);

} // namespace cvql
