#pragma once

// Synthetic heterodyne data drawn from analytic covariance matrices, and the
// moment estimators that recover (V_M, k, eta_Ch, eps_Ch) from it.
//
// Outcome convention: a heterodyne record of modes with covariance gamma has
// covariance (gamma + 1) / 2, so a vacuum input gives unit variance per quadrature.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvql/gaussian.hpp"
#include "cvql/security.hpp"

namespace cvql {

inline constexpr std::string_view sampler_algorithm = "mt19937_64/std::normal_distribution/LLT";

struct SampleBatch {
    std::vector<std::string> parties; // one measured mode label per party
    Matrix data;                      // n x 2*parties, columns (x, p) per party
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string generator{sampler_algorithm};

    // Column index of a party's quadrature (0 = x, 1 = p).
    Eigen::Index column(std::string_view party, int quadrature) const;
};

Matrix outcome_covariance(const CovMatrix& state, std::span<const std::string> modes);

// Throws numerical-error if the outcome covariance is not positive definite.
SampleBatch sample(const CovMatrix& state, std::span<const std::string> measured_modes,
                   std::size_t n, std::uint64_t seed);

struct Estimate {
    double value = 0.0;
    double standard_error = 0.0;
    bool fixed = false; // supplied rather than estimated; standard_error is 0
};

struct EstimationOptions {
    std::optional<double> known_modulation_variance;
    bool assume_no_leakage = false;
    // Trusted detector calibration used to refer Bob's data to the channel.
    double detection_efficiency = 1.0;
    double detection_noise = 0.0;
    std::string alice = "A";
    std::string bob = "B";
    std::string eve = "L";
};

inline constexpr std::size_t min_estimation_samples = 1000;
inline constexpr int estimation_sub_batches = 10;

struct EstimateReport {
    Estimate modulation_variance;
    Estimate leakage;               // signed; the rate depends on k^2
    Estimate channel_transmittance; // referred to the channel
    Estimate channel_noise;         // referred to the channel output
    std::size_t n = 0;
    std::vector<std::string> warnings;
};

EstimateReport estimate_params(const SampleBatch& batch, const EstimationOptions& options = {});

// Protocol parameters implied by an estimate, with physical clamping (V_M > 0,
// k >= 0, eta in (0, 1], eps >= 0 and eta <= 0.999 when eps > 0). Fields not
// estimated are copied from `base`.
ProtocolParams params_from_estimate(const EstimateReport& est, const ProtocolParams& base,
                                    std::vector<std::string>* warnings = nullptr);

enum class Verdict { consistent, overestimates_key, underestimates_key };
std::string_view to_string(Verdict v) noexcept;

struct ConsistencyOptions {
    bool assume_no_leakage = false;
    bool modulation_variance_known = false;
    double tolerance_sigmas = 5.0;
};

struct ConsistencyReport {
    EstimateReport estimates;
    ProtocolParams estimated_params;
    KeyRateReport true_rate;
    KeyRateReport estimated_rate;
    // Standard error of R(est) from the delta method on the sample moments.
    double rate_error_direct = 0.0;
    double rate_error_reverse = 0.0;
    double tolerance_direct = 0.0;
    double tolerance_reverse = 0.0;
    Verdict verdict = Verdict::consistent;

    double discrepancy(Direction d) const noexcept {
        return estimated_rate.rate(d) - true_rate.rate(d);
    }
    double tolerance(Direction d) const noexcept {
        return d == Direction::direct ? tolerance_direct : tolerance_reverse;
    }
    Verdict verdict_in(Direction d) const noexcept {
        if (discrepancy(d) > tolerance(d)) {
            return Verdict::overestimates_key;
        }
        return -discrepancy(d) > tolerance(d) ? Verdict::underestimates_key : Verdict::consistent;
    }
};

// Builds the scheme for p, samples Alice (A), Bob (B) and the leakage mode (L),
// estimates, and compares the key rate on estimates against the true one.
ConsistencyReport end_to_end_consistency(const ProtocolParams& p, std::size_t n,
                                         std::uint64_t seed, const ConsistencyOptions& options = {});

} // namespace cvql
