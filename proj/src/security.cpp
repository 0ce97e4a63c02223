#include "cvql/security.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cvql {

namespace {

void require(bool ok, const char* field, const std::string& message) {
    if (!ok) {
        throw Error(Errc::invalid_argument, std::string(field) + ": " + message);
    }
}

std::string num(double v) { return std::to_string(v); }

// Couples `target` to one arm of a fresh EPR pair on a beamsplitter. The pair
// variance is chosen so that `noise` SNU is added at the given transmittance.
CovMatrix inject_noise(const CovMatrix& state, const std::string& target, const std::string& arm,
                       const std::string& purifier, double noise, double transmittance) {
    const double variance = 1.0 + noise / (1.0 - transmittance);
    auto joint = direct_sum(state, epr_source(variance, arm, purifier));
    return beamsplitter(joint, target, arm, transmittance);
}

// Adds `noise` SNU to both quadratures of `target` without touching its signal:
// x_B += s x_1 (p_1 -= s p_B), then p_B += s p_2 (x_2 -= s x_B), s^2 = noise,
// with modes 1 and 2 starting in vacuum.
CovMatrix inject_noise_exact(const CovMatrix& state, const std::string& target,
                             const std::string& x_ancilla, const std::string& p_ancilla,
                             double noise) {
    const double s = std::sqrt(noise);
    Matrix first = Matrix::Identity(6, 6);
    first(0, 2) = s;  // x_B
    first(3, 1) = -s; // p_1
    Matrix second = Matrix::Identity(6, 6);
    second(1, 5) = s;  // p_B
    second(4, 0) = -s; // x_2
    const std::vector<std::string> modes = {target, x_ancilla, p_ancilla};
    auto joint = direct_sum(state, vacuum(std::vector<std::string>{x_ancilla, p_ancilla}));
    return apply_symplectic(joint, modes, second * first);
}

CovMatrix inject_prep_noise(const ProtocolParams& p, const CovMatrix& state, const std::string& arm,
                            const std::string& purifier, double noise) {
    if (p.prep_coupling == PrepCoupling::exact) {
        return inject_noise_exact(state, mode::bob, arm, purifier, noise);
    }
    return inject_noise(state, mode::bob, arm, purifier, noise, p.trusted_coupling);
}

} // namespace

std::string_view to_string(Direction d) noexcept {
    return d == Direction::direct ? "DR" : "RR";
}

void ProtocolParams::validate() const {
    require(std::isfinite(modulation_variance) && modulation_variance > 0.0, "V_M",
            "must be > 0, got " + num(modulation_variance));
    require(std::isfinite(leakage) && leakage >= 0.0, "k", "must be >= 0, got " + num(leakage));
    require(channel_transmittance > 0.0 && channel_transmittance <= 1.0, "eta_Ch",
            "must lie in (0, 1], got " + num(channel_transmittance));
    require(std::isfinite(channel_noise) && channel_noise >= 0.0, "eps_Ch",
            "must be >= 0, got " + num(channel_noise));
    require(!(channel_transmittance == 1.0 && channel_noise > 0.0), "eta_Ch",
            "excess noise needs eta_Ch <= 0.999");
    require(detection_efficiency > 0.0 && detection_efficiency <= 1.0, "eta_D",
            "must lie in (0, 1], got " + num(detection_efficiency));
    require(std::isfinite(detection_noise) && detection_noise >= 0.0, "eps_D",
            "must be >= 0, got " + num(detection_noise));
    require(!(detection_efficiency == 1.0 && detection_noise > 0.0), "eps_D",
            "detection noise needs eta_D < 1");
    require(std::isfinite(prep_noise_shared) && prep_noise_shared >= 0.0, "eps_P1",
            "must be >= 0, got " + num(prep_noise_shared));
    require(std::isfinite(prep_noise_signal) && prep_noise_signal >= 0.0, "eps_P2",
            "must be >= 0, got " + num(prep_noise_signal));
    require(std::isfinite(leakage_noise) && leakage_noise >= 0.0, "eps_L",
            "must be >= 0, got " + num(leakage_noise));
    require(reconciliation_efficiency >= 0.0 && reconciliation_efficiency <= 1.0, "beta",
            "must lie in [0, 1], got " + num(reconciliation_efficiency));
    require(trusted_coupling > 0.0 && trusted_coupling < 1.0, "trusted_coupling",
            "must lie in (0, 1), got " + num(trusted_coupling));
}

Scheme build_scheme(const ProtocolParams& p) {
    p.validate();
    const double k2 = p.leakage * p.leakage;
    const double source_variance = 1.0 + (1.0 + k2) * p.modulation_variance;

    Scheme s;
    s.state = epr_source(source_variance, mode::alice, mode::bob);
    s.trusted = {mode::alice, mode::bob};

    if (p.prep_noise_shared > 0.0) {
        s.state = inject_prep_noise(p, s.state, mode::prep_shared, mode::prep_shared_purifier,
                                    p.prep_noise_shared);
        s.trusted.push_back(mode::prep_shared);
        s.trusted.push_back(mode::prep_shared_purifier);
    }

    if (p.leakage_noise > 0.0) {
        s.state = direct_sum(s.state, epr_source(1.0 + p.leakage_noise, mode::leak,
                                                 mode::leak_purifier));
        s.trusted.push_back(mode::leak_purifier);
    } else {
        s.state = direct_sum(s.state, vacuum(std::vector<std::string>{mode::leak}));
    }
    s.state = beamsplitter(s.state, mode::bob, mode::leak, 1.0 / (1.0 + k2));
    s.untrusted.push_back(mode::leak);

    if (p.prep_noise_signal > 0.0) {
        s.state = inject_prep_noise(p, s.state, mode::prep_signal, mode::prep_signal_purifier,
                                    p.prep_noise_signal);
        s.trusted.push_back(mode::prep_signal);
        s.trusted.push_back(mode::prep_signal_purifier);
    }

    const auto before = s.state.mode_count();
    s.state = loss_excess_channel(s.state, mode::bob, p.channel_transmittance, p.channel_noise,
                                  {mode::eve_channel, mode::eve_purifier});
    if (s.state.mode_count() != before) {
        s.untrusted.push_back(mode::eve_channel);
        s.untrusted.push_back(mode::eve_purifier);
    }

    if (p.detection_efficiency < 1.0) {
        s.state = inject_noise(s.state, mode::bob, mode::detector, mode::detector_purifier,
                               p.detection_noise, p.detection_efficiency);
        s.trusted.push_back(mode::detector);
        s.trusted.push_back(mode::detector_purifier);
    }

    PhysicalityAudit::record_pure(s.state);
    return s;
}

Matrix effective_two_mode_matrix(double modulation_variance, double leakage,
                                 double channel_transmittance, double channel_noise) {
    const double k2 = leakage * leakage;
    const double a = 1.0 + (k2 + 1.0) * modulation_variance;
    const double b = 1.0 + channel_transmittance * modulation_variance + channel_noise;
    const double c = std::sqrt(channel_transmittance * modulation_variance *
                               (2.0 + (k2 + 1.0) * modulation_variance));
    Matrix g(4, 4);
    g.block<2, 2>(0, 0) = a * identity2();
    g.block<2, 2>(2, 2) = b * identity2();
    g.block<2, 2>(0, 2) = c * sigma_z();
    g.block<2, 2>(2, 0) = c * sigma_z();
    return g;
}

double mutual_information(const Scheme& scheme) {
    const auto ab = partial_trace(scheme.state, {mode::alice, mode::bob});
    const auto bob_given_alice = heterodyne_condition(ab, mode::alice);
    const double info_x = 0.5 * std::log2((ab.x_variance(mode::bob) + 1.0) /
                                          (bob_given_alice.x_variance(mode::bob) + 1.0));
    const double info_p = 0.5 * std::log2((ab.p_variance(mode::bob) + 1.0) /
                                          (bob_given_alice.p_variance(mode::bob) + 1.0));
    return info_x + info_p;
}

double mutual_information(const ProtocolParams& p) { return mutual_information(build_scheme(p)); }

HolevoBounds holevo_bounds(const Scheme& scheme) {
    // Eve purifies the trusted modes, so S(E) = S(T) and S(E|x) = S(T \ X | x).
    const auto trusted = partial_trace(scheme.state, scheme.trusted);
    const double joint = von_neumann_entropy(trusted);
    const double given_alice = von_neumann_entropy(heterodyne_condition(trusted, mode::alice));
    const double given_bob = von_neumann_entropy(heterodyne_condition(trusted, mode::bob));
    return {joint - given_alice, joint - given_bob};
}

HolevoBounds holevo_bounds(const ProtocolParams& p) { return holevo_bounds(build_scheme(p)); }

double finite_size_penalty(std::uint64_t block_size) {
    if (block_size == 0) {
        return 0.0;
    }
    constexpr double failure_probability = 1e-10;
    return 7.0 * std::sqrt(std::log2(2.0 / failure_probability) / static_cast<double>(block_size));
}

KeyRateReport key_rate(const ProtocolParams& p) {
    const auto scheme = build_scheme(p);
    KeyRateReport r;
    r.mutual_information = mutual_information(scheme);
    const auto chi = holevo_bounds(scheme);
    r.chi_direct = chi.direct;
    r.chi_reverse = chi.reverse;
    r.finite_size_penalty = finite_size_penalty(p.block_size);
    const double shared = p.reconciliation_efficiency * r.mutual_information - r.finite_size_penalty;
    r.rate_direct = shared - chi.direct;
    r.rate_reverse = shared - chi.reverse;
    r.rate_direct_clamped = std::max(r.rate_direct, 0.0);
    r.rate_reverse_clamped = std::max(r.rate_reverse, 0.0);
    r.mode_count = scheme.state.mode_count();
    return r;
}

double secret_key_rate(const ProtocolParams& p, Direction d) { return key_rate(p).rate(d); }

} // namespace cvql
