#include <algorithm>
#include <cmath>

#include "cvql/security.hpp"

namespace cvql {

namespace {

constexpr double golden = 0.6180339887498949; // (sqrt(5) - 1) / 2
constexpr double vm_log_tolerance = 1e-3;     // ~relative tolerance in V_M

double attenuate(double transmittance, double extra_db) {
    return transmittance * std::pow(10.0, -extra_db / 10.0);
}

} // namespace

int count_local_maxima(const std::vector<double>& values) {
    const auto n = values.size();
    if (n == 0) {
        return 0;
    }
    if (n == 1) {
        return 1;
    }
    int count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool left_ok = i == 0 || values[i] > values[i - 1];
        const bool right_ok = i + 1 == n || values[i] >= values[i + 1];
        if (left_ok && right_ok) {
            ++count;
        }
    }
    return count;
}

VmOptimum optimize_vm(const ProtocolParams& p, Direction d) {
    ProtocolParams q = p;
    auto rate_at_log = [&](double log_vm) {
        q.modulation_variance = std::exp(log_vm);
        return secret_key_rate(q, d);
    };

    VmOptimum out;
    const double lo = std::log(vm_lower);
    const double hi = std::log(vm_upper);
    const double step = (hi - lo) / (vm_grid_points - 1);
    std::size_t best = 0;
    for (int i = 0; i < vm_grid_points; ++i) {
        const double x = lo + step * i;
        out.grid_vm.push_back(std::exp(x));
        out.grid_rate.push_back(rate_at_log(x));
        // Strict comparison keeps the smaller V_M on ties.
        if (out.grid_rate.back() > out.grid_rate[best]) {
            best = static_cast<std::size_t>(i);
        }
    }

    double a = lo + step * (best == 0 ? 0.0 : static_cast<double>(best) - 1.0);
    double b = lo + step * std::min<double>(static_cast<double>(best) + 1.0, vm_grid_points - 1.0);
    double c = b - golden * (b - a);
    double e = a + golden * (b - a);
    double fc = rate_at_log(c);
    double fe = rate_at_log(e);
    while (b - a > vm_log_tolerance) {
        if (fc >= fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - golden * (b - a);
            fc = rate_at_log(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + golden * (b - a);
            fe = rate_at_log(e);
        }
    }
    double x_best = fc >= fe ? c : e;
    double f_best = std::max(fc, fe);
    if (out.grid_rate[best] >= f_best) {
        x_best = std::log(out.grid_vm[best]);
        f_best = out.grid_rate[best];
    }

    out.modulation_variance = std::exp(x_best);
    out.rate = f_best;
    out.no_positive_key = !(f_best > 0.0);
    out.at_bracket_edge = best == 0 || best + 1 == static_cast<std::size_t>(vm_grid_points);
    return out;
}

LossLimit max_additional_loss(const ProtocolParams& p, Direction d,
                              const LossSearchOptions& options) {
    if (!(options.max_db > 0.0) || !(options.tolerance_db > 0.0)) {
        throw Error(Errc::invalid_argument, "loss search range and tolerance must be positive");
    }
    auto rate_at = [&](double extra_db) {
        ProtocolParams q = p;
        q.channel_transmittance = extra_db == 0.0 ? p.channel_transmittance
                                                  : attenuate(p.channel_transmittance, extra_db);
        return options.optimize_vm ? optimize_vm(q, d).rate : secret_key_rate(q, d);
    };

    LossLimit out;
    if (!(rate_at(0.0) > 0.0)) {
        out.no_key_at_zero = true;
        return out;
    }
    if (rate_at(options.max_db) > 0.0) {
        out.additional_loss_db = options.max_db;
        out.saturated = true;
        return out;
    }
    double secure = 0.0;
    double insecure = options.max_db;
    while (insecure - secure > options.tolerance_db) {
        const double mid = 0.5 * (secure + insecure);
        if (rate_at(mid) > 0.0) {
            secure = mid;
        } else {
            insecure = mid;
        }
    }
    out.additional_loss_db = secure;
    return out;
}

double leakage_penalty(const ProtocolParams& p, Direction d) {
    ProtocolParams ignorant = p;
    ignorant.leakage = 0.0;
    return secret_key_rate(ignorant, d) - secret_key_rate(p, d);
}

double loss_penalty_db(const ProtocolParams& p, Direction d, const LossSearchOptions& options) {
    ProtocolParams ignorant = p;
    ignorant.leakage = 0.0;
    return max_additional_loss(ignorant, d, options).additional_loss_db -
           max_additional_loss(p, d, options).additional_loss_db;
}

std::string_view to_string(NoisePoint n) noexcept {
    switch (n) {
    case NoisePoint::prep_shared: return "P1";
    case NoisePoint::prep_signal: return "P2";
    case NoisePoint::leakage: return "L";
    case NoisePoint::detection: return "D";
    }
    return "?";
}

std::string_view to_string(Viability v) noexcept {
    switch (v) {
    case Viability::helpful: return "helpful";
    case Viability::harmful: return "harmful";
    case Viability::neutral: return "neutral";
    }
    return "?";
}

ProtocolParams with_noise(ProtocolParams p, NoisePoint point, double value) {
    switch (point) {
    case NoisePoint::prep_shared: p.prep_noise_shared = value; break;
    case NoisePoint::prep_signal: p.prep_noise_signal = value; break;
    case NoisePoint::leakage: p.leakage_noise = value; break;
    case NoisePoint::detection: p.detection_noise = value; break;
    }
    return p;
}

ViabilityResult trusted_noise_viability(const ProtocolParams& p, NoisePoint point, Direction d) {
    if (point == NoisePoint::detection && !(p.detection_efficiency < 1.0)) {
        throw Error(Errc::invalid_argument,
                    "eta_D: detection noise scan needs detection efficiency < 1");
    }
    ViabilityResult out;
    for (double value : viability_grid) {
        out.noise.push_back(value);
        out.rate.push_back(secret_key_rate(with_noise(p, point, value), d));
    }
    const double baseline = out.rate.front();
    bool any_gain = false;
    bool all_loss = true;
    for (std::size_t i = 1; i < out.rate.size(); ++i) {
        const double change = out.rate[i] - baseline;
        any_gain = any_gain || change > viability_threshold;
        all_loss = all_loss && change < -viability_threshold;
    }
    out.verdict = any_gain ? Viability::helpful : (all_loss ? Viability::harmful : Viability::neutral);
    return out;
}

} // namespace cvql
