#pragma once

// Standalone closed forms for the leakage-free, trusted-noise-free protocol.
// Plain doubles only; nothing from the library is used here.

#include <algorithm>
#include <array>
#include <cmath>

namespace oracle {

inline double g_bits(double nu) {
    if (nu <= 1.0 + 1e-12) {
        return 0.0;
    }
    const double up = 0.5 * (nu + 1.0);
    const double down = 0.5 * (nu - 1.0);
    return up * std::log2(up) - down * std::log2(down);
}

struct TwoModeRates {
    double mutual_information;
    double chi_direct;
    double chi_reverse;
    double rate_direct;
    double rate_reverse;
};

// gamma = [[a 1, c Z], [c Z, b 1]] with a = V, b = eta (V - 1) + 1 + eps,
// c = sqrt(eta (V^2 - 1)), V = V_M + 1.
inline TwoModeRates two_mode_rates(double vm, double eta, double eps, double beta) {
    const double v = vm + 1.0;
    const double a = v;
    const double b = eta * (v - 1.0) + 1.0 + eps;
    const double c2 = eta * (v * v - 1.0);

    const double delta = a * a + b * b - 2.0 * c2;
    const double det = a * b - c2;
    const double root = std::sqrt(std::max(delta * delta - 4.0 * det * det, 0.0));
    const double nu1 = std::sqrt(0.5 * (delta + root));
    const double nu2 = std::sqrt(std::max(0.5 * (delta - root), 1.0));

    const double a_given_b = a - c2 / (b + 1.0); // heterodyne on B
    const double b_given_a = b - c2 / (a + 1.0); // heterodyne on A

    TwoModeRates r{};
    r.mutual_information = std::log2((b + 1.0) / (b_given_a + 1.0));
    r.chi_direct = g_bits(nu1) + g_bits(nu2) - g_bits(b_given_a);
    r.chi_reverse = g_bits(nu1) + g_bits(nu2) - g_bits(a_given_b);
    r.rate_direct = beta * r.mutual_information - r.chi_direct;
    r.rate_reverse = beta * r.mutual_information - r.chi_reverse;
    return r;
}

// Row-major 4x4 matrix of the A-B state with leakage k, ordering (xA, pA, xB, pB).
inline std::array<double, 16> ab_matrix(double vm, double k, double eta, double eps) {
    const double s = k * k + 1.0;
    const double a = 1.0 + s * vm;
    const double b = 1.0 + eta * vm + eps;
    const double c = std::sqrt(eta * vm * (2.0 + s * vm));
    return {a, 0, c, 0,
            0, a, 0, -c,
            c, 0, b, 0,
            0, -c, 0, b};
}

} // namespace oracle
