#include <doctest.h>

#include <cmath>
#include <random>

#include "cvql/errors.hpp"
#include "cvql/modulator.hpp"
#include "oracles/field_dft.hpp"

using namespace cvql;

TEST_CASE("ideal single sideband has no suppressed line or carrier") {
    ModulatorConfig cfg{0.15, 0.15, 0.0, 0.0};
    const auto s = spectrum(cfg);
    CHECK(s.p_desired == 1.0);
    CHECK(s.p_suppressed == doctest::Approx(0.0));
    CHECK(s.p_carrier == doctest::Approx(0.0));
}

TEST_CASE("zero drive is degenerate") {
    ModulatorConfig cfg{0.0, 0.0, 0.01, 0.0};
    try {
        spectrum(cfg);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_config);
    }
}

TEST_CASE("invalid modulator parameters") {
    CHECK_THROWS_AS(ModulatorConfig({-0.1, 0.1, 0.0, 0.0}).validate(), Error);
    CHECK_THROWS_AS(ModulatorConfig({NAN, 0.1, 0.0, 0.0}).validate(), Error);
    CHECK(ModulatorConfig{0.3, 0.1, 0, 0}.outside_linear_regime());
    CHECK_FALSE(ModulatorConfig{0.2, 0.1, 0, 0}.outside_linear_regime());
}

TEST_CASE("small-signal form is the leading order of the exact lines") {
    ModulatorConfig cfg{0.011, 0.009, 0.002, -0.001};
    const auto exact = field_coefficients(cfg);
    const auto lin = small_signal_coefficients(cfg);
    CHECK(std::abs(exact.upper - lin.upper) < 1e-6);
    CHECK(std::abs(exact.lower - lin.lower) < 1e-6);
    CHECK(std::abs(exact.carrier - lin.carrier) < 1e-6);
    CHECK(lin.upper.real() == doctest::Approx(0.005));
    CHECK(lin.lower.real() == doctest::Approx(-0.0005));
    CHECK(lin.carrier.real() == doctest::Approx(-0.0005));
    CHECK(lin.carrier.imag() == doctest::Approx(0.001));
}

TEST_CASE("exact lines agree with direct summation of the field") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> mu(0.01, 0.3);
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    for (int i = 0; i < 30; ++i) {
        const ModulatorConfig cfg{mu(rng), mu(rng), bias(rng), bias(rng)};
        const auto f = field_coefficients(cfg);
        const auto ref = oracle::field_lines(cfg.mu1, cfg.mu2, cfg.bias1, cfg.bias2);
        CHECK(std::abs(f.upper - ref.upper) < 1e-12);
        CHECK(std::abs(f.lower - ref.lower) < 1e-12);
        CHECK(std::abs(f.carrier - ref.carrier) < 1e-12);
    }
}

TEST_CASE("rho mapping: even, floored, monotone in |rho|") {
    CHECK(rho_to_k(0.0) == 0.0);
    CHECK(rho_to_k(0.0, default_k_floor) == default_k_floor);
    double prev = 0.0;
    for (double rho = 0.25; rho <= 20.0; rho += 0.25) {
        const double k = rho_to_k(rho);
        CHECK(k == doctest::Approx(rho_to_k(-rho)).epsilon(1e-15));
        CHECK(k > prev);
        CHECK(k < 1.0);
        prev = k;
        const double r = rho_to_ratio(rho);
        CHECK(k == doctest::Approx(std::abs(1.0 - r) / (1.0 + r)).epsilon(1e-12));
    }
    CHECK(std::isfinite(rho_to_k(5000.0)));
    CHECK(rho_to_k(5000.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(rho_to_k(1.0, 1.0), Error);
    CHECK_THROWS_AS(rho_to_k(1.0, -0.1), Error);
}

TEST_CASE("rho conventions differ by a factor of two in dB") {
    for (double rho : {-7.0, -1.0, 0.5, 3.0}) {
        CHECK(rho_to_k(2.0 * rho, 0.0, RhoConvention::amplitude20) ==
              doctest::Approx(rho_to_k(rho, 0.0, RhoConvention::amplitude10)).epsilon(1e-14));
    }
    CHECK(parse_rho_convention("amplitude20") == RhoConvention::amplitude20);
    CHECK_THROWS_AS(parse_rho_convention("power"), Error);
    CHECK(to_string(RhoConvention::amplitude10) == "amplitude10");
}

TEST_CASE("from_rho sets the drive ratio and keeps the larger arm at the reference") {
    for (double rho : {-6.0, -0.5, 0.0, 2.0, 9.0}) {
        const auto cfg = ModulatorConfig::from_rho(rho, 0.2);
        CHECK(cfg.mu1 / cfg.mu2 == doctest::Approx(rho_to_ratio(rho)).epsilon(1e-13));
        CHECK(std::max(cfg.mu1, cfg.mu2) == doctest::Approx(0.2));
    }
}

TEST_CASE("suppression in dB") {
    CHECK(*suppression_db(default_k_floor) == doctest::Approx(24.0).epsilon(1e-12));
    CHECK(*suppression_db(0.1) == doctest::Approx(20.0));
    CHECK_FALSE(suppression_db(0.0).has_value());
    CHECK_THROWS_AS(suppression_db(-0.01), Error);
}

TEST_CASE("spectrum lines scale with depth imbalance and bias") {
    // Suppressed power grows with imbalance; carrier power grows with bias.
    double prev_lower = -1.0;
    double prev_carrier = -1.0;
    for (double d = 0.0; d <= 0.05; d += 0.01) {
        const auto s = spectrum({0.1 - d, 0.1 + d, d, d});
        CHECK(s.p_suppressed > prev_lower);
        CHECK(s.p_carrier > prev_carrier);
        prev_lower = s.p_suppressed;
        prev_carrier = s.p_carrier;
    }
}
