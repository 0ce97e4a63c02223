#include "cvql/estimation.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace cvql {

namespace {

// Second moments of the heterodyne records, averaged over quadratures.
// Correlations are taken with the sigma_z sign pattern of the EPR source.
struct Moments {
    double alice = 0.0;      // <A^2>
    double bob = 0.0;        // <B^2>
    double alice_bob = 0.0;  // (<AxBx> - <ApBp>) / 2
    double alice_eve = 0.0;  // (<AxLx> - <ApLp>) / 2

    std::array<double, 4> as_array() const { return {alice, bob, alice_bob, alice_eve}; }
    static Moments from_array(const std::array<double, 4>& m) { return {m[0], m[1], m[2], m[3]}; }
};

struct Columns {
    Eigen::Index ax, ap, bx, bp, ex, ep;
};

Columns locate(const SampleBatch& batch, const EstimationOptions& options) {
    return {batch.column(options.alice, 0), batch.column(options.alice, 1),
            batch.column(options.bob, 0),   batch.column(options.bob, 1),
            batch.column(options.eve, 0),   batch.column(options.eve, 1)};
}

Moments moments(const Matrix& data, const Columns& c, Eigen::Index begin, Eigen::Index count) {
    auto col = [&](Eigen::Index j) { return data.col(j).segment(begin, count); };
    const double inv = 1.0 / static_cast<double>(count);
    Moments m;
    m.alice = 0.5 * inv * (col(c.ax).squaredNorm() + col(c.ap).squaredNorm());
    m.bob = 0.5 * inv * (col(c.bx).squaredNorm() + col(c.bp).squaredNorm());
    m.alice_bob = 0.5 * inv * (col(c.ax).dot(col(c.bx)) - col(c.ap).dot(col(c.bp)));
    m.alice_eve = 0.5 * inv * (col(c.ax).dot(col(c.ex)) - col(c.ap).dot(col(c.ep)));
    return m;
}

struct RawEstimate {
    double modulation_variance = 0.0;
    double leakage = 0.0;
    double transmittance = 0.0;
    double noise = 0.0;
};

// Inverts a = 1 + (1+k^2)V_M/2, c_AB^2 = a eta V_M / 2, c_AL^2 = a k^2 V_M / 2,
// b = 1 + (eta V_M + eps)/2 (all in outcome units).
RawEstimate invert(const Moments& m, const EstimationOptions& o) {
    RawEstimate r;
    const double a = m.alice;
    r.modulation_variance = o.known_modulation_variance
                                ? *o.known_modulation_variance
                                : 2.0 * (a - 1.0) - 2.0 * m.alice_eve * m.alice_eve / a;
    const double vm = r.modulation_variance;
    if (!(vm > 0.0) || !(a > 0.0)) {
        return r;
    }
    r.leakage = o.assume_no_leakage ? 0.0 : -m.alice_eve * std::sqrt(2.0 / (a * vm));
    const double eta_total = 2.0 * m.alice_bob * m.alice_bob / (a * vm);
    const double eps_total = 2.0 * (m.bob - 1.0) - eta_total * vm;
    r.transmittance = eta_total / o.detection_efficiency;
    r.noise = (eps_total - o.detection_noise) / o.detection_efficiency;
    return r;
}

double standard_error(const std::vector<double>& values) {
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

// Quadratic forms u = X^T W X whose sample means are the four moments, over
// X = (Ax, Ap, Bx, Bp, Lx, Lp).
std::array<Eigen::Matrix<double, 6, 6>, 4> moment_weights() {
    std::array<Eigen::Matrix<double, 6, 6>, 4> w;
    for (auto& m : w) {
        m.setZero();
    }
    w[0](0, 0) = w[0](1, 1) = 0.5;
    w[1](2, 2) = w[1](3, 3) = 0.5;
    w[2](0, 2) = w[2](2, 0) = 0.25;
    w[2](1, 3) = w[2](3, 1) = -0.25;
    w[3](0, 4) = w[3](4, 0) = 0.25;
    w[3](1, 5) = w[3](5, 1) = -0.25;
    return w;
}

} // namespace

Eigen::Index SampleBatch::column(std::string_view party, int quadrature) const {
    auto it = std::find(parties.begin(), parties.end(), party);
    if (it == parties.end()) {
        throw Error(Errc::missing_mode, "no samples for party '" + std::string(party) + "'");
    }
    return static_cast<Eigen::Index>(2 * (it - parties.begin()) + quadrature);
}

Matrix outcome_covariance(const CovMatrix& state, std::span<const std::string> modes) {
    const auto reduced = partial_trace(state, modes);
    const auto dim = reduced.data().rows();
    return 0.5 * (reduced.data() + Matrix::Identity(dim, dim));
}

SampleBatch sample(const CovMatrix& state, std::span<const std::string> measured_modes,
                   std::size_t n, std::uint64_t seed) {
    if (n == 0) {
        throw Error(Errc::invalid_argument, "sample count must be >= 1");
    }
    const Matrix cov = outcome_covariance(state, measured_modes);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw Error(Errc::numerical_error, "outcome covariance is not positive definite");
    }
    const Matrix lower = llt.matrixL();
    const auto dim = cov.rows();
    const auto rows = static_cast<Eigen::Index>(n);

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix white(rows, dim);
    for (Eigen::Index t = 0; t < rows; ++t) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            white(t, j) = normal(engine);
        }
    }

    SampleBatch batch;
    batch.parties.assign(measured_modes.begin(), measured_modes.end());
    batch.data = white * lower.transpose();
    batch.n = n;
    batch.seed = seed;
    return batch;
}

EstimateReport estimate_params(const SampleBatch& batch, const EstimationOptions& options) {
    if (batch.n < min_estimation_samples) {
        throw Error(Errc::invalid_argument, "estimation needs at least " +
                                                std::to_string(min_estimation_samples) +
                                                " samples, got " + std::to_string(batch.n));
    }
    if (!(options.detection_efficiency > 0.0 && options.detection_efficiency <= 1.0)) {
        throw Error(Errc::invalid_argument, "detection efficiency must lie in (0, 1]");
    }
    const auto cols = locate(batch, options);
    const auto n = static_cast<Eigen::Index>(batch.n);

    const RawEstimate full = invert(moments(batch.data, cols, 0, n), options);

    std::array<std::vector<double>, 4> parts;
    const Eigen::Index chunk = n / estimation_sub_batches;
    for (int s = 0; s < estimation_sub_batches; ++s) {
        const Eigen::Index begin = s * chunk;
        const Eigen::Index count = s + 1 == estimation_sub_batches ? n - begin : chunk;
        const RawEstimate e = invert(moments(batch.data, cols, begin, count), options);
        parts[0].push_back(e.modulation_variance);
        parts[1].push_back(e.leakage);
        parts[2].push_back(e.transmittance);
        parts[3].push_back(e.noise);
    }

    EstimateReport report;
    report.n = batch.n;
    report.modulation_variance = {full.modulation_variance, standard_error(parts[0]),
                                  options.known_modulation_variance.has_value()};
    report.leakage = {full.leakage, standard_error(parts[1]), options.assume_no_leakage};
    report.channel_transmittance = {full.transmittance, standard_error(parts[2])};
    report.channel_noise = {full.noise, standard_error(parts[3])};
    if (report.modulation_variance.fixed) {
        report.modulation_variance.standard_error = 0.0;
    }
    if (report.leakage.fixed) {
        report.leakage.standard_error = 0.0;
    }

    if (!(report.modulation_variance.value > 0.0)) {
        report.warnings.push_back("negative modulation variance estimate clamped to 0");
        report.modulation_variance.value = 0.0;
    }
    if (report.channel_noise.value < 0.0) {
        report.warnings.push_back("negative excess noise estimate clamped to 0");
        report.channel_noise.value = 0.0;
    }
    return report;
}

ProtocolParams params_from_estimate(const EstimateReport& est, const ProtocolParams& base,
                                    std::vector<std::string>* warnings) {
    auto warn = [&](const char* text) {
        if (warnings != nullptr) {
            warnings->emplace_back(text);
        }
    };
    ProtocolParams p = base;
    p.modulation_variance = std::max(est.modulation_variance.value, 1e-6);
    p.leakage = std::abs(est.leakage.value);
    p.channel_noise = std::max(est.channel_noise.value, 0.0);
    double eta = est.channel_transmittance.value;
    if (!(eta > 1e-9)) {
        warn("transmittance estimate raised to 1e-9");
        eta = 1e-9;
    }
    if (eta > 1.0) {
        warn("transmittance estimate capped at 1");
        eta = 1.0;
    }
    if (p.channel_noise > 0.0 && eta > 0.999) {
        warn("transmittance estimate capped at 0.999 because excess noise is non-zero");
        eta = 0.999;
    }
    p.channel_transmittance = eta;
    return p;
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
    case Verdict::consistent: return "consistent";
    case Verdict::overestimates_key: return "overestimates key";
    case Verdict::underestimates_key: return "underestimates key";
    }
    return "?";
}

ConsistencyReport end_to_end_consistency(const ProtocolParams& p, std::size_t n,
                                         std::uint64_t seed, const ConsistencyOptions& options) {
    if (p.prep_noise_shared > 0.0 || p.prep_noise_signal > 0.0) {
        throw Error(Errc::invalid_argument,
                    "moment estimators assume no trusted preparation noise (eps_P1 = eps_P2 = 0)");
    }
    const auto scheme = build_scheme(p);
    const std::vector<std::string> measured = {mode::alice, mode::bob, mode::leak};
    const auto batch = sample(scheme.state, measured, n, seed);

    EstimationOptions est_opts;
    est_opts.assume_no_leakage = options.assume_no_leakage;
    if (options.modulation_variance_known) {
        est_opts.known_modulation_variance = p.modulation_variance;
    }
    est_opts.detection_efficiency = p.detection_efficiency;
    est_opts.detection_noise = p.detection_noise;

    ConsistencyReport report;
    report.estimates = estimate_params(batch, est_opts);
    report.estimated_params = params_from_estimate(report.estimates, p, &report.estimates.warnings);
    report.true_rate = key_rate(p);
    report.estimated_rate = key_rate(report.estimated_params);

    // Delta method: Var(R) = g^T Cov(u) g / n with Cov(u_i, u_j) = 2 tr(W_i S W_j S)
    // for Gaussian X with second-moment matrix S.
    const auto cols = locate(batch, est_opts);
    const auto rows = static_cast<Eigen::Index>(n);
    const Moments centre = moments(batch.data, cols, 0, rows);
    Eigen::Matrix<double, Eigen::Dynamic, 6> x(rows, 6);
    const Eigen::Index order[6] = {cols.ax, cols.ap, cols.bx, cols.bp, cols.ex, cols.ep};
    for (int j = 0; j < 6; ++j) {
        x.col(j) = batch.data.col(order[j]);
    }
    const Eigen::Matrix<double, 6, 6> second = (x.transpose() * x) / static_cast<double>(rows);
    const auto w = moment_weights();
    Eigen::Matrix4d cov_u;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            cov_u(i, j) = 2.0 * (w[static_cast<std::size_t>(i)] * second *
                                 w[static_cast<std::size_t>(j)] * second)
                                    .trace();
        }
    }

    auto rates_at = [&](const std::array<double, 4>& m) {
        const RawEstimate raw = invert(Moments::from_array(m), est_opts);
        EstimateReport r;
        r.modulation_variance.value = raw.modulation_variance;
        r.leakage.value = raw.leakage;
        r.channel_transmittance.value = raw.transmittance;
        r.channel_noise.value = raw.noise;
        const auto k = key_rate(params_from_estimate(r, p));
        return std::array<double, 2>{k.rate_direct, k.rate_reverse};
    };
    Eigen::Vector4d grad_direct;
    Eigen::Vector4d grad_reverse;
    const auto m0 = centre.as_array();
    for (int i = 0; i < 4; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double h = 1e-5 * std::max(std::abs(m0[idx]), 1e-2);
        auto up = m0;
        auto down = m0;
        up[idx] += h;
        down[idx] -= h;
        const auto ru = rates_at(up);
        const auto rd = rates_at(down);
        grad_direct(i) = (ru[0] - rd[0]) / (2.0 * h);
        grad_reverse(i) = (ru[1] - rd[1]) / (2.0 * h);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    report.rate_error_direct = std::sqrt(grad_direct.dot(cov_u * grad_direct) * inv_n);
    report.rate_error_reverse = std::sqrt(grad_reverse.dot(cov_u * grad_reverse) * inv_n);
    report.tolerance_direct = options.tolerance_sigmas * report.rate_error_direct;
    report.tolerance_reverse = options.tolerance_sigmas * report.rate_error_reverse;

    const Verdict vd = report.verdict_in(Direction::direct);
    const Verdict vr = report.verdict_in(Direction::reverse);
    if (vd == Verdict::overestimates_key || vr == Verdict::overestimates_key) {
        report.verdict = Verdict::overestimates_key;
    } else if (vd == Verdict::underestimates_key || vr == Verdict::underestimates_key) {
        report.verdict = Verdict::underestimates_key;
    } else {
        report.verdict = Verdict::consistent;
    }
    return report;
}

} // namespace cvql
