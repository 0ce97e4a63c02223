#include "cvql/gaussian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <unordered_set>

namespace cvql {

namespace {

thread_local PhysicalityAudit* current_audit = nullptr;

constexpr double symmetry_tolerance = 1e-10;
constexpr double imaginary_tolerance = 1e-8;
constexpr double entropy_clamp = 1e-6;

std::string join_missing(std::string_view label) {
    return "mode '" + std::string(label) + "' not present";
}

CovMatrix finish(CovMatrix state) {
    PhysicalityAudit::record(state);
    return state;
}

} // namespace

// ---------------------------------------------------------------------------
// CovMatrix

CovMatrix::CovMatrix(std::vector<std::string> modes, Matrix data)
    : modes_(std::move(modes)), data_(std::move(data)) {
    const auto dim = static_cast<Eigen::Index>(2 * modes_.size());
    if (data_.rows() != dim || data_.cols() != dim) {
        throw Error(Errc::invalid_argument,
                    "covariance matrix is " + std::to_string(data_.rows()) + "x" +
                        std::to_string(data_.cols()) + " but " + std::to_string(modes_.size()) +
                        " mode labels were given");
    }
    std::unordered_set<std::string> seen;
    for (const auto& m : modes_) {
        if (!seen.insert(m).second) {
            throw Error(Errc::duplicate_mode, "mode label '" + m + "' appears twice");
        }
    }
    if (!data_.allFinite()) {
        throw Error(Errc::numerical_error, "covariance matrix has non-finite entries");
    }
    const double scale = std::max(1.0, data_.cwiseAbs().maxCoeff());
    const double asym = (data_ - data_.transpose()).cwiseAbs().maxCoeff();
    if (asym > symmetry_tolerance * scale) {
        throw Error(Errc::not_symmetric, "asymmetry " + std::to_string(asym));
    }
    data_ = 0.5 * (data_ + data_.transpose()).eval();
}

bool CovMatrix::has_mode(std::string_view label) const noexcept {
    return std::find(modes_.begin(), modes_.end(), label) != modes_.end();
}

std::size_t CovMatrix::index_of(std::string_view label) const {
    auto it = std::find(modes_.begin(), modes_.end(), label);
    if (it == modes_.end()) {
        throw Error(Errc::missing_mode, join_missing(label));
    }
    return static_cast<std::size_t>(it - modes_.begin());
}

Eigen::Matrix2d CovMatrix::block(std::string_view row_mode, std::string_view col_mode) const {
    const auto r = static_cast<Eigen::Index>(2 * index_of(row_mode));
    const auto c = static_cast<Eigen::Index>(2 * index_of(col_mode));
    return data_.block<2, 2>(r, c);
}

double CovMatrix::x_variance(std::string_view mode) const { return block(mode, mode)(0, 0); }

double CovMatrix::p_variance(std::string_view mode) const { return block(mode, mode)(1, 1); }

double SymplecticEigenvalues::min() const {
    if (values.empty()) {
        throw Error(Errc::invalid_argument, "empty symplectic spectrum");
    }
    return values.back();
}

// ---------------------------------------------------------------------------
// Constructors

Eigen::Matrix2d identity2() { return Eigen::Matrix2d::Identity(); }

Eigen::Matrix2d sigma_z() {
    Eigen::Matrix2d z;
    z << 1.0, 0.0, 0.0, -1.0;
    return z;
}

CovMatrix vacuum(std::size_t n) {
    if (n == 0) {
        throw Error(Errc::invalid_argument, "vacuum needs at least one mode");
    }
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back("m" + std::to_string(i));
    }
    return vacuum(std::move(labels));
}

CovMatrix vacuum(std::vector<std::string> labels) {
    if (labels.empty()) {
        throw Error(Errc::invalid_argument, "vacuum needs at least one mode");
    }
    const auto dim = static_cast<Eigen::Index>(2 * labels.size());
    return finish(CovMatrix(std::move(labels), Matrix::Identity(dim, dim)));
}

CovMatrix thermal(double variance, std::string label) {
    if (!(variance >= 1.0)) {
        throw Error(Errc::unphysical_variance,
                    "thermal variance " + std::to_string(variance) + " < 1");
    }
    return finish(CovMatrix({std::move(label)}, variance * Matrix::Identity(2, 2)));
}

CovMatrix epr_source(double variance, std::string mode_a, std::string mode_b) {
    if (!(variance >= 1.0)) {
        throw Error(Errc::unphysical_variance, "EPR variance " + std::to_string(variance) + " < 1");
    }
    const double corr = std::sqrt(variance * variance - 1.0);
    Matrix g(4, 4);
    g.block<2, 2>(0, 0) = variance * identity2();
    g.block<2, 2>(2, 2) = variance * identity2();
    g.block<2, 2>(0, 2) = corr * sigma_z();
    g.block<2, 2>(2, 0) = corr * sigma_z();
    return finish(CovMatrix({std::move(mode_a), std::move(mode_b)}, std::move(g)));
}

CovMatrix direct_sum(const CovMatrix& first, const CovMatrix& second) {
    std::vector<std::string> modes = first.modes();
    modes.insert(modes.end(), second.modes().begin(), second.modes().end());
    const auto n1 = first.data().rows();
    const auto n2 = second.data().rows();
    Matrix g = Matrix::Zero(n1 + n2, n1 + n2);
    g.topLeftCorner(n1, n1) = first.data();
    g.bottomRightCorner(n2, n2) = second.data();
    return finish(CovMatrix(std::move(modes), std::move(g)));
}

// ---------------------------------------------------------------------------
// Transformations

CovMatrix apply_symplectic(const CovMatrix& state, std::span<const std::string> modes,
                           const Matrix& symplectic) {
    const auto k = static_cast<Eigen::Index>(2 * modes.size());
    if (symplectic.rows() != k || symplectic.cols() != k) {
        throw Error(Errc::invalid_argument, "symplectic size does not match mode list");
    }
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(k));
    for (const auto& m : modes) {
        const auto i = static_cast<Eigen::Index>(state.index_of(m));
        if (std::find(idx.begin(), idx.end(), 2 * i) != idx.end()) {
            throw Error(Errc::duplicate_mode, "mode '" + m + "' listed twice");
        }
        idx.push_back(2 * i);
        idx.push_back(2 * i + 1);
    }
    const auto n = state.data().rows();
    Matrix full = Matrix::Identity(n, n);
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
            full(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]) =
                symplectic(r, c);
        }
    }
    Matrix g = full * state.data() * full.transpose();
    return finish(CovMatrix(state.modes(), std::move(g)));
}

CovMatrix beamsplitter(const CovMatrix& state, std::string_view mode_a, std::string_view mode_b,
                       double transmittance) {
    if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
        throw Error(Errc::invalid_argument,
                    "beamsplitter transmittance " + std::to_string(transmittance) +
                        " outside [0, 1]");
    }
    // Validate labels even for the identity case.
    (void)state.index_of(mode_a);
    (void)state.index_of(mode_b);
    if (mode_a == mode_b) {
        throw Error(Errc::duplicate_mode, "beamsplitter needs two distinct modes");
    }
    if (transmittance == 1.0) {
        return state;
    }
    const double t = std::sqrt(transmittance);
    const double r = std::sqrt(1.0 - transmittance);
    Matrix s(4, 4);
    s.block<2, 2>(0, 0) = t * identity2();
    s.block<2, 2>(0, 2) = r * identity2();
    s.block<2, 2>(2, 0) = -r * identity2();
    s.block<2, 2>(2, 2) = t * identity2();
    const std::string modes[2] = {std::string(mode_a), std::string(mode_b)};
    return apply_symplectic(state, modes, s);
}

CovMatrix loss_excess_channel(const CovMatrix& state, std::string_view mode, double transmittance,
                              double excess_noise, const ChannelModeLabels& labels) {
    (void)state.index_of(mode);
    if (!(transmittance > 0.0 && transmittance <= 1.0)) {
        throw Error(Errc::invalid_argument,
                    "channel transmittance " + std::to_string(transmittance) + " outside (0, 1]");
    }
    if (!(excess_noise >= 0.0)) {
        throw Error(Errc::invalid_argument,
                    "channel excess noise " + std::to_string(excess_noise) + " < 0");
    }
    if (transmittance == 1.0) {
        if (excess_noise > 0.0) {
            throw Error(Errc::invalid_argument,
                        "excess noise without loss has no entangling-cloner purification; "
                        "use transmittance <= 0.999");
        }
        return state;
    }
    if (state.has_mode(labels.kept) || state.has_mode(labels.purifier)) {
        throw Error(Errc::duplicate_mode, "channel labels already in use");
    }
    const double cloner_variance = 1.0 + excess_noise / (1.0 - transmittance);
    auto joint = direct_sum(state, epr_source(cloner_variance, labels.kept, labels.purifier));
    return beamsplitter(joint, mode, labels.kept, transmittance);
}

CovMatrix partial_trace(const CovMatrix& state, std::span<const std::string> keep) {
    if (keep.empty()) {
        throw Error(Errc::invalid_argument, "partial trace must keep at least one mode");
    }
    std::vector<Eigen::Index> idx;
    idx.reserve(2 * keep.size());
    std::unordered_set<std::string_view> seen;
    for (const auto& m : keep) {
        if (!seen.insert(m).second) {
            throw Error(Errc::duplicate_mode, "mode '" + m + "' kept twice");
        }
        const auto i = static_cast<Eigen::Index>(state.index_of(m));
        idx.push_back(2 * i);
        idx.push_back(2 * i + 1);
    }
    const auto k = static_cast<Eigen::Index>(idx.size());
    Matrix g(k, k);
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
            g(r, c) = state.data()(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
        }
    }
    return finish(CovMatrix(std::vector<std::string>(keep.begin(), keep.end()), std::move(g)));
}

CovMatrix partial_trace(const CovMatrix& state, std::initializer_list<std::string> keep) {
    return partial_trace(state, std::span<const std::string>(keep.begin(), keep.size()));
}

CovMatrix heterodyne_condition(const CovMatrix& state, std::string_view measured_mode) {
    const auto m = state.index_of(measured_mode);
    if (state.mode_count() < 2) {
        throw Error(Errc::invalid_argument, "heterodyne conditioning needs a remaining mode");
    }
    std::vector<std::string> kept;
    for (const auto& label : state.modes()) {
        if (label != measured_mode) {
            kept.push_back(label);
        }
    }
    const auto n = state.data().rows();
    const auto mi = static_cast<Eigen::Index>(2 * m);
    std::vector<Eigen::Index> kidx;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i != mi && i != mi + 1) {
            kidx.push_back(i);
        }
    }
    const auto k = static_cast<Eigen::Index>(kidx.size());
    Matrix kept_block(k, k);
    Matrix corr(k, 2);
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
            kept_block(r, c) = state.data()(kidx[static_cast<std::size_t>(r)],
                                            kidx[static_cast<std::size_t>(c)]);
        }
        corr(r, 0) = state.data()(kidx[static_cast<std::size_t>(r)], mi);
        corr(r, 1) = state.data()(kidx[static_cast<std::size_t>(r)], mi + 1);
    }
    const Eigen::Matrix2d measured = state.data().block<2, 2>(mi, mi) + identity2();
    Eigen::LLT<Eigen::Matrix2d> llt(measured);
    if (llt.info() != Eigen::Success || measured.determinant() <= 1e-300) {
        throw Error(Errc::numerically_singular,
                    "gamma_meas + 1 is not positive definite for mode '" +
                        std::string(measured_mode) + "'");
    }
    Matrix g = kept_block - corr * llt.solve(corr.transpose());
    return finish(CovMatrix(std::move(kept), std::move(g)));
}

// ---------------------------------------------------------------------------
// Spectra and entropies

SymplecticEigenvalues symplectic_eigenvalues(const Matrix& covariance) {
    const auto dim = covariance.rows();
    if (dim == 0 || dim % 2 != 0 || covariance.cols() != dim) {
        throw Error(Errc::invalid_argument, "covariance matrix must be 2N x 2N");
    }
    const Matrix sym = 0.5 * (covariance + covariance.transpose());
    Matrix omega = Matrix::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; i += 2) {
        omega(i, i + 1) = 1.0;
        omega(i + 1, i) = -1.0;
    }
    const Eigen::MatrixXcd m = std::complex<double>(0.0, 1.0) * (omega * sym).cast<std::complex<double>>();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw Error(Errc::numerical_error, "eigen-solver failed on i*Omega*gamma");
    }
    const auto& ev = solver.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    std::vector<double> mags;
    mags.reserve(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (std::abs(ev(i).imag()) > imaginary_tolerance * scale) {
            throw Error(Errc::not_symmetric,
                        "i*Omega*gamma has eigenvalue with imaginary part " +
                            std::to_string(ev(i).imag()));
        }
        mags.push_back(std::abs(ev(i).real()));
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());
    SymplecticEigenvalues out;
    out.values.reserve(mags.size() / 2);
    // Eigenvalues come in +/- nu pairs.
    for (std::size_t i = 0; i < mags.size(); i += 2) {
        out.values.push_back(0.5 * (mags[i] + mags[i + 1]));
    }
    return out;
}

SymplecticEigenvalues symplectic_eigenvalues(const CovMatrix& state) {
    return symplectic_eigenvalues(state.data());
}

double entropy_g(double nu) {
    if (nu <= 1.0 + 1e-9) {
        return 0.0;
    }
    const double plus = 0.5 * (nu + 1.0);
    const double minus = 0.5 * (nu - 1.0);
    return plus * std::log2(plus) - minus * std::log2(minus);
}

double von_neumann_entropy(const SymplecticEigenvalues& spectrum) {
    double s = 0.0;
    for (double nu : spectrum.values) {
        if (nu < 1.0 - entropy_clamp) {
            throw Error(Errc::unphysical_state,
                        "symplectic eigenvalue " + std::to_string(nu) + " below 1");
        }
        s += entropy_g(std::max(nu, 1.0));
    }
    return s;
}

double von_neumann_entropy(const CovMatrix& state) {
    return von_neumann_entropy(symplectic_eigenvalues(state));
}

void require_physical(const CovMatrix& state, double tolerance) {
    const double nu = symplectic_eigenvalues(state).min();
    if (nu < 1.0 - tolerance) {
        throw Error(Errc::unphysical_state,
                    "smallest symplectic eigenvalue " + std::to_string(nu));
    }
}

// ---------------------------------------------------------------------------
// Audit

PhysicalityAudit::PhysicalityAudit() : previous_(current_audit) { current_audit = this; }

PhysicalityAudit::~PhysicalityAudit() {
    current_audit = previous_;
    if (previous_ != nullptr) {
        previous_->states_checked_ += states_checked_;
        previous_->min_symplectic_ = std::min(previous_->min_symplectic_, min_symplectic_);
        previous_->pure_checked_ += pure_checked_;
        previous_->max_pure_entropy_ = std::max(previous_->max_pure_entropy_, max_pure_entropy_);
    }
}

bool PhysicalityAudit::active() noexcept { return current_audit != nullptr; }

void PhysicalityAudit::record(const CovMatrix& state) {
    auto* audit = current_audit;
    if (audit == nullptr) {
        return;
    }
    const double nu = symplectic_eigenvalues(state).min();
    audit->states_checked_ += 1;
    audit->min_symplectic_ = std::min(audit->min_symplectic_, nu);
}

void PhysicalityAudit::record_pure(const CovMatrix& state) {
    auto* audit = current_audit;
    if (audit == nullptr) {
        return;
    }
    const double s = von_neumann_entropy(state);
    audit->pure_checked_ += 1;
    audit->max_pure_entropy_ = std::max(audit->max_pure_entropy_, s);
}

} // namespace cvql
