#pragma once

// Zero-mean multimode Gaussian states in shot-noise units (vacuum variance = 1).
//
// A CovMatrix holds a 2N x 2N covariance matrix ordered (x_1, p_1, ..., x_N, p_N)
// together with one opaque label per mode. All operations are free functions
// returning new values; nothing here mutates shared state.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvql/errors.hpp"

namespace cvql {

using Matrix = Eigen::MatrixXd;

class CovMatrix {
public:
    CovMatrix() = default;

    // Validates dimension (2 x labels), label uniqueness and symmetry to 1e-10
    // relative; stores the symmetrised matrix.
    CovMatrix(std::vector<std::string> modes, Matrix data);

    const std::vector<std::string>& modes() const noexcept { return modes_; }
    const Matrix& data() const noexcept { return data_; }
    std::size_t mode_count() const noexcept { return modes_.size(); }

    bool has_mode(std::string_view label) const noexcept;
    // Throws Errc::missing_mode.
    std::size_t index_of(std::string_view label) const;

    // 2x2 block between two modes (same mode gives the local covariance).
    Eigen::Matrix2d block(std::string_view row_mode, std::string_view col_mode) const;

    double x_variance(std::string_view mode) const;
    double p_variance(std::string_view mode) const;

private:
    std::vector<std::string> modes_;
    Matrix data_;
};

struct SymplecticEigenvalues {
    std::vector<double> values; // sorted descending
    double min() const;
};

// 2x2 identity and sigma_z = diag(1, -1) used for EPR correlations.
Eigen::Matrix2d identity2();
Eigen::Matrix2d sigma_z();

CovMatrix vacuum(std::size_t n);
CovMatrix vacuum(std::vector<std::string> labels);
// Single-mode thermal state diag(V, V).
CovMatrix thermal(double variance, std::string label);
// Two-mode squeezed vacuum with local variance V on (mode_a, mode_b).
CovMatrix epr_source(double variance, std::string mode_a = "A", std::string mode_b = "B");

// Block-diagonal concatenation of two uncorrelated states.
CovMatrix direct_sum(const CovMatrix& first, const CovMatrix& second);

// Congruence by an arbitrary 2k x 2k symplectic acting on the listed modes.
CovMatrix apply_symplectic(const CovMatrix& state, std::span<const std::string> modes,
                           const Matrix& symplectic);

CovMatrix beamsplitter(const CovMatrix& state, std::string_view mode_a, std::string_view mode_b,
                       double transmittance);

struct ChannelModeLabels {
    std::string kept = "E1";     // interacts with the signal
    std::string purifier = "E2"; // purifies the noise source
};

// Lossy, noisy channel in entangling-cloner form. Output variance on `mode` is
// eta * V + (1 - eta) + noise. eta = 1 with noise = 0 is the identity.
CovMatrix loss_excess_channel(const CovMatrix& state, std::string_view mode, double transmittance,
                              double excess_noise, const ChannelModeLabels& labels = {});

CovMatrix partial_trace(const CovMatrix& state, std::span<const std::string> keep);
CovMatrix partial_trace(const CovMatrix& state, std::initializer_list<std::string> keep);

// State of the remaining modes after heterodyne detection of `measured_mode`
// (outcome independent): gamma_k - C (gamma_m + 1)^-1 C^T.
CovMatrix heterodyne_condition(const CovMatrix& state, std::string_view measured_mode);

SymplecticEigenvalues symplectic_eigenvalues(const CovMatrix& state);
SymplecticEigenvalues symplectic_eigenvalues(const Matrix& covariance);

// g(nu) in bits; 0 for nu <= 1 + 1e-9.
double entropy_g(double nu);

// Sum of g over symplectic eigenvalues. Values in [1 - 1e-6, 1) are clamped,
// anything smaller throws Errc::unphysical_state.
double von_neumann_entropy(const CovMatrix& state);
double von_neumann_entropy(const SymplecticEigenvalues& spectrum);

// Throws Errc::unphysical_state if any symplectic eigenvalue < 1 - tolerance.
void require_physical(const CovMatrix& state, double tolerance = 1e-9);

// Diagnostic hook: while an audit is alive on the current thread, every state
// returned by the operations above has its smallest symplectic eigenvalue
// recorded, and callers can register states that must be globally pure.
class PhysicalityAudit {
public:
    PhysicalityAudit();
    ~PhysicalityAudit();
    PhysicalityAudit(const PhysicalityAudit&) = delete;
    PhysicalityAudit& operator=(const PhysicalityAudit&) = delete;

    std::size_t states_checked() const noexcept { return states_checked_; }
    double min_symplectic() const noexcept { return min_symplectic_; }
    std::size_t pure_checked() const noexcept { return pure_checked_; }
    double max_pure_entropy() const noexcept { return max_pure_entropy_; }

    // No-ops when no audit is active.
    static void record(const CovMatrix& state);
    static void record_pure(const CovMatrix& state);
    static bool active() noexcept;

private:
    PhysicalityAudit* previous_ = nullptr;
    std::size_t states_checked_ = 0;
    double min_symplectic_ = 1e300;
    std::size_t pure_checked_ = 0;
    double max_pure_entropy_ = 0.0;
};

} // namespace cvql
