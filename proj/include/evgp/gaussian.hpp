#pragma once

#include <Eigen/Dense>

namespace evgp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Jitter values tried in order when a factorization fails.
inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};
inline constexpr double kDefaultJitterMax = 1e-4;

/// Symmetric positive-definite matrix held through its lower Cholesky factor.
/// The represented matrix is L·Lᵀ = M + jitter·I for the M it was built from.
class PsdMatrix {
public:
    PsdMatrix() = default;
    PsdMatrix(Matrix lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {}

    Eigen::Index dim() const { return lower_.rows(); }
    const Matrix& lower() const { return lower_; }
    double jitter_applied() const { return jitter_; }

    Matrix matrix() const { return lower_ * lower_.transpose(); }
    double log_det() const { return 2.0 * lower_.diagonal().array().log().sum(); }

    /// Solves (L·Lᵀ) X = B.
    Matrix solve(const Matrix& rhs) const;
    Vector solve(const Vector& rhs) const;
    /// L⁻¹·B, the half solve used for quadratic forms.
    Matrix half_solve(const Matrix& rhs) const;

private:
    Matrix lower_;
    double jitter_ = 0.0;
};

struct MvnParams {
    Vector mean;
    PsdMatrix cov;
};

bool is_symmetric(const Matrix& m, double tol = 1e-10);

/// Cholesky with a jitter ladder. Throws NotSymmetric or NotPsdWithinJitter.
PsdMatrix cholesky_psd(const Matrix& m, double jitter_max = kDefaultJitterMax);

/// PsdMatrix from a diagonal of strictly positive variances.
PsdMatrix diagonal_psd(const Vector& variances);

/// D_KL(q ‖ p) for multivariate normals, evaluated through Cholesky factors.
double kl_mvn(const MvnParams& q, const MvnParams& p);

/// Log density of independent normals; sums over entries.
double mvn_log_density(const Vector& y, const Vector& mean, const Vector& cov_diag);

}  // namespace evgp
