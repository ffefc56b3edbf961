#pragma once

#include "evgp/gaussian.hpp"

namespace evgp {

/// Squared-exponential kernel with one lengthscale per input dimension.
/// Parameters are kept in log space so they can be optimized unconstrained.
struct SeKernelParams {
    Vector log_lengthscales;
    double log_signal_variance = 0.0;

    Eigen::Index input_dim() const { return log_lengthscales.size(); }
    Vector lengthscales() const { return log_lengthscales.array().exp(); }
    double signal_variance() const { return std::exp(log_signal_variance); }

    static SeKernelParams isotropic(Eigen::Index dim, double lengthscale, double signal_variance);
    /// log ℓ_d = log std of column d of X, log σ² = log of target variance.
    static SeKernelParams from_data(const Matrix& x, double target_variance);
};

double se_kernel(const Vector& x, const Vector& x2, const SeKernelParams& params);

/// Entry (i,j) is se_kernel(row i of xa, row j of xb).
Matrix kernel_matrix(const Matrix& xa, const Matrix& xb, const SeKernelParams& params);

Vector kernel_diag(const Matrix& x, const SeKernelParams& params);

/// d se_kernel / d[log ℓ_1..log ℓ_D, log σ²].
Vector se_kernel_grad(const Vector& x, const Vector& x2, const SeKernelParams& params);

}  // namespace evgp
