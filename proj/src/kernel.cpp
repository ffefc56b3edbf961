#include "evgp/kernel.hpp"

#include <cmath>
#include <string>

#include "evgp/errors.hpp"

namespace evgp {

namespace {

void check_dim(Eigen::Index got, const SeKernelParams& params, const char* what) {
    if (got != params.input_dim())
        throw DimensionMismatch(std::string(what) + ": input dim " + std::to_string(got) + ", kernel expects " +
                                std::to_string(params.input_dim()));
}

}  // namespace

SeKernelParams SeKernelParams::isotropic(Eigen::Index dim, double lengthscale, double signal_variance) {
    return {Vector::Constant(dim, std::log(lengthscale)), std::log(signal_variance)};
}

SeKernelParams SeKernelParams::from_data(const Matrix& x, double target_variance) {
    SeKernelParams params;
    params.log_lengthscales.resize(x.cols());
    for (Eigen::Index d = 0; d < x.cols(); ++d) {
        const auto col = x.col(d).array();
        const double var = (col - col.mean()).square().mean();
        // A constant column would give ℓ = 0; fall back to unit scale.
        params.log_lengthscales(d) = var > 1e-12 ? 0.5 * std::log(var) : 0.0;
    }
    params.log_signal_variance = std::log(target_variance > 1e-12 ? target_variance : 1.0);
    return params;
}

double se_kernel(const Vector& x, const Vector& x2, const SeKernelParams& params) {
    check_dim(x.size(), params, "se_kernel");
    check_dim(x2.size(), params, "se_kernel");
    const double r2 = ((x - x2).array() / params.lengthscales().array()).square().sum();
    return params.signal_variance() * std::exp(-0.5 * r2);
}

Matrix kernel_matrix(const Matrix& xa, const Matrix& xb, const SeKernelParams& params) {
    check_dim(xa.cols(), params, "kernel_matrix");
    check_dim(xb.cols(), params, "kernel_matrix");
    const Vector inv_ell = (-params.log_lengthscales).array().exp();
    const Matrix sa = xa * inv_ell.asDiagonal();
    const Matrix sb = xb * inv_ell.asDiagonal();
    Matrix k(xa.rows(), xb.rows());
    const double sf2 = params.signal_variance();
    for (Eigen::Index j = 0; j < sb.rows(); ++j)
        for (Eigen::Index i = 0; i < sa.rows(); ++i)
            k(i, j) = sf2 * std::exp(-0.5 * (sa.row(i) - sb.row(j)).squaredNorm());
    return k;
}

Vector kernel_diag(const Matrix& x, const SeKernelParams& params) {
    check_dim(x.cols(), params, "kernel_diag");
    return Vector::Constant(x.rows(), params.signal_variance());
}

Vector se_kernel_grad(const Vector& x, const Vector& x2, const SeKernelParams& params) {
    const double k = se_kernel(x, x2, params);
    const auto d = params.input_dim();
    Vector grad(d + 1);
    grad.head(d) = k * ((x - x2).array() / params.lengthscales().array()).square();
    grad(d) = k;
    return grad;
}

}  // namespace evgp
