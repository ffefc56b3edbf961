#pragma once

#include <optional>

#include "evgp/features.hpp"
#include "evgp/kernel.hpp"
#include "evgp/model.hpp"

namespace evgp {

/// Explicit mean h(x)ᵀβ with a Gaussian prior on β.
struct ExplicitMean {
    FeatureMap map;
    BetaPriorRow prior;
};

/// Exact GP (or GP with explicit features) regression on a small dataset.
/// Used to check the sparse variational model; refuses more than kMaxRows rows.
class ExactFit {
public:
    static constexpr Eigen::Index kMaxRows = 2000;

    ExactFit(Matrix x, Vector y, SeKernelParams kernel, double noise_variance,
             std::optional<ExplicitMean> explicit_mean = std::nullopt);

    const Matrix& x() const { return x_; }
    const Vector& y() const { return y_; }
    const SeKernelParams& kernel() const { return kernel_; }
    double noise_variance() const { return noise_; }
    const std::optional<ExplicitMean>& explicit_mean() const { return mean_; }
    Eigen::Index num_features() const { return mean_ ? mean_->map.feature_dim : 0; }

    /// Cholesky of K_xx + σ²I.
    const PsdMatrix& ky() const { return ky_; }

private:
    Matrix x_;
    Vector y_;
    SeKernelParams kernel_;
    double noise_;
    std::optional<ExplicitMean> mean_;
    PsdMatrix ky_;
};

/// Zero-mean GP posterior of the latent function. Requires a fit without features.
GaussianPrediction exact_gp_posterior(const ExactFit& fit, const Matrix& x_star, bool diag_only = false);

/// Posterior of g(x) = h(x)ᵀβ + f(x) with β ~ N(μ_β, Σ_β) integrated out.
/// Reduces to exact_gp_posterior when the feature map is empty.
GaussianPrediction exact_egp_posterior(const ExactFit& fit, const Matrix& x_star, bool diag_only = false);

/// log p(y | X), with β marginalized when features are present.
double exact_log_marginal(const ExactFit& fit);

}  // namespace evgp
