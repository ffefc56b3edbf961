#pragma once

#include <vector>

#include "evgp/features.hpp"
#include "evgp/gaussian.hpp"
#include "evgp/kernel.hpp"

namespace evgp {

/// Lower-triangular factor with softplus-mapped diagonal. The raw matrix is
/// unconstrained, so any gradient step keeps L·Lᵀ positive definite.
struct TriangularFactor {
    Matrix raw;

    Eigen::Index dim() const { return raw.rows(); }
    Matrix factor() const;
    Matrix matrix() const;
    PsdMatrix psd() const { return PsdMatrix(factor(), 0.0); }

    static TriangularFactor from_factor(const Matrix& lower);
    static TriangularFactor from_matrix(const Matrix& m);
};

double softplus(double x);
double softplus_inverse(double y);

/// Extra diagonal on K_mm, relative to the signal variance.
inline constexpr double kInducingJitter = 1e-6;

/// Variational posterior for one output: q(f_m) = N(a, A), q(β) = N(b, B),
/// plus inducing inputs and kernel/noise hyperparameters.
struct VariationalState {
    Vector a;
    TriangularFactor a_cov;
    Vector b;
    TriangularFactor b_cov;
    Matrix inducing;  // m × input_dim
    SeKernelParams kernel;
    double log_noise_variance = 0.0;

    Eigen::Index num_inducing() const { return inducing.rows(); }
    Eigen::Index num_features() const { return b.size(); }
    Eigen::Index input_dim() const { return kernel.input_dim(); }
    double noise_variance() const { return std::exp(log_noise_variance); }

    /// Throws DimensionMismatch if fields disagree in size.
    void validate() const;
};

struct BetaPriorRow {
    Vector mean;
    PsdMatrix cov;
};

BetaPriorRow prior_row(const BetaPrior& prior, Eigen::Index output);

struct GaussianPrediction {
    Vector mean;
    Vector var;  // always the covariance diagonal
    Matrix cov;  // full covariance, empty when requested diag-only
    bool includes_observation_noise = false;

    bool has_full_cov() const { return cov.size() > 0; }
};

/// Unscaled pieces of the negative ELBO for one batch.
struct ElboTerms {
    Eigen::Index batch_size = 0;
    double noise_variance = 1.0;
    double log_norm = 0.0;     // ½·n·log(2πσ²)
    double sq_residual = 0.0;  // ‖y − H b − K_xm K_mm⁻¹ a‖²
    double trace_a = 0.0;      // Tr(Wᵀ W A), W = K_xm K_mm⁻¹
    double trace_b = 0.0;      // Tr(Hᵀ H B)
    double trace_f = 0.0;      // Σ diag(K_xx − K_xm K_mm⁻¹ K_mx)
    double kl_f = 0.0;
    double kl_beta = 0.0;
    double jitter = 0.0;

    /// −log N(y | mean, σ²I) + ½[Tr(M₁A) + Tr(M₂B) + Tr(Σ_y⁻¹Σ_f|ω)] for this batch.
    double data_term() const {
        return log_norm + 0.5 * (sq_residual + trace_a + trace_b + trace_f) / noise_variance;
    }
    double kl() const { return kl_f + kl_beta; }
    /// Minibatch loss: data term per batch sample plus KL per dataset sample.
    double loss(Eigen::Index full_dataset_size) const {
        return data_term() / static_cast<double>(batch_size) + kl() / static_cast<double>(full_dataset_size);
    }
};

ElboTerms elbo_terms(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map, const Matrix& x,
                     const Vector& y);

/// Scaled negative ELBO of a minibatch (x, y) drawn from a dataset of full_dataset_size rows.
double negative_elbo(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map, const Matrix& x,
                     const Vector& y, Eigen::Index full_dataset_size);

/// Predictive distribution of the denoised output, or of y when with_noise is set.
GaussianPrediction predict(const VariationalState& state, const FeatureMap& map, const Matrix& x_star,
                           bool with_noise = false, bool diag_only = true);

/// Independent per-output predictions, in output order.
std::vector<GaussianPrediction> multi_output_predict(const std::vector<VariationalState>& states, const FeatureMap& map,
                                                     const Matrix& x_star, bool with_noise = false,
                                                     bool diag_only = true);

/// K_mm + kInducingJitter·σ²·I.
Matrix inducing_kernel(const Matrix& inducing, const SeKernelParams& kernel);

/// Posterior equal to the prior: a = 0, A = K_mm, b = μ_β, B = Σ_β.
VariationalState prior_state(const Matrix& inducing, const SeKernelParams& kernel, double log_noise_variance,
                             const BetaPriorRow& prior);

/// Trainable scalar count of one state (factors count their triangles).
Eigen::Index parameter_count(const VariationalState& state);

}  // namespace evgp
