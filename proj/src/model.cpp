#include "evgp/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "elbo_forward.hpp"
#include "evgp/errors.hpp"

namespace evgp {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
    if (!(y > 0.0)) throw NonPositiveVariance("softplus_inverse of " + std::to_string(y));
    return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

Matrix TriangularFactor::factor() const {
    Matrix l = raw.triangularView<Eigen::StrictlyLower>();
    for (Eigen::Index i = 0; i < raw.rows(); ++i) l(i, i) = softplus(raw(i, i));
    return l;
}

Matrix TriangularFactor::matrix() const {
    const Matrix l = factor();
    return l * l.transpose();
}

TriangularFactor TriangularFactor::from_factor(const Matrix& lower) {
    Matrix raw = lower.triangularView<Eigen::StrictlyLower>();
    for (Eigen::Index i = 0; i < lower.rows(); ++i) raw(i, i) = softplus_inverse(lower(i, i));
    return {raw};
}

TriangularFactor TriangularFactor::from_matrix(const Matrix& m) {
    if (m.size() == 0) return {Matrix(0, 0)};
    return from_factor(cholesky_psd(m).lower());
}

void VariationalState::validate() const {
    const auto m = num_inducing();
    const auto p = num_features();
    if (a.size() != m || a_cov.dim() != m || a_cov.raw.cols() != m)
        throw DimensionMismatch("variational state: a/A sizes disagree with " + std::to_string(m) + " inducing points");
    if (b_cov.dim() != p || b_cov.raw.cols() != p)
        throw DimensionMismatch("variational state: B is " + std::to_string(b_cov.dim()) + ", b has " +
                                std::to_string(p) + " entries");
    if (m > 0 && inducing.cols() != kernel.input_dim())
        throw DimensionMismatch("variational state: inducing inputs have " + std::to_string(inducing.cols()) +
                                " columns, kernel has " + std::to_string(kernel.input_dim()));
    if (m == 0 && p == 0) throw DimensionMismatch("variational state needs inducing points or features");
}

BetaPriorRow prior_row(const BetaPrior& prior, Eigen::Index output) {
    if (output < 0 || output >= prior.outputs())
        throw DimensionMismatch("prior has " + std::to_string(prior.outputs()) + " outputs, asked for " +
                                std::to_string(output));
    return {prior.mean.row(output).transpose(), prior.cov[output]};
}

Matrix inducing_kernel(const Matrix& inducing, const SeKernelParams& kernel) {
    Matrix k = kernel_matrix(inducing, inducing, kernel);
    k.diagonal().array() += kInducingJitter * kernel.signal_variance();
    return k;
}

namespace detail {

ElboForward elbo_forward(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map,
                         const Matrix& x, const Vector& y) {
    state.validate();
    const auto n = x.rows();
    const auto m = state.num_inducing();
    const auto p = state.num_features();
    if (n < 1) throw DimensionMismatch("negative_elbo needs at least one sample");
    if (y.size() != n) throw DimensionMismatch("negative_elbo: x has " + std::to_string(n) + " rows, y has " +
                                               std::to_string(y.size()));
    if (x.cols() != state.input_dim()) throw DimensionMismatch("negative_elbo: x column count");
    if (map.feature_dim != p || prior.mean.size() != p || (p > 0 && prior.cov.dim() != p))
        throw DimensionMismatch("negative_elbo: feature map / prior / state feature counts disagree");

    ElboForward f;
    const double s = state.noise_variance();
    f.h = feature_matrix(map, x);
    f.lb = state.b_cov.factor();
    f.la = state.a_cov.factor();

    Vector mean = f.h * state.b;
    f.terms.trace_f = kernel_diag(x, state.kernel).sum();
    if (m > 0) {
        f.kxm = kernel_matrix(x, state.inducing, state.kernel);
        f.kmm = inducing_kernel(state.inducing, state.kernel);
        f.chol = cholesky_psd(f.kmm);
        f.kmm.diagonal().array() += f.chol.jitter_applied();
        f.v = f.chol.half_solve(f.kxm.transpose());
        f.w = f.chol.lower().transpose().triangularView<Eigen::Upper>().solve(f.v).transpose();
        mean += f.w * state.a;
        f.terms.trace_a = (f.w * f.la).squaredNorm();
        f.terms.trace_f -= f.v.squaredNorm();
        f.terms.jitter = f.chol.jitter_applied();
        f.terms.kl_f = kl_mvn({state.a, PsdMatrix(f.la, 0.0)}, {Vector::Zero(m), f.chol});
    }
    if (p > 0) {
        f.terms.trace_b = (f.h * f.lb).squaredNorm();
        f.terms.kl_beta = kl_mvn({state.b, PsdMatrix(f.lb, 0.0)}, {prior.mean, prior.cov});
    }
    f.residual = y - mean;
    f.terms.batch_size = n;
    f.terms.noise_variance = s;
    f.terms.log_norm = 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * s);
    f.terms.sq_residual = f.residual.squaredNorm();
    return f;
}

}  // namespace detail

ElboTerms elbo_terms(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map, const Matrix& x,
                     const Vector& y) {
    return detail::elbo_forward(state, prior, map, x, y).terms;
}

double negative_elbo(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map, const Matrix& x,
                     const Vector& y, Eigen::Index full_dataset_size) {
    if (full_dataset_size < x.rows())
        throw DimensionMismatch("full dataset size " + std::to_string(full_dataset_size) + " is below batch size " +
                                std::to_string(x.rows()));
    return elbo_terms(state, prior, map, x, y).loss(full_dataset_size);
}

GaussianPrediction predict(const VariationalState& state, const FeatureMap& map, const Matrix& x_star, bool with_noise,
                           bool diag_only) {
    state.validate();
    if (x_star.rows() < 1) throw DimensionMismatch("predict needs at least one query point");
    if (x_star.cols() != state.input_dim() || x_star.cols() != map.input_dim)
        throw DimensionMismatch("predict: query has " + std::to_string(x_star.cols()) + " columns, model expects " +
                                std::to_string(state.input_dim()));
    if (map.feature_dim != state.num_features()) throw DimensionMismatch("predict: feature map does not match state");

    GaussianPrediction out;
    const Matrix h = feature_matrix(map, x_star);
    const Matrix hl = h * state.b_cov.factor();
    out.mean = h * state.b;
    out.var = kernel_diag(x_star, state.kernel) + hl.rowwise().squaredNorm();
    if (!diag_only) {
        out.cov = kernel_matrix(x_star, x_star, state.kernel) + hl * hl.transpose();
    }
    if (state.num_inducing() > 0) {
        const Matrix kxm = kernel_matrix(x_star, state.inducing, state.kernel);
        const PsdMatrix chol = cholesky_psd(inducing_kernel(state.inducing, state.kernel));
        const Matrix v = chol.half_solve(kxm.transpose());
        const Matrix w = chol.lower().transpose().triangularView<Eigen::Upper>().solve(v).transpose();
        const Matrix wl = w * state.a_cov.factor();
        out.mean += w * state.a;
        out.var += wl.rowwise().squaredNorm() - v.colwise().squaredNorm().transpose();
        if (!diag_only) out.cov += wl * wl.transpose() - v.transpose() * v;
    }
    // Σ_f|ω is PSD in exact arithmetic; clip rounding below zero.
    out.var = out.var.cwiseMax(0.0);
    if (with_noise) {
        out.var.array() += state.noise_variance();
        if (!diag_only) out.cov.diagonal().array() += state.noise_variance();
        out.includes_observation_noise = true;
    }
    if (!diag_only) out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

std::vector<GaussianPrediction> multi_output_predict(const std::vector<VariationalState>& states, const FeatureMap& map,
                                                     const Matrix& x_star, bool with_noise, bool diag_only) {
    if (states.empty()) throw DimensionMismatch("multi_output_predict: no states");
    for (const auto& s : states)
        if (s.input_dim() != states.front().input_dim())
            throw DimensionMismatch("multi_output_predict: states disagree on input dimension");
    std::vector<GaussianPrediction> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(predict(s, map, x_star, with_noise, diag_only));
    return out;
}

VariationalState prior_state(const Matrix& inducing, const SeKernelParams& kernel, double log_noise_variance,
                             const BetaPriorRow& prior) {
    VariationalState s;
    const auto m = inducing.rows();
    s.inducing = inducing;
    s.kernel = kernel;
    s.log_noise_variance = log_noise_variance;
    s.a = Vector::Zero(m);
    s.a_cov = m > 0 ? TriangularFactor::from_factor(cholesky_psd(inducing_kernel(inducing, kernel)).lower())
                    : TriangularFactor{Matrix(0, 0)};
    s.b = prior.mean;
    s.b_cov = prior.mean.size() > 0 ? TriangularFactor::from_factor(prior.cov.lower()) : TriangularFactor{Matrix(0, 0)};
    return s;
}

Eigen::Index parameter_count(const VariationalState& state) {
    const auto m = state.num_inducing();
    const auto p = state.num_features();
    return m + m * (m + 1) / 2 + p + p * (p + 1) / 2 + m * state.input_dim() + state.kernel.input_dim() + 2;
}

}  // namespace evgp
