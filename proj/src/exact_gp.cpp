#include "evgp/exact_gp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "evgp/errors.hpp"

namespace evgp {

ExactFit::ExactFit(Matrix x, Vector y, SeKernelParams kernel, double noise_variance,
                   std::optional<ExplicitMean> explicit_mean)
    : x_(std::move(x)), y_(std::move(y)), kernel_(std::move(kernel)), noise_(noise_variance),
      mean_(std::move(explicit_mean)) {
    if (x_.rows() < 1 || x_.rows() != y_.size()) throw DimensionMismatch("ExactFit: x and y sizes");
    if (x_.rows() > kMaxRows)
        throw ConfigError("ExactFit is limited to " + std::to_string(kMaxRows) + " rows, got " +
                          std::to_string(x_.rows()));
    if (noise_ < 0.0) throw NonPositiveVariance("ExactFit noise variance");
    if (mean_) {
        const auto p = mean_->map.feature_dim;
        if (mean_->map.input_dim != x_.cols() || mean_->prior.mean.size() != p || (p > 0 && mean_->prior.cov.dim() != p))
            throw DimensionMismatch("ExactFit: explicit mean does not match inputs");
    }
    Matrix k = kernel_matrix(x_, x_, kernel_);
    k.diagonal().array() += noise_;
    ky_ = cholesky_psd(k, 0.0);
}

namespace {

GaussianPrediction gp_part(const ExactFit& fit, const Matrix& x_star, const Matrix& ks, bool diag_only) {
    GaussianPrediction out;
    const Matrix v = fit.ky().half_solve(ks.transpose());
    if (diag_only) {
        out.var = kernel_diag(x_star, fit.kernel()) - v.colwise().squaredNorm().transpose();
    } else {
        out.cov = kernel_matrix(x_star, x_star, fit.kernel()) - v.transpose() * v;
        out.var = out.cov.diagonal();
    }
    return out;
}

}  // namespace

GaussianPrediction exact_gp_posterior(const ExactFit& fit, const Matrix& x_star, bool diag_only) {
    if (fit.num_features() > 0) throw ConfigError("exact_gp_posterior needs a fit without explicit features");
    const Matrix ks = kernel_matrix(x_star, fit.x(), fit.kernel());
    GaussianPrediction out = gp_part(fit, x_star, ks, diag_only);
    out.mean = ks * fit.ky().solve(fit.y());
    return out;
}

GaussianPrediction exact_egp_posterior(const ExactFit& fit, const Matrix& x_star, bool diag_only) {
    if (fit.num_features() == 0) return exact_gp_posterior(fit, x_star, diag_only);
    const auto& em = *fit.explicit_mean();
    const Matrix h = feature_matrix(em.map, fit.x());
    const Matrix hs = feature_matrix(em.map, x_star);
    const Matrix ks = kernel_matrix(x_star, fit.x(), fit.kernel());

    // Whitened weights: β = μ_β + L_β w with w ~ N(0, I) a priori.
    const Matrix& lb = em.prior.cov.lower();
    const Matrix hw = h * lb;
    const Matrix kinv_hw = fit.ky().solve(hw);
    Matrix precision = hw.transpose() * kinv_hw;
    precision.diagonal().array() += 1.0;
    precision = 0.5 * (precision + precision.transpose());
    const PsdMatrix post = cholesky_psd(precision, 0.0);
    const Vector w = post.solve(Vector(kinv_hw.transpose() * (fit.y() - h * em.prior.mean)));
    const Vector beta = em.prior.mean + lb * w;

    GaussianPrediction out = gp_part(fit, x_star, ks, diag_only);
    out.mean = hs * beta + ks * fit.ky().solve(Vector(fit.y() - h * beta));
    const Matrix r = hs * lb - ks * kinv_hw;  // n* × p
    const Matrix rl = post.half_solve(r.transpose());
    if (diag_only) {
        out.var += rl.colwise().squaredNorm().transpose();
    } else {
        out.cov += rl.transpose() * rl;
        out.var = out.cov.diagonal();
    }
    return out;
}

double exact_log_marginal(const ExactFit& fit) {
    const auto n = fit.x().rows();
    Vector resid = fit.y();
    PsdMatrix cov = fit.ky();
    if (fit.num_features() > 0) {
        const auto& em = *fit.explicit_mean();
        const Matrix h = feature_matrix(em.map, fit.x());
        resid -= h * em.prior.mean;
        const Matrix hl = h * em.prior.cov.lower();
        Matrix c = kernel_matrix(fit.x(), fit.x(), fit.kernel()) + hl * hl.transpose();
        c.diagonal().array() += fit.noise_variance();
        cov = cholesky_psd(0.5 * (c + c.transpose()), 0.0);
    }
    return -0.5 * cov.half_solve(resid).squaredNorm() - 0.5 * cov.log_det() -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

}  // namespace evgp
