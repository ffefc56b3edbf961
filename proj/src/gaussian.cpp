#include "evgp/gaussian.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "evgp/errors.hpp"

namespace evgp {

Matrix PsdMatrix::solve(const Matrix& rhs) const {
    const auto l = lower_.triangularView<Eigen::Lower>();
    return l.transpose().solve(l.solve(rhs));
}

Vector PsdMatrix::solve(const Vector& rhs) const {
    const auto l = lower_.triangularView<Eigen::Lower>();
    return l.transpose().solve(l.solve(rhs));
}

Matrix PsdMatrix::half_solve(const Matrix& rhs) const {
    return lower_.triangularView<Eigen::Lower>().solve(rhs);
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

namespace {

// LLT accepts any positive pivot; pivots at rounding level are treated as failures.
bool try_factor(const Matrix& m, Matrix& lower) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
    lower = llt.matrixL();
    const double max_diag = m.diagonal().cwiseAbs().maxCoeff();
    const double floor = static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() * max_diag;
    const Vector pivots = lower.diagonal().array().square();
    return pivots.allFinite() && pivots.minCoeff() > floor;
}

}  // namespace

PsdMatrix cholesky_psd(const Matrix& m, double jitter_max) {
    if (m.rows() < 1 || m.rows() != m.cols())
        throw DimensionMismatch("cholesky_psd needs a non-empty square matrix, got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
    if (!is_symmetric(m)) throw NotSymmetric("cholesky_psd input");
    if (!m.allFinite()) throw NotPsdWithinJitter("matrix has non-finite entries");

    Matrix lower;
    for (double eps : kJitterLadder) {
        if (eps > jitter_max) break;
        Matrix shifted = m;
        shifted.diagonal().array() += eps;
        if (try_factor(shifted, lower)) return PsdMatrix(std::move(lower), eps);
    }
    throw NotPsdWithinJitter("dim " + std::to_string(m.rows()) + ", jitter_max " + std::to_string(jitter_max));
}

PsdMatrix diagonal_psd(const Vector& variances) {
    if ((variances.array() <= 0.0).any()) throw NonPositiveVariance("diagonal_psd");
    return PsdMatrix(Matrix(variances.cwiseSqrt().asDiagonal()), 0.0);
}

double kl_mvn(const MvnParams& q, const MvnParams& p) {
    const auto d = q.mean.size();
    if (p.mean.size() != d || q.cov.dim() != d || p.cov.dim() != d)
        throw DimensionMismatch("kl_mvn: q has dim " + std::to_string(d) + ", p has dim " +
                                std::to_string(p.mean.size()));
    // Tr(Σp⁻¹Σq) = ‖Lp⁻¹Lq‖²_F, Mahalanobis term = ‖Lp⁻¹(μp−μq)‖².
    const double trace = p.cov.half_solve(q.cov.lower()).squaredNorm();
    const double maha = p.cov.half_solve(p.mean - q.mean).squaredNorm();
    return 0.5 * (trace + maha - static_cast<double>(d) + p.cov.log_det() - q.cov.log_det());
}

double mvn_log_density(const Vector& y, const Vector& mean, const Vector& cov_diag) {
    if (y.size() != mean.size() || y.size() != cov_diag.size())
        throw DimensionMismatch("mvn_log_density: lengths " + std::to_string(y.size()) + ", " +
                                std::to_string(mean.size()) + ", " + std::to_string(cov_diag.size()));
    if ((cov_diag.array() <= 0.0).any()) throw NonPositiveVariance("mvn_log_density");
    const auto var = cov_diag.array();
    return (-0.5 * (2.0 * std::numbers::pi * var).log() - (y - mean).array().square() / (2.0 * var)).sum();
}

}  // namespace evgp
