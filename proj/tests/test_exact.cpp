#include "doctest.h"

#include <cmath>

#include "evgp/errors.hpp"
#include "evgp/exact_gp.hpp"
#include "evgp/metrics.hpp"
#include "test_util.hpp"

using namespace evgp;
using namespace evgp::testing;

namespace {

ExplicitMean linear_mean(double mean_sd, const Vector& mu) {
    ExplicitMean em{FeatureMap::make(FeatureId::Linear1D), {}};
    em.prior.mean = mu;
    em.prior.cov = diagonal_psd(Vector::Constant(2, mean_sd * mean_sd));
    return em;
}

// GP with kernel k(x,x') + h(x)ᵀΣ_β h(x') and mean h(x)ᵀμ_β; equal in law to the explicit-mean model.
GaussianPrediction augmented_kernel_posterior(const Matrix& x, const Vector& y, const Matrix& xs,
                                              const SeKernelParams& k, double noise, const ExplicitMean& em) {
    const Matrix s = em.prior.cov.matrix();
    const Matrix h = feature_matrix(em.map, x), hs = feature_matrix(em.map, xs);
    Matrix kxx = kernel_matrix(x, x, k) + h * s * h.transpose();
    kxx.diagonal().array() += noise;
    const Matrix ksx = kernel_matrix(xs, x, k) + hs * s * h.transpose();
    const Matrix kss = kernel_matrix(xs, xs, k) + hs * s * hs.transpose();
    const Eigen::LLT<Matrix> llt(kxx);
    GaussianPrediction out;
    out.mean = hs * em.prior.mean + ksx * llt.solve(Vector(y - h * em.prior.mean));
    out.cov = kss - ksx * llt.solve(Matrix(ksx.transpose()));
    out.var = out.cov.diagonal();
    return out;
}

}  // namespace

TEST_CASE("gp posterior interpolates training targets as noise vanishes") {
    std::mt19937_64 rng(11);
    const Matrix x = random_matrix(rng, 8, 2);
    const Vector y = random_vector(rng, 8);
    const ExactFit fit(x, y, SeKernelParams::isotropic(2, 0.8, 1.0), 1e-10);
    const auto post = exact_gp_posterior(fit, x);
    CHECK((post.mean - y).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(post.var.maxCoeff() < 1e-6);
}

TEST_CASE("gp posterior for a single training point matches scalar algebra") {
    Matrix x(1, 1);
    x << 0.3;
    Vector y(1);
    y << 1.7;
    const double ell = 0.7, s2 = 2.0, noise = 0.25;
    const ExactFit fit(x, y, SeKernelParams::isotropic(1, ell, s2), noise);
    Matrix xs(1, 1);
    xs << 1.1;
    const auto post = exact_gp_posterior(fit, xs);
    const double k = s2 * std::exp(-0.5 * (0.8 * 0.8) / (ell * ell));
    CHECK(post.mean(0) == doctest::Approx(k * 1.7 / (s2 + noise)).epsilon(1e-12));
    CHECK(post.var(0) == doctest::Approx(s2 - k * k / (s2 + noise)).epsilon(1e-12));
}

TEST_CASE("gp posterior far from data recovers the prior") {
    std::mt19937_64 rng(12);
    const Matrix x = random_matrix(rng, 10, 1);
    const Vector y = random_vector(rng, 10);
    const ExactFit fit(x, y, SeKernelParams::isotropic(1, 0.5, 3.0), 0.1);
    Matrix xs(1, 1);
    xs << 1e3;
    const auto post = exact_gp_posterior(fit, xs);
    CHECK(std::abs(post.mean(0)) < 1e-12);
    CHECK(post.var(0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("egp posterior with a tight beta prior is a fixed-mean gp on residuals") {
    std::mt19937_64 rng(13);
    const Matrix x = random_matrix(rng, 12, 1, 2.0);
    const Vector y = random_vector(rng, 12);
    Vector mu(2);
    mu << 1.5, -0.4;
    const auto kern = SeKernelParams::isotropic(1, 0.9, 1.0);
    const ExactFit egp(x, y, kern, 0.05, linear_mean(1e-7, mu));
    const Matrix h = feature_matrix(egp.explicit_mean()->map, x);
    const ExactFit gp(x, Vector(y - h * mu), kern, 0.05);
    const Matrix xs = random_matrix(rng, 6, 1, 3.0);
    const auto a = exact_egp_posterior(egp, xs, false);
    const auto b = exact_gp_posterior(gp, xs, false);
    const Matrix hs = feature_matrix(egp.explicit_mean()->map, xs);
    CHECK((a.mean - (hs * mu + b.mean)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("egp posterior without features equals the gp posterior") {
    std::mt19937_64 rng(14);
    const Matrix x = random_matrix(rng, 9, 2);
    const Vector y = random_vector(rng, 9);
    const auto kern = SeKernelParams::isotropic(2, 1.1, 0.7);
    ExplicitMean em{FeatureMap::zero(2, 1), {Vector(0), PsdMatrix(Matrix(0, 0), 0.0)}};
    const ExactFit plain(x, y, kern, 0.2);
    const ExactFit empty(x, y, kern, 0.2, em);
    const Matrix xs = random_matrix(rng, 5, 2);
    const auto a = exact_egp_posterior(empty, xs, false);
    const auto b = exact_gp_posterior(plain, xs, false);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(exact_log_marginal(empty) == doctest::Approx(exact_log_marginal(plain)).epsilon(1e-12));
}

TEST_CASE("egp posterior agrees with the augmented-kernel gp") {
    std::mt19937_64 rng(15);
    for (int rep = 0; rep < 5; ++rep) {
        const Matrix x = random_matrix(rng, 15, 1, 2.0);
        const Vector y = random_vector(rng, 15, 2.0);
        const Vector mu = random_vector(rng, 2);
        const auto em = linear_mean(uniform(rng, 0.3, 3.0), mu);
        const auto kern = SeKernelParams::isotropic(1, uniform(rng, 0.4, 1.5), uniform(rng, 0.5, 2.0));
        const double noise = uniform(rng, 0.01, 0.5);
        const ExactFit fit(x, y, kern, noise, em);
        const Matrix xs = random_matrix(rng, 7, 1, 4.0);
        const auto got = exact_egp_posterior(fit, xs, false);
        const auto want = augmented_kernel_posterior(x, y, xs, kern, noise, em);
        CHECK((got.mean - want.mean).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((got.cov - want.cov).cwiseAbs().maxCoeff() < 1e-8);
        const auto diag = exact_egp_posterior(fit, xs, true);
        CHECK((diag.var - got.var).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(diag.cov.size() == 0);
    }
}

TEST_CASE("egp posterior on the toy data follows the injected linear trend") {
    const Dataset d = toy_dataset(200, 5);
    const ExactFit fit(d.x, d.y.col(0), SeKernelParams::isotropic(1, 0.6, 9.0), 0.36,
                       linear_mean(10.0, Vector::Zero(2)));
    Matrix xs(2, 1);
    xs << -40.0, 46.0;
    const auto post = exact_egp_posterior(fit, xs);
    const double slope = (post.mean(1) - post.mean(0)) / 86.0;
    // sin(2x) over [0, 6] is not orthogonal to x; its least-squares slope alone is about -0.48.
    CHECK(slope == doctest::Approx(3.0).epsilon(0.15));
}

TEST_CASE("log marginal of one point is a scalar normal density") {
    Matrix x(1, 2);
    x << 0.1, -0.2;
    Vector y(1);
    y << 0.9;
    const ExactFit fit(x, y, SeKernelParams::isotropic(2, 1.0, 1.3), 0.2);
    CHECK(exact_log_marginal(fit) == doctest::Approx(mvn_log_density(y, Vector::Zero(1), Vector::Constant(1, 1.5))));
}

TEST_CASE("egp log marginal equals the augmented-kernel density") {
    std::mt19937_64 rng(16);
    const Matrix x = random_matrix(rng, 10, 1);
    const Vector y = random_vector(rng, 10);
    Vector mu(2);
    mu << 0.5, 1.0;
    const auto em = linear_mean(0.8, mu);
    const auto kern = SeKernelParams::isotropic(1, 0.7, 1.2);
    const ExactFit fit(x, y, kern, 0.3, em);
    const Matrix h = feature_matrix(em.map, x);
    Matrix c = kernel_matrix(x, x, kern) + h * em.prior.cov.matrix() * h.transpose();
    c.diagonal().array() += 0.3;
    const Eigen::LLT<Matrix> llt(c);
    const Vector r = y - h * mu;
    const double logdet = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    const double want = -0.5 * r.dot(llt.solve(r)) - 0.5 * logdet - 5.0 * std::log(2.0 * M_PI);
    CHECK(exact_log_marginal(fit) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("duplicate inputs without noise fail to factorize") {
    Matrix x(3, 1);
    x << 0.0, 1.0, 1.0;
    Vector y(3);
    y << 0.0, 1.0, 1.0;
    CHECK_THROWS_AS(ExactFit(x, y, SeKernelParams::isotropic(1, 1.0, 1.0), 0.0), NotPsdWithinJitter);
}

TEST_CASE("exact fit guards size and shape") {
    CHECK_THROWS_AS(ExactFit(Matrix::Zero(2001, 1), Vector::Zero(2001), SeKernelParams::isotropic(1, 1.0, 1.0), 0.1),
                    ConfigError);
    CHECK_THROWS_AS(ExactFit(Matrix::Zero(3, 1), Vector::Zero(2), SeKernelParams::isotropic(1, 1.0, 1.0), 0.1),
                    DimensionMismatch);
    const ExactFit with(Matrix::Zero(1, 1), Vector::Zero(1), SeKernelParams::isotropic(1, 1.0, 1.0), 0.1,
                        linear_mean(1.0, Vector::Zero(2)));
    CHECK_THROWS_AS(exact_gp_posterior(with, Matrix::Zero(1, 1)), ConfigError);
}
