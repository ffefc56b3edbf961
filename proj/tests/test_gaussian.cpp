#include <cmath>
#include <numbers>

#include "doctest.h"
#include "evgp/errors.hpp"
#include "evgp/gaussian.hpp"
#include "test_util.hpp"

using namespace evgp;
using evgp::testing::random_spd;
using evgp::testing::random_vector;

TEST_CASE("cholesky_psd factors the identity without jitter") {
    const PsdMatrix p = cholesky_psd(Matrix::Identity(3, 3), 1e-4);
    CHECK(p.jitter_applied() == 0.0);
    CHECK(p.lower().isApprox(Matrix::Identity(3, 3)));
}

TEST_CASE("cholesky_psd matches a hand factorization") {
    Matrix m(2, 2);
    m << 4, 2, 2, 3;
    Matrix expected(2, 2);
    expected << 2, 0, 1, std::sqrt(2.0);
    CHECK((expected * expected.transpose() - m).norm() < 1e-15);
    const PsdMatrix p = cholesky_psd(m);
    CHECK((p.lower() - expected).norm() < 1e-14);
    CHECK(p.jitter_applied() == 0.0);
}

TEST_CASE("cholesky_psd climbs the jitter ladder on a zero matrix") {
    const PsdMatrix p = cholesky_psd(Matrix::Zero(2, 2), 1e-4);
    CHECK(p.jitter_applied() == 1e-10);
    CHECK((p.lower() - std::sqrt(1e-10) * Matrix::Identity(2, 2)).norm() < 1e-20);
}

TEST_CASE("cholesky_psd errors") {
    Matrix asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(cholesky_psd(asym), NotSymmetric);

    Matrix indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    CHECK_THROWS_AS(cholesky_psd(indefinite), NotPsdWithinJitter);

    // Ladder stops at jitter_max.
    CHECK_THROWS_AS(cholesky_psd(Matrix::Zero(2, 2), 0.0), NotPsdWithinJitter);
    CHECK_THROWS_AS(cholesky_psd(Matrix(0, 0)), DimensionMismatch);
}

TEST_CASE("cholesky_psd round trip on random PSD matrices") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto d = 1 + trial % 8;
        // Rank-deficient half of the time.
        const Matrix g = evgp::testing::random_matrix(rng, d, std::max<Eigen::Index>(1, d - trial % 2 * 2));
        const Matrix m = g * g.transpose();
        const PsdMatrix p = cholesky_psd(m);
        Matrix target = m;
        target.diagonal().array() += p.jitter_applied();
        CHECK((p.matrix() - target).norm() <= 1e-8 * std::max(m.norm(), 1e-300));
        CHECK((p.lower().diagonal().array() > 0.0).all());
    }
}

TEST_CASE("kl_mvn closed-form examples") {
    const MvnParams std2{Vector::Zero(2), cholesky_psd(Matrix::Identity(2, 2))};
    CHECK(std::abs(kl_mvn(std2, std2)) < 1e-15);

    const MvnParams q1{Vector::Constant(1, 1.0), cholesky_psd(Matrix::Identity(1, 1))};
    const MvnParams p1{Vector::Zero(1), cholesky_psd(Matrix::Identity(1, 1))};
    CHECK(kl_mvn(q1, p1) == doctest::Approx(0.5).epsilon(1e-14));

    const MvnParams q2{Vector::Zero(1), cholesky_psd(Matrix::Constant(1, 1, 2.0))};
    CHECK(kl_mvn(q2, p1) == doctest::Approx(0.5 * (2.0 - 1.0 - std::log(2.0))).epsilon(1e-14));
    CHECK(kl_mvn(q2, p1) == doctest::Approx(0.15343).epsilon(1e-4));

    const MvnParams q3{Vector::Zero(3), cholesky_psd(Matrix::Identity(3, 3))};
    CHECK_THROWS_AS(kl_mvn(q3, p1), DimensionMismatch);
}

TEST_CASE("kl_mvn agrees with a dense LDLT evaluation and is nonnegative") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = 1 + trial % 6;
        const Matrix sq = random_spd(rng, d), sp = random_spd(rng, d);
        const Vector mq = random_vector(rng, d), mp = random_vector(rng, d);
        const double kl = kl_mvn({mq, cholesky_psd(sq)}, {mp, cholesky_psd(sp)});
        const auto ldlt = sp.ldlt();
        const Vector diff = mp - mq;
        const double dense = 0.5 * (ldlt.solve(sq).trace() + diff.dot(ldlt.solve(diff)) - static_cast<double>(d) +
                                    std::log(sp.determinant()) - std::log(sq.determinant()));
        CHECK(kl == doctest::Approx(dense).epsilon(1e-9));
        CHECK(kl >= -1e-9);
        CHECK(std::abs(kl_mvn({mq, cholesky_psd(sq)}, {mq, cholesky_psd(sq)})) < 1e-9);
    }
}

TEST_CASE("mvn_log_density examples") {
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(mvn_log_density(Vector::Zero(1), Vector::Zero(1), Vector::Ones(1)) ==
          doctest::Approx(-half_log_2pi).epsilon(1e-15));
    CHECK(mvn_log_density(Vector::Ones(1), Vector::Zero(1), Vector::Ones(1)) ==
          doctest::Approx(-half_log_2pi - 0.5).epsilon(1e-15));
    Vector var(2);
    var << 1, 4;
    CHECK(mvn_log_density(Vector::Zero(2), Vector::Zero(2), var) ==
          doctest::Approx(-std::log(2.0 * std::numbers::pi) - 0.5 * std::log(4.0)).epsilon(1e-15));
    CHECK(std::abs(mvn_log_density(Vector::Zero(1), Vector::Zero(1), Vector::Ones(1)) + 0.918939) < 1e-6);

    CHECK_THROWS_AS(mvn_log_density(Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)), NonPositiveVariance);
    CHECK_THROWS_AS(mvn_log_density(Vector::Zero(2), Vector::Zero(3), Vector::Ones(2)), DimensionMismatch);
}

TEST_CASE("mvn_log_density equals the dense density with diagonal covariance") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector y = random_vector(rng, 5), mu = random_vector(rng, 5);
        const Vector var = random_vector(rng, 5).array().square() + 0.05;
        const Matrix cov = var.asDiagonal();
        const auto ldlt = cov.ldlt();
        const Vector r = y - mu;
        const double dense = -0.5 * (5.0 * std::log(2.0 * std::numbers::pi) + std::log(cov.determinant()) +
                                     r.dot(ldlt.solve(r)));
        CHECK(std::abs(mvn_log_density(y, mu, var) - dense) < 1e-10);
    }
}
