#include <cmath>
#include <numbers>

#include "doctest.h"
#include "evgp/errors.hpp"
#include "evgp/exact_gp.hpp"
#include "evgp/metrics.hpp"
#include "evgp/model.hpp"
#include "evgp/trainer.hpp"
#include "test_util.hpp"

using namespace evgp;
using namespace evgp::testing;

namespace {

double kl_oracle(const Vector& mq, const Matrix& sq, const Vector& mp, const Matrix& sp) {
    const auto k = static_cast<double>(mq.size());
    if (mq.size() == 0) return 0.0;
    const Eigen::LLT<Matrix> lp(sp);
    const Eigen::LLT<Matrix> lq(sq);
    const double logdet_p = 2.0 * Matrix(lp.matrixL()).diagonal().array().log().sum();
    const double logdet_q = 2.0 * Matrix(lq.matrixL()).diagonal().array().log().sum();
    const Vector d = mp - mq;
    return 0.5 * (lp.solve(sq).trace() + d.dot(lp.solve(d)) - k + logdet_p - logdet_q);
}

// The negative ELBO over the whole dataset, written out with dense matrices.
double unbatched_negative_elbo(const Instance& inst) {
    const auto& s = inst.state;
    const double noise = s.noise_variance();
    const auto n = inst.x.rows();
    const Matrix h = feature_matrix(inst.map, inst.x);
    Vector mean = h * s.b;
    double trace = (h.transpose() * h * s.b_cov.matrix()).trace() / noise;
    Vector cond = kernel_diag(inst.x, s.kernel);
    Matrix kmm;
    if (s.num_inducing() > 0) {
        kmm = inducing_kernel(s.inducing, s.kernel);
        const Matrix kxm = kernel_matrix(inst.x, s.inducing, s.kernel);
        const Eigen::LLT<Matrix> llt(kmm);
        const Matrix w = llt.solve(Matrix(kxm.transpose())).transpose();
        mean += w * s.a;
        trace += (w.transpose() * w * s.a_cov.matrix()).trace() / noise;
        cond -= (w.array() * kxm.array()).rowwise().sum().matrix();
    }
    trace += cond.sum() / noise;
    const Vector r = inst.y - mean;
    const double loglik = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * noise) -
                          0.5 * r.squaredNorm() / noise;
    const double kl = kl_oracle(s.a, s.a_cov.matrix(), Vector::Zero(s.num_inducing()), kmm) +
                      kl_oracle(s.b, s.b_cov.matrix(), inst.prior.mean, inst.prior.cov.matrix());
    return -loglik + 0.5 * trace + kl;
}

TriangularFactor tiny_factor(Eigen::Index m, double var = 1e-20) {
    return TriangularFactor::from_factor(Matrix::Identity(m, m) * std::sqrt(var));
}

BetaPriorRow linear_prior(double sd) {
    return {Vector::Zero(2), diagonal_psd(Vector::Constant(2, sd * sd))};
}

}  // namespace

TEST_CASE("exact-fit limit drives the data-fit terms to zero") {
    const Eigen::Index n = 10;
    Matrix x(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = static_cast<double>(i);
    std::mt19937_64 rng(1);
    const Vector y = random_vector(rng, n, 0.1);
    VariationalState s;
    s.inducing = x;
    s.kernel = SeKernelParams::isotropic(1, 0.25, 0.01);
    s.log_noise_variance = std::log(1e-8);
    s.b = Vector(0);
    s.b_cov = TriangularFactor{Matrix(0, 0)};
    // a chosen so that K_xm K_mm⁻¹ a reproduces y at the training inputs.
    s.a = y;
    s.a_cov = tiny_factor(n);
    const BetaPriorRow none{Vector(0), PsdMatrix(Matrix(0, 0), 0.0)};
    const auto t = elbo_terms(s, none, FeatureMap::zero(1, 1), x, y);
    const double fit_terms = t.sq_residual + t.trace_a + t.trace_b + t.trace_f;
    CHECK(fit_terms < 1e-6);
}

TEST_CASE("full-batch loss equals the dense evaluation divided by the dataset size") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 16; ++rep) {
        const auto inst = random_instance(rng, 1 + rep % 5, 12, rep);
        const auto n = inst.x.rows();
        const double got = negative_elbo(inst.state, inst.prior, inst.map, inst.x, inst.y, n);
        const double want = unbatched_negative_elbo(inst) / static_cast<double>(n);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("minibatch loss scales the data term by the batch and the kl by the dataset") {
    std::mt19937_64 rng(3);
    const auto inst = random_instance(rng, 3, 7, 2);
    const auto t = elbo_terms(inst.state, inst.prior, inst.map, inst.x, inst.y);
    CHECK(negative_elbo(inst.state, inst.prior, inst.map, inst.x, inst.y, 70) ==
          doctest::Approx(t.data_term() / 7.0 + t.kl() / 70.0).epsilon(1e-14));
    CHECK_THROWS_AS(negative_elbo(inst.state, inst.prior, inst.map, inst.x, inst.y, 6), DimensionMismatch);
}

TEST_CASE("one point and one inducing point match the scalar expansion") {
    const auto map = FeatureMap::make(FeatureId::Linear1D);
    const double x = 0.7, y = 2.3, z = 0.2;
    const double ell = 0.9, sf2 = 1.4, noise = 0.3;
    const double a = 0.5, av = 0.2, b0 = 1.1, b1 = -0.4, bv0 = 0.05, bv1 = 0.3;
    const double mu0 = 0.8, mu1 = 0.1, sv0 = 0.5, sv1 = 2.0;

    VariationalState s;
    s.inducing = Matrix::Constant(1, 1, z);
    s.kernel = SeKernelParams::isotropic(1, ell, sf2);
    s.log_noise_variance = std::log(noise);
    s.a = Vector::Constant(1, a);
    s.a_cov = TriangularFactor::from_matrix(Matrix::Constant(1, 1, av));
    s.b = (Vector(2) << b0, b1).finished();
    s.b_cov = TriangularFactor::from_matrix((Vector(2) << bv0, bv1).finished().asDiagonal());
    const BetaPriorRow prior{(Vector(2) << mu0, mu1).finished(),
                             diagonal_psd((Vector(2) << sv0, sv1).finished())};

    const double kmm = sf2 * (1.0 + kInducingJitter);
    const double kxm = sf2 * std::exp(-0.5 * (x - z) * (x - z) / (ell * ell));
    const double w = kxm / kmm;
    const double mean = b0 * x + b1 + w * a;
    const double data = 0.5 * std::log(2.0 * std::numbers::pi * noise) + 0.5 * (y - mean) * (y - mean) / noise +
                        0.5 * (w * w * av + x * x * bv0 + bv1 + sf2 - w * kxm) / noise;
    auto kl1 = [](double mq, double vq, double mp, double vp) {
        return 0.5 * (vq / vp + (mq - mp) * (mq - mp) / vp - 1.0 + std::log(vp / vq));
    };
    const double kl = kl1(a, av, 0.0, kmm) + kl1(b0, bv0, mu0, sv0) + kl1(b1, bv1, mu1, sv1);
    const double n_full = 40.0;
    const Matrix xm = Matrix::Constant(1, 1, x);
    CHECK(negative_elbo(s, prior, map, xm, Vector::Constant(1, y), 40) ==
          doctest::Approx(data + kl / n_full).epsilon(1e-12));
}

TEST_CASE("posterior equal to the prior predicts the prior") {
    std::mt19937_64 rng(4);
    const auto inst = random_instance(rng, 6, 5, 3);
    const auto s = prior_state(inst.state.inducing, inst.state.kernel, inst.state.log_noise_variance, inst.prior);
    const Matrix xs = random_matrix(rng, 9, 3);
    const auto p = predict(s, inst.map, xs);
    const Matrix h = feature_matrix(inst.map, xs);
    CHECK(p.mean == h * inst.prior.mean);

    const auto at = predict(s, inst.map, s.inducing);
    const Matrix hm = feature_matrix(inst.map, s.inducing);
    const Vector want = kernel_diag(s.inducing, s.kernel) +
                        (hm * inst.prior.cov.matrix() * hm.transpose()).diagonal();
    CHECK((at.var - want).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("query at an inducing point reads back its coefficient") {
    const auto map = FeatureMap::make(FeatureId::PendulumIF);
    std::mt19937_64 rng(5);
    VariationalState s;
    s.inducing = random_matrix(rng, 4, 3, 2.0);
    s.kernel = SeKernelParams::isotropic(3, 0.8, 1.0);
    s.a = Vector::Zero(4);
    s.a(0) = 2.5;
    s.a_cov = tiny_factor(4);
    s.b = random_vector(rng, map.feature_dim);
    s.b_cov = tiny_factor(map.feature_dim);
    const Matrix q = s.inducing.topRows(1);
    const auto p = predict(s, map, q);
    CHECK(p.mean(0) == doctest::Approx((feature_matrix(map, q) * s.b)(0) + 2.5).epsilon(1e-5));
}

TEST_CASE("linear features with a fixed slope predict the linear trend") {
    const auto map = FeatureMap::make(FeatureId::Linear1D);
    VariationalState s;
    s.inducing = Matrix::Constant(2, 1, 100.0);
    s.inducing(1, 0) = 110.0;
    s.kernel = SeKernelParams::isotropic(1, 0.5, 2.0);
    s.a = Vector::Zero(2);
    s.a_cov = tiny_factor(2);
    s.b = (Vector(2) << 3.0, 0.0).finished();
    s.b_cov = tiny_factor(2);
    Matrix xs(5, 1);
    xs << -2.0, 0.0, 0.5, 3.0, 7.0;
    const auto p = predict(s, map, xs, false, false);
    CHECK((p.mean - 3.0 * xs.col(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((p.var - kernel_diag(xs, s.kernel)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("multi-output prediction is per-output prediction") {
    std::mt19937_64 rng(6);
    auto a = random_instance(rng, 4, 3, 2);
    auto b = random_instance(rng, 4, 3, 2);
    const Matrix xs = random_matrix(rng, 6, 3);
    const auto both = multi_output_predict({a.state, b.state}, a.map, xs, true);
    REQUIRE(both.size() == 2);
    CHECK(both[0].mean == predict(a.state, a.map, xs, true).mean);
    CHECK(both[1].var == predict(b.state, b.map, xs, true).var);
    const auto same = multi_output_predict({a.state, a.state}, a.map, xs);
    CHECK(same[0].mean == same[1].mean);
    CHECK(same[0].var == same[1].var);

    auto other = random_instance(rng, 2, 3, 1);
    CHECK_THROWS_AS(multi_output_predict({a.state, other.state}, a.map, xs), DimensionMismatch);
}

TEST_CASE("predictive covariance is positive semidefinite") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = random_instance(rng, 1 + rep % 6, 4, rep);
        const Matrix xs = random_matrix(rng, 12, inst.map.input_dim, 1.5);
        const auto p = predict(inst.state, inst.map, xs, false, false);
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(p.cov);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
        CHECK((p.var.array() >= 0.0).all());
        CHECK((p.var - p.cov.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("observation noise adds exactly the noise variance") {
    std::mt19937_64 rng(8);
    const auto inst = random_instance(rng, 5, 4, 3);
    const Matrix xs = random_matrix(rng, 7, 3);
    const double noise = std::exp(inst.state.log_noise_variance);
    for (bool diag : {true, false}) {
        const auto clean = predict(inst.state, inst.map, xs, false, diag);
        const auto noisy = predict(inst.state, inst.map, xs, true, diag);
        CHECK(noisy.includes_observation_noise);
        CHECK_FALSE(clean.includes_observation_noise);
        CHECK(((noisy.var - clean.var).array() - noise).abs().maxCoeff() < 1e-14);
        CHECK(noisy.mean == clean.mean);
        if (!diag) {
            Matrix d = noisy.cov - clean.cov;
            d.diagonal().array() -= noise;
            CHECK(d.cwiseAbs().maxCoeff() < 1e-14);
        }
    }
}

TEST_CASE("data terms over a partition sum to the full-batch data term") {
    std::mt19937_64 rng(9);
    const auto inst = random_instance(rng, 5, 30, 3);
    const double full = elbo_terms(inst.state, inst.prior, inst.map, inst.x, inst.y).data_term();
    double weighted = 0.0;
    for (Eigen::Index start : {0, 7, 19, 22}) {
        const Eigen::Index len = (start == 0 ? 7 : start == 7 ? 12 : start == 19 ? 3 : 8);
        const auto t = elbo_terms(inst.state, inst.prior, inst.map, inst.x.middleRows(start, len),
                                  inst.y.segment(start, len));
        weighted += static_cast<double>(len) * (t.data_term() / static_cast<double>(len));
    }
    CHECK(std::abs(weighted - full) < 1e-8 * std::max(1.0, std::abs(full)));
}

TEST_CASE("elbo is a lower bound on the exact log marginal likelihood") {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 24; ++rep) {
        const auto inst = random_instance(rng, 1 + rep % 8, 5 + rep, rep);
        const auto n = inst.x.rows();
        std::optional<ExplicitMean> em;
        if (inst.map.feature_dim > 0) em = ExplicitMean{inst.map, inst.prior};
        const ExactFit fit(inst.x, inst.y, inst.state.kernel, inst.state.noise_variance(), em);
        const double elbo = -static_cast<double>(n) * negative_elbo(inst.state, inst.prior, inst.map, inst.x, inst.y, n);
        CHECK(elbo <= exact_log_marginal(fit) + 1e-6);
    }
}

TEST_CASE("trained toy model stays below the exact evidence and grows uncertain away from data") {
    const Dataset d = toy_dataset(30, 3);
    const auto map = FeatureMap::make(FeatureId::Linear1D);
    const BetaPrior prior = default_prior(map, 0.03);
    TrainConfig cfg;
    cfg.steps = 1500;
    cfg.batch_size = 30;
    cfg.num_inducing = 8;
    cfg.learning_rate = 2e-2;
    const auto result = fit(d, map, prior, cfg);
    const auto& s = result.states[0];

    const ExactFit exact(d.x, d.y.col(0), s.kernel, s.noise_variance(), ExplicitMean{map, prior_row(prior, 0)});
    const double elbo = -30.0 * negative_elbo(s, prior_row(prior, 0), map, d.x, d.y.col(0), 30);
    CHECK(elbo <= exact_log_marginal(exact) + 1e-6);

    std::vector<double> xs(d.x.data(), d.x.data() + d.rows());
    std::nth_element(xs.begin(), xs.begin() + 15, xs.end());
    Matrix q(2, 1);
    q << xs[15], 20.0;
    const auto p = predict(s, map, q);
    CHECK(p.var(1) > p.var(0));
}

TEST_CASE("state validation catches inconsistent sizes") {
    std::mt19937_64 rng(11);
    auto inst = random_instance(rng, 3, 4, 2);
    inst.state.a = Vector::Zero(2);
    CHECK_THROWS_AS(negative_elbo(inst.state, inst.prior, inst.map, inst.x, inst.y, 4), DimensionMismatch);
    CHECK_THROWS_AS(predict(inst.state, inst.map, inst.x), DimensionMismatch);
}
