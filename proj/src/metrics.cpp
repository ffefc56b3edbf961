#include "evgp/metrics.hpp"

#include <cmath>

#include "evgp/errors.hpp"
#include "evgp/random.hpp"

namespace evgp {

EvalReport evaluate(const std::vector<GaussianPrediction>& predictions, const Matrix& targets) {
    const auto n = targets.rows();
    const auto o = targets.cols();
    if (static_cast<Eigen::Index>(predictions.size()) != o)
        throw DimensionMismatch("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(o) + " target columns");
    if (n == 0) throw DimensionMismatch("evaluate: no samples");
    for (const auto& p : predictions)
        if (p.mean.size() != n || p.var.size() != n) throw DimensionMismatch("evaluate: prediction length");

    Matrix err(n, o), sd(n, o);
    for (Eigen::Index j = 0; j < o; ++j) {
        if ((predictions[j].var.array() < 0.0).any()) throw NonPositiveVariance("evaluate: negative predicted variance");
        err.col(j) = targets.col(j) - predictions[j].mean;
        sd.col(j) = predictions[j].var.array().sqrt();
    }

    auto covered = [](const Eigen::ArrayXXd& e, const Eigen::ArrayXXd& s, double k) {
        return (e.abs() <= k * s).cast<double>().mean();
    };
    const Eigen::ArrayXXd e = err.array(), s = sd.array();

    EvalReport r;
    r.n_eval = n;
    r.error = err.rowwise().norm().mean();
    r.std_norm = sd.rowwise().norm().mean();
    r.cr1 = covered(e, s, 1.0);
    r.cr2 = covered(e, s, 2.0);
    r.cr3 = covered(e, s, 3.0);
    for (Eigen::Index j = 0; j < o; ++j) {
        OutputMetrics m;
        m.rmse = std::sqrt(err.col(j).squaredNorm() / static_cast<double>(n));
        m.mean_std = sd.col(j).mean();
        m.cr1 = covered(e.col(j), s.col(j), 1.0);
        m.cr2 = covered(e.col(j), s.col(j), 2.0);
        m.cr3 = covered(e.col(j), s.col(j), 3.0);
        r.per_output.push_back(m);
    }
    return r;
}

Dataset toy_dataset(Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("toy dataset needs at least one row");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 6.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset d;
    d.x.resize(n, 1);
    d.y.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = unif(rng);
        const double raw = 0.5 * std::sin(2.0 * x) + 0.1 * normal(rng);
        d.x(i, 0) = x;
        d.y(i, 0) = 6.0 * raw + 3.0 * x;
    }
    d.input_names = {"x"};
    d.target_names = {"y"};
    return d;
}

}  // namespace evgp
