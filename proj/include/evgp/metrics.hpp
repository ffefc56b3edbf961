#pragma once

#include <cstdint>
#include <vector>

#include "evgp/dataset.hpp"
#include "evgp/model.hpp"

namespace evgp {

struct OutputMetrics {
    double rmse = 0.0;
    double mean_std = 0.0;
    double cr1 = 0.0, cr2 = 0.0, cr3 = 0.0;
};

struct EvalReport {
    double error = 0.0;     // mean Euclidean norm of y − μ over samples
    double std_norm = 0.0;  // mean Euclidean norm of the predicted std over samples
    double cr1 = 0.0, cr2 = 0.0, cr3 = 0.0;
    Eigen::Index n_eval = 0;
    std::vector<OutputMetrics> per_output;
};

/// One prediction per output column of targets; variances should include observation noise.
EvalReport evaluate(const std::vector<GaussianPrediction>& predictions, const Matrix& targets);

/// 1-D toy regression set: x ~ U(0, 6), y = 6·(0.5·sin 2x + 0.1·ε) + 3x.
Dataset toy_dataset(Eigen::Index n, std::uint64_t seed);

}  // namespace evgp
