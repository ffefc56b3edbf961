#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "evgp/dataset.hpp"
#include "evgp/model.hpp"

namespace evgp {

struct TrainConfig {
    int steps = 2000;
    int batch_size = 256;
    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    int num_inducing = 10;
    /// Kernel and noise parameters stay fixed for the first k steps.
    int hyperparameter_freeze_steps = 0;
    bool learn_inducing = true;
    /// Writes a checkpoint through the callback every k steps; 0 disables.
    int checkpoint_every = 0;

    void validate(Eigen::Index dataset_rows) const;
};

struct TrainReport {
    std::vector<double> elbo_trace;                  // per step, summed over outputs
    std::vector<std::vector<double>> output_traces;  // per output, per step
    double initial_loss = 0.0;                       // full-batch, summed over outputs
    double final_loss = 0.0;
    double wall_time = 0.0;
    long jitter_events = 0;
};

/// Partial derivatives of the negative ELBO, laid out like VariationalState.
struct StateGradient {
    Vector a;
    Matrix a_cov_raw;
    Vector b;
    Matrix b_cov_raw;
    Matrix inducing;
    Vector log_lengthscales;
    double log_signal_variance = 0.0;
    double log_noise_variance = 0.0;
};

/// Analytic gradient of negative_elbo(state, prior, map, x, y, full_dataset_size).
/// The forward terms of the same evaluation are copied to `terms` when given.
StateGradient gradients(const VariationalState& state, const BetaPriorRow& prior, const FeatureMap& map,
                        const Matrix& x, const Vector& y, Eigen::Index full_dataset_size,
                        ElboTerms* terms = nullptr);

/// Which parameter blocks the optimizer moves.
struct ParameterMask {
    bool variational = true;
    bool inducing = true;
    bool hyperparameters = true;
};

/// Flat view of a state, in a fixed block order, for first-order optimizers.
Vector pack(const VariationalState& state);
void unpack(const Vector& flat, VariationalState& state);
Vector pack(const StateGradient& grad);
/// 1 for coordinates the mask allows to move, 0 otherwise.
Vector pack_mask(const VariationalState& state, const ParameterMask& mask);

class Adam {
public:
    Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    /// In-place update; coordinates with active(i) == 0 are untouched and keep their moment state.
    void step(Vector& params, const Vector& grad, const Vector& active);

private:
    double lr_, beta1_, beta2_, eps_;
    Vector m_, v_;
    Eigen::VectorXi t_;
};

struct FitResult {
    std::vector<VariationalState> states;
    TrainReport report;
};

using CheckpointFn = std::function<void(int step, const std::vector<VariationalState>& states)>;

/// Initial state for one output, as fit() builds it.
VariationalState initial_state(const Dataset& data, Eigen::Index output, const FeatureMap& map,
                               const BetaPrior& prior, const TrainConfig& config);

/// Trains one independent model per output column with minibatch ADAM.
FitResult fit(const Dataset& data, const FeatureMap& map, const BetaPrior& prior, const TrainConfig& config,
              const CheckpointFn& checkpoint = {});

/// Same as fit() but continues from the given per-output states, e.g. a checkpoint.
/// config.num_inducing is ignored; optimizer moments start from zero.
FitResult fit_from(std::vector<VariationalState> start, const Dataset& data, const FeatureMap& map,
                   const BetaPrior& prior, const TrainConfig& config, const CheckpointFn& checkpoint = {});

}  // namespace evgp
