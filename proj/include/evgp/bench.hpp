#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evgp/dynamics.hpp"
#include "evgp/features.hpp"
#include "evgp/metrics.hpp"
#include "evgp/trainer.hpp"

namespace evgp {

/// Which explicit mean a dynamics model uses: none (VGP), inertia+force, or inertia+force+gravity.
enum class PriorKind { None, IF, IFG };

std::string to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string& name);
/// "VGP", "EVGP-IF", "EVGP-IFG".
std::string model_label(PriorKind kind);

FeatureMap feature_map_for(SystemId system, PriorKind kind);
/// Inducing points per output used in the benchmark tables.
int default_inducing(SystemId system, PriorKind kind);

struct BenchConfig {
    std::vector<SystemId> systems{SystemId::Pendulum};
    std::vector<PriorKind> priors{PriorKind::None, PriorKind::IF, PriorKind::IFG};
    std::vector<int> train_sizes{500, 1000, 2000};
    int repeats = 2;
    std::uint64_t seed = 0;
    /// Test trajectories per system; 0 uses the collection preset count.
    int test_trajectories = 0;
    double obs_noise_std = kDefaultObservationNoiseStd;
    /// Optimizer settings; num_inducing is replaced per cell unless inducing_override is set.
    TrainConfig train;
    std::optional<int> inducing_override;

    /// Pendulum matrix at a size that finishes in minutes.
    static BenchConfig desk();
    /// All systems, training on the full collection preset size.
    static BenchConfig full();
    void validate() const;
};

struct BenchCell {
    SystemId system = SystemId::Pendulum;
    PriorKind prior = PriorKind::None;
    int train_size = 0;
    int repeat = 0;
};

struct CellResult {
    BenchCell cell;
    bool ok = false;
    std::string error;
    EvalReport report;
    double final_loss = 0.0;
    Eigen::Index parameters = 0;
    int num_inducing = 0;
    double wall_time = 0.0;
};

struct BenchResult {
    std::vector<CellResult> cells;
};

/// Cells in matrix order: system, prior, train size, repeat.
std::vector<BenchCell> bench_cells(const BenchConfig& config);

using CellCallback = std::function<void(const CellResult&)>;

/// Trains and evaluates every cell; a failing cell is recorded and the matrix continues.
BenchResult run_benchmark(const BenchConfig& config, const CellCallback& on_cell = {});

/// Aligned text table per system at the largest train size, averaged over repeats.
std::string format_table(const BenchResult& result);
/// system,model,train_size,n,error_mean,error_min,error_max
std::string error_series_csv(const BenchResult& result);

struct SeriesPoint {
    SystemId system;
    PriorKind prior;
    int train_size;
    int count;
    double mean, min, max;
};
std::vector<SeriesPoint> error_series(const BenchResult& result);

}  // namespace evgp
