#include "evgp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "evgp/errors.hpp"
#include "evgp/random.hpp"

namespace evgp {

std::string to_string(PriorKind kind) {
    switch (kind) {
        case PriorKind::None: return "none";
        case PriorKind::IF: return "if";
        case PriorKind::IFG: return "ifg";
    }
    return "?";
}

PriorKind prior_kind_from_string(const std::string& name) {
    for (auto k : {PriorKind::None, PriorKind::IF, PriorKind::IFG})
        if (to_string(k) == name) return k;
    throw ConfigError("unknown prior '" + name + "' (expected none, if or ifg)");
}

std::string model_label(PriorKind kind) {
    switch (kind) {
        case PriorKind::None: return "VGP";
        case PriorKind::IF: return "EVGP-IF";
        case PriorKind::IFG: return "EVGP-IFG";
    }
    return "?";
}

FeatureMap feature_map_for(SystemId system, PriorKind kind) {
    const auto spec = SystemSpec::make(system);
    if (kind == PriorKind::None) return FeatureMap::zero(spec.state_dim() + spec.control_dim(), spec.state_dim());
    const bool g = kind == PriorKind::IFG;
    switch (system) {
        case SystemId::Pendulum: return FeatureMap::make(g ? FeatureId::PendulumIFG : FeatureId::PendulumIF);
        case SystemId::Cartpole: return FeatureMap::make(g ? FeatureId::CartpoleIFG : FeatureId::CartpoleIF);
        case SystemId::Acrobot: return FeatureMap::make(g ? FeatureId::AcrobotIFG : FeatureId::AcrobotIF);
    }
    throw ConfigError("unknown system");
}

int default_inducing(SystemId system, PriorKind kind) {
    const bool vgp = kind == PriorKind::None;
    switch (system) {
        case SystemId::Pendulum: return vgp ? 40 : 10;
        case SystemId::Cartpole: return vgp ? 100 : 60;
        case SystemId::Acrobot: return vgp ? 250 : 150;
    }
    return 10;
}

BenchConfig BenchConfig::desk() {
    BenchConfig c;
    c.train.steps = 3000;
    c.train.batch_size = 256;
    c.train.learning_rate = 1e-2;
    return c;
}

BenchConfig BenchConfig::full() {
    BenchConfig c = desk();
    c.systems = {SystemId::Pendulum, SystemId::Cartpole, SystemId::Acrobot};
    c.train_sizes = {};  // filled per system from the collection preset
    c.repeats = 1;
    c.train.steps = 10000;
    return c;
}

void BenchConfig::validate() const {
    if (systems.empty() || priors.empty()) throw ConfigError("benchmark needs at least one system and one prior");
    for (int n : train_sizes)
        if (n < 1) throw ConfigError("train sizes must be positive");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (test_trajectories < 0) throw ConfigError("test_trajectories must be >= 0");
    if (obs_noise_std < 0.0) throw ConfigError("observation noise std must be nonnegative");
    if (inducing_override && *inducing_override < 0) throw ConfigError("inducing override must be >= 0");
    if (train.steps < 1 || train.batch_size < 1 || !(train.learning_rate > 0.0))
        throw ConfigError("invalid trainer settings");
}

namespace {

std::vector<int> sizes_for(const BenchConfig& config, SystemId system) {
    if (!config.train_sizes.empty()) return config.train_sizes;
    const auto preset = SamplingSpec::table1(system);
    return {preset.trajectories * preset.steps_per_traj};
}

Dataset simulate(SystemId system, int rows, std::uint64_t seed, double noise) {
    const auto spec = SystemSpec::make(system);
    auto sampling = SamplingSpec::table1(system);
    sampling.trajectories = (rows + sampling.steps_per_traj - 1) / sampling.steps_per_traj;
    const auto batch = sample_dataset(spec, sampling, seed);
    return to_regression(spec, batch, Vector::Constant(spec.state_dim(), noise)).head(rows);
}

}  // namespace

std::vector<BenchCell> bench_cells(const BenchConfig& config) {
    std::vector<BenchCell> cells;
    for (auto system : config.systems)
        for (auto prior : config.priors)
            for (int size : sizes_for(config, system))
                for (int r = 0; r < config.repeats; ++r) cells.push_back({system, prior, size, r});
    return cells;
}

BenchResult run_benchmark(const BenchConfig& config, const CellCallback& on_cell) {
    config.validate();
    BenchResult result;
    // Datasets are shared by every cell with the same system and repeat.
    std::map<std::pair<int, int>, std::pair<Dataset, Dataset>> cache;
    for (const auto& cell : bench_cells(config)) {
        CellResult out;
        out.cell = cell;
        const auto start = std::chrono::steady_clock::now();
        try {
            const auto sys = static_cast<std::uint64_t>(cell.system);
            const auto rep = static_cast<std::uint64_t>(cell.repeat);
            const auto key = std::make_pair(static_cast<int>(cell.system), cell.repeat);
            auto it = cache.find(key);
            if (it == cache.end()) {
                const auto preset = SamplingSpec::table1(cell.system);
                const auto sizes = sizes_for(config, cell.system);
                const int largest = *std::max_element(sizes.begin(), sizes.end());
                const int test_rows =
                    (config.test_trajectories > 0 ? config.test_trajectories : preset.trajectories) *
                    preset.steps_per_traj;
                Dataset train = simulate(cell.system, largest, derive_seed(config.seed, 10 * sys + 2 * rep * 100 + 1),
                                         config.obs_noise_std);
                Dataset test = simulate(cell.system, test_rows, derive_seed(config.seed, 10 * sys + 2 * rep * 100 + 2),
                                        config.obs_noise_std);
                it = cache.emplace(key, std::make_pair(std::move(train), std::move(test))).first;
            }
            const Dataset train = it->second.first.head(cell.train_size);
            const Dataset& test = it->second.second;

            const auto map = feature_map_for(cell.system, cell.prior);
            const auto prior = default_prior(map, SamplingSpec::table1(cell.system).dt);
            TrainConfig tc = config.train;
            tc.num_inducing = config.inducing_override.value_or(default_inducing(cell.system, cell.prior));
            tc.num_inducing = std::min<int>(tc.num_inducing, static_cast<int>(train.rows()));
            tc.batch_size = std::min<int>(tc.batch_size, static_cast<int>(train.rows()));
            tc.seed = derive_seed(config.seed, 1000 + 10 * sys + rep);
            const auto fitted = fit(train, map, prior, tc);

            out.report = evaluate(multi_output_predict(fitted.states, map, test.x, true), test.y);
            out.final_loss = fitted.report.final_loss;
            out.num_inducing = tc.num_inducing;
            for (const auto& s : fitted.states) out.parameters += parameter_count(s);
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
        out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (on_cell) on_cell(out);
        result.cells.push_back(std::move(out));
    }
    return result;
}

std::vector<SeriesPoint> error_series(const BenchResult& result) {
    std::vector<SeriesPoint> points;
    for (const auto& c : result.cells) {
        if (!c.ok) continue;
        auto it = std::find_if(points.begin(), points.end(), [&](const SeriesPoint& p) {
            return p.system == c.cell.system && p.prior == c.cell.prior && p.train_size == c.cell.train_size;
        });
        if (it == points.end()) {
            points.push_back({c.cell.system, c.cell.prior, c.cell.train_size, 0, 0.0,
                              std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
            it = points.end() - 1;
        }
        it->count += 1;
        it->mean += c.report.error;
        it->min = std::min(it->min, c.report.error);
        it->max = std::max(it->max, c.report.error);
    }
    for (auto& p : points) p.mean /= p.count;
    return points;
}

std::string error_series_csv(const BenchResult& result) {
    std::ostringstream os;
    os << "system,model,train_size,n,error_mean,error_min,error_max\n";
    os << std::setprecision(10);
    for (const auto& p : error_series(result))
        os << to_string(p.system) << ',' << model_label(p.prior) << ',' << p.train_size << ',' << p.count << ','
           << p.mean << ',' << p.min << ',' << p.max << '\n';
    return os.str();
}

std::string format_table(const BenchResult& result) {
    std::ostringstream os;
    std::vector<SystemId> systems;
    for (const auto& c : result.cells)
        if (std::find(systems.begin(), systems.end(), c.cell.system) == systems.end()) systems.push_back(c.cell.system);

    for (auto system : systems) {
        int largest = 0;
        for (const auto& c : result.cells)
            if (c.cell.system == system) largest = std::max(largest, c.cell.train_size);
        os << to_string(system) << " (train size " << largest << ")\n";
        os << std::left << std::setw(10) << "model" << std::right << std::setw(10) << "m" << std::setw(10) << "params"
           << std::setw(12) << "Error" << std::setw(12) << "|STD|" << std::setw(8) << "CR1" << std::setw(8) << "CR2"
           << std::setw(8) << "CR3" << std::setw(8) << "runs" << '\n';
        std::vector<PriorKind> priors;
        for (const auto& c : result.cells)
            if (c.cell.system == system && std::find(priors.begin(), priors.end(), c.cell.prior) == priors.end())
                priors.push_back(c.cell.prior);
        for (auto prior : priors) {
            EvalReport mean;
            int ok = 0, total = 0, m = 0;
            Eigen::Index params = 0;
            for (const auto& c : result.cells) {
                if (c.cell.system != system || c.cell.prior != prior || c.cell.train_size != largest) continue;
                ++total;
                if (!c.ok) continue;
                ++ok;
                mean.error += c.report.error;
                mean.std_norm += c.report.std_norm;
                mean.cr1 += c.report.cr1;
                mean.cr2 += c.report.cr2;
                mean.cr3 += c.report.cr3;
                params = c.parameters;
                m = c.num_inducing;
            }
            os << std::left << std::setw(10) << model_label(prior) << std::right;
            if (ok == 0) {
                os << std::setw(10) << "-" << "  all " << total << " runs failed\n";
                continue;
            }
            const double k = ok;
            os << std::setw(10) << m << std::setw(10) << params << std::fixed << std::setprecision(4) << std::setw(12)
               << mean.error / k << std::setw(12) << mean.std_norm / k << std::setprecision(3) << std::setw(8)
               << mean.cr1 / k << std::setw(8) << mean.cr2 / k << std::setw(8) << mean.cr3 / k
               << std::defaultfloat << std::setw(8) << (std::to_string(ok) + "/" + std::to_string(total)) << '\n';
        }
        os << '\n';
    }
    for (const auto& c : result.cells)
        if (!c.ok)
            os << "failed: " << to_string(c.cell.system) << ' ' << model_label(c.cell.prior) << " n=" << c.cell.train_size
               << " repeat " << c.cell.repeat << ": " << c.error << '\n';
    return os.str();
}

}  // namespace evgp
