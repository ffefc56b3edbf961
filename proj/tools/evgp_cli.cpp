#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "evgp/bench.hpp"
#include "evgp/config.hpp"
#include "evgp/errors.hpp"
#include "evgp/io.hpp"

namespace fs = std::filesystem;
using namespace evgp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// Collects flag values so that only flags actually given land in the RunConfig.
class FlagBinder {
public:
    explicit FlagBinder(RunConfig& target) : target_(target) {}

    template <typename T>
    CLI::Option* bind(CLI::App* app, const std::string& names, std::optional<T>& slot, const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = app->add_option(names, *holder, help);
        if constexpr (requires { holder->push_back(holder->front()); }) opt->delimiter(',');
        appliers_.push_back([opt, holder, &slot] {
            if (opt->count() > 0) slot = *holder;
        });
        return opt;
    }

    template <typename T>
    CLI::Option* bind_trainer(CLI::App* app, const std::string& names, const std::string& key,
                              const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = app->add_option(names, *holder, help);
        appliers_.push_back([this, opt, holder, key] {
            if (opt->count() > 0) target_.trainer[key] = *holder;
        });
        return opt;
    }

    void apply() const {
        for (const auto& f : appliers_) f();
    }

private:
    RunConfig& target_;
    std::vector<std::function<void()>> appliers_;
};

template <typename T>
const T& need(const std::optional<T>& v, const std::string& message) {
    if (!v) throw ConfigError(message);
    return *v;
}

std::optional<Json> read_sidecar(const fs::path& csv) {
    const auto path = sidecar_path(csv);
    if (!fs::exists(path)) return std::nullopt;
    return read_json(path);
}

// --------------------------------------------------------------------------------------------
// simulate

int cmd_simulate(const RunConfig& cfg) {
    const auto& name = need(cfg.system, "simulate needs --system (pendulum, cartpole or acrobot)");
    const SystemSpec spec = SystemSpec::make(system_id_from_string(name));
    SamplingSpec sampling = SamplingSpec::table1(spec.id);
    if (cfg.sampling.preset && *cfg.sampling.preset != "table1")
        throw ConfigError("unknown sampling preset '" + *cfg.sampling.preset + "' (known: table1)");
    const auto& s = cfg.sampling;
    if (s.trajectories) sampling.trajectories = *s.trajectories;
    if (s.steps_per_traj) sampling.steps_per_traj = *s.steps_per_traj;
    if (s.dt) sampling.dt = *s.dt;
    if (s.eta) sampling.eta = *s.eta;
    if (s.substeps) sampling.substeps = *s.substeps;
    if (s.alpha) sampling.alpha = Eigen::Map<const Vector>(s.alpha->data(), static_cast<Eigen::Index>(s.alpha->size()));
    sampling.validate(spec);

    const double noise_std = s.obs_noise_std.value_or(kDefaultObservationNoiseStd);
    if (!(noise_std >= 0.0)) throw ConfigError("observation noise std must be >= 0");
    const Vector noise = Vector::Constant(spec.state_dim(), noise_std);
    const std::uint64_t seed = cfg.seed.value_or(0);

    const Dataset data = to_regression(spec, sample_dataset(spec, sampling, seed), noise);
    const fs::path out = cfg.paths.out.value_or(name + ".csv");
    write_dataset_csv(out, data);
    write_json(sidecar_path(out), dataset_sidecar(spec, sampling, seed, noise, data));
    std::cout << "wrote " << data.rows() << " rows (" << sampling.trajectories << " trajectories x "
              << sampling.steps_per_traj << " steps) to " << out.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------------------------------
// train

int cmd_train(const RunConfig& cfg) {
    const fs::path data_path = need(cfg.paths.data, "train needs --data <csv>");
    const Dataset data = read_dataset_csv(data_path);
    const auto sidecar = read_sidecar(data_path);
    const PriorKind kind = prior_kind_from_string(need(cfg.model.prior, "train needs --prior none|if|ifg"));

    std::optional<SystemId> system;
    if (cfg.system) system = system_id_from_string(*cfg.system);
    else if (sidecar && sidecar->contains("system")) system = system_id_from_string(sidecar->at("system").get<std::string>());

    FeatureMap map = FeatureMap::zero(static_cast<int>(data.input_dim()), static_cast<int>(data.output_dim()));
    if (kind != PriorKind::None) {
        if (!system) throw ConfigError("prior '" + to_string(kind) + "' needs --system (or a dataset sidecar naming it)");
        map = feature_map_for(*system, kind);
        if (data.input_dim() != map.input_dim || data.output_dim() != map.output_dim)
            throw DimensionMismatch(data_path.string() + " has " + std::to_string(data.input_dim()) + " inputs and " +
                                    std::to_string(data.output_dim()) + " targets; the " + to_string(*system) +
                                    " prior expects " + std::to_string(map.input_dim) + " and " +
                                    std::to_string(map.output_dim));
    }
    double dt = cfg.sampling.dt.value_or(0.03);
    if (!cfg.sampling.dt && sidecar && sidecar->contains("sampling")) dt = sidecar->at("sampling").value("dt", dt);
    const BetaPrior prior = default_prior(map, dt);

    TrainConfig tc;
    if (system) tc.num_inducing = default_inducing(*system, kind);
    if (cfg.seed) tc.seed = *cfg.seed;
    tc = train_config_from_json(cfg.trainer, tc);
    if (cfg.model.m) tc.num_inducing = *cfg.model.m;
    if (!cfg.trainer.contains("batch_size")) tc.batch_size = static_cast<int>(std::min<Eigen::Index>(tc.batch_size, data.rows()));

    const fs::path model_path = cfg.paths.model.value_or("model.json");
    auto finish = [&](std::vector<VariationalState> states) {
        ModelFile mf = make_model_file(data, map, prior, std::move(states));
        mf.system = system ? to_string(*system) : "";
        mf.prior_kind = to_string(kind);
        mf.train_config = to_json(tc);
        return mf;
    };
    CheckpointFn checkpoint;
    if (tc.checkpoint_every > 0) {
        checkpoint = [&](int step, const std::vector<VariationalState>& states) {
            fs::path p = model_path;
            p.replace_extension(".step" + std::to_string(step) + ".json");
            save_model(p, finish(states));
        };
    }

    FitResult result;
    if (cfg.paths.resume) {
        const ModelFile start = load_model(*cfg.paths.resume);
        start.check_dataset(data);
        if (start.map.id != map.id)
            throw ConfigError(*cfg.paths.resume + " was trained with feature map " + to_string(start.map.id) +
                              ", not " + to_string(map.id));
        tc.num_inducing = static_cast<int>(start.states.front().num_inducing());
        result = fit_from(start.states, data, map, prior, tc, checkpoint);
    } else {
        result = fit(data, map, prior, tc, checkpoint);
    }
    const ModelFile mf = finish(result.states);
    save_model(model_path, mf);

    Json report = to_json(result.report);
    report["data"] = data_path.string();
    report["model"] = model_path.string();
    report["prior"] = to_string(kind);
    report["system"] = mf.system;
    report["rows"] = data.rows();
    Eigen::Index params = 0;
    for (const auto& s : result.states) params += parameter_count(s);
    report["parameters"] = params;
    report["train_config"] = to_json(tc);
    fs::path report_path = cfg.paths.report ? fs::path(*cfg.paths.report) : fs::path(model_path).replace_extension(".report.json");
    write_json(report_path, report);

    std::cout << "trained " << result.states.size() << " outputs on " << data.rows() << " rows, " << tc.steps
              << " steps: loss " << result.report.initial_loss << " -> " << result.report.final_loss << " ("
              << std::fixed << std::setprecision(1) << result.report.wall_time << " s)\n"
              << "model: " << model_path.string() << "\nreport: " << report_path.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------------------------------
// evaluate

struct Evaluated {
    std::string model;
    EvalReport report;
};

Evaluated evaluate_model(const fs::path& model_path, const Dataset& data) {
    const ModelFile mf = load_model(model_path);
    mf.check_dataset(data);
    const auto predictions = multi_output_predict(mf.states, mf.map, data.x, true);
    return {model_path.string(), evaluate(predictions, data.y)};
}

std::string format_reports(const std::vector<Evaluated>& rows) {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.model.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "model" << std::right << std::setw(12) << "Error"
        << std::setw(12) << "|STD|" << std::setw(8) << "CR-1" << std::setw(8) << "CR-2" << std::setw(8) << "CR-3"
        << "\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.model << std::right << std::scientific
            << std::setprecision(4) << std::setw(12) << r.report.error << std::setw(12) << r.report.std_norm
            << std::fixed << std::setprecision(3) << std::setw(8) << r.report.cr1 << std::setw(8) << r.report.cr2
            << std::setw(8) << r.report.cr3 << "\n";
    }
    return out.str();
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& compare) {
    const auto& data_opt = cfg.paths.test_data ? cfg.paths.test_data : cfg.paths.data;
    const fs::path data_path = need(data_opt, "evaluate needs --data <csv>");
    const Dataset data = read_dataset_csv(data_path);

    std::vector<std::string> models = compare;
    if (models.empty()) models.push_back(need(cfg.paths.model, "evaluate needs --model <file> or --compare <a> <b>..."));
    std::vector<Evaluated> rows;
    for (const auto& m : models) rows.push_back(evaluate_model(m, data));

    Json report;
    if (compare.empty()) {
        report = to_json(rows.front().report);
        report["model"] = rows.front().model;
    } else {
        report["models"] = Json::array();
        for (const auto& r : rows) {
            Json e = to_json(r.report);
            e["model"] = r.model;
            report["models"].push_back(e);
        }
    }
    report["data"] = data_path.string();
    const fs::path report_path = cfg.paths.report ? fs::path(*cfg.paths.report)
                                 : compare.empty() ? fs::path(models.front()).replace_extension(".eval.json")
                                                   : fs::path("compare.eval.json");
    write_json(report_path, report);
    std::cout << format_reports(rows) << "report: " << report_path.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------------------------------
// bench

Json to_json(const BenchConfig& c) {
    Json systems = Json::array(), priors = Json::array();
    for (auto s : c.systems) systems.push_back(to_string(s));
    for (auto p : c.priors) priors.push_back(to_string(p));
    Json j = {{"systems", systems},     {"priors", priors},
              {"train_sizes", c.train_sizes}, {"repeats", c.repeats},
              {"seed", c.seed},         {"test_trajectories", c.test_trajectories},
              {"obs_noise_std", c.obs_noise_std}, {"train", evgp::to_json(c.train)}};
    if (c.inducing_override) j["num_inducing"] = *c.inducing_override;
    return j;
}

int cmd_bench(const RunConfig& cfg) {
    const std::string preset = cfg.bench.preset.value_or("desk");
    BenchConfig bc;
    if (preset == "desk") bc = BenchConfig::desk();
    else if (preset == "full") bc = BenchConfig::full();
    else throw ConfigError("unknown bench preset '" + preset + "' (known: desk, full)");

    if (cfg.bench.systems) {
        bc.systems.clear();
        for (const auto& s : *cfg.bench.systems) bc.systems.push_back(system_id_from_string(s));
    } else if (cfg.system) {
        bc.systems = {system_id_from_string(*cfg.system)};
    }
    if (cfg.bench.priors) {
        bc.priors.clear();
        for (const auto& p : *cfg.bench.priors) bc.priors.push_back(prior_kind_from_string(p));
    } else if (cfg.model.prior) {
        bc.priors = {prior_kind_from_string(*cfg.model.prior)};
    }
    if (cfg.bench.train_sizes) bc.train_sizes = *cfg.bench.train_sizes;
    if (cfg.bench.repeats) bc.repeats = *cfg.bench.repeats;
    if (cfg.bench.test_trajectories) bc.test_trajectories = *cfg.bench.test_trajectories;
    if (cfg.seed) bc.seed = *cfg.seed;
    if (cfg.sampling.obs_noise_std) bc.obs_noise_std = *cfg.sampling.obs_noise_std;
    bc.train = train_config_from_json(cfg.trainer, bc.train);
    if (cfg.model.m) bc.inducing_override = *cfg.model.m;
    bc.validate();

    const auto cells = bench_cells(bc);
    std::size_t done = 0;
    const BenchResult result = run_benchmark(bc, [&](const CellResult& c) {
        ++done;
        std::cerr << "[" << done << "/" << cells.size() << "] " << to_string(c.cell.system) << " "
                  << model_label(c.cell.prior) << " n=" << c.cell.train_size << " rep=" << c.cell.repeat << ": ";
        if (c.ok) std::cerr << "error " << c.report.error << " (" << std::fixed << std::setprecision(1) << c.wall_time << " s)\n" << std::defaultfloat;
        else std::cerr << "FAILED: " << c.error << "\n";
    });

    const fs::path out = cfg.paths.out.value_or("bench_out");
    Json j = evgp::to_json(result);
    j["config"] = to_json(bc);
    write_json(out / "bench.json", j);
    const std::string table = format_table(result);
    write_text(out / "table.txt", table);
    write_text(out / "error_series.csv", error_series_csv(result));
    std::cout << table << "results: " << (out / "bench.json").string() << "\n";

    std::size_t failed = 0;
    for (const auto& c : result.cells) failed += c.ok ? 0 : 1;
    if (failed > 0) std::cout << failed << " of " << result.cells.size() << " cells failed\n";
    return 0;
}

// --------------------------------------------------------------------------------------------
// inspect

int cmd_inspect(const RunConfig& cfg, bool as_json) {
    const fs::path model_path = need(cfg.paths.model, "inspect needs --model <file>");
    const ModelFile mf = load_model(model_path);
    const CoefficientTable table = coefficient_table(mf);
    if (cfg.paths.out) write_text(*cfg.paths.out, coefficient_csv(table));
    if (as_json) {
        Json j = evgp::to_json(table);
        j["model"] = model_path.string();
        j["feature_map"] = to_string(mf.map.id);
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << model_path.string() << ": " << (mf.system.empty() ? "dataset" : mf.system) << ", prior "
              << mf.prior_kind << ", feature map " << to_string(mf.map.id) << "\n\n"
              << "b (posterior std from diag B):\n"
              << format_coefficients(table) << "\n";
    for (std::size_t o = 0; o < mf.states.size(); ++o) {
        const auto& s = mf.states[o];
        std::cout << std::left << std::setw(8) << mf.target_names[o] << std::right << " m=" << s.num_inducing()
                  << " lengthscales=[" << s.kernel.lengthscales().transpose().format(Eigen::IOFormat(4, 0, ", "))
                  << "] signal_var=" << s.kernel.signal_variance() << " noise_var=" << s.noise_variance() << "\n";
    }
    if (cfg.paths.out) std::cout << "csv: " << *cfg.paths.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse variational GP dynamics models with an explicit physics mean", "evgp"};
    app.require_subcommand(1);

    RunConfig flags;
    FlagBinder bind(flags);
    std::string config_path;
    std::vector<std::string> compare;
    bool inspect_json = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file; flags override its values")->check(CLI::ExistingFile);
        bind.bind(sub, "--seed", flags.seed, "Random seed");
    };

    auto* sim = app.add_subcommand("simulate", "Sample trajectories and write a regression dataset (CSV + JSON sidecar)");
    common(sim);
    bind.bind(sim, "--system", flags.system, "pendulum, cartpole or acrobot");
    bind.bind(sim, "--preset", flags.sampling.preset, "Collection preset (table1)");
    bind.bind(sim, "--trajectories", flags.sampling.trajectories, "Number of trajectories");
    bind.bind(sim, "--steps-per-traj", flags.sampling.steps_per_traj, "Transitions per trajectory");
    bind.bind(sim, "--dt", flags.sampling.dt, "Sampling interval [s]");
    bind.bind(sim, "--eta", flags.sampling.eta, "Control noise scale");
    bind.bind(sim, "--alpha", flags.sampling.alpha, "Initial state half-ranges, one per state dimension");
    bind.bind(sim, "--substeps", flags.sampling.substeps, "RK4 sub-steps per interval");
    bind.bind(sim, "--noise", flags.sampling.obs_noise_std, "Observation noise std on the targets");
    bind.bind(sim, "--out,-o", flags.paths.out, "Output CSV path");

    auto* train = app.add_subcommand("train", "Fit a model to a dataset and write a model file and training report");
    common(train);
    bind.bind(train, "--data,-d", flags.paths.data, "Training CSV");
    bind.bind(train, "--system", flags.system, "System whose physics prior to use (default: from the dataset sidecar)");
    bind.bind(train, "--prior", flags.model.prior, "none (VGP), if or ifg");
    bind.bind(train, "--m", flags.model.m, "Inducing points per output");
    bind.bind(train, "--dt", flags.sampling.dt, "Sampling interval used by the prior (default: from the sidecar)");
    bind.bind_trainer<int>(train, "--steps", "steps", "ADAM steps");
    bind.bind_trainer<int>(train, "--batch-size", "batch_size", "Minibatch size");
    bind.bind_trainer<double>(train, "--lr", "learning_rate", "ADAM learning rate");
    bind.bind_trainer<int>(train, "--freeze-steps", "hyperparameter_freeze_steps", "Keep kernel and noise fixed for k steps");
    bind.bind_trainer<int>(train, "--checkpoint-every", "checkpoint_every", "Write a model checkpoint every k steps");
    auto fixed_inducing = std::make_shared<bool>(false);
    train->add_flag("--fixed-inducing", *fixed_inducing, "Keep inducing inputs at their initial positions");
    bind.bind(train, "--out,-o,--model", flags.paths.model, "Model file to write");
    bind.bind(train, "--report", flags.paths.report, "Training report path");
    bind.bind(train, "--resume", flags.paths.resume, "Continue from this model file or checkpoint");

    auto* eval = app.add_subcommand("evaluate", "Score one or more models on a dataset");
    common(eval);
    bind.bind(eval, "--model,-m", flags.paths.model, "Model file");
    bind.bind(eval, "--data,-d", flags.paths.test_data, "Evaluation CSV");
    eval->add_option("--compare", compare, "Evaluate several models side by side")->expected(2, -1);
    bind.bind(eval, "--report,-o", flags.paths.report, "Report path");

    auto* bench = app.add_subcommand("bench", "Run the benchmark matrix and write tables and error series");
    common(bench);
    bind.bind(bench, "--preset", flags.bench.preset, "desk or full");
    bind.bind(bench, "--systems", flags.bench.systems, "Systems to include");
    bind.bind(bench, "--priors", flags.bench.priors, "Priors to include (none, if, ifg)");
    bind.bind(bench, "--train-sizes", flags.bench.train_sizes, "Training set sizes");
    bind.bind(bench, "--repeats", flags.bench.repeats, "Repeat seeds per cell");
    bind.bind(bench, "--test-trajectories", flags.bench.test_trajectories, "Test trajectories per system");
    bind.bind(bench, "--noise", flags.sampling.obs_noise_std, "Observation noise std on the targets");
    bind.bind(bench, "--m", flags.model.m, "Inducing points for every cell (default: per system and prior)");
    bind.bind_trainer<int>(bench, "--steps", "steps", "ADAM steps per cell");
    bind.bind_trainer<int>(bench, "--batch-size", "batch_size", "Minibatch size");
    bind.bind_trainer<double>(bench, "--lr", "learning_rate", "ADAM learning rate");
    bind.bind(bench, "--out,-o", flags.paths.out, "Output directory");

    auto* inspect = app.add_subcommand("inspect", "Print the learned feature coefficients b of a model");
    common(inspect);
    bind.bind(inspect, "--model,-m", flags.paths.model, "Model file");
    bind.bind(inspect, "--csv", flags.paths.out, "Also write the coefficients as CSV");
    inspect->add_flag("--json", inspect_json, "Print JSON instead of a table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    bind.apply();
    if (*fixed_inducing) flags.trainer["learn_inducing"] = false;

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        cfg.merge(flags);
        if (sim->parsed()) return cmd_simulate(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (eval->parsed()) return cmd_evaluate(cfg, compare);
        if (bench->parsed()) return cmd_bench(cfg);
        if (inspect->parsed()) return cmd_inspect(cfg, inspect_json);
    } catch (const evgp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::Numeric ? kExitNumeric : kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
