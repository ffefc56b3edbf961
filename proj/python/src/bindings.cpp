#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "evgp/bench.hpp"
#include "evgp/errors.hpp"
#include "evgp/io.hpp"

namespace py = pybind11;
using namespace evgp;

namespace {

Dataset make_dataset(const Matrix& x, const Matrix& y, std::vector<std::string> input_names,
                     std::vector<std::string> target_names) {
    Dataset d{x, y, std::move(input_names), std::move(target_names)};
    if (d.input_names.empty())
        for (Eigen::Index j = 0; j < x.cols(); ++j) d.input_names.push_back("x" + std::to_string(j + 1));
    if (d.target_names.empty())
        for (Eigen::Index j = 0; j < y.cols(); ++j) d.target_names.push_back("y_" + std::to_string(j + 1));
    d.validate();
    return d;
}

Dataset simulate(const std::string& system, std::optional<int> trajectories, std::uint64_t seed, double noise_std) {
    const auto spec = SystemSpec::make(system_id_from_string(system));
    auto sampling = SamplingSpec::table1(spec.id);
    if (trajectories) sampling.trajectories = *trajectories;
    sampling.validate(spec);
    return to_regression(spec, sample_dataset(spec, sampling, seed), Vector::Constant(spec.state_dim(), noise_std));
}

ModelFile train(const Dataset& data, const std::string& prior, std::optional<std::string> system,
                std::optional<int> m, int steps, int batch_size, double learning_rate, std::uint64_t seed,
                double dt) {
    const PriorKind kind = prior_kind_from_string(prior);
    FeatureMap map = FeatureMap::zero(static_cast<int>(data.input_dim()), static_cast<int>(data.output_dim()));
    std::optional<SystemId> sys;
    if (system) sys = system_id_from_string(*system);
    if (kind != PriorKind::None) {
        if (!sys) throw ConfigError("prior '" + prior + "' needs a system");
        map = feature_map_for(*sys, kind);
        if (data.input_dim() != map.input_dim || data.output_dim() != map.output_dim)
            throw DimensionMismatch("dataset columns do not match the " + to_string(*sys) + " feature map");
    }
    const BetaPrior beta = default_prior(map, dt);
    TrainConfig tc;
    tc.steps = steps;
    tc.batch_size = static_cast<int>(std::min<Eigen::Index>(batch_size, data.rows()));
    tc.learning_rate = learning_rate;
    tc.seed = seed;
    tc.num_inducing = m ? *m : (sys ? default_inducing(*sys, kind) : tc.num_inducing);
    ModelFile mf;
    {
        py::gil_scoped_release release;
        mf = make_model_file(data, map, beta, fit(data, map, beta, tc).states);
    }
    mf.system = sys ? to_string(*sys) : "";
    mf.prior_kind = to_string(kind);
    mf.train_config = to_json(tc);
    return mf;
}

py::tuple predict_arrays(const ModelFile& model, const Matrix& x, bool with_noise) {
    const auto preds = multi_output_predict(model.states, model.map, x, with_noise);
    Matrix mean(x.rows(), static_cast<Eigen::Index>(preds.size()));
    Matrix var(x.rows(), static_cast<Eigen::Index>(preds.size()));
    for (std::size_t o = 0; o < preds.size(); ++o) {
        mean.col(static_cast<Eigen::Index>(o)) = preds[o].mean;
        var.col(static_cast<Eigen::Index>(o)) = preds[o].var;
    }
    return py::make_tuple(mean, var);
}

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    d["error"] = r.error;
    d["std_norm"] = r.std_norm;
    d["cr1"] = r.cr1;
    d["cr2"] = r.cr2;
    d["cr3"] = r.cr3;
    d["n_eval"] = r.n_eval;
    return d;
}

EvalReport evaluate_arrays(const Matrix& mean, const Matrix& var, const Matrix& y) {
    if (mean.rows() != var.rows() || mean.cols() != var.cols())
        throw DimensionMismatch("mean and var shapes differ");
    std::vector<GaussianPrediction> preds(static_cast<std::size_t>(mean.cols()));
    for (Eigen::Index o = 0; o < mean.cols(); ++o) {
        preds[static_cast<std::size_t>(o)].mean = mean.col(o);
        preds[static_cast<std::size_t>(o)].var = var.col(o);
        preds[static_cast<std::size_t>(o)].includes_observation_noise = true;
    }
    return evaluate(preds, y);
}

}  // namespace

PYBIND11_MODULE(_evgp, m) {
    m.doc() = "Sparse variational GP dynamics models with an explicit physics mean";

    auto base = py::register_exception<Error>(m, "EvgpError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
    py::register_exception<NonFiniteLoss>(m, "NonFiniteLoss", base.ptr());
    py::register_exception<NotPsdWithinJitter>(m, "NotPsdWithinJitter", base.ptr());

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("x"), py::arg("y"), py::arg("input_names") = std::vector<std::string>{},
             py::arg("target_names") = std::vector<std::string>{})
        .def_readonly("x", &Dataset::x)
        .def_readonly("y", &Dataset::y)
        .def_readonly("input_names", &Dataset::input_names)
        .def_readonly("target_names", &Dataset::target_names)
        .def_property_readonly("rows", &Dataset::rows)
        .def("head", &Dataset::head, py::arg("n"))
        .def("schema_hash", &Dataset::schema_hash)
        .def("__len__", &Dataset::rows);

    py::class_<ModelFile>(m, "Model")
        .def_readonly("system", &ModelFile::system)
        .def_readonly("prior_kind", &ModelFile::prior_kind)
        .def_readonly("input_names", &ModelFile::input_names)
        .def_readonly("target_names", &ModelFile::target_names)
        .def_readonly("schema_hash", &ModelFile::schema_hash)
        .def_property_readonly("feature_names", [](const ModelFile& mf) { return feature_names(mf.map); })
        .def("predict", &predict_arrays, py::arg("x"), py::arg("with_noise") = false,
             "Per-output predictive mean and variance, each rows × outputs")
        .def("coefficients", [](const ModelFile& mf) {
            const auto t = coefficient_table(mf);
            return py::make_tuple(t.mean, t.std);
        }, "Learned b (features × outputs) and its posterior std")
        .def("save", [](const ModelFile& mf, const std::filesystem::path& p) { save_model(p, mf); })
        .def("check_dataset", &ModelFile::check_dataset);

    m.def("simulate", &simulate, py::arg("system"), py::arg("trajectories") = py::none(), py::arg("seed") = 0,
          py::arg("noise_std") = kDefaultObservationNoiseStd,
          "Sample trajectories with the collection preset and return (state, control) -> next state pairs");
    m.def("train", &train, py::arg("data"), py::arg("prior") = "ifg", py::arg("system") = py::none(),
          py::arg("m") = py::none(), py::arg("steps") = 2000, py::arg("batch_size") = 256,
          py::arg("learning_rate") = 1e-2, py::arg("seed") = 0, py::arg("dt") = 0.03);
    m.def("load_model", &load_model, py::arg("path"));
    m.def("read_csv", &read_dataset_csv, py::arg("path"));
    m.def("write_csv", &write_dataset_csv, py::arg("path"), py::arg("data"));
    m.def("evaluate", [](const Matrix& mean, const Matrix& var, const Matrix& y) {
        return report_dict(evaluate_arrays(mean, var, y));
    }, py::arg("mean"), py::arg("var"), py::arg("y"), "Error, |STD| and coverage ratios of noisy predictions");
    m.def("features", [](const std::string& system, const std::string& prior, const Matrix& x) {
        return feature_matrix(feature_map_for(system_id_from_string(system), prior_kind_from_string(prior)), x);
    }, py::arg("system"), py::arg("prior"), py::arg("x"));
    m.def("toy_dataset", &toy_dataset, py::arg("n") = 200, py::arg("seed") = 0);
    m.def("step", [](const std::string& system, const Vector& z, const Vector& u, double dt) {
        return step_dynamics(SystemSpec::make(system_id_from_string(system)), z, u, dt);
    }, py::arg("system"), py::arg("z"), py::arg("u"), py::arg("dt"));
}
